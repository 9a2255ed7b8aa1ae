"""
The vulnerability-awareness (VA) knowledge store: records from vulnerability
databases with a TF-IDF index over their texts, queried with path descriptions.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import *
from common.pipelineSupport import PipelineError
from ir_corpus.corpus_types import CWE_RE
from text_index.tfidf import TfIdfIndex, buildIndex, vectorize, cosine, saveIndex, loadIndex
import common.log as log
import common.utils as utils
import os
import shell

STORE_FILE = 'va_store.jsonl'
INDEX_FILE = 'va_index.json'
MAX_GOLDEN = 5

@dataclass(frozen=True)
class KnowledgeRecord:
    source: str
    key: str
    text: str
    cweId: Optional[str] = None
    def __post_init__(self):
        if not self.source or not self.key:
            raise ValueError(f'Knowledge record needs source and key: {self.source!r}/{self.key!r}')
        if not self.text.strip():
            raise ValueError(f'Knowledge record {self.source}/{self.key} has no text')
        if self.cweId is not None and CWE_RE.match(self.cweId) is None:
            raise PipelineError('InvalidCweId', f'{self.source}/{self.key}: {self.cweId}')
    def toJson(self) -> dict[str, Any]:
        return {'source': self.source, 'key': self.key, 'text': self.text, 'cwe_id': self.cweId}
    @staticmethod
    def fromJson(d: dict[str, Any]) -> KnowledgeRecord:
        cwe = d.get('cwe_id')
        return KnowledgeRecord(str(d['source']), str(d['key']), str(d['text']),
                               None if cwe in (None, '') else str(cwe))

@dataclass(frozen=True)
class GoldenHit:
    record: KnowledgeRecord
    similarity: float

@dataclass(frozen=True)
class KnowledgeStore:
    records: tuple[KnowledgeRecord, ...]
    index: Optional[TfIdfIndex]
    def __len__(self) -> int:
        return len(self.records)

EMPTY_STORE = KnowledgeStore((), None)

def ingest(records: Iterable[KnowledgeRecord]) -> KnowledgeStore:
    recs = tuple(records)
    seen: set[tuple[str, str]] = set()
    for r in recs:
        k = (r.source, r.key)
        if k in seen:
            raise PipelineError('DuplicateKey', f'knowledge record {r.source}/{r.key} occurs twice')
        seen.add(k)
    if not recs:
        log.warn('VA knowledge store is empty, corrections will be skipped')
        return EMPTY_STORE
    index = buildIndex([r.text for r in recs])
    log.info(f'VA knowledge store: {len(recs)} records, {len(index.vocabulary)} terms')
    return KnowledgeStore(recs, index)

def retrieveGolden(store: KnowledgeStore, pathText: str, thetaSim: float) -> list[GoldenHit]:
    """
    Returns the records whose similarity with pathText is strictly above thetaSim,
    most similar first (ties by key).
    """
    if store.index is None:
        return []
    q = vectorize(store.index, pathText)
    hits: list[GoldenHit] = []
    for r in store.records:
        sim = cosine(q, vectorize(store.index, r.text))
        if sim > thetaSim:
            hits.append(GoldenHit(r, sim))
    hits.sort(key=lambda h: (-h.similarity, h.record.key, h.record.source))
    return hits

def saveStore(store: KnowledgeStore, dbDir: str):
    shell.mkdirs(dbDir)
    utils.writeJsonl(shell.pjoin(dbDir, STORE_FILE), [r.toJson() for r in store.records])
    indexPath = shell.pjoin(dbDir, INDEX_FILE)
    if store.index is not None:
        saveIndex(store.index, indexPath)
    elif shell.isFile(indexPath):
        os.remove(indexPath)

def loadStore(dbDir: str) -> KnowledgeStore:
    p = shell.pjoin(dbDir, STORE_FILE)
    if not shell.isFile(p):
        return EMPTY_STORE
    recs = tuple(KnowledgeRecord.fromJson(d) for d in utils.readJsonl(p))
    if not recs:
        return EMPTY_STORE
    indexPath = shell.pjoin(dbDir, INDEX_FILE)
    if shell.isFile(indexPath):
        index = loadIndex(indexPath)
        if index.nDocs == len(recs):
            return KnowledgeStore(recs, index)
        log.warn(f'Stale VA index in {dbDir}, rebuilding')
    return ingest(recs)
