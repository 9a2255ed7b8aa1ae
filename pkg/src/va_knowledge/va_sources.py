"""
Loaders for the exports of the vulnerability databases the VA store is built from.
Every export is a JSON lines file; a field map says where key, text and CWE are found.
"""
from dataclasses import dataclass
from typing import *
from common.pipelineSupport import PipelineError
from va_knowledge.va_store import KnowledgeRecord
import common.log as log
import common.utils as utils
import re

type SourceFormat = Literal['jsonl', 'cwe', 'bigvul', 'debian', 'vdisc', 'd2a']

@dataclass(frozen=True)
class FieldMap:
    source: str
    key: str
    text: list[str]
    cwe: Optional[str]

FIELD_MAPS: dict[SourceFormat, FieldMap] = {
    'cwe': FieldMap('cwe', 'ID', ['Name', 'Description', 'Extended Description'], 'ID'),
    'bigvul': FieldMap('bigvul', 'CVE ID', ['Summary', 'commit_message'], 'CWE ID'),
    'debian': FieldMap('debian', 'bug_id', ['subject', 'description'], 'cwe'),
    'vdisc': FieldMap('vdisc', 'id', ['functionSource'], 'cwe'),
    'd2a': FieldMap('d2a', 'id', ['bug_type', 'trace', 'function'], 'cwe')
}

@dataclass(frozen=True)
class VaSource:
    path: str
    format: SourceFormat = 'jsonl'

@dataclass(frozen=True)
class VaSettings:
    sources: tuple[VaSource, ...] = ()

_CWE_NUM_RE = re.compile(r'(?:CWE-)?([0-9]+)', re.I)

def normalizeCwe(x: Any) -> Optional[str]:
    """
    Accepts "CWE-79", "cwe-79", "79" or 79; anything else (e.g. "NVD-CWE-Other") gives None.
    """
    if x is None:
        return None
    m = _CWE_NUM_RE.fullmatch(str(x).strip())
    if m is None:
        return None
    return f'CWE-{int(m.group(1))}'

def _text(d: dict[str, Any], fields: list[str]) -> str:
    parts: list[str] = []
    for f in fields:
        v = d.get(f)
        if isinstance(v, list):
            parts.extend(str(x) for x in cast(list[Any], v))
        elif v not in (None, ''):
            parts.append(str(v))
    return ' '.join(parts).strip()

def recordsFromRows(rows: list[dict[str, Any]], fmt: SourceFormat, origin: str = '<rows>') -> list[KnowledgeRecord]:
    if fmt == 'jsonl':
        return [KnowledgeRecord.fromJson(d) for d in rows]
    fm = FIELD_MAPS[fmt]
    res: list[KnowledgeRecord] = []
    skipped = 0
    for i, d in enumerate(rows):
        key = d.get(fm.key)
        text = _text(d, fm.text)
        if key in (None, '') or not text:
            skipped += 1
            continue
        cwe = normalizeCwe(d.get(fm.cwe)) if fm.cwe else None
        if fmt == 'cwe':
            key = cwe or str(key)
        res.append(KnowledgeRecord(fm.source, str(key), text, cwe))
        log.debug(f'{origin}:{i + 1}: {fm.source}/{key}')
    if skipped:
        log.warn(f'{origin}: skipped {skipped} {fmt} rows without key or text')
    return res

def loadSource(src: VaSource) -> list[KnowledgeRecord]:
    if src.format != 'jsonl' and src.format not in FIELD_MAPS:
        raise PipelineError.configError(f'Unknown VA source format {src.format}')
    recs = recordsFromRows(utils.readJsonl(src.path), src.format, src.path)
    log.info(f'Loaded {len(recs)} {src.format} records from {src.path}')
    return recs

def loadSources(settings: VaSettings) -> list[KnowledgeRecord]:
    return utils.flatten(loadSource(s) for s in settings.sources)
