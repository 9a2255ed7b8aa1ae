"""
TF-IDF term statistics and the cosine similarity used by all retrieval steps.

Tokenization and document-frequency counting are done by scikit-learn's
CountVectorizer; weights and cosine are computed here so that similarity is exactly
symmetric.
"""
from __future__ import annotations
from collections import Counter
from dataclasses import dataclass, field
from typing import *
from sklearn.feature_extraction.text import CountVectorizer
from common.pipelineSupport import PipelineError
from text_index.stopwords import STOPWORDS_ID, STOPWORD_LISTS
import common.log as log
import common.utils as utils
import json
import math
import numpy as np

# lowercase alphanumeric runs, hyphens allowed inside a token
TOKEN_PATTERN = r'[0-9a-z]+(?:-[0-9a-z]+)*'
INDEX_FORMAT = 'tfidf-index'
INDEX_VERSION = 1

@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    tokenPattern: str = TOKEN_PATTERN
    stopwords: str = STOPWORDS_ID
    def toJson(self) -> dict[str, Any]:
        return {'lowercase': self.lowercase, 'token_pattern': self.tokenPattern,
                'stopwords': self.stopwords}
    @staticmethod
    def fromJson(d: dict[str, Any]) -> TokenizerConfig:
        return TokenizerConfig(bool(d['lowercase']), str(d['token_pattern']),
                               str(d['stopwords']))

def _mkVectorizer(cfg: TokenizerConfig) -> CountVectorizer:
    if cfg.stopwords not in STOPWORD_LISTS:
        raise PipelineError.configError(f'Unknown stopword list: {cfg.stopwords}')
    stop = list(STOPWORD_LISTS[cfg.stopwords])
    return CountVectorizer(lowercase=cfg.lowercase, token_pattern=cfg.tokenPattern,
                           stop_words=stop or None)

type TermVector = dict[int, float]

@dataclass(frozen=True)
class TfIdfIndex:
    vocabulary: dict[str, int]
    docFreq: dict[str, int]
    nDocs: int
    tokenizerConfig: TokenizerConfig
    _analyzer: Callable[[str], list[str]] = field(init=False, repr=False, compare=False)
    _idf: dict[int, float] = field(init=False, repr=False, compare=False)
    def __post_init__(self):
        object.__setattr__(self, '_analyzer',
                           cast(Callable[[str], list[str]],
                                _mkVectorizer(self.tokenizerConfig).build_analyzer()))
        idf: dict[int, float] = {}
        for t, i in self.vocabulary.items():
            idf[i] = math.log((1 + self.nDocs) / (1 + self.docFreq[t])) + 1.0
        object.__setattr__(self, '_idf', idf)
    def tokenize(self, text: str) -> list[str]:
        return self._analyzer(text)
    def idf(self, term: str) -> float:
        return self._idf[self.vocabulary[term]]

def buildIndex(docs: list[str], cfg: TokenizerConfig = TokenizerConfig()) -> TfIdfIndex:
    """
    Builds the term statistics over docs. idf(t) = ln((1+n)/(1+df(t))) + 1.
    """
    if not docs:
        raise PipelineError('EmptyCorpus', 'cannot build a TF-IDF index without documents')
    vec = _mkVectorizer(cfg)
    try:
        counts = vec.fit_transform(docs)
    except ValueError:
        # all documents empty or stopwords only
        log.debug(f'Empty vocabulary for {len(docs)} documents')
        return TfIdfIndex({}, {}, len(docs), cfg)
    df = np.asarray((counts > 0).sum(axis=0)).ravel()
    vocab = {str(t): int(i) for t, i in sorted(vec.vocabulary_.items(), key=lambda x: x[1])}
    docFreq = {t: int(df[i]) for t, i in vocab.items()}
    return TfIdfIndex(vocab, docFreq, len(docs), cfg)

def vectorize(index: TfIdfIndex, text: str) -> TermVector:
    """
    weight(t) = tf(t, text) * idf(t); terms unknown to the index are dropped.
    """
    tf = Counter(t for t in index.tokenize(text) if t in index.vocabulary)
    res: TermVector = {}
    for t, n in sorted(tf.items()):
        i = index.vocabulary[t]
        res[i] = n * index.idf(t)
    return res

def cosine(a: TermVector, b: TermVector) -> float:
    if not a or not b:
        return 0.0
    common = sorted(a.keys() & b.keys())
    if not common:
        return 0.0
    dot = math.fsum(a[k] * b[k] for k in common)
    normA = math.sqrt(math.fsum(w * w for w in a.values()))
    normB = math.sqrt(math.fsum(w * w for w in b.values()))
    if normA == 0.0 or normB == 0.0:
        return 0.0
    return min(1.0, max(0.0, dot / (normA * normB)))

def similarity(index: TfIdfIndex, a: str, b: str) -> float:
    return cosine(vectorize(index, a), vectorize(index, b))

def similarities(index: TfIdfIndex, query: str, docs: Iterable[str]) -> list[float]:
    q = vectorize(index, query)
    return [cosine(q, vectorize(index, d)) for d in docs]

def indexToJson(index: TfIdfIndex) -> dict[str, Any]:
    terms = sorted(index.vocabulary.items(), key=lambda x: x[1])
    return {
        'format': INDEX_FORMAT,
        'version': INDEX_VERSION,
        'n_docs': index.nDocs,
        'tokenizer': index.tokenizerConfig.toJson(),
        'terms': [t for t, _ in terms],
        'doc_freq': [index.docFreq[t] for t, _ in terms]
    }

def indexFromJson(d: dict[str, Any]) -> TfIdfIndex:
    if d.get('format') != INDEX_FORMAT or d.get('version') != INDEX_VERSION:
        raise ValueError(f'Unsupported index header: {d.get("format")} {d.get("version")}')
    terms = [str(t) for t in d['terms']]
    dfs = [int(x) for x in d['doc_freq']]
    if len(terms) != len(dfs):
        raise ValueError('Term table and df table have different lengths')
    vocab = {t: i for i, t in enumerate(terms)}
    return TfIdfIndex(vocab, dict(zip(terms, dfs)), int(d['n_docs']),
                      TokenizerConfig.fromJson(d['tokenizer']))

def saveIndex(index: TfIdfIndex, path: str):
    utils.writeTextFileAtomic(path, utils.dumpJson(indexToJson(index)))

def loadIndex(path: str) -> TfIdfIndex:
    return indexFromJson(json.loads(utils.readTextFile(path)))
