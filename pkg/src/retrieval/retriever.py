"""
Retrieval of the stored reasoning graphs relevant for a target IR.
"""
from __future__ import annotations
from collections import OrderedDict
from dataclasses import dataclass
from typing import *
from common.constants import SEED_STAGE_RETRIEVE
from common.pipelineSupport import PipelineError
from common.seeds import stageSeedSequence
from ir_corpus.corpus_types import CanonicalIR
from reasoning_graph.graph_types import ReasoningGraph
from retrieval.pruning import ReservedGraph, pruneForTarget, unpruned
from text_index.tfidf import buildIndex, vectorize, cosine
from tool_adapters.tools import ToolBox, flattenIr
import common.log as log
import common.utils as utils
import threading

type PruningMode = Literal['random_walk', 'none']

CACHED_TARGETS = 16

@dataclass(frozen=True)
class RetrievalConfig:
    thetaSim: float = 0.7
    walks: int = 4
    pruning: PruningMode = 'random_walk'
    seed: int = 17
    def validate(self):
        if not 0.0 <= self.thetaSim <= 1.0:
            raise PipelineError.configError(f'theta_sim must be in [0,1], got {self.thetaSim}')
        if self.walks < 1:
            raise PipelineError.configError(f'retrieval.walks must be at least 1, got {self.walks}')
        if self.pruning not in ('random_walk', 'none'):
            raise PipelineError.configError(f'Unknown pruning mode {self.pruning}')

@dataclass(frozen=True)
class RetrievedGraph:
    reserved: ReservedGraph
    similarity: float
    def toJson(self) -> dict[str, Any]:
        return {'ir_id': self.reserved.originIr, 'similarity': self.similarity,
                'description': self.reserved.description}

def targetText(target: CanonicalIR, tools: ToolBox) -> str:
    return target.title + '\n' + flattenIr(target, tools)

def selectRelevant(reserved: list[ReservedGraph], text: str, thetaSim: float) -> list[RetrievedGraph]:
    """
    Keeps the graphs whose description is strictly more similar to text than
    thetaSim, most similar first (ties by IR id).
    """
    index = buildIndex([r.description for r in reserved] + [text])
    q = vectorize(index, text)
    hits: list[RetrievedGraph] = []
    for r in reserved:
        sim = cosine(q, vectorize(index, r.description))
        if sim > thetaSim:
            hits.append(RetrievedGraph(r, sim))
    hits.sort(key=lambda h: (-h.similarity, h.reserved.originIr))
    return hits

class RelevantGraphRetriever:
    """
    Prunes every stored graph for the target and selects the relevant ones. Pruned
    graphs are cached per target (text and run) for the most recent cachedTargets
    targets.
    """
    def __init__(self, graphs: list[ReasoningGraph], tools: ToolBox, cfg: RetrievalConfig,
                 cachedTargets: int = CACHED_TARGETS):
        cfg.validate()
        self.graphs = sorted(graphs, key=lambda g: g.irId)
        self.tools = tools
        self.cfg = cfg
        self.cachedTargets = cachedTargets
        self.__cache: OrderedDict[tuple[str, int], dict[str, ReservedGraph]] = OrderedDict()
        self.__lock = threading.Lock()
    def __targetCache(self, text: str, run: int) -> dict[str, ReservedGraph]:
        key = (utils.sha256Hex(text), run)
        with self.__lock:
            entry = self.__cache.get(key)
            if entry is None:
                entry = self.__cache[key] = {}
                while len(self.__cache) > self.cachedTargets:
                    self.__cache.popitem(last=False)
            else:
                self.__cache.move_to_end(key)
            return entry
    def cacheSize(self) -> int:
        with self.__lock:
            return len(self.__cache)
    def __reserve(self, g: ReasoningGraph, text: str, run: int,
                  cache: dict[str, ReservedGraph]) -> ReservedGraph:
        if self.cfg.pruning == 'none':
            return unpruned(g)
        with self.__lock:
            hit = cache.get(g.irId)
        if hit is not None:
            return hit
        ss = stageSeedSequence(self.cfg.seed, SEED_STAGE_RETRIEVE, g.irId, run)
        r = pruneForTarget(g, text, self.cfg.walks, ss)
        with self.__lock:
            cache[g.irId] = r
        return r
    def retrieve(self, target: CanonicalIR, run: int = 0) -> list[RetrievedGraph]:
        if not self.graphs:
            raise PipelineError('EmptyDatabase', 'the reasoning database holds no graphs')
        text = targetText(target, self.tools)
        cache = self.__targetCache(text, run)
        reserved = [self.__reserve(g, text, run, cache) for g in self.graphs]
        hits = selectRelevant(reserved, text, self.cfg.thetaSim)
        log.info(f'{target.id}: {len(hits)} of {len(reserved)} graphs relevant')
        return hits

def retrieveRelevant(graphs: list[ReasoningGraph], target: CanonicalIR, tools: ToolBox,
                     cfg: RetrievalConfig, run: int = 0) -> list[RetrievedGraph]:
    return RelevantGraphRetriever(graphs, tools, cfg).retrieve(target, run)
