"""
Prunes a reasoning graph to the parts relevant for a target IR.

Edge weights are the increase of TF-IDF similarity with the target that the successor's
text brings; GraphSaint-style edge probabilities turn them into transition
probabilities for seeded random walks.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import *
from common.pipelineSupport import PipelineError
from reasoning_graph.graph_paths import describeGraph
from reasoning_graph.graph_types import *
from text_index.tfidf import TfIdfIndex, buildIndex, similarity
import common.log as log
import numpy as np

EPSILON = 1e-6

@dataclass(frozen=True)
class AdjacencyMatrix:
    nodeIds: list[str]
    weights: np.ndarray
    def pos(self, nodeId: str) -> int:
        return self.nodeIds.index(nodeId)
    def weight(self, src: str, tgt: str) -> float:
        return float(self.weights[self.pos(src), self.pos(tgt)])

# node -> successor -> probability
type EdgeProbabilities = dict[str, dict[str, float]]

@dataclass(frozen=True)
class ReservedGraph:
    graph: ReasoningGraph
    originIr: str
    description: str

def nodeIndex(g: ReasoningGraph, targetText: str) -> TfIdfIndex:
    return buildIndex([targetText] + [o.text for o in g.observations])

def buildAdjacency(g: ReasoningGraph, targetText: str, index: TfIdfIndex) -> AdjacencyMatrix:
    ids = g.nodeIds
    pos = {v: i for i, v in enumerate(ids)}
    m = np.zeros((len(ids), len(ids)), dtype=np.float64)
    for i, src in enumerate(ids):
        srcText = g.observation(src).text
        base = similarity(index, targetText, srcText)
        for tgt in g.succs(src):
            joined = srcText + ' ' + g.observation(tgt).text
            inc = similarity(index, targetText, joined) - base
            m[i, pos[tgt]] = max(0.0, inc) + EPSILON
    return AdjacencyMatrix(ids, m)

def edgeProbabilities(m: AdjacencyMatrix, g: ReasoningGraph) -> EdgeProbabilities:
    """
    raw(i,j) = M[i][j] * (1/deg(i) + 1/deg(j)) with deg the total degree in g
    (parallel actions counted), normalized over the distinct successors of i.
    """
    if m.nodeIds != g.nodeIds:
        raise ValueError(f'Adjacency matrix does not belong to graph {g.irId}')
    res: EdgeProbabilities = {}
    for i, src in enumerate(m.nodeIds):
        succs = g.succs(src)
        if not succs:
            res[src] = {}
            continue
        raw: dict[str, float] = {}
        for tgt in succs:
            w = float(m.weights[i, m.pos(tgt)])
            raw[tgt] = w * (1.0 / g.degree(src) + 1.0 / g.degree(tgt))
        total = sum(raw.values())
        if total <= 0.0:
            raise PipelineError('IsolatedNonTerminal', f'{g.irId}: {src} has successors but no '
                                'probability mass')
        res[src] = {t: r / total for t, r in raw.items()}
    return res

def _walkSeeds(seed: int | np.random.SeedSequence, walks: int) -> list[np.random.SeedSequence]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(walks)

def randomWalkPrune(g: ReasoningGraph, p: EdgeProbabilities, walks: int,
                    seed: int | np.random.SeedSequence) -> ReasoningGraph:
    """
    O1 and its children start out visited. Every walk starts at a visited node with
    unvisited successors and moves to unvisited successors until it takes a
    terminator, reaches a sink or gets stuck. Afterwards every reserved node without a
    reserved outgoing action gets its most probable terminator action from g.
    Ids are kept.
    """
    if walks < 1:
        raise ValueError(f'walks must be at least 1, got {walks}')
    visited: list[str] = [ROOT_ID]
    visitedSet = {ROOT_ID}
    reserved: list[str] = []
    def reserve(a: Action):
        if a.id not in reserved:
            reserved.append(a.id)
        if a.tgt not in visitedSet:
            visitedSet.add(a.tgt)
            visited.append(a.tgt)
    for a in g.outActions(ROOT_ID):
        reserve(a)
    for w, ss in enumerate(_walkSeeds(seed, walks)):
        rng = np.random.default_rng(ss)
        starts = [v for v in visited if any(s not in visitedSet for s in g.succs(v))]
        if not starts:
            log.debug(f'{g.irId}: nothing left to explore after {w} walks')
            break
        cur = starts[int(rng.integers(len(starts)))]
        while True:
            cands = [s for s in g.succs(cur) if s not in visitedSet]
            if not cands:
                break
            probs = np.array([p[cur][s] for s in cands], dtype=np.float64)
            nxt = cands[int(rng.choice(len(cands), p=probs / probs.sum()))]
            act = min((a for a in g.outActions(cur) if a.tgt == nxt), key=lambda a: idKey(a.id))
            reserve(act)
            if act.tool == 'AgentTerminator' or g.isSink(nxt):
                break
            cur = nxt
    for v in list(visited):
        if any(a.id in reserved for a in g.outActions(v)):
            continue
        terms = [a for a in g.outActions(v) if a.tool == 'AgentTerminator']
        if terms:
            best = sorted(terms, key=lambda a: (-p[v].get(a.tgt, 0.0), idKey(a.id)))[0]
            reserve(best)
    return g.subgraph(visited, reserved)

def pruneForTarget(g: ReasoningGraph, targetText: str, walks: int,
                   seed: int | np.random.SeedSequence) -> ReservedGraph:
    if not g.hasObservation(ROOT_ID):
        return ReservedGraph(g, g.irId, '')
    m = buildAdjacency(g, targetText, nodeIndex(g, targetText))
    pruned = randomWalkPrune(g, edgeProbabilities(m, g), walks, seed)
    return ReservedGraph(pruned, g.irId, describeGraph(pruned))

def unpruned(g: ReasoningGraph) -> ReservedGraph:
    return ReservedGraph(g, g.irId, describeGraph(g))
