from typing import *
from reasoning_graph.graph_types import *

def isTerminatedAt(g: ReasoningGraph, last: Action | None, nodeId: str) -> bool:
    if not g.isSink(nodeId):
        return False
    if last is not None and last.tool == 'AgentTerminator':
        return True
    return g.observation(nodeId).verdict.isDecided()

def allRootPaths(g: ReasoningGraph) -> list[Path]:
    """
    Enumerates all paths from O1 to a sink.
    """
    if not g.hasObservation(ROOT_ID):
        return []
    res: list[Path] = []
    todo: list[Path] = [Path((g.root,))]
    while todo:
        p = todo.pop()
        acts = g.outActions(p.last.id)
        if not acts:
            res.append(p)
        for a in acts:
            todo.append(p.extend(a, g.observation(a.tgt)))
    return res

def extractTerminatedPaths(g: ReasoningGraph) -> list[Path]:
    """
    Returns all root-to-sink paths that end in termination, sorted by the numeric
    components of their node ids and then of their action ids.
    """
    res: list[Path] = []
    for p in allRootPaths(g):
        acts = p.actions
        last = acts[-1] if acts else None
        if isTerminatedAt(g, last, p.last.id):
            res.append(p)
    return sorted(res, key=lambda p: p.sortKey())

def describePath(p: Path) -> str:
    nodes = p.nodes
    hops: list[str] = []
    steps = p.steps
    for i in range(1, len(steps), 2):
        src = steps[i - 1]
        act = steps[i]
        tgt = steps[i + 1]
        hops.append(f'from the observation {src.id}, we ask LLM to take the action {act.id}, '
                    f'and the next operation is {tgt.id}')
    if not hops:
        return nodes[0].text
    return '; '.join(hops) + ' ' + ' '.join(f'({o.text})' for o in nodes)

def describeGraph(g: ReasoningGraph) -> str:
    return '\n'.join(describePath(p) for p in extractTerminatedPaths(g))
