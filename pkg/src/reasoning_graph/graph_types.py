"""
The reasoning graph: observations (nodes) connected by actions (edges). Node ids follow
the convention O1, O<level>.<branch>; action ids A<level>.<n>.
"""
from __future__ import annotations
from dataclasses import dataclass, replace
from typing import *
from common.constants import ToolName, ALL_TOOLS, GRAPH_SCHEMA_VERSION
from common.graph import Graph
from common.pipelineSupport import PipelineError
import re

ROOT_ID = 'O1'

type VerdictKind = Literal['Undecided', 'Vul', 'NotVul']

@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    cwe: Optional[str] = None
    def isDecided(self) -> bool:
        return self.kind != 'Undecided'
    def describe(self) -> str:
        match self.kind:
            case 'Vul':
                return f'vulnerability identified: yes {self.cwe or "unknown CWE"}'
            case 'NotVul':
                return 'vulnerability identified: no'
            case 'Undecided':
                return 'vulnerability identified: undecided'
    def toJson(self) -> dict[str, Any]:
        return {'kind': self.kind, 'cwe': self.cwe}
    @staticmethod
    def fromJson(d: dict[str, Any]) -> Verdict:
        kind = d['kind']
        if kind not in ('Undecided', 'Vul', 'NotVul'):
            raise ValueError(f'Invalid verdict kind: {kind}')
        return Verdict(kind, d.get('cwe'))

UNDECIDED = Verdict('Undecided')

_NODE_ID_RE = re.compile(r'^O([1-9][0-9]*)(?:\.([1-9][0-9]*))?$')
_ACTION_ID_RE = re.compile(r'^A([1-9][0-9]*)(?:\.([1-9][0-9]*))?$')

def idKey(ident: str) -> tuple[int, ...]:
    """
    Sort key of a node or action id: its numeric components.
    """
    m = _NODE_ID_RE.match(ident) or _ACTION_ID_RE.match(ident)
    if m is None:
        raise ValueError(f'Invalid node or action id: {ident}')
    return tuple(int(x) for x in m.groups() if x is not None)

def nodeLevel(ident: str) -> int:
    return idKey(ident)[0]

def mkNodeId(level: int, branch: int) -> str:
    return ROOT_ID if level == 1 else f'O{level}.{branch}'

def mkActionId(level: int, n: int) -> str:
    return f'A{level}.{n}'

@dataclass(frozen=True)
class Observation:
    id: str
    text: str
    focusTags: tuple[str, ...] = ()
    verdict: Verdict = UNDECIDED
    def toJson(self) -> dict[str, Any]:
        return {'id': self.id, 'text': self.text, 'focus_tags': list(self.focusTags),
                'verdict': self.verdict.toJson()}
    @staticmethod
    def fromJson(d: dict[str, Any]) -> Observation:
        return Observation(str(d['id']), str(d['text']), tuple(d.get('focus_tags') or []),
                           Verdict.fromJson(d['verdict']))

@dataclass(frozen=True)
class Action:
    id: str
    src: str
    tgt: str
    tool: ToolName
    argument: str = ''
    def quadruple(self) -> tuple[str, str, str, str]:
        return (self.src, self.tgt, self.tool, self.argument)
    def render(self) -> str:
        return f'{self.tool}({self.argument})'
    def toJson(self) -> dict[str, Any]:
        return {'id': self.id, 'from': self.src, 'to': self.tgt, 'tool': self.tool,
                'argument': self.argument}
    @staticmethod
    def fromJson(d: dict[str, Any]) -> Action:
        tool = d['tool']
        if tool not in ALL_TOOLS:
            raise ValueError(f'Invalid tool: {tool}')
        return Action(str(d['id']), str(d['from']), str(d['to']), tool, str(d.get('argument') or ''))

type PathStep = Observation | Action

@dataclass(frozen=True)
class Path:
    """
    Alternating sequence O1, A, O, ..., O.
    """
    steps: tuple[PathStep, ...]
    @property
    def nodes(self) -> list[Observation]:
        return [s for s in self.steps if isinstance(s, Observation)]
    @property
    def actions(self) -> list[Action]:
        return [s for s in self.steps if isinstance(s, Action)]
    @property
    def last(self) -> Observation:
        x = self.steps[-1]
        assert isinstance(x, Observation)
        return x
    def sortKey(self) -> tuple[tuple[tuple[int, ...], ...], tuple[tuple[int, ...], ...]]:
        return (tuple(idKey(o.id) for o in self.nodes), tuple(idKey(a.id) for a in self.actions))
    def extend(self, a: Action, o: Observation) -> Path:
        return Path(self.steps + (a, o))
    def ids(self) -> list[str]:
        return [s.id for s in self.steps]

class ReasoningGraph:
    """
    A rooted DAG of observations and actions. Parallel actions between the same pair
    of observations are allowed as long as tool or argument differ.
    """
    def __init__(self, irId: str):
        self.irId = irId
        self.partial = False
        self.flags: list[str] = []
        self.__g: Graph[str, Observation] = Graph()
        self.__actions: dict[str, Action] = {}
        self.__quadruples: set[tuple[str, str, str, str]] = set()
        self.__out: dict[str, list[str]] = {}
        self.__in: dict[str, list[str]] = {}
    def __repr__(self):
        return f'ReasoningGraph({self.irId}, nodes={self.nodeIds}, actions={list(self.__actions)})'
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ReasoningGraph):
            return False
        return self.toJson() == other.toJson()
    def addObservation(self, obs: Observation) -> ReasoningGraph:
        if self.__g.hasVertex(obs.id):
            raise PipelineError('DuplicateId', f'observation {obs.id} already in graph {self.irId}')
        idKey(obs.id)
        self.__g.addVertex(obs.id, obs)
        self.__out[obs.id] = []
        self.__in[obs.id] = []
        return self
    def addAction(self, act: Action) -> ReasoningGraph:
        if act.id in self.__actions:
            raise PipelineError('DuplicateId', f'action {act.id} already in graph {self.irId}')
        if act.quadruple() in self.__quadruples:
            raise PipelineError('DuplicateId', f'action {act.render()} from {act.src} to {act.tgt} '
                                f'already in graph {self.irId}')
        for v in [act.src, act.tgt]:
            if not self.__g.hasVertex(v):
                raise PipelineError('DanglingEndpoint', f'action {act.id} refers to unknown '
                                    f'observation {v}')
        if act.src == act.tgt or self.__g.hasPath(act.tgt, act.src):
            raise PipelineError('CycleIntroduced', f'action {act.id} from {act.src} to {act.tgt} '
                                'closes a cycle')
        self.__g.addEdge(act.src, act.tgt)
        self.__actions[act.id] = act
        self.__quadruples.add(act.quadruple())
        self.__out[act.src].append(act.id)
        self.__in[act.tgt].append(act.id)
        return self
    def hasObservation(self, ident: str) -> bool:
        return self.__g.hasVertex(ident)
    def observation(self, ident: str) -> Observation:
        return self.__g.getData(ident)
    def replaceObservation(self, obs: Observation):
        """
        Replaces text and verdict of an existing observation; the structure is unchanged.
        """
        old = self.observation(obs.id)
        if obs.verdict.isDecided() and self.__out[obs.id]:
            raise ValueError(f'{obs.id} has outgoing actions and cannot carry a verdict')
        self.__g.setData(obs.id, replace(obs, focusTags=old.focusTags))
    def action(self, ident: str) -> Action:
        return self.__actions[ident]
    def hasAction(self, ident: str) -> bool:
        return ident in self.__actions
    @property
    def nodeIds(self) -> list[str]:
        return list(self.__g.vertices)
    @property
    def observations(self) -> list[Observation]:
        return list(self.__g.values)
    @property
    def actions(self) -> list[Action]:
        return list(self.__actions.values())
    @property
    def root(self) -> Observation:
        return self.observation(ROOT_ID)
    def outActions(self, ident: str) -> list[Action]:
        return [self.__actions[a] for a in self.__out[ident]]
    def inActions(self, ident: str) -> list[Action]:
        return [self.__actions[a] for a in self.__in[ident]]
    def succs(self, ident: str) -> list[str]:
        return self.__g.succs(ident)
    def degree(self, ident: str) -> int:
        """
        Total degree, counting parallel actions.
        """
        return len(self.__out[ident]) + len(self.__in[ident])
    def isSink(self, ident: str) -> bool:
        return not self.__out[ident]
    def isAncestor(self, anc: str, ident: str) -> bool:
        return self.__g.hasPath(anc, ident)
    def nodesAtLevel(self, level: int) -> int:
        return len([v for v in self.__g.vertices if nodeLevel(v) == level])
    def validate(self):
        """
        Checks the graph invariants: rooted at O1, every observation reachable, decided
        verdicts only on sinks, terminator targets are sinks.
        """
        if not self.__g.hasVertex(ROOT_ID):
            raise ValueError(f'Graph {self.irId} has no root {ROOT_ID}')
        unreachable = set(self.__g.vertices) - self.__g.reachable(ROOT_ID)
        if unreachable:
            raise ValueError(f'Graph {self.irId}: unreachable observations {sorted(unreachable)}')
        for o in self.observations:
            if o.verdict.isDecided() and not self.isSink(o.id):
                raise ValueError(f'Graph {self.irId}: {o.id} has a verdict and outgoing actions')
        for a in self.actions:
            if a.tool == 'AgentTerminator' and not self.isSink(a.tgt):
                raise ValueError(f'Graph {self.irId}: terminator {a.id} targets non-sink {a.tgt}')
    def subgraph(self, nodeIds: Iterable[str], actionIds: Iterable[str]) -> ReasoningGraph:
        """
        Returns the graph restricted to the given observations and actions, keeping the
        original insertion order and ids.
        """
        keepNodes = set(nodeIds)
        keepActions = set(actionIds)
        sub = ReasoningGraph(self.irId)
        for o in self.observations:
            if o.id in keepNodes:
                sub.addObservation(o)
        for a in self.actions:
            if a.id in keepActions:
                sub.addAction(a)
        return sub
    def toJson(self) -> dict[str, Any]:
        return {
            'schema': GRAPH_SCHEMA_VERSION,
            'ir_id': self.irId,
            'partial': self.partial,
            'flags': list(self.flags),
            'nodes': [o.toJson() for o in self.observations],
            'edges': [a.toJson() for a in self.actions]
        }
    @staticmethod
    def fromJson(d: dict[str, Any]) -> ReasoningGraph:
        if d.get('schema') != GRAPH_SCHEMA_VERSION:
            raise ValueError(f'Unsupported graph schema: {d.get("schema")}')
        g = ReasoningGraph(str(d['ir_id']))
        g.partial = bool(d.get('partial', False))
        g.flags = [str(f) for f in d.get('flags') or []]
        for n in d['nodes']:
            g.addObservation(Observation.fromJson(n))
        for e in d['edges']:
            g.addAction(Action.fromJson(e))
        return g
