"""
The agent loop that turns a historical IR into a reasoning graph.

The loop is breadth first. Every pending (observation, tool call) pair is expanded by
running the tool and asking the LLM for the next step with the path to the observation
as context. An answer yields one observation plus the actions proposed from it.
"""
from __future__ import annotations
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import *
from common.constants import *
from common.pipelineSupport import PipelineError
from common.seeds import requestSeed
from ir_corpus.corpus_types import CanonicalIR, tagKind
from llm_gateway.gateway import LlmGateway
from reasoner.prompts import buildReasonPrompt, buildCorrectionPrompt
from reasoner.step_parser import StepParse, ToolCall, parseStep, parseCorrection, firstCwe
from reasoning_graph.graph_paths import extractTerminatedPaths, describePath
from reasoning_graph.graph_store import ReasoningDb, DbManifest
from reasoning_graph.graph_types import *
from tool_adapters.tools import ToolBox, ToolResult
from va_knowledge.va_store import KnowledgeStore, retrieveGolden
import common.log as log

@dataclass(frozen=True)
class ReasonerConfig:
    maxDepth: int = 6
    maxNodes: int = 24
    branchLimit: int = 4
    correctionEnabled: bool = True
    thetaSim: float = 0.7
    inclusionOrder: bool = True
    kinds: tuple[RichTextKind, ...] = tuple(ALL_KINDS)
    temperature: Optional[float] = None
    seed: int = 17
    def validate(self):
        for name, v in [('max_depth', self.maxDepth), ('max_nodes', self.maxNodes),
                        ('branch_limit', self.branchLimit)]:
            if v < 1:
                raise PipelineError.configError(f'reasoner.{name} must be at least 1, got {v}')
        if not 0.0 <= self.thetaSim <= 1.0:
            raise PipelineError.configError(f'theta_sim must be in [0,1], got {self.thetaSim}')
        for k in self.kinds:
            if k not in ALL_KINDS:
                raise PipelineError.configError(f'Unknown rich-text kind {k}')

@dataclass(frozen=True)
class ReasonerEnv:
    gateway: LlmGateway
    tools: ToolBox
    store: KnowledgeStore

@dataclass(frozen=True)
class PathState:
    explored: tuple[str, ...]
    available: tuple[str, ...]
    ordered: bool = True
    def unexploredScr(self) -> list[str]:
        return [t for t in self.available if tagKind(t) == 'SCR' and t not in self.explored]

def enforceInclusionOrder(step: StepParse, state: PathState) -> StepParse:
    """
    Removes calls on explored, unknown or disabled tags and calls with a tool that
    does not fit the tag. If ordering is on, CODE calls are dropped as long as SCR
    elements remain unexplored on the path.
    """
    kept: list[ToolCall] = []
    for c in step.calls:
        if c.tag in state.explored:
            log.debug(f'Dropping {c.tool}({c.tag}): already explored on this path')
            continue
        if c.tag not in state.available:
            log.warn(f'Dropping {c.tool}({c.tag}): unknown or disabled element')
            continue
        if c.tool != TOOL_FOR_KIND[tagKind(c.tag)]:
            log.warn(f'Dropping {c.tool}({c.tag}): tool does not fit the element')
            continue
        if any(k.tag == c.tag for k in kept):
            continue
        kept.append(c)
    if state.ordered and state.unexploredScr():
        deferred = [c.tag for c in kept if tagKind(c.tag) == 'CODE']
        if deferred:
            log.debug(f'Deferring {deferred} until all screenshots are explored')
        kept = [c for c in kept if tagKind(c.tag) == 'SCR']
    return replace(step, calls=kept)

def correctPath(path: Path, store: KnowledgeStore, gateway: LlmGateway, thetaSim: float,
                seed: Optional[int] = None) -> Path:
    """
    Corrects the observation texts of path with the golden knowledge retrieved for
    its description. Structure and ids never change. Gateway errors propagate.
    """
    golden = retrieveGolden(store, describePath(path), thetaSim)
    if not golden:
        return path
    prompt = buildCorrectionPrompt(path, golden)
    resp = gateway.complete(gateway.request(prompt, seed=seed))
    fixes = parseCorrection(resp.text)
    onPath = {o.id for o in path.nodes}
    ignored = sorted(set(fixes) - onPath)
    if ignored:
        log.debug(f'Ignoring corrections for nodes not on the path: {ignored}')
    steps: list[PathStep] = []
    for s in path.steps:
        if isinstance(s, Observation) and s.id in fixes:
            verdict = s.verdict
            cwe = firstCwe(fixes[s.id])
            if verdict.kind == 'Vul' and cwe is not None:
                verdict = Verdict('Vul', cwe)
            s = replace(s, text=fixes[s.id], verdict=verdict)
        steps.append(s)
    return Path(tuple(steps))

@dataclass(frozen=True)
class _Pending:
    parent: str
    call: ToolCall

class _GraphBuilder:
    def __init__(self, ir: CanonicalIR, cfg: ReasonerConfig, env: ReasonerEnv, run: int):
        self.ir = ir
        self.cfg = cfg
        self.env = env
        self.g = ReasoningGraph(ir.id)
        self.seed = requestSeed(cfg.seed, SEED_STAGE_REASON, ir.id, run)
        self.available = tuple(t for t in ir.tags() if tagKind(t) in cfg.kinds)
        self.pathTo: dict[str, Path] = {}
        self.terminals: dict[Verdict, str] = {}
        self.terminalIds: set[str] = set()
        self.queue: deque[_Pending] = deque()
        self.denied: list[str] = []
        self.corrected: set[tuple[str, ...]] = set()
    def __ask(self, context: Optional[Path], latest: Optional[ToolResult],
              explored: Sequence[str]) -> StepParse:
        prompt = buildReasonPrompt(self.ir, context, latest, explored, self.cfg.inclusionOrder)
        gw = self.env.gateway
        resp = gw.complete(gw.request(prompt, seed=self.seed, temperature=self.cfg.temperature))
        return parseStep(resp.text)
    def __explored(self, nodeId: str) -> tuple[str, ...]:
        return tuple(a.argument for a in self.pathTo[nodeId].actions if a.argument)
    def __nextActionId(self, src: str) -> str:
        # numbered after the source branch: the first free A<level>.<n> with n >= branch
        key = idKey(src)
        level, n = key[0], key[-1]
        while self.g.hasAction(mkActionId(level, n)):
            n += 1
        return mkActionId(level, n)
    def __nextNodeId(self, level: int) -> str:
        return mkNodeId(level, self.g.nodesAtLevel(level) + 1)
    def __terminate(self, nodeId: str, verdict: Verdict):
        tid = self.terminals.get(verdict)
        if tid is None:
            level = nodeLevel(nodeId) + 1
            if len(self.g.nodeIds) + 1 > self.cfg.maxNodes or level > self.cfg.maxDepth:
                log.info(f'{self.ir.id}: no room to terminate {nodeId}, leaving a dead end')
                return
            tid = self.__nextNodeId(level)
            self.g.addObservation(Observation(tid, verdict.describe(), (), verdict))
            self.terminals[verdict] = tid
            self.terminalIds.add(tid)
        self.g.addAction(Action(self.__nextActionId(nodeId), nodeId, tid, 'AgentTerminator'))
    def __handleStep(self, nodeId: str, step: StepParse):
        if step.terminate:
            self.__terminate(nodeId, step.verdict)
            return
        state = PathState(self.__explored(nodeId), self.available, self.cfg.inclusionOrder)
        calls = enforceInclusionOrder(step, state).calls
        if len(calls) > self.cfg.branchLimit:
            log.info(f'{self.ir.id}: {nodeId} proposes {len(calls)} actions, '
                     f'keeping {self.cfg.branchLimit}')
            calls = calls[:self.cfg.branchLimit]
        if not calls:
            log.info(f'{self.ir.id}: all actions of {nodeId} were filtered, dead end')
            return
        for c in calls:
            self.queue.append(_Pending(nodeId, c))
    def __mergeTarget(self, parent: str, text: str) -> Optional[str]:
        """
        An existing observation with the same text that the new edge may point to.
        The target must not explore further elements (its actions are terminators
        only) and nothing may be pending for it, so no path through it re-explores a
        tag.
        """
        if not text:
            return None
        pending = {p.parent for p in self.queue}
        for o in self.g.observations:
            if o.text != text or o.id == parent or o.id in self.terminalIds:
                continue
            if self.g.isAncestor(o.id, parent) or o.id in pending:
                continue
            if any(a.tool != 'AgentTerminator' for a in self.g.outActions(o.id)):
                continue
            return o.id
        return None
    def __runTool(self, call: ToolCall) -> ToolResult:
        elem = self.ir.element(call.tag)
        try:
            return self.env.tools.runTool(call.tool, elem)
        except PipelineError as e:
            if e.kind != 'ToolBackendUnavailable':
                raise
            log.warn(f'{self.ir.id}: {e.msg}')
            return ToolResult(call.tool, call.tag, '')
    def __expand(self, p: _Pending):
        parentLevel = nodeLevel(p.parent)
        if len(self.g.nodeIds) + 2 > self.cfg.maxNodes or parentLevel + 2 > self.cfg.maxDepth:
            log.info(f'{self.ir.id}: budget exhausted, not expanding '
                     f'{p.parent} with {p.call.tool}({p.call.tag})')
            if p.parent not in self.denied:
                self.denied.append(p.parent)
            return
        result = self.__runTool(p.call)
        explored = self.__explored(p.parent) + (p.call.tag,)
        step = self.__ask(self.pathTo[p.parent], result, explored)
        aid = self.__nextActionId(p.parent)
        target = self.__mergeTarget(p.parent, step.observationText)
        if target is not None:
            log.debug(f'{self.ir.id}: observation after {p.call.tag} equals {target}, merging')
            self.g.addAction(Action(aid, p.parent, target, p.call.tool, p.call.tag))
            return
        obs = Observation(self.__nextNodeId(parentLevel + 1), step.observationText, (p.call.tag,))
        act = Action(aid, p.parent, obs.id, p.call.tool, p.call.tag)
        self.g.addObservation(obs)
        self.g.addAction(act)
        self.pathTo[obs.id] = self.pathTo[p.parent].extend(act, obs)
        self.__handleStep(obs.id, step)
    def __closeDenied(self):
        for nodeId in self.denied:
            if self.g.isSink(nodeId):
                self.__terminate(nodeId, UNDECIDED)
    def __rekeyTerminals(self):
        # correction may rewrite the CWE of a terminal verdict
        rekeyed: dict[Verdict, str] = {}
        for tid in sorted(self.terminalIds, key=idKey):
            rekeyed.setdefault(self.g.observation(tid).verdict, tid)
        self.terminals = rekeyed
    def __correctNewPaths(self):
        if not self.cfg.correctionEnabled or len(self.env.store) == 0:
            return
        for p in extractTerminatedPaths(self.g):
            key = tuple(p.ids())
            if key in self.corrected:
                continue
            self.corrected.add(key)
            try:
                fixed = correctPath(p, self.env.store, self.env.gateway, self.cfg.thetaSim, self.seed)
            except PipelineError as e:
                if not e.isGatewayError():
                    raise
                log.warn(f'{self.ir.id}: correction of {p.last.id} failed: {e}')
                self.g.flags.append(f'correction failed: {" ".join(key)}')
                continue
            for o in fixed.nodes:
                if o != self.g.observation(o.id):
                    self.g.replaceObservation(o)
            self.__rekeyTerminals()
    def build(self) -> ReasoningGraph:
        try:
            step = self.__ask(None, None, ())
        except PipelineError as e:
            if not e.isGatewayError():
                raise
            raise PipelineError('GatewayExhausted', f'{self.ir.id}: no first observation: {e.msg}')
        root = Observation(ROOT_ID, step.observationText)
        self.g.addObservation(root)
        self.pathTo[ROOT_ID] = Path((root,))
        try:
            self.__handleStep(ROOT_ID, step)
            self.__correctNewPaths()
            while self.queue:
                self.__expand(self.queue.popleft())
                self.__correctNewPaths()
            self.__closeDenied()
            self.__correctNewPaths()
        except PipelineError as e:
            if not e.isGatewayError():
                raise
            log.warn(f'{self.ir.id}: reasoning stopped early: {e}')
            self.g.partial = True
            self.g.flags.append(f'gateway: {e.kind}')
        self.g.validate()
        return self.g

def generateReasoningGraph(ir: CanonicalIR, cfg: ReasonerConfig, env: ReasonerEnv,
                           run: int = 0) -> ReasoningGraph:
    g = _GraphBuilder(ir, cfg, env, run).build()
    log.info(f'Reasoning graph for {ir.id}: {len(g.nodeIds)} observations, '
             f'{len(g.actions)} actions{" (partial)" if g.partial else ""}')
    return g

def _generateOrError(ir: CanonicalIR, cfg: ReasonerConfig, env: ReasonerEnv) -> ReasoningGraph | PipelineError:
    try:
        return generateReasoningGraph(ir, cfg, env)
    except PipelineError as e:
        log.warn(f'No reasoning graph for {ir.id}: {e}')
        return e

def graphStatus(x: ReasoningGraph | PipelineError) -> str:
    match x:
        case PipelineError():
            return f'failed: {x.kind}'
        case ReasoningGraph():
            return 'partial' if x.partial else 'ok'

def buildDatabase(historical: list[CanonicalIR], cfg: ReasonerConfig, env: ReasonerEnv,
                  db: ReasoningDb, configHash: str) -> DbManifest:
    """
    Generates the graphs of all historical IRs concurrently and writes them together
    with the manifest. Output does not depend on the completion order.
    """
    db.create()
    workers = env.gateway.settings.concurrencyLimit
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {ir.id: pool.submit(_generateOrError, ir, cfg, env) for ir in historical}
        results = {irId: f.result() for irId, f in futures.items()}
    manifest = DbManifest(configHash)
    for irId in sorted(results):
        x = results[irId]
        manifest.statuses[irId] = graphStatus(x)
        if isinstance(x, ReasoningGraph):
            db.saveGraph(x)
    db.writeManifest(manifest)
    log.info(f'Reasoning database {db.path}: {manifest.count} of {len(historical)} graphs')
    return manifest
