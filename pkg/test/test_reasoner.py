from reasoner.reasoner import *
from reasoner.prompts import buildReasonPrompt, exploredLine
from reasoner.step_parser import StepParse, ToolCall
from reasoning_graph.graph_paths import extractTerminatedPaths, allRootPaths
from llm_gateway.gateway_types import LlmRequest, LlmResponse
from va_knowledge.va_store import EMPTY_STORE, ingest
from common.seeds import requestSeed
from common.testsupport import *
import pytest
import shell

def mkEnv(rules: list[dict[str, Any]], store: KnowledgeStore = EMPTY_STORE) -> ReasonerEnv:
    return ReasonerEnv(stubGateway(rules), mkTools(), store)

def byId(g: ReasoningGraph) -> tuple[list[Observation], list[Action]]:
    return (sorted(g.observations, key=lambda o: idKey(o.id)),
            sorted(g.actions, key=lambda a: idKey(a.id)))

def test_rebuildRunningExample():
    env = mkEnv(figRules())
    g = generateReasoningGraph(figIr(), ReasonerConfig(), env)
    assert byId(g) == byId(figGraph())
    assert g.nodeIds == ['O1', 'O2.1', 'O3.1', 'O2.2', 'O2.3', 'O2.4', 'O3.2']
    assert not g.partial
    assert g.flags == []
    assert env.gateway.calls == 9
    # O2.3 is a dead end: its snippet is deferred while screenshots remain
    assert g.isSink('O2.3')
    assert g.observation('O2.3').verdict == UNDECIDED
    assert len(extractTerminatedPaths(g)) == 4
    paths = [p.ids() for p in extractTerminatedPaths(g)]
    assert ['O1', 'A1.1', 'O2.1', 'A2.1', 'O3.1'] in paths
    assert ['O1', 'A1.4', 'O2.4', 'A2.4', 'O3.2'] in paths

def test_inclusionOrder():
    ir = inclusionIr()
    g = generateReasoningGraph(ir, ReasonerConfig(), mkEnv(inclusionRules(ir.id)))
    assert g.nodeIds == ['O1', 'O2.1', 'O3.1', 'O4.1']
    assert [a.render() for a in g.actions] == ['ScrAnalyzer([SCR1])', 'CodeAnalyzer([CODE1])',
                                               'AgentTerminator()']
    assert g.observation('O4.1').verdict == Verdict('Vul', 'CWE-79')

def test_withoutInclusionOrder():
    ir = inclusionIr()
    g = generateReasoningGraph(ir, ReasonerConfig(inclusionOrder=False), mkEnv(inclusionRules(ir.id)))
    assert sorted(g.nodeIds, key=idKey) == ['O1', 'O2.1', 'O2.2', 'O3.1', 'O3.2', 'O4.1']
    # both orders reach the same terminal
    assert [a.src for a in g.inActions('O4.1')] == ['O3.1', 'O3.2']
    assert g.observation('O2.2').focusTags == ('[CODE1]',)
    assert len(extractTerminatedPaths(g)) == 2

def test_restrictedKinds():
    ir = inclusionIr()
    env = mkEnv(inclusionRules(ir.id))
    g = generateReasoningGraph(ir, ReasonerConfig(kinds=('CODE',)), env)
    assert g.nodeIds == ['O1', 'O2.1']
    assert g.outActions('O1')[0].argument == '[CODE1]'
    assert g.isSink('O2.1')
    assert env.gateway.calls == 2

def calls(*xs: tuple[ToolName, str]) -> StepParse:
    return StepParse('obs', calls=[ToolCall(t, tag) for t, tag in xs])

AVAILABLE = ('[SCR1]', '[SCR2]', '[CODE1]')

def test_enforceDropsInvalidCalls():
    step = calls(('ScrAnalyzer', '[SCR1]'), ('ScrAnalyzer', '[SCR9]'), ('CodeAnalyzer', '[SCR2]'),
                 ('ScrAnalyzer', '[SCR2]'), ('ScrAnalyzer', '[SCR2]'))
    res = enforceInclusionOrder(step, PathState(('[SCR1]',), AVAILABLE))
    assert res.calls == [ToolCall('ScrAnalyzer', '[SCR2]')]
    assert step.chosenElements == ['[SCR1]', '[SCR9]', '[SCR2]', '[SCR2]', '[SCR2]']

def test_enforceDefersCode():
    step = calls(('CodeAnalyzer', '[CODE1]'), ('ScrAnalyzer', '[SCR2]'))
    assert enforceInclusionOrder(step, PathState((), AVAILABLE)).chosenElements == ['[SCR2]']
    state = PathState(('[SCR1]', '[SCR2]'), AVAILABLE)
    assert enforceInclusionOrder(calls(('CodeAnalyzer', '[CODE1]')), state).chosenElements == ['[CODE1]']
    unordered = PathState((), AVAILABLE, ordered=False)
    assert enforceInclusionOrder(step, unordered).chosenElements == ['[CODE1]', '[SCR2]']
    assert PathState(('[SCR2]',), AVAILABLE).unexploredScr() == ['[SCR1]']

def test_depthBudget():
    env = mkEnv(figRules())
    g = generateReasoningGraph(figIr(), ReasonerConfig(maxDepth=3), env)
    # O2.2 cannot expand and gets the undecided terminal instead
    assert g.nodeIds == ['O1', 'O2.1', 'O3.1', 'O2.2', 'O2.3', 'O2.4', 'O3.2', 'O3.3']
    assert g.observation('O3.3') == Observation('O3.3', 'vulnerability identified: undecided')
    assert [a.id for a in g.inActions('O3.3')] == ['A2.2']
    assert g.action('A2.2').tool == 'AgentTerminator'
    assert env.gateway.calls == 5

def test_depthBudgetAtRoot():
    g = generateReasoningGraph(figIr(), ReasonerConfig(maxDepth=2), mkEnv(figRules()))
    assert g.nodeIds == ['O1', 'O2.1']
    assert g.observation('O2.1').verdict == UNDECIDED
    assert g.action('A1.1').tool == 'AgentTerminator'

def test_nodeBudget():
    ir = inclusionIr()
    env = mkEnv(inclusionRules(ir.id))
    g = generateReasoningGraph(ir, ReasonerConfig(maxNodes=3), env)
    assert g.nodeIds == ['O1', 'O2.1', 'O3.1']
    assert g.observation('O3.1').text == 'vulnerability identified: undecided'
    assert len(g.nodeIds) <= 3
    assert env.gateway.calls == 2

def test_branchLimit():
    g = generateReasoningGraph(figIr(), ReasonerConfig(branchLimit=2), mkEnv(figRules()))
    assert g.nodeIds == ['O1', 'O2.1', 'O3.1', 'O2.2', 'O3.2']
    assert [a.argument for a in g.outActions('O1')] == ['[SCR1]', '[SCR2]']
    assert g.action('A2.2').tgt == 'O2.1'
    assert g.observation('O3.2').text == FIG_TEXTS['O2.3']

# Two screenshots explored in either order; both orders see the same first screenshot text

def crossIr() -> CanonicalIR:
    return mkIr('demo/cross#1', 'settings page runs scripts', 'before [SCR1] after [SCR2]',
                [elem('[SCR1]', 'https://img.example.com/cross/1.png'),
                 elem('[SCR2]', 'https://img.example.com/cross/2.png')],
                createdAt=300, labelVul=True, cweId='CWE-79')

def test_mergeNeedsClosedTarget():
    ir = crossIr()
    rules = [
        reasonRule(ir.id, 'none', stepText('two screenshots of the settings page', calls=scr(1, 2))),
        reasonRule(ir.id, '[SCR1]', stepText('the page shows an alert box', calls=scr(2))),
        reasonRule(ir.id, '[SCR2]', stepText('the name field holds a script tag', calls=scr(1))),
        reasonRule(ir.id, '[SCR1] [SCR2]', stepText('the stored name runs as script', 'Yes CWE-79')),
        reasonRule(ir.id, '[SCR2] [SCR1]', stepText('the page shows an alert box', calls=scr(2))),
    ]
    env = mkEnv(rules)
    g = generateReasoningGraph(ir, ReasonerConfig(), env)
    # O2.1 explores [SCR2] further, so the second order gets its own node
    assert g.nodeIds == ['O1', 'O2.1', 'O2.2', 'O3.1', 'O4.1', 'O3.2']
    assert g.observation('O3.2') == Observation('O3.2', 'the page shows an alert box', ('[SCR1]',))
    assert g.isSink('O3.2')
    assert [a.src for a in g.inActions('O2.1')] == ['O1']
    for p in allRootPaths(g):
        tags = [a.argument for a in p.actions if a.argument]
        assert len(tags) == len(set(tags))
    assert env.gateway.calls == 5

def test_mergeIntoDecidedNode():
    ir = crossIr()
    rules = [
        reasonRule(ir.id, 'none', stepText('two screenshots of the settings page', calls=scr(1, 2))),
        reasonRule(ir.id, '[SCR1]', stepText('the page shows an alert box', 'Yes CWE-79')),
        reasonRule(ir.id, '[SCR2]', stepText('the name field holds a script tag', calls=scr(1))),
        reasonRule(ir.id, '[SCR2] [SCR1]', stepText('the page shows an alert box', 'Yes CWE-79')),
    ]
    env = mkEnv(rules)
    g = generateReasoningGraph(ir, ReasonerConfig(), env)
    assert g.nodeIds == ['O1', 'O2.1', 'O3.1', 'O2.2']
    assert [a.src for a in g.inActions('O2.1')] == ['O1', 'O2.2']
    assert g.action('A2.2').argument == '[SCR1]'
    assert len(extractTerminatedPaths(g)) == 2
    assert env.gateway.calls == 4

def test_correctedTerminalIsReused():
    ir = crossIr()
    rules = [
        reasonRule(ir.id, 'none', stepText('the report shows script alert cookie', calls=scr(1, 2))),
        reasonRule(ir.id, '[SCR1]', stepText('first page renders html', 'Yes CWE-79')),
        reasonRule(ir.id, '[SCR2]', stepText('second page renders html', 'Yes CWE-80')),
        correctionRule('O3.1: vulnerability identified: yes CWE-80'),
    ]
    env = mkEnv(rules, ingest(vaRecords()))
    g = generateReasoningGraph(ir, ReasonerConfig(thetaSim=0.0), env)
    # the first terminal now says CWE-80 and takes the second path as well
    assert g.nodeIds == ['O1', 'O2.1', 'O3.1', 'O2.2']
    assert g.observation('O3.1').verdict == Verdict('Vul', 'CWE-80')
    assert [a.src for a in g.inActions('O3.1')] == ['O2.1', 'O2.2']
    assert env.gateway.calls == 5

def test_sameSeedForAllRequests():
    seen: list[Optional[int]] = []
    class Recording:
        name = 'recording'
        def __init__(self, inner: StubBackend):
            self.inner = inner
        def complete(self, req: LlmRequest, deadlineSeconds: float) -> LlmResponse:
            seen.append(req.seed)
            return self.inner.complete(req, deadlineSeconds)
    ir = inclusionIr()
    backend = Recording(StubBackend([StubRule.fromJson(r) for r in inclusionRules(ir.id)]))
    env = ReasonerEnv(LlmGateway(backend, LlmSettings()), mkTools(), EMPTY_STORE)
    generateReasoningGraph(ir, ReasonerConfig(seed=5), env, run=1)
    assert len(seen) == 3
    assert set(seen) == {requestSeed(5, SEED_STAGE_REASON, ir.id, 1)}

def test_reasonPrompt():
    ir = figIr()
    p = buildReasonPrompt(ir, None, None)
    assert p.startswith('Please think step by step. For each step, you need to select multiple rich-text elements')
    assert f'Issue: {FIG_ID}\n' in p
    assert p.splitlines()[-1] == 'Explored elements: none'
    assert 'We suggest you first analyze the text, then explore the page screenshot [SCR]' in p
    p = buildReasonPrompt(ir, None, None, ['[SCR2]', '[SCR1]'], inclusionNote=False)
    assert p.endswith('\nExplored elements: [SCR2] [SCR1]')
    assert 'first analyze the text' not in p
    assert exploredLine([]) == 'Explored elements: none'

def test_correction():
    ir = inclusionIr()
    fix = 'O2.1: the form stores raw html comments\nO4.1: vulnerability identified: yes CWE-80'
    env = mkEnv(inclusionRules(ir.id) + [correctionRule(fix)], ingest(vaRecords()))
    g = generateReasoningGraph(ir, ReasonerConfig(thetaSim=0.0), env)
    assert g.nodeIds == ['O1', 'O2.1', 'O3.1', 'O4.1']
    assert g.observation('O2.1') == Observation('O2.1', 'the form stores raw html comments', ('[SCR1]',))
    assert g.observation('O4.1').verdict == Verdict('Vul', 'CWE-80')
    assert g.flags == []
    # three steps and one correction of the single terminated path
    assert env.gateway.calls == 4

def test_correctionDisabled():
    ir = inclusionIr()
    fix = 'O2.1: corrected'
    env = mkEnv(inclusionRules(ir.id) + [correctionRule(fix)], ingest(vaRecords()))
    g = generateReasoningGraph(ir, ReasonerConfig(thetaSim=0.0, correctionEnabled=False), env)
    assert g.observation('O2.1').text == 'the form accepts html in comments'
    assert env.gateway.calls == 3

def test_correctionFailure():
    ir = inclusionIr()
    env = mkEnv(inclusionRules(ir.id), ingest(vaRecords()))
    g = generateReasoningGraph(ir, ReasonerConfig(thetaSim=0.0), env)
    assert g.flags == ['correction failed: O1 A1.1 O2.1 A2.1 O3.1 A3.1 O4.1']
    assert not g.partial
    assert g.observation('O2.1').text == 'the form accepts html in comments'

def test_correctPath():
    g = chainGraph('a/b#1', ['report mentions script alert cookie', 'snippet writes html unescaped'])
    [path] = extractTerminatedPaths(g)
    fix = ('O2.1: snippet writes html into the page unescaped\n'
           'O3.1: vulnerability identified: yes CWE-80\n'
           'O9.9: not on the path')
    gw = stubGateway([correctionRule(fix)])
    fixed = correctPath(path, ingest(vaRecords()), gw, 0.0)
    assert fixed.ids() == path.ids()
    assert fixed.actions == path.actions
    assert [o.text for o in fixed.nodes] == ['report mentions script alert cookie',
                                             'snippet writes html into the page unescaped',
                                             'vulnerability identified: yes CWE-80']
    assert fixed.last.verdict == Verdict('Vul', 'CWE-80')
    assert gw.calls == 1

def test_correctPathWithoutGolden():
    g = chainGraph('a/b#1', ['report mentions script alert cookie', 'snippet writes html unescaped'])
    [path] = extractTerminatedPaths(g)
    gw = stubGateway([])
    assert correctPath(path, ingest(vaRecords()), gw, 1.0) is path
    assert correctPath(path, EMPTY_STORE, gw, 0.0) is path
    assert gw.calls == 0

def test_firstCallFails():
    with pytest.raises(PipelineError) as err:
        generateReasoningGraph(figIr(), ReasonerConfig(), mkEnv([]))
    assert err.value.kind == 'GatewayExhausted'

def test_laterCallFails():
    ir = inclusionIr()
    # drop the answer after [SCR1] [CODE1]
    rules = inclusionRules(ir.id)
    del rules[2]
    g = generateReasoningGraph(ir, ReasonerConfig(), mkEnv(rules))
    assert g.partial
    assert g.flags == ['gateway: BackendRejected']
    assert g.nodeIds == ['O1', 'O2.1']
    g.validate()

def test_configValidation():
    ReasonerConfig().validate()
    for cfg in [ReasonerConfig(maxDepth=0), ReasonerConfig(maxNodes=0), ReasonerConfig(branchLimit=0),
                ReasonerConfig(thetaSim=1.5), ReasonerConfig(kinds=cast(Any, ('PDF',)))]:
        with pytest.raises(PipelineError) as err:
            cfg.validate()
        assert err.value.kind == 'ConfigError'

def buildDb(d: str) -> DbManifest:
    irs = [figIr(), inclusionIr(1), inclusionIr(2), inclusionIr(3)]
    # no rules for the third inclusion report
    rules = figRules() + inclusionRules(irs[1].id) + inclusionRules(irs[2].id)
    return buildDatabase(irs, ReasonerConfig(), mkEnv(rules), ReasoningDb(d), 'hash-1')

def test_buildDatabase():
    with shell.tempDir() as d:
        m = buildDb(d)
        assert m.statuses == {FIG_ID: 'ok', 'demo/order#1': 'ok', 'demo/order#2': 'ok',
                              'demo/order#3': 'failed: GatewayExhausted'}
        assert m.count == 3
        db = ReasoningDb(d)
        assert db.readManifest() == m
        assert db.graphIds() == [FIG_ID, 'demo/order#1', 'demo/order#2']
        assert byId(db.loadGraph(FIG_ID)) == byId(figGraph())
        db.checkHash('hash-1')

def test_buildDatabaseDeterministic():
    with shell.tempDir() as d1, shell.tempDir() as d2:
        buildDb(d1)
        buildDb(d2)
        first = treeBytes(d1)
        assert first == treeBytes(d2)
        assert sorted(first) == ['graphs/demo%2Ffig%231.json', 'graphs/demo%2Forder%231.json',
                                 'graphs/demo%2Forder%232.json', 'manifest.json']
