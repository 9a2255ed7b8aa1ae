"""
Builders for the fixtures shared by the tests: small issue reports, the reasoning graph
of the running example, stub rule tables and a complete pipeline workspace.
"""
from typing import *
from common.constants import ToolName
from ir_corpus.corpus_types import CanonicalIR, RichTextElement
from ir_corpus.corpus_io import writeCorpus
from llm_gateway.gateway import LlmGateway
from llm_gateway.gateway_types import LlmSettings, TokenLogprobs
from llm_gateway.stub_backend import StubBackend, StubRule, stubRuleJson
from reasoning_graph.graph_types import *
from tool_adapters.stub_tools import KeywordCodeAnalyzer
from tool_adapters.tools import ToolBox
from va_knowledge.va_store import KnowledgeRecord
import common.utils as utils
import math
import os
import re
import shell
import toml

# Tool doubles

class FixedScrAnalyzer:
    """
    Screenshot analyzer answering from a fixed url-to-text table; unknown urls give
    a generic description.
    """
    def __init__(self, texts: Optional[dict[str, str]] = None):
        self.texts = texts or {}
        self.calls = 0
    def analyze(self, payload: str) -> str:
        self.calls += 1
        return self.texts.get(payload, f'a screenshot of {payload.rsplit("/", 1)[-1]}')

def mkTools(scrTexts: Optional[dict[str, str]] = None, cacheDir: Optional[str] = None) -> ToolBox:
    return ToolBox(FixedScrAnalyzer(scrTexts), KeywordCodeAnalyzer(), cacheDir)

# Stub LLM

def stepText(observation: str, verdict: str = 'Undecided',
             calls: Sequence[tuple[ToolName, str]] = ()) -> str:
    """
    An agent answer in the step format. Without calls the answer ends with the
    terminator.
    """
    if calls:
        action = ', '.join(f'{tool}({tag})' for tool, tag in calls)
    else:
        action = 'AgentTerminator()'
    return f'Observation: {observation}\nvulnerability identified: {verdict}\nAction: {action}'

def scr(*ns: int) -> list[tuple[ToolName, str]]:
    return [('ScrAnalyzer', f'[SCR{n}]') for n in ns]

def code(*ns: int) -> list[tuple[ToolName, str]]:
    return [('CodeAnalyzer', f'[CODE{n}]') for n in ns]

def reasonRule(irId: str, explored: str, answer: str) -> dict[str, Any]:
    """
    Rule for the reasoning prompt of irId whose explored-elements line is explored
    (e.g. "none" or "[SCR2] [SCR1]").
    """
    pattern = rf'Issue: {re.escape(irId)}\n.*Explored elements: {re.escape(explored)}$'
    return stubRuleJson(pattern, answer)

def yesNoLogprobs(pYes: float) -> TokenLogprobs:
    """
    First-token logprobs whose two-way softmax gives pYes.
    """
    return {'Yes': math.log(pYes), 'No': math.log(1.0 - pYes)}

def identifyRule(irId: str, answer: str, pYes: Optional[float]) -> dict[str, Any]:
    pattern = r'^Please identify.*"id":' + re.escape(utils.canonicalJson(irId))
    return stubRuleJson(pattern, answer, None if pYes is None else yesNoLogprobs(pYes))

GUIDANCE_ANSWER = 'STEP-1: Look at the code snippets of the report.\nSTEP-2: Check whether user input reaches the output.'

def guidanceRule(answer: str = GUIDANCE_ANSWER) -> dict[str, Any]:
    return stubRuleJson(r'^Below are reasoning graphs', answer)

def correctionRule(answer: str) -> dict[str, Any]:
    return stubRuleJson(r'^The reasoning path below', answer)

def stubGateway(rules: list[dict[str, Any]], jitter: float = 0.0,
                settings: LlmSettings = LlmSettings()) -> LlmGateway:
    backend = StubBackend([StubRule.fromJson(r) for r in rules], jitter)
    return LlmGateway(backend, settings, sleep=lambda _: None)

def writeRules(path: str, rules: list[dict[str, Any]]):
    utils.writeJsonl(path, rules)

# Issue reports

def elem(tag: str, payload: str) -> RichTextElement:
    kind = 'SCR' if tag.startswith('[SCR') else 'CODE'
    return RichTextElement(kind, tag, payload)

def mkIr(irId: str, title: str, content: str, elems: Sequence[RichTextElement] = (),
         createdAt: int = 0, labelVul: Optional[bool] = None, cweId: Optional[str] = None) -> CanonicalIR:
    return CanonicalIR(irId, title, content, tuple(elems), createdAt, labelVul, cweId)

MOTIVATION_ID = 'antswordproject/antsword#147'

def motivationIr() -> CanonicalIR:
    """
    A self-XSS report: two screenshots of the shell manager and three snippets.
    """
    return mkIr(
        MOTIVATION_ID,
        'self-xss in the shell manager',
        'adding a shell with the note below [SCR1] executes the script when the list is '
        'opened [SCR2] . payload [CODE1] is stored by [CODE2] and rendered by [CODE3]',
        [elem('[SCR1]', 'https://user-images.example.com/147/add-shell.png'),
         elem('[SCR2]', 'https://user-images.example.com/147/alert.png'),
         elem('[CODE1]', '<img src=x onerror=alert(1)>'),
         elem('[CODE2]', "const note = document.getElementById('note').value"),
         elem('[CODE3]', 'grid.cells(id, 2).setValue(note)')],
        createdAt=1_550_000_000, labelVul=True, cweId='CWE-79')

# The running example: seven observations, ten actions

FIG_ID = 'demo/fig#1'

FIG_TEXTS = {
    'O1': 'the report shows four screenshots of the login page',
    'O2.1': 'the first screenshot shows an alert box with the session cookie',
    'O2.2': 'the second screenshot shows the search field with a script tag',
    'O2.3': 'the third screenshot shows the php source of the search page',
    'O2.4': 'the fourth screenshot shows a styling problem of the footer',
}

def figIr() -> CanonicalIR:
    return mkIr(
        FIG_ID, 'script injection in the search page',
        'see [SCR1] [SCR2] [SCR3] [SCR4] [SCR5] and the handler [CODE1]',
        [elem(f'[SCR{i}]', f'https://img.example.com/fig/{i}.png') for i in range(1, 6)] +
        [elem('[CODE1]', "<?php echo $_GET['q']; ?>")],
        createdAt=100, labelVul=True, cweId='CWE-79')

def figGraph() -> ReasoningGraph:
    """
    O1 explores four screenshots; O2.2 revisits the others. O2.1 and O2.4 terminate
    (Vul CWE-79 and NotVul), O2.3 is a dead end.
    """
    g = ReasoningGraph(FIG_ID)
    for oid, text in FIG_TEXTS.items():
        focus = () if oid == ROOT_ID else (f'[SCR{oid[-1]}]',)
        g.addObservation(Observation(oid, text, focus))
    vul = Verdict('Vul', 'CWE-79')
    notVul = Verdict('NotVul')
    g.addObservation(Observation('O3.1', vul.describe(), (), vul))
    g.addObservation(Observation('O3.2', notVul.describe(), (), notVul))
    edges: list[tuple[str, str, str, ToolName, str]] = [
        ('A1.1', 'O1', 'O2.1', 'ScrAnalyzer', '[SCR1]'),
        ('A1.2', 'O1', 'O2.2', 'ScrAnalyzer', '[SCR2]'),
        ('A1.3', 'O1', 'O2.3', 'ScrAnalyzer', '[SCR3]'),
        ('A1.4', 'O1', 'O2.4', 'ScrAnalyzer', '[SCR4]'),
        ('A2.1', 'O2.1', 'O3.1', 'AgentTerminator', ''),
        ('A2.4', 'O2.4', 'O3.2', 'AgentTerminator', ''),
        ('A2.2', 'O2.2', 'O2.1', 'ScrAnalyzer', '[SCR1]'),
        ('A2.3', 'O2.2', 'O2.3', 'ScrAnalyzer', '[SCR3]'),
        ('A2.5', 'O2.2', 'O2.4', 'ScrAnalyzer', '[SCR4]'),
        ('A2.6', 'O2.2', 'O2.3', 'ScrAnalyzer', '[SCR5]'),
    ]
    for aid, src, tgt, tool, arg in edges:
        g.addAction(Action(aid, src, tgt, tool, arg))
    return g

def figRules() -> list[dict[str, Any]]:
    """
    Stub answers that make the agent loop rebuild the running example: the
    revisits from O2.2 repeat the texts of O2.1, O2.3 and O2.4 and get merged.
    """
    t = FIG_TEXTS
    return [
        reasonRule(FIG_ID, 'none', stepText(t['O1'], calls=scr(1, 2, 3, 4))),
        reasonRule(FIG_ID, '[SCR1]', stepText(t['O2.1'], 'Yes CWE-79')),
        reasonRule(FIG_ID, '[SCR2]', stepText(t['O2.2'], calls=scr(1, 3, 4, 5))),
        reasonRule(FIG_ID, '[SCR3]', stepText(t['O2.3'], calls=code(1))),
        reasonRule(FIG_ID, '[SCR4]', stepText(t['O2.4'], 'No')),
        reasonRule(FIG_ID, '[SCR2] [SCR1]', stepText(t['O2.1'], 'Yes CWE-79')),
        reasonRule(FIG_ID, '[SCR2] [SCR3]', stepText(t['O2.3'], calls=code(1))),
        reasonRule(FIG_ID, '[SCR2] [SCR4]', stepText(t['O2.4'], 'No')),
        reasonRule(FIG_ID, '[SCR2] [SCR5]', stepText(t['O2.3'], calls=code(1))),
    ]

# Inclusion order: one screenshot and one snippet, both proposed at once

def inclusionIr(n: int = 1) -> CanonicalIR:
    return mkIr(f'demo/order#{n}', 'comment form runs scripts',
                'the form [SCR1] posts to [CODE1]',
                [elem('[SCR1]', f'https://img.example.com/order/{n}.png'),
                 elem('[CODE1]', "<?php echo $_POST['comment']; ?>")],
                createdAt=200 + n, labelVul=True, cweId='CWE-79')

def inclusionRules(irId: str) -> list[dict[str, Any]]:
    """
    With ordering the agent goes SCR1 then CODE1 (4 observations); without it
    both orders are explored (6 observations).
    """
    return [
        reasonRule(irId, 'none', stepText('a comment form and its handler', calls=scr(1) + code(1))),
        reasonRule(irId, '[SCR1]', stepText('the form accepts html in comments', calls=code(1))),
        reasonRule(irId, '[SCR1] [CODE1]', stepText('the handler echoes the comment unescaped',
                                                    'Yes CWE-79')),
        reasonRule(irId, '[CODE1]', stepText('the handler prints post data', calls=scr(1))),
        reasonRule(irId, '[CODE1] [SCR1]', stepText('the printed comment shows up in the form',
                                                    'Yes CWE-79')),
    ]

# Graphs for retrieval

def chainGraph(irId: str, texts: Sequence[str], verdict: Verdict = Verdict('Vul', 'CWE-79'),
               tool: ToolName = 'CodeAnalyzer') -> ReasoningGraph:
    """
    O1 -> O2.1 -> ... -> terminal, one tool action per hop.
    """
    g = ReasoningGraph(irId)
    prev = ROOT_ID
    g.addObservation(Observation(ROOT_ID, texts[0]))
    kind = 'SCR' if tool == 'ScrAnalyzer' else 'CODE'
    for i, text in enumerate(texts[1:]):
        level = i + 2
        oid = mkNodeId(level, 1)
        g.addObservation(Observation(oid, text))
        g.addAction(Action(mkActionId(level - 1, 1), prev, oid, tool, f'[{kind}{i + 1}]'))
        prev = oid
    level = len(texts) + 1
    tid = mkNodeId(level, 1)
    g.addObservation(Observation(tid, verdict.describe(), (), verdict))
    g.addAction(Action(mkActionId(level - 1, 1), prev, tid, 'AgentTerminator'))
    return g

XSS_WORDS = 'script alert cookie html escaping page output'
SQL_WORDS = 'query database select injection quote table login'
UI_WORDS = 'button color layout footer theme font margin'

def graphDb() -> list[ReasoningGraph]:
    """
    Ten graphs on three topics: four about script injection, three about SQL and
    three about layout problems.
    """
    gs: list[ReasoningGraph] = []
    for i in range(4):
        gs.append(chainGraph(f'db/xss#{i + 1}', [f'report {i} mentions {XSS_WORDS}',
                                                 f'snippet writes {XSS_WORDS} unescaped']))
    for i in range(3):
        gs.append(chainGraph(f'db/sql#{i + 1}', [f'report {i} mentions {SQL_WORDS}',
                                                 f'snippet builds {SQL_WORDS} by concatenation'],
                             Verdict('Vul', 'CWE-89')))
    for i in range(3):
        gs.append(chainGraph(f'db/ui#{i + 1}', [f'report {i} mentions {UI_WORDS}',
                                                f'screenshot shows {UI_WORDS}'],
                             Verdict('NotVul'), 'ScrAnalyzer'))
    return gs

# VA knowledge

def vaRecords(n: int = 50) -> list[KnowledgeRecord]:
    """
    Two informative weakness records followed by n-2 filler records.
    """
    res = [
        KnowledgeRecord('cwe', 'CWE-79', 'improper neutralization of input during web page '
                        'generation cross-site scripting script alert cookie html escaping', 'CWE-79'),
        KnowledgeRecord('cwe', 'CWE-89', 'improper neutralization of special elements used in '
                        'an sql command sql injection query database select quote', 'CWE-89'),
    ]
    for i in range(n - 2):
        res.append(KnowledgeRecord('cwe', f'CWE-{1000 + i}',
                                   f'weakness number {i} in component part{i} module{i % 7}',
                                   f'CWE-{1000 + i}'))
    return res

# A synthetic corpus with a complete stub rule table

def syntheticIr(i: int) -> CanonicalIR:
    """
    Even numbers are vulnerabilities (CWE-79 if divisible by 4, else CWE-89);
    multiples of five have no rich text.
    """
    vul = i % 2 == 0
    cwe = None if not vul else ('CWE-79' if i % 4 == 0 else 'CWE-89')
    rich = i % 5 != 0
    match cwe:
        case 'CWE-79':
            text, snippet = f'the name field of page {i} is echoed without escaping', \
                "<?php echo $_GET['name']; ?>"
        case 'CWE-89':
            text, snippet = f'the search box of page {i} builds the sql query from input', \
                "SELECT * FROM users WHERE name = '\" + name + \"'"
        case _:
            text, snippet = f'the button of page {i} has the wrong color', '.button { color: red; }'
    content = f'{text} see [CODE1]' if rich else text
    elems = [elem('[CODE1]', snippet)] if rich else []
    return mkIr(f'syn/app#{i}', f'problem report {i}', content, elems, createdAt=1000 * i,
                labelVul=vul, cweId=cwe)

def syntheticCorpus(n: int = 20) -> list[CanonicalIR]:
    return [syntheticIr(i) for i in range(1, n + 1)]

def syntheticVerdict(ir: CanonicalIR) -> str:
    return f'Yes {ir.cweId}' if ir.labelVul else 'No'

def syntheticRules(irs: list[CanonicalIR], pYes: Optional[Callable[[CanonicalIR], Optional[float]]] = None) -> list[dict[str, Any]]:
    """
    Reasoning answers for every IR (snippet first when there is one), guidance,
    corrections and identification answers. pYes defaults to 0.85 for
    vulnerabilities and 0.15 otherwise.
    """
    def defaultPYes(ir: CanonicalIR) -> Optional[float]:
        return 0.85 if ir.labelVul else 0.15
    prob = pYes or defaultPYes
    rules: list[dict[str, Any]] = []
    for ir in irs:
        if ir.hasRichText():
            rules.append(reasonRule(ir.id, 'none', stepText(f'{ir.title}: {ir.content}', calls=code(1))))
            rules.append(reasonRule(ir.id, '[CODE1]', stepText(f'the snippet of {ir.id} confirms it',
                                                               syntheticVerdict(ir))))
        else:
            rules.append(reasonRule(ir.id, 'none', stepText(f'{ir.title}: {ir.content}',
                                                            syntheticVerdict(ir))))
    rules.append(guidanceRule())
    rules.append(correctionRule('O1: the report describes the problem as stated'))
    for ir in irs:
        answer = f'Yes, {ir.cweId}' if ir.labelVul else 'No'
        rules.append(identifyRule(ir.id, answer, prob(ir)))
    return rules

def writeWorkspace(d: str, n: int = 20, extra: Optional[dict[str, Any]] = None,
                   rules: Optional[list[dict[str, Any]]] = None) -> str:
    """
    Writes corpus, stub rules, VA source and config.toml into d. Returns the path of
    the configuration. extra is merged into the top level of the configuration.
    """
    irs = syntheticCorpus(n)
    corpusFile = shell.pjoin(d, 'corpus.jsonl')
    rulesFile = shell.pjoin(d, 'llm.jsonl')
    vaFile = shell.pjoin(d, 'va.jsonl')
    writeCorpus(corpusFile, irs)
    writeRules(rulesFile, rules if rules is not None else syntheticRules(irs))
    utils.writeJsonl(vaFile, [r.toJson() for r in vaRecords()])
    cfg: dict[str, Any] = {
        'seed': 17,
        'theta_sim': 0.2,
        'corpus': {'file': corpusFile},
        'llm': {'backend': 'stub', 'stub_fixtures': rulesFile, 'concurrency_limit': 2},
        'tools': {'cache_dir': shell.pjoin(d, 'tool-cache')},
        'va': {'sources': [{'path': vaFile, 'format': 'jsonl'}]},
        'output': {'db_dir': shell.pjoin(d, 'db'), 'out_dir': shell.pjoin(d, 'out')}
    }
    for k, v in (extra or {}).items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k].update(cast(dict[str, Any], v))
        else:
            cfg[k] = v
    cfgFile = shell.pjoin(d, 'config.toml')
    utils.writeTextFile(cfgFile, toml.dumps(cfg))
    return cfgFile

def readBytes(path: str) -> bytes:
    with open(path, 'rb') as f:
        return f.read()

def treeBytes(d: str) -> dict[str, bytes]:
    """
    All files below d with their content, keyed by relative path.
    """
    res: dict[str, bytes] = {}
    for root, _, files in os.walk(d):
        for name in files:
            p = os.path.join(root, name)
            res[os.path.relpath(p, d)] = readBytes(p)
    return res
