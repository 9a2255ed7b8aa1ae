"""
Parses the answers of the agent. A step answer looks like

    Observation: the screenshot shows an alert box
    vulnerability identified: Yes CWE-79
    Action: ScrAnalyzer([SCR2]), CodeAnalyzer([CODE1])

Parsing is line by line and never fails: lines the grammar rejects are either
continuation lines of the observation or skipped with a warning.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import *
from lark import ParseTree
from common.constants import ToolName
from parsers.common import *
from reasoning_graph.graph_types import Verdict, UNDECIDED
import common.log as log
import common.utils as utils
import re

GRAMMAR = grammarPath(__file__, 'step_grammar.lark')
START_SYMBOLS = ['step_line', 'correction_line']

_KEYWORD_LINE_RE = re.compile(r'^(observation|vulnerability\s+identified|action)\b', re.I)
_CWE_IN_TEXT_RE = re.compile(r'CWE-[0-9]+', re.I)
_TAG_PARTS_RE = re.compile(r'(SCR|CODE)([1-9][0-9]*)', re.I)

def _parser():
    return cachedParser(GRAMMAR, START_SYMBOLS)

@dataclass(frozen=True)
class ToolCall:
    tool: ToolName
    tag: str

@dataclass
class StepParse:
    observationText: str = ''
    verdict: Verdict = UNDECIDED
    calls: list[ToolCall] = field(default_factory=list[ToolCall])
    terminatorCalled: bool = False
    @property
    def chosenElements(self) -> list[str]:
        return [c.tag for c in self.calls]
    @property
    def chosenToolPerElement(self) -> dict[str, ToolName]:
        return {c.tag: c.tool for c in self.calls}
    @property
    def terminate(self) -> bool:
        return self.terminatorCalled or self.verdict.isDecided() or not self.calls

def cleanLine(line: str) -> str:
    """
    Strips markdown decoration models like to add: bullets, headings, bold markers.
    """
    s = line.replace('**', '').replace('__', '').strip()
    return s.lstrip('-*#> \t').strip()

def normalizeTag(raw: str) -> str:
    m = _TAG_PARTS_RE.search(raw)
    assert m is not None
    return f'[{m.group(1).upper()}{m.group(2)}]'

def firstCwe(text: str) -> Optional[str]:
    m = _CWE_IN_TEXT_RE.search(text)
    return None if m is None else m.group(0).upper()

def _verdictFrom(t: ParseTree) -> Verdict:
    toks = tokens(t)
    word = toks[0].lower()
    rest = str(toks[1]) if len(toks) > 1 else ''
    match word:
        case 'yes':
            return Verdict('Vul', firstCwe(rest))
        case 'no':
            return Verdict('NotVul')
        case _:
            return UNDECIDED

def _callsFrom(t: ParseTree) -> list[ToolCall]:
    res: list[ToolCall] = []
    for c in t.children:
        call = asTree(c)
        tool = cast(ToolName, str(asToken(call.children[0])))
        tag = call.children[1]
        if tool == 'AgentTerminator':
            res.append(ToolCall(tool, ''))
        elif tag is None:
            log.warn(f'Ignoring {tool}() without a rich-text tag')
        else:
            res.append(ToolCall(tool, normalizeTag(str(tag))))
    return res

def parseStep(text: str) -> StepParse:
    res = StepParse()
    obsLines: list[str] = []
    inObservation = False
    for raw in text.splitlines():
        line = cleanLine(raw)
        if not line:
            continue
        try:
            t = asTree(parseLine(_parser(), line, 'step_line').children[0])
        except ParseError:
            if _KEYWORD_LINE_RE.match(line):
                log.warn(f'Skipping malformed step line: {utils.shorten(line, 80)!r}')
                inObservation = False
            elif inObservation:
                obsLines.append(line)
            else:
                log.debug(f'Ignoring line outside of the observation: {utils.shorten(line, 80)!r}')
            continue
        match t.data:
            case 'observation_line':
                inObservation = True
                first = t.children[0]
                if first is not None:
                    obsLines.append(str(first).strip())
            case 'verdict_line':
                inObservation = False
                res.verdict = _verdictFrom(t)
            case 'action_line':
                inObservation = False
                for c in _callsFrom(t):
                    if c.tool == 'AgentTerminator':
                        res.terminatorCalled = True
                    else:
                        res.calls.append(c)
            case x:
                raise ValueError(f'Unexpected step line: {x}')
    res.observationText = ' '.join(obsLines).strip()
    if not res.calls and not res.terminatorCalled:
        log.debug('Step without parseable actions, treating it as termination')
    return res

def parseCorrection(text: str) -> dict[str, str]:
    """
    Parses lines of the form "<node id>: <corrected text>". Other lines are ignored;
    a later line for the same node wins.
    """
    res: dict[str, str] = {}
    for raw in text.splitlines():
        line = cleanLine(raw)
        if not line:
            continue
        try:
            t = parseLine(_parser(), line, 'correction_line')
        except ParseError:
            log.debug(f'Ignoring correction line {utils.shorten(line, 80)!r}')
            continue
        nodeId = str(asToken(t.children[0]))
        newText = t.children[1]
        if newText is None or not str(newText).strip():
            continue
        res[nodeId] = str(newText).strip()
    return res
