"""
Generation of the guidance steps from the graphs retrieved for a target IR.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import *
from ir_corpus.corpus_types import CanonicalIR
from llm_gateway.gateway import LlmGateway
from parsers.common import *
from reasoner.step_parser import cleanLine
from retrieval.retriever import RetrievedGraph
import common.log as log
import common.utils as utils

GRAMMAR = grammarPath(__file__, 'guidance_grammar.lark')

GUIDE_INSTRUCTIONS = """\
Below are reasoning graphs of earlier issue reports that resemble the target issue report.
Based on them, write the steps for analyzing the target issue report for a vulnerability.
Every step is one instruction and refers to the rich-text elements of the target where
useful. Answer with one line per step: "STEP-1: <instruction>", "STEP-2: <instruction>", ..."""

@dataclass(frozen=True)
class GuidancePrompt:
    steps: list[str] = field(default_factory=list[str])
    sourceGraphs: list[str] = field(default_factory=list[str])
    unparsed: bool = False
    @property
    def used(self) -> bool:
        return len(self.steps) > 0
    def render(self) -> str:
        return '\n'.join(f'STEP-{i + 1}: {s}' for i, s in enumerate(self.steps))

EMPTY_GUIDANCE = GuidancePrompt()

def targetJson(ir: CanonicalIR) -> str:
    """
    The target as shown to the model; labels are never included.
    """
    d = ir.toJson()
    return utils.canonicalJson({k: d[k] for k in ['id', 'Title', 'Content', 'Rich-Text']})

def describeRetrieved(graphs: list[RetrievedGraph]) -> str:
    return '\n'.join(f'Graph of {g.reserved.originIr}: {g.reserved.description}' for g in graphs)

def buildGuidancePrompt(graphs: list[RetrievedGraph], target: CanonicalIR) -> str:
    return '\n\n'.join([
        GUIDE_INSTRUCTIONS,
        'Reasoning graphs:\n' + describeRetrieved(graphs),
        'Target issue report: ' + targetJson(target)
    ])

def parseGuidance(text: str) -> tuple[list[str], bool]:
    """
    Returns the steps and whether the answer had to be taken as a whole because no
    step line was found. Lines after a step line continue that step.
    """
    parser = cachedParser(GRAMMAR, ['guidance_line'])
    steps: list[str] = []
    for raw in text.splitlines():
        line = cleanLine(raw)
        if not line:
            continue
        try:
            t = parseLine(parser, line, 'guidance_line')
        except ParseError:
            if steps:
                steps[-1] = (steps[-1] + ' ' + line).strip()
            else:
                log.debug(f'Ignoring guidance preamble {utils.shorten(line, 60)!r}')
            continue
        body = t.children[1]
        steps.append('' if body is None else str(body).strip())
    steps = [s for s in steps if s]
    if steps:
        return (steps, False)
    raw = text.strip()
    log.warn(f'Guidance without STEP lines, using the raw answer ({len(raw)} chars)')
    return ([raw] if raw else [], True)

def generateGuidance(graphs: list[RetrievedGraph], target: CanonicalIR, gateway: LlmGateway,
                     seed: Optional[int] = None) -> GuidancePrompt:
    if not graphs:
        return EMPTY_GUIDANCE
    resp = gateway.complete(gateway.request(buildGuidancePrompt(graphs, target), seed=seed))
    steps, unparsed = parseGuidance(resp.text)
    return GuidancePrompt(steps, [g.reserved.originIr for g in graphs], unparsed)
