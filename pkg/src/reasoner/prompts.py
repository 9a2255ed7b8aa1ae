"""
Prompt templates of the agent loop and of the factual-error correction.
"""
from typing import *
from ir_corpus.corpus_types import CanonicalIR
from reasoning_graph.graph_types import Path
from reasoning_graph.graph_paths import describePath
from tool_adapters.tools import ToolResult
from va_knowledge.va_store import GoldenHit, MAX_GOLDEN
import common.utils as utils

REASON_INSTRUCTIONS = """\
Please think step by step. For each step, you need to select multiple rich-text elements
that relate to the vulnerability. Then, you should identify whether this IR contains the
vulnerability and output an "Observation" based on context information. It would be best
to choose the "Action" from "Tools" to control the reasoning into the next "Observation"
after thinking."""

DEFINITIONS = """\
Definitions:
- Observation: what you learned from the IR and the tool results so far.
- Action: a tool call that analyzes one rich-text element, or the call that ends the reasoning.
Tools:
- ScrAnalyzer([SCRn]): returns the page elements and text visible in screenshot [SCRn].
- CodeAnalyzer([CODEn]): returns a description of the code snippet [CODEn].
- AgentTerminator(): ends the reasoning when nothing new can be learned."""

STEP_FORMAT = """\
Answer in exactly this format:
Observation: <your observation>
vulnerability identified: <Yes|No|Undecided> <CWE-ID if Yes>
Action: <Tool>(<tag>), <Tool>(<tag>), ...
Use AgentTerminator() once you have decided."""

INCLUSION_NOTE = ('Note of inclusion relationship: We suggest you first analyze the text, '
                  'then explore the page screenshot [SCR], and finally analyze the code snippets [CODE].')

def richTextTable(ir: CanonicalIR) -> str:
    if not ir.richText:
        return '(none)'
    return '\n'.join(f'{e.tag} {e.kind}: {utils.shorten(e.payload, 200)}' for e in ir.richText)

def exploredLine(explored: Sequence[str]) -> str:
    return 'Explored elements: ' + (' '.join(explored) if explored else 'none')

def buildReasonPrompt(ir: CanonicalIR, context: Optional[Path], latest: Optional[ToolResult],
                      explored: Sequence[str] = (), inclusionNote: bool = True) -> str:
    """
    The last line always lists the elements explored on the context path (in
    exploration order), including the one analyzed by latest.
    """
    parts = [
        REASON_INSTRUCTIONS,
        f'Issue: {ir.id}',
        f'Title: {ir.title}',
        f'Content: {ir.content}',
        'Rich text:\n' + richTextTable(ir),
        DEFINITIONS,
        STEP_FORMAT
    ]
    if inclusionNote:
        parts.append(INCLUSION_NOTE)
    if context is not None:
        parts.append('Reasoning so far: ' + describePath(context))
    if latest is not None:
        parts.append(f'Latest tool result: {latest.tool}({latest.inputTag}) returned: {latest.outputText}')
    parts.append(exploredLine(explored))
    return '\n\n'.join(parts)

CORRECTION_INSTRUCTIONS = """\
The reasoning path below was produced while analyzing an issue report and may contain
factual errors, for example a wrong vulnerability type. Check every observation against
the vulnerability knowledge. For each observation that needs a correction, answer with
one line "<observation id>: <corrected text>". Do not add or remove observations."""

def buildCorrectionPrompt(path: Path, golden: list[GoldenHit]) -> str:
    know = '\n'.join(f'- [{h.record.source}/{h.record.key}] {h.record.text}'
                     for h in golden[:MAX_GOLDEN])
    nodes = '\n'.join(f'{o.id}: {o.text}' for o in path.nodes)
    return '\n\n'.join([
        CORRECTION_INSTRUCTIONS,
        'Knowledge:\n' + know,
        'Path: ' + describePath(path),
        'Observations:\n' + nodes
    ])
