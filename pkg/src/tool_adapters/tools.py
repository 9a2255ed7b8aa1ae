"""
The agent's actions: ScrAnalyzer (screenshot to text), CodeAnalyzer (code to
description) and AgentTerminator. Analyzer outputs are cached by tool and payload hash.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import *
from common.constants import *
from common.pipelineSupport import PipelineError
from ir_corpus.corpus_types import CanonicalIR, RichTextElement, TAG_RE
import common.log as log
import common.utils as utils
import shell
import threading

type ToolBackendKind = Literal['http', 'stub']

@dataclass(frozen=True)
class ToolSettings:
    scrBackend: ToolBackendKind = 'stub'
    codeBackend: ToolBackendKind = 'stub'
    scrEndpoint: str = ''
    codeEndpoint: str = ''
    sidecarDir: str = ''
    cacheDir: str = ''
    timeoutSeconds: float = 30.0

@dataclass(frozen=True)
class ToolResult:
    tool: ToolName
    inputTag: str
    outputText: str

class ToolBackend(Protocol):
    calls: int
    def analyze(self, payload: str) -> str: ...

class ToolBox:
    def __init__(self, scr: ToolBackend, code: ToolBackend, cacheDir: Optional[str] = None):
        self.backends: dict[RichTextKind, ToolBackend] = {'SCR': scr, 'CODE': code}
        self.cacheDir = cacheDir or None
        self.__cache: dict[tuple[str, str], str] = {}
        self.__lock = threading.Lock()
        if self.cacheDir:
            shell.mkdirs(self.cacheDir)
    def __cacheFile(self, tool: str, digest: str) -> Optional[str]:
        if self.cacheDir is None:
            return None
        return shell.pjoin(self.cacheDir, f'{tool}-{digest}.txt')
    def __lookup(self, tool: str, digest: str) -> Optional[str]:
        with self.__lock:
            x = self.__cache.get((tool, digest))
        if x is not None:
            return x
        f = self.__cacheFile(tool, digest)
        if f is not None and shell.isFile(f):
            x = utils.readTextFile(f)
            with self.__lock:
                self.__cache[(tool, digest)] = x
            return x
        return None
    def __store(self, tool: str, digest: str, text: str):
        with self.__lock:
            self.__cache[(tool, digest)] = text
        f = self.__cacheFile(tool, digest)
        if f is not None:
            utils.writeTextFileAtomic(f, text)
    def runTool(self, tool: ToolName, element: Optional[RichTextElement]) -> ToolResult:
        if tool == 'AgentTerminator':
            return ToolResult(tool, '', TERMINATE_SENTINEL)
        if element is None:
            raise PipelineError('KindMismatch', f'{tool} needs a rich-text element')
        expected: RichTextKind = 'SCR' if tool == 'ScrAnalyzer' else 'CODE'
        if element.kind != expected:
            raise PipelineError('KindMismatch', f'{tool} cannot analyze {element.tag}')
        digest = utils.sha256Hex(element.payload)
        cached = self.__lookup(tool, digest)
        if cached is not None:
            return ToolResult(tool, element.tag, cached)
        try:
            text = self.backends[expected].analyze(element.payload)
        except PipelineError:
            raise
        except Exception as e:
            raise PipelineError('ToolBackendUnavailable', f'{tool} failed on {element.tag}: {e}')
        self.__store(tool, digest, text)
        return ToolResult(tool, element.tag, text)
    def toolOutput(self, element: RichTextElement) -> str:
        """
        Output of the analyzer for element, or the empty string (with a warning) when
        the backend is unavailable.
        """
        try:
            return self.runTool(TOOL_FOR_KIND[element.kind], element).outputText
        except PipelineError as e:
            if e.kind != 'ToolBackendUnavailable':
                raise
            log.warn(f'No tool output for {element.tag}: {e.msg}')
            return ''

def flattenIr(ir: CanonicalIR, tools: ToolBox, kinds: Iterable[RichTextKind] = ALL_KINDS) -> str:
    """
    Returns the content with every tag followed inline by the output of its tool,
    e.g. "see [CODE1] (code snippet in php: ...)". Tags of other kinds stay bare.
    """
    expand = set(kinds)
    outputs: dict[str, str] = {}
    for e in ir.richText:
        if e.kind in expand:
            outputs[e.tag] = tools.toolOutput(e)
    def repl(m: Any) -> str:
        tag = m.group(0)
        if tag not in outputs:
            return tag
        return f'{tag} ({outputs[tag]})'
    return TAG_RE.sub(repl, ir.content)
