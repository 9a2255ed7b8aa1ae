"""
Analyzers behind an HTTP endpoint: the payload is POSTed as {"payload": ...} and the
answer is read from {"text": ...}.
"""
from typing import *
from common.pipelineSupport import PipelineError
from tool_adapters.stub_tools import SidecarScrAnalyzer, KeywordCodeAnalyzer
from tool_adapters.tools import ToolBackend, ToolBox, ToolSettings
import requests

class HttpToolBackend:
    def __init__(self, endpoint: str, timeout: float, session: Optional[requests.Session] = None):
        if not endpoint:
            raise PipelineError.configError('http tool backend needs an endpoint')
        self.endpoint = endpoint
        self.timeout = timeout
        self.session = session or requests.Session()
        self.calls = 0
    def analyze(self, payload: str) -> str:
        self.calls += 1
        try:
            resp = self.session.post(self.endpoint, json={'payload': payload}, timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
        except (requests.RequestException, ValueError) as e:
            raise PipelineError('ToolBackendUnavailable', f'{self.endpoint}: {e}')
        text = data.get('text') if isinstance(data, dict) else None
        if not isinstance(text, str):
            raise PipelineError('ToolBackendUnavailable', f'{self.endpoint}: answer has no text field')
        return text

def mkToolBox(settings: ToolSettings, defaultCacheDir: Optional[str] = None) -> ToolBox:
    scr: ToolBackend
    code: ToolBackend
    match settings.scrBackend:
        case 'stub':
            scr = SidecarScrAnalyzer(settings.sidecarDir)
        case 'http':
            scr = HttpToolBackend(settings.scrEndpoint, settings.timeoutSeconds)
    match settings.codeBackend:
        case 'stub':
            code = KeywordCodeAnalyzer()
        case 'http':
            code = HttpToolBackend(settings.codeEndpoint, settings.timeoutSeconds)
    return ToolBox(scr, code, settings.cacheDir or defaultCacheDir)
