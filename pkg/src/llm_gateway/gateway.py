"""
Uniform access to the chat model: bounded concurrency, retries with exponential
backoff and the Yes/No output probability.
"""
from typing import *
from common.pipelineSupport import PipelineError
from llm_gateway.gateway_types import *
from llm_gateway.stub_backend import StubBackend
import common.log as log
import common.utils as utils
import math
import threading
import time

BACKOFF_BASE_SECONDS = 0.5

def mkBackend(settings: LlmSettings) -> LlmBackend:
    match settings.backend:
        case 'stub':
            if not settings.stubFixtures:
                raise PipelineError.configError('llm.stub_fixtures must be set for the stub backend')
            return StubBackend.fromFile(settings.stubFixtures, settings.stubJitter)
        case 'http':
            from llm_gateway.http_backend import HttpChatBackend
            return HttpChatBackend(settings)

class LlmGateway:
    def __init__(self, backend: LlmBackend, settings: LlmSettings = LlmSettings(),
                 sleep: Callable[[float], None] = time.sleep):
        if settings.concurrencyLimit < 1:
            raise PipelineError.configError('llm.concurrency_limit must be at least 1')
        self.backend = backend
        self.settings = settings
        self.calls = 0
        self.retries = 0
        self.__sleep = sleep
        self.__sem = threading.BoundedSemaphore(settings.concurrencyLimit)
        self.__statsLock = threading.Lock()
    @staticmethod
    def fromSettings(settings: LlmSettings) -> 'LlmGateway':
        return LlmGateway(mkBackend(settings), settings)
    def request(self, userPrompt: str, systemPrompt: str = '', wantLogprobs: bool = False,
                seed: Optional[int] = None, temperature: Optional[float] = None) -> LlmRequest:
        temp = self.settings.temperature if temperature is None else temperature
        return LlmRequest(systemPrompt, userPrompt, temp,
                          self.settings.maxTokens, wantLogprobs, seed)
    def complete(self, req: LlmRequest) -> LlmResponse:
        log.debug(f'LLM request (seed {req.seed}):\n{req.userPrompt}')
        with self.__sem:
            resp = self.__completeWithRetries(req)
        log.debug(f'LLM response from {resp.backend}:\n{resp.text}')
        if req.wantLogprobs and not resp.topTokenLogprobs:
            raise PipelineError('LogprobsUnavailable', f'backend {resp.backend} returned no logprobs')
        return resp
    def __completeWithRetries(self, req: LlmRequest) -> LlmResponse:
        attempt = 0
        while True:
            with self.__statsLock:
                self.calls += 1
            try:
                return self.backend.complete(req, self.settings.deadlineSeconds)
            except TransientFailure as e:
                if attempt >= self.settings.maxRetries:
                    kind = 'RateLimited' if e.rateLimited else 'Transport'
                    raise PipelineError(kind, f'giving up after {attempt + 1} attempts: {e}')
                delay = BACKOFF_BASE_SECONDS * (2 ** attempt)
                log.warn(f'LLM call failed ({utils.shorten(str(e), 80)}), retrying in {delay:.1f}s')
                with self.__statsLock:
                    self.retries += 1
                self.__sleep(delay)
                attempt += 1

def _labelLogprob(lps: TokenLogprobs, label: str) -> Optional[float]:
    found = [lp for tok, lp in lps.items() if tok.strip().lower() == label]
    return max(found) if found else None

def yesProbability(resp: LlmResponse) -> float:
    """
    Two-way softmax over the Yes and No tokens at the first output position. A label
    missing from the map gets the minimum logprob of the map.
    """
    if not resp.topTokenLogprobs:
        raise PipelineError('NoLabelToken', 'response carries no logprobs')
    first = resp.topTokenLogprobs[0]
    lpYes = _labelLogprob(first, 'yes')
    lpNo = _labelLogprob(first, 'no')
    if lpYes is None and lpNo is None:
        raise PipelineError('NoLabelToken', f'no Yes/No token among {sorted(first)}')
    floor = min(first.values())
    d = (lpNo if lpNo is not None else floor) - (lpYes if lpYes is not None else floor)
    if d > 0:
        e = math.exp(-d)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(d))
