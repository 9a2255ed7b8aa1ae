"""
Deterministic offline backend. Rules are read from a JSON lines file; each line has
the keys pattern (a regular expression searched in the user prompt),
response_text and first_token_logprobs (a token-to-logprob map or null).
The first matching rule wins.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import *
from common.pipelineSupport import PipelineError
from llm_gateway.gateway_types import *
import common.log as log
import common.utils as utils
import numpy as np
import re
import threading

_ECHO_RE = re.compile(r'Output exactly: (.+?)\s*$', re.S)

@dataclass(frozen=True)
class StubRule:
    pattern: re.Pattern[str]
    responseText: str
    firstTokenLogprobs: Optional[TokenLogprobs]
    @staticmethod
    def fromJson(d: dict[str, Any]) -> StubRule:
        lps = d.get('first_token_logprobs')
        return StubRule(re.compile(str(d['pattern']), re.S), str(d['response_text']),
                        None if lps is None else {str(k): float(v) for k, v in lps.items()})

def stubRuleJson(pattern: str, responseText: str,
                 logprobs: Optional[TokenLogprobs] = None) -> dict[str, Any]:
    return {'pattern': pattern, 'response_text': responseText, 'first_token_logprobs': logprobs}

class StubBackend:
    name = 'stub'
    def __init__(self, rules: list[StubRule], jitter: float = 0.0):
        self.rules = rules
        self.jitter = jitter
        self.calls = 0
        self.__lock = threading.Lock()
    @staticmethod
    def fromFile(path: str, jitter: float = 0.0) -> StubBackend:
        rules = [StubRule.fromJson(d) for d in utils.readJsonl(path)]
        log.info(f'Loaded {len(rules)} stub rules from {path}')
        return StubBackend(rules, jitter)
    def __jitter(self, lps: TokenLogprobs, req: LlmRequest) -> TokenLogprobs:
        if self.jitter <= 0:
            return dict(lps)
        seq = np.random.SeedSequence([req.seed or 0, utils.stableKey(req.userPrompt)])
        rng = np.random.default_rng(seq)
        toks = sorted(lps)
        noise = rng.normal(0.0, self.jitter, size=len(toks))
        return {t: min(0.0, lps[t] + float(n)) for t, n in zip(toks, noise)}
    def complete(self, req: LlmRequest, deadlineSeconds: float) -> LlmResponse:
        with self.__lock:
            self.calls += 1
        for r in self.rules:
            if r.pattern.search(req.userPrompt):
                lps = None if r.firstTokenLogprobs is None else [self.__jitter(r.firstTokenLogprobs, req)]
                return LlmResponse(r.responseText, lps, self.name)
        m = _ECHO_RE.search(req.userPrompt)
        if m is not None:
            text = m.group(1)
            return LlmResponse(text, [{text: 0.0}], self.name)
        raise PipelineError('BackendRejected', 'no stub rule matches prompt '
                            f'{utils.shorten(req.userPrompt[-120:], 120)!r}')
