from __future__ import annotations
from dataclasses import dataclass
from typing import *

type BackendKind = Literal['http', 'stub']

DEFAULT_TEMPERATURE = 0.3

@dataclass(frozen=True)
class LlmSettings:
    backend: BackendKind = 'stub'
    endpointUrl: str = ''
    apiKeyEnvVar: str = 'IRTRIAGE_API_KEY'
    modelName: str = ''
    temperature: float = DEFAULT_TEMPERATURE
    maxTokens: int = 256
    maxRetries: int = 3
    deadlineSeconds: float = 60.0
    concurrencyLimit: int = 4
    stubFixtures: str = ''
    stubJitter: float = 0.0

@dataclass(frozen=True)
class LlmRequest:
    systemPrompt: str
    userPrompt: str
    temperature: float = DEFAULT_TEMPERATURE
    maxTokens: int = 256
    wantLogprobs: bool = False
    seed: Optional[int] = None

type TokenLogprobs = dict[str, float]

@dataclass(frozen=True)
class LlmResponse:
    text: str
    topTokenLogprobs: Optional[list[TokenLogprobs]]
    backend: str

class TransientFailure(Exception):
    """
    Raised by backends for failures worth retrying (connection problems, timeouts,
    server errors, rate limits).
    """
    def __init__(self, msg: str, rateLimited: bool = False):
        super().__init__(msg)
        self.rateLimited = rateLimited

class LlmBackend(Protocol):
    name: str
    def complete(self, req: LlmRequest, deadlineSeconds: float) -> LlmResponse: ...
