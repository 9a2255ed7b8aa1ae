"""
Backend for OpenAI-compatible chat-completion endpoints.
"""
from typing import *
from openai import OpenAI
from common.pipelineSupport import PipelineError
from llm_gateway.gateway_types import *
import openai
import os

TOP_LOGPROBS = 5

class HttpChatBackend:
    name = 'http'
    def __init__(self, settings: LlmSettings):
        apiKey = os.environ.get(settings.apiKeyEnvVar)
        if not apiKey:
            raise PipelineError.configError(f'environment variable {settings.apiKeyEnvVar} '
                                            'with the API key is not set')
        if not settings.modelName:
            raise PipelineError.configError('llm.model_name must be set for the http backend')
        self.modelName = settings.modelName
        self._client = OpenAI(api_key=apiKey, base_url=settings.endpointUrl or None,
                              max_retries=0, timeout=settings.deadlineSeconds)
    def complete(self, req: LlmRequest, deadlineSeconds: float) -> LlmResponse:
        messages: list[Any] = []
        if req.systemPrompt:
            messages.append({'role': 'system', 'content': req.systemPrompt})
        messages.append({'role': 'user', 'content': req.userPrompt})
        kwargs: dict[str, Any] = {}
        if req.wantLogprobs:
            kwargs['logprobs'] = True
            kwargs['top_logprobs'] = TOP_LOGPROBS
        if req.seed is not None:
            kwargs['seed'] = req.seed
        try:
            resp = self._client.chat.completions.create(
                model=self.modelName,
                messages=messages,
                temperature=req.temperature,
                max_tokens=req.maxTokens,
                timeout=deadlineSeconds,
                **kwargs
            )
        except openai.RateLimitError as e:
            raise TransientFailure(str(e), rateLimited=True)
        except openai.APIConnectionError as e:
            # includes timeouts
            raise TransientFailure(str(e))
        except openai.APIStatusError as e:
            if e.status_code >= 500:
                raise TransientFailure(f'status {e.status_code}: {e}')
            raise PipelineError('BackendRejected', f'status {e.status_code}: {e}')
        choice = resp.choices[0]
        text = choice.message.content or ''
        lps: Optional[list[TokenLogprobs]] = None
        if choice.logprobs is not None and choice.logprobs.content:
            lps = [{t.token: t.logprob for t in pos.top_logprobs} for pos in choice.logprobs.content]
        return LlmResponse(text, lps, self.name)
