"""
Final classification of a target IR: p("Yes") from the first output token, the
threshold theta_out and the predicted CWE-ID.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import *
from common.pipelineSupport import PipelineError
from identifier.guidance import GuidancePrompt, targetJson, describeRetrieved
from ir_corpus.corpus_types import CanonicalIR
from llm_gateway.gateway import LlmGateway, yesProbability
from retrieval.retriever import RetrievedGraph
import common.log as log
import common.utils as utils
import re
import time

P_IDENTIFY = (
    'Please identify whether the following IR contains the vulnerability, and predict the '
    'type (CWE-ID) of the vulnerability. This is a classification task, so please directly '
    'output whether the IR contains the vulnerability with "Yes, No". The output format for '
    'vulnerability identification is {Yes, No}. Moreover, you need to just directly output '
    'the {CWE-ID} without other information.'
)

_CWE_RE = re.compile(r'CWE-[0-9]+', re.I)

@dataclass(frozen=True)
class Prediction:
    irId: str
    pYes: Optional[float]
    verdict: bool
    cweId: Optional[str]
    thetaOut: float
    guidanceUsed: bool
    run: int = 0
    latencySeconds: Optional[float] = None
    diagnostics: list[str] = field(default_factory=list[str])
    configHash: str = ''
    @property
    def scored(self) -> bool:
        return self.pYes is not None
    def toJson(self) -> dict[str, Any]:
        return {'ir_id': self.irId, 'p_yes': self.pYes, 'verdict': self.verdict,
                'cwe_id': self.cweId, 'theta_out': self.thetaOut,
                'guidance_used': self.guidanceUsed, 'run': self.run,
                'latency_seconds': self.latencySeconds, 'diagnostics': list(self.diagnostics),
                'config_hash': self.configHash}
    @staticmethod
    def fromJson(d: dict[str, Any]) -> Prediction:
        p = d.get('p_yes')
        lat = d.get('latency_seconds')
        return Prediction(str(d['ir_id']), None if p is None else float(p), bool(d['verdict']),
                          d.get('cwe_id'), float(d['theta_out']), bool(d['guidance_used']),
                          int(d.get('run', 0)), None if lat is None else float(lat),
                          [str(x) for x in d.get('diagnostics') or []], str(d.get('config_hash', '')))

def decide(pYes: Optional[float], thetaOut: float) -> bool:
    return pYes is not None and pYes >= thetaOut

def cwesInText(text: str) -> list[str]:
    return utils.dedup(m.group(0).upper() for m in _CWE_RE.finditer(text))

def buildIdentifyPrompt(target: CanonicalIR, guide: GuidancePrompt,
                        graphs: list[RetrievedGraph]) -> str:
    parts = [P_IDENTIFY]
    if guide.used:
        parts.append(guide.render())
    parts.append('Target issue report: ' + targetJson(target))
    if graphs:
        parts.append('Reasoning graphs:\n' + describeRetrieved(graphs))
    return '\n\n'.join(parts)

def identify(target: CanonicalIR, guide: GuidancePrompt, graphs: list[RetrievedGraph],
             gateway: LlmGateway, thetaOut: float, seed: Optional[int] = None, run: int = 0,
             configHash: str = '', recordLatency: bool = False) -> Prediction:
    prompt = buildIdentifyPrompt(target, guide, graphs)
    start = time.perf_counter()
    resp = gateway.complete(gateway.request(prompt, wantLogprobs=True, seed=seed))
    latency = time.perf_counter() - start if recordLatency else None
    diagnostics: list[str] = []
    if guide.unparsed:
        diagnostics.append('guidance without step lines')
    pYes: Optional[float]
    try:
        pYes = yesProbability(resp)
    except PipelineError as e:
        if e.kind != 'NoLabelToken':
            raise
        log.warn(f'{target.id}: unscored, {e.msg}')
        diagnostics.append(f'unscored: {e.msg}')
        pYes = None
    cwes = cwesInText(resp.text)
    if len(cwes) > 1:
        diagnostics.append('further CWE ids: ' + ' '.join(cwes[1:]))
    verdict = decide(pYes, thetaOut)
    cwe = cwes[0] if verdict and cwes else None
    log.info(f'{target.id}: p_yes={pYes} verdict={verdict} cwe={cwe}')
    return Prediction(target.id, pYes, verdict, cwe, thetaOut, guide.used, run, latency,
                      diagnostics, configHash)

def unscoredPrediction(target: CanonicalIR, thetaOut: float, err: PipelineError, run: int = 0,
                       configHash: str = '') -> Prediction:
    return Prediction(target.id, None, False, None, thetaOut, False, run, None,
                      [f'failed: {err.kind}'], configHash)
