"""
Joins predictions with the truth of the target corpus and writes the evaluation
artifacts: report.json and the precision-recall curve as CSV.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import *
from common.pipelineSupport import PipelineError
from evaluation.metrics import *
from identifier.identify import Prediction
from ir_corpus.corpus_types import CanonicalIR
import common.log as log
import common.utils as utils
import csv
import io
import statistics

type SubsetName = Literal['rich_text', 'plain_text']

@dataclass
class EvaluationResult:
    perRun: dict[int, MetricsReport]
    mean: MetricsReport
    theta: float
    curve: list[CurvePoint]
    best: CurvePoint
    subsets: dict[str, MetricsReport] = field(default_factory=dict[str, MetricsReport])
    excluded: list[str] = field(default_factory=list[str])
    def toJson(self, configHash: str = '') -> dict[str, Any]:
        return {
            'config_hash': configHash,
            'theta_out': self.theta,
            'mean': self.mean.toJson(),
            'runs': {str(r): m.toJson() for r, m in sorted(self.perRun.items())},
            'best_threshold': {'theta': self.best.theta, 'precision': self.best.precision,
                               'recall': self.best.recall, 'f1': self.best.f1},
            'subsets': {k: v.toJson() for k, v in sorted(self.subsets.items())},
            'excluded': sorted(self.excluded)
        }

def scoredRows(preds: Iterable[Prediction], truth: dict[str, CanonicalIR]) -> tuple[list[ScoredLabel], list[str]]:
    """
    Turns predictions into evaluation rows. Unscored predictions and predictions
    without a labelled truth record are excluded (and returned as the second
    component).
    """
    rows: list[ScoredLabel] = []
    excluded: list[str] = []
    for p in preds:
        t = truth.get(p.irId)
        if t is None or t.labelVul is None:
            log.warn(f'No labelled truth for prediction {p.irId}, excluding it')
            excluded.append(p.irId)
            continue
        if p.pYes is None:
            log.warn(f'Prediction for {p.irId} (run {p.run}) is unscored, excluding it')
            excluded.append(p.irId)
            continue
        rows.append(ScoredLabel(p.irId, p.pYes, t.labelVul, t.cweId, p.cweId,
                                p.latencySeconds, t.hasRichText()))
    return (rows, excluded)

def _meanCurve(curves: list[list[CurvePoint]]) -> list[CurvePoint]:
    res: list[CurvePoint] = []
    for pts in zip(*curves):
        res.append(CurvePoint(pts[0].theta,
                              statistics.fmean(p.precision for p in pts),
                              statistics.fmean(p.recall for p in pts),
                              statistics.fmean(p.f1 for p in pts)))
    return res

def _subsetReport(name: str, rows: list[ScoredLabel], theta: float) -> Optional[MetricsReport]:
    if not rows:
        log.warn(f'Subset {name} is empty, skipping it')
        return None
    try:
        return metricsReport(rows, theta)
    except PipelineError as e:
        if e.kind not in ('SingleClass', 'NoPositiveRows'):
            raise
        log.warn(f'Skipping subset {name}: {e.msg}')
        return None

def evaluatePredictions(preds: list[Prediction], truth: list[CanonicalIR], theta: float,
                        interval: float = 0.05) -> EvaluationResult:
    truthById = {t.id: t for t in truth}
    byRun: dict[int, list[Prediction]] = {}
    for p in preds:
        utils.listDictAdd(byRun, p.run, p)
    if not byRun:
        raise PipelineError('NothingToEvaluate', 'no predictions to evaluate')
    perRun: dict[int, MetricsReport] = {}
    curves: list[list[CurvePoint]] = []
    subsetRuns: dict[str, list[MetricsReport]] = {}
    excluded: list[str] = []
    for run in sorted(byRun):
        rows, exc = scoredRows(byRun[run], truthById)
        excluded.extend(exc)
        if not rows:
            raise PipelineError('NothingToEvaluate', f'run {run} has no scored predictions')
        perRun[run] = metricsReport(rows, theta)
        curves.append(prCurve(rows, interval))
        subsets: dict[SubsetName, list[ScoredLabel]] = {
            'rich_text': [r for r in rows if r.richText],
            'plain_text': [r for r in rows if not r.richText]
        }
        for name, sub in subsets.items():
            rep = _subsetReport(name, sub, theta)
            if rep is not None:
                utils.listDictAdd(subsetRuns, name, rep)
    curve = _meanCurve(curves)
    return EvaluationResult(perRun, repeatedMean(list(perRun.values())), theta, curve, bestPoint(curve),
                            {k: repeatedMean(v) for k, v in subsetRuns.items()},
                            utils.dedup(excluded))

def renderCurveCsv(curve: list[CurvePoint], configHash: str) -> str:
    out = io.StringIO()
    out.write(f'# config_hash: {configHash}\n')
    w = csv.writer(out, lineterminator='\n')
    w.writerow(['theta', 'precision', 'recall', 'f1'])
    for pt in curve:
        w.writerow([repr(pt.theta), repr(pt.precision), repr(pt.recall), repr(pt.f1)])
    return out.getvalue()

def writeEvaluation(res: EvaluationResult, reportPath: str, curvePath: str, configHash: str):
    utils.writeTextFileAtomic(reportPath, utils.dumpJson(res.toJson(configHash)))
    utils.writeTextFileAtomic(curvePath, renderCurveCsv(res.curve, configHash))
    log.info(f'Wrote {reportPath} and {curvePath}')
