"""
Classification metrics of the identification stage. Ranking metrics and the
per-label counts come from scikit-learn.
"""
from __future__ import annotations
from dataclasses import dataclass, fields
from typing import *
from sklearn.metrics import precision_recall_fscore_support, roc_auc_score, average_precision_score
from common.pipelineSupport import PipelineError
import statistics

@dataclass(frozen=True)
class ScoredLabel:
    irId: str
    pYes: float
    truthVul: bool
    truthCwe: Optional[str] = None
    predCwe: Optional[str] = None
    latencySeconds: Optional[float] = None
    richText: bool = False
    def __post_init__(self):
        if not 0.0 <= self.pYes <= 1.0:
            raise ValueError(f'{self.irId}: p_yes {self.pYes} outside [0,1]')
        if self.latencySeconds is not None and self.latencySeconds < 0:
            raise ValueError(f'{self.irId}: negative latency')

@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    auroc: float
    auprc: float
    macroP: float
    macroR: float
    macroF1: float
    meanLatency: Optional[float] = None
    nRuns: int = 1
    def toJson(self) -> dict[str, Any]:
        return {'precision': self.precision, 'recall': self.recall, 'f1': self.f1,
                'auroc': self.auroc, 'auprc': self.auprc, 'macro_p': self.macroP,
                'macro_r': self.macroR, 'macro_f1': self.macroF1,
                'mean_latency': self.meanLatency, 'n_runs': self.nRuns}

@dataclass(frozen=True)
class CurvePoint:
    theta: float
    precision: float
    recall: float
    f1: float

def _truths(rows: Sequence[ScoredLabel]) -> list[int]:
    return [1 if r.truthVul else 0 for r in rows]

def _checkTwoClasses(rows: Sequence[ScoredLabel]):
    ys = set(_truths(rows))
    if len(ys) < 2:
        raise PipelineError('SingleClass', f'{len(rows)} rows with a single truth class')

def classificationMetrics(rows: Sequence[ScoredLabel], theta: float) -> tuple[float, float, float]:
    if not rows:
        raise ValueError('classificationMetrics needs at least one row')
    preds = [1 if r.pYes >= theta else 0 for r in rows]
    p, r, f, _ = precision_recall_fscore_support(_truths(rows), preds, average='binary',
                                                 pos_label=1, zero_division=0)
    return (float(p), float(r), float(f))

def auroc(rows: Sequence[ScoredLabel]) -> float:
    """
    Area under the ROC curve; tied scores count one half.
    """
    _checkTwoClasses(rows)
    return float(roc_auc_score(_truths(rows), [r.pYes for r in rows]))

def auprc(rows: Sequence[ScoredLabel]) -> float:
    """
    Step-wise area under the precision-recall curve over all distinct scores.
    """
    _checkTwoClasses(rows)
    return float(average_precision_score(_truths(rows), [r.pYes for r in rows]))

def thetaGrid(interval: float) -> list[float]:
    if not 0.0 < interval < 1.0:
        raise PipelineError.configError(f'pr interval must be in (0,1), got {interval}')
    n = int(round(1.0 / interval))
    grid = [round(i * interval, 10) for i in range(n + 1)]
    return [t for t in grid if t <= 1.0]

def prCurve(rows: Sequence[ScoredLabel], interval: float) -> list[CurvePoint]:
    return [CurvePoint(t, *classificationMetrics(rows, t)) for t in thetaGrid(interval)]

def bestPoint(curve: Sequence[CurvePoint]) -> CurvePoint:
    """
    The grid point with the highest F1, the lowest theta among equal ones.
    """
    best: Optional[CurvePoint] = None
    for pt in sorted(curve, key=lambda c: c.theta):
        if best is None or pt.f1 > best.f1:
            best = pt
    assert best is not None
    return best

def bestThreshold(rows: Sequence[ScoredLabel], interval: float) -> CurvePoint:
    return bestPoint(prCurve(rows, interval))

def macroCweMetrics(rows: Sequence[ScoredLabel]) -> tuple[float, float, float]:
    """
    One-vs-rest precision and recall per CWE label occurring in the truths of the
    positive rows, averaged without weights. F1 is the harmonic mean of the averages.
    """
    pos = [r for r in rows if r.truthVul and r.truthCwe is not None]
    if not pos:
        raise PipelineError('NoPositiveRows', 'no positive rows with a CWE label')
    labels = sorted({cast(str, r.truthCwe) for r in pos})
    truth = [cast(str, r.truthCwe) for r in pos]
    pred = [r.predCwe or '' for r in pos]
    ps, rs, _, _ = precision_recall_fscore_support(truth, pred, labels=labels, average=None,
                                                   zero_division=0)
    mp = float(sum(ps) / len(labels))
    mr = float(sum(rs) / len(labels))
    mf = 0.0 if mp + mr == 0.0 else 2 * mp * mr / (mp + mr)
    return (mp, mr, mf)

def meanLatency(rows: Sequence[ScoredLabel]) -> Optional[float]:
    xs = [r.latencySeconds for r in rows if r.latencySeconds is not None]
    return statistics.fmean(xs) if xs else None

def metricsReport(rows: Sequence[ScoredLabel], theta: float) -> MetricsReport:
    p, r, f = classificationMetrics(rows, theta)
    mp, mr, mf = macroCweMetrics(rows)
    return MetricsReport(p, r, f, auroc(rows), auprc(rows), mp, mr, mf, meanLatency(rows), 1)

def repeatedMean(reports: Sequence[MetricsReport]) -> MetricsReport:
    if not reports:
        raise ValueError('repeatedMean needs at least one report')
    vals: dict[str, Any] = {}
    for f in fields(MetricsReport):
        if f.name == 'nRuns':
            continue
        xs = [getattr(r, f.name) for r in reports if getattr(r, f.name) is not None]
        vals[f.name] = statistics.fmean(xs) if xs else None
    return MetricsReport(nRuns=len(reports), **vals)
