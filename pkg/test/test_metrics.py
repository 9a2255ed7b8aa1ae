from evaluation.metrics import *
import numpy as np
import pytest

def mkRows() -> list[ScoredLabel]:
    """
    8 positives (6 at 0.9, 2 at 0.2) and 12 negatives (2 at 0.8, 10 at 0.1).
    At theta 0.55: TP 6, FN 2, FP 2, TN 10.
    """
    cwes = [('CWE-79', 'CWE-79')] * 4 + [('CWE-89', 'CWE-89'), ('CWE-89', 'CWE-79')]
    rows = [ScoredLabel(f'p/x#{i}', 0.9, True, t, p) for i, (t, p) in enumerate(cwes)]
    rows += [ScoredLabel('p/x#6', 0.2, True, 'CWE-79'), ScoredLabel('p/x#7', 0.2, True, 'CWE-89')]
    rows += [ScoredLabel(f'n/x#{i}', 0.8, False) for i in range(2)]
    rows += [ScoredLabel(f'n/x#{i}', 0.1, False) for i in range(2, 12)]
    return rows

def aurocOracle(rows: list[ScoredLabel]) -> float:
    pos = [r.pYes for r in rows if r.truthVul]
    neg = [r.pYes for r in rows if not r.truthVul]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))

def auprcOracle(rows: list[ScoredLabel]) -> float:
    nPos = len([r for r in rows if r.truthVul])
    res = 0.0
    prevRecall = 0.0
    for t in sorted({r.pYes for r in rows}, reverse=True):
        sel = [r for r in rows if r.pYes >= t]
        tp = len([r for r in sel if r.truthVul])
        recall = tp / nPos
        res += (recall - prevRecall) * tp / len(sel)
        prevRecall = recall
    return res

def test_classificationMetrics():
    p, r, f = classificationMetrics(mkRows(), 0.55)
    assert (p, r, f) == pytest.approx((0.75, 0.75, 0.75), abs=1e-12)

def test_classificationNoPositivePredictions():
    assert classificationMetrics(mkRows(), 0.95) == (0.0, 0.0, 0.0)

def test_thresholdIsInclusive():
    rows = [ScoredLabel('a/b#1', 0.5, True), ScoredLabel('a/b#2', 0.4, False)]
    assert classificationMetrics(rows, 0.5) == pytest.approx((1.0, 1.0, 1.0))

def test_auroc():
    rows = mkRows()
    assert auroc(rows) == pytest.approx(aurocOracle(rows), abs=1e-12)
    assert auroc(rows) == pytest.approx(92 / 96, abs=1e-12)

def test_aurocTies():
    rows = [ScoredLabel(f'a/b#{i}', 0.5, i % 2 == 0) for i in range(6)]
    assert auroc(rows) == pytest.approx(0.5, abs=1e-12)

def test_auprc():
    rows = mkRows()
    assert auprc(rows) == pytest.approx(auprcOracle(rows), abs=1e-12)
    assert auprc(rows) == pytest.approx(0.95, abs=1e-12)

def test_randomOracles():
    rng = np.random.default_rng(3)
    checked = 0
    for k in range(200):
        n = int(rng.integers(2, 51))
        # one decimal place, so that tied scores occur
        scores = np.round(rng.random(n), 1)
        truths = rng.random(n) < 0.4
        if truths.all() or not truths.any():
            continue
        rows = [ScoredLabel(f'r/x#{k}-{i}', float(s), bool(t)) for i, (s, t) in enumerate(zip(scores, truths))]
        assert auroc(rows) == pytest.approx(aurocOracle(rows), abs=1e-9)
        assert auprc(rows) == pytest.approx(auprcOracle(rows), abs=1e-9)
        checked += 1
    assert checked > 150

def test_singleClass():
    rows = [r for r in mkRows() if r.truthVul]
    for f in [auroc, auprc]:
        with pytest.raises(PipelineError) as err:
            f(rows)
        assert err.value.kind == 'SingleClass'

def test_thetaGrid():
    grid = thetaGrid(0.05)
    assert len(grid) == 21
    assert grid[0] == 0.0 and grid[-1] == 1.0
    assert grid[3] == 0.15
    assert thetaGrid(0.3) == [0.0, 0.3, 0.6, 0.9]
    for bad in [0.0, 1.0, -0.1]:
        with pytest.raises(PipelineError) as err:
            thetaGrid(bad)
        assert err.value.kind == 'ConfigError'

def test_prCurveAndBestThreshold():
    rows = mkRows()
    curve = prCurve(rows, 0.05)
    assert [pt.theta for pt in curve] == thetaGrid(0.05)
    assert curve[0] == CurvePoint(0.0, 0.4, 1.0, pytest.approx(0.8 / 1.4))
    assert curve[-1] == CurvePoint(1.0, 0.0, 0.0, 0.0)
    best = bestThreshold(rows, 0.05)
    # F1 is highest for 0.1 < theta <= 0.2, the lowest such grid point wins
    assert best.theta == 0.15
    assert best.f1 == pytest.approx(1.6 / 1.8, abs=1e-12)

def test_bestPointTies():
    curve = [CurvePoint(0.5, 1.0, 0.5, 0.6), CurvePoint(0.2, 0.5, 1.0, 0.6), CurvePoint(0.9, 1.0, 0.1, 0.2)]
    assert bestPoint(curve).theta == 0.2

def test_macroCweMetrics():
    mp, mr, mf = macroCweMetrics(mkRows())
    # CWE-79: P 4/5, R 4/5; CWE-89: P 1/1, R 1/3
    assert mp == pytest.approx((0.8 + 1.0) / 2, abs=1e-12)
    assert mr == pytest.approx((0.8 + 1 / 3) / 2, abs=1e-12)
    assert mf == pytest.approx(2 * mp * mr / (mp + mr), abs=1e-12)

def test_noPositiveRows():
    rows = [r for r in mkRows() if not r.truthVul]
    with pytest.raises(PipelineError) as err:
        macroCweMetrics(rows)
    assert err.value.kind == 'NoPositiveRows'

def test_meanLatency():
    assert meanLatency(mkRows()) is None
    rows = [ScoredLabel('a/b#1', 0.5, True, latencySeconds=1.0),
            ScoredLabel('a/b#2', 0.5, True, latencySeconds=2.0),
            ScoredLabel('a/b#3', 0.5, True)]
    assert meanLatency(rows) == 1.5

def test_scoredLabelValidation():
    with pytest.raises(ValueError):
        ScoredLabel('a/b#1', 1.5, True)
    with pytest.raises(ValueError):
        ScoredLabel('a/b#1', 0.5, True, latencySeconds=-1.0)

def test_metricsReport():
    rep = metricsReport(mkRows(), 0.55)
    assert (rep.precision, rep.recall, rep.f1) == pytest.approx((0.75, 0.75, 0.75))
    assert rep.auroc == pytest.approx(92 / 96)
    assert rep.nRuns == 1
    assert rep.meanLatency is None
    assert set(rep.toJson()) == {'precision', 'recall', 'f1', 'auroc', 'auprc', 'macro_p', 'macro_r',
                                 'macro_f1', 'mean_latency', 'n_runs'}

def test_repeatedMean():
    a = MetricsReport(0.5, 0.5, 0.5, 0.6, 0.7, 0.1, 0.2, 0.3, None)
    b = MetricsReport(1.0, 0.0, 0.0, 0.8, 0.9, 0.3, 0.4, 0.5, 2.0)
    m = repeatedMean([a, b])
    assert m == MetricsReport(0.75, 0.25, 0.25, pytest.approx(0.7), pytest.approx(0.8),
                              pytest.approx(0.2), pytest.approx(0.3), pytest.approx(0.4), 2.0, 2)
    assert repeatedMean([a]) == a
    with pytest.raises(ValueError):
        repeatedMean([])
