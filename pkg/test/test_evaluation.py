from evaluation.evaluate import *
from common.testsupport import mkIr, elem
import common.utils as utils
import json
import pytest
import shell

THETA = 0.55

# (id, p_yes, truth, truth cwe, predicted cwe, rich text)
CASES: list[tuple[str, float, bool, Optional[str], Optional[str], bool]] = \
    [(f'p/x#{i}', 0.9, True, 'CWE-79', 'CWE-79', True) for i in range(4)] + [
    ('p/x#4', 0.9, True, 'CWE-89', 'CWE-89', False),
    ('p/x#5', 0.9, True, 'CWE-89', 'CWE-79', False),
    ('p/x#6', 0.2, True, 'CWE-79', None, False),
    ('p/x#7', 0.2, True, 'CWE-89', None, False)] + \
    [(f'n/x#{i}', 0.8, False, None, None, True) for i in range(2)] + \
    [(f'n/x#{i}', 0.1, False, None, None, i < 6) for i in range(2, 12)]

def truthIrs(rich: bool = True) -> list[CanonicalIR]:
    res: list[CanonicalIR] = []
    for irId, _, vul, cwe, _, r in CASES:
        if r and rich:
            res.append(mkIr(irId, 'a report', 'see [SCR1]', [elem('[SCR1]', 'a screenshot')],
                            labelVul=vul, cweId=cwe))
        else:
            res.append(mkIr(irId, 'a report', 'plain text', labelVul=vul, cweId=cwe))
    return res

def predictions(run: int = 0) -> list[Prediction]:
    return [Prediction(irId, p, p >= THETA, pred if p >= THETA else None, THETA, False, run)
            for irId, p, _, _, pred, _ in CASES]

def test_scoredRows():
    truth = {t.id: t for t in truthIrs()}
    rows, excluded = scoredRows(predictions(), truth)
    assert len(rows) == 20 and excluded == []
    assert rows[0] == ScoredLabel('p/x#0', 0.9, True, 'CWE-79', 'CWE-79', None, True)
    assert rows[6] == ScoredLabel('p/x#6', 0.2, True, 'CWE-79', None, None, False)

def test_evaluatePredictions():
    res = evaluatePredictions(predictions(0) + predictions(1), truthIrs(), THETA)
    assert sorted(res.perRun) == [0, 1]
    assert (res.mean.precision, res.mean.recall, res.mean.f1) == pytest.approx((0.75, 0.75, 0.75))
    assert res.mean.auroc == pytest.approx(92 / 96)
    assert res.mean.auprc == pytest.approx(0.95)
    assert res.mean.nRuns == 2
    assert res.perRun[0] == res.perRun[1]
    assert len(res.curve) == 21
    assert res.best.theta == 0.15
    assert res.excluded == []

def test_subsets():
    res = evaluatePredictions(predictions(), truthIrs(), THETA)
    assert sorted(res.subsets) == ['plain_text', 'rich_text']
    rich = res.subsets['rich_text']
    # 4 positives at 0.9 and the two negatives at 0.8 pass the threshold
    assert (rich.precision, rich.recall) == pytest.approx((4 / 6, 1.0))
    plain = res.subsets['plain_text']
    assert (plain.precision, plain.recall) == pytest.approx((1.0, 0.5))

def test_emptySubsetSkipped():
    res = evaluatePredictions(predictions(), truthIrs(rich=False), THETA)
    assert sorted(res.subsets) == ['plain_text']
    assert res.subsets['plain_text'] == res.mean

def test_excluded():
    truth = truthIrs() + [mkIr('u/x#1', 'unlabelled', 'text')]
    preds = predictions() + [
        Prediction('u/x#1', 0.5, False, None, THETA, False),
        Prediction('gone/x#1', 0.5, False, None, THETA, False),
        Prediction('p/x#0', None, False, None, THETA, False, 1),
        Prediction('p/x#1', None, False, None, THETA, False, 1)
    ] + predictions(1)[2:]
    res = evaluatePredictions(preds, truth, THETA)
    assert sorted(res.excluded) == ['gone/x#1', 'p/x#0', 'p/x#1', 'u/x#1']
    assert res.toJson()['excluded'] == ['gone/x#1', 'p/x#0', 'p/x#1', 'u/x#1']
    assert res.perRun[0].precision == pytest.approx(0.75)

def test_nothingToEvaluate():
    with pytest.raises(PipelineError) as err:
        evaluatePredictions([], truthIrs(), THETA)
    assert err.value.kind == 'NothingToEvaluate'
    unscored = [Prediction('p/x#0', None, False, None, THETA, False)]
    with pytest.raises(PipelineError) as err:
        evaluatePredictions(unscored, truthIrs(), THETA)
    assert err.value.kind == 'NothingToEvaluate'

def test_singleClassRun():
    onlyPositives = [p for p in predictions() if p.irId.startswith('p/')]
    with pytest.raises(PipelineError) as err:
        evaluatePredictions(onlyPositives, truthIrs(), THETA)
    assert err.value.kind == 'SingleClass'

def test_resultJson():
    res = evaluatePredictions(predictions(0) + predictions(1), truthIrs(), THETA)
    d = res.toJson('abc')
    assert sorted(d) == ['best_threshold', 'config_hash', 'excluded', 'mean', 'runs', 'subsets', 'theta_out']
    assert d['config_hash'] == 'abc'
    assert d['theta_out'] == THETA
    assert sorted(d['runs']) == ['0', '1']
    assert d['best_threshold']['theta'] == 0.15
    assert d['mean']['n_runs'] == 2

def test_curveCsv():
    res = evaluatePredictions(predictions(), truthIrs(), THETA)
    lines = renderCurveCsv(res.curve, 'abc').splitlines()
    assert lines[0] == '# config_hash: abc'
    assert lines[1] == 'theta,precision,recall,f1'
    assert len(lines) == 23
    assert lines[2].startswith('0.0,0.4,1.0,')
    assert lines[5].startswith('0.15,0.8,1.0,')
    assert lines[-1] == '1.0,0.0,0.0,0.0'

def test_writeEvaluation():
    res = evaluatePredictions(predictions(), truthIrs(), THETA)
    with shell.tempDir() as d:
        report = shell.pjoin(d, 'report.json')
        curve = shell.pjoin(d, 'curve.csv')
        writeEvaluation(res, report, curve, 'h1')
        assert json.loads(utils.readTextFile(report)) == json.loads(json.dumps(res.toJson('h1')))
        assert utils.readTextFile(curve) == renderCurveCsv(res.curve, 'h1')
