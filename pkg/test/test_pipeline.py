from pipeline.pipeline import *
from pipeline.config import loadConfig, withOverrides
from common.testsupport import *
import json
import pytest
import shell

def mkPipeline(cfgFile: str, **overrides: Any) -> Pipeline:
    return Pipeline(withOverrides(loadConfig(cfgFile), overrides))

def outFiles(d: str) -> dict[str, bytes]:
    return {name: readBytes(shell.pjoin(d, 'out', name))
            for name in [PREDS_FILE, REPORT_FILE, CURVE_FILE]}

def runJson(d: str) -> dict[str, Any]:
    return json.loads(utils.readTextFile(shell.pjoin(d, 'out', RUN_FILE)))

def test_stats():
    with shell.tempDir() as d:
        p = mkPipeline(writeWorkspace(d))
        st = cmdStats(p)
    assert (st.total, st.richText, st.code, st.scr) == (20, 16, 16, 0)
    assert (st.vul, st.nonVul) == (10, 10)
    assert st.cwes == {'CWE-79': 5, 'CWE-89': 5}

def test_missingCorpus():
    p = Pipeline(PipelineConfig())
    with pytest.raises(PipelineError) as err:
        cmdStats(p)
    assert err.value.kind == 'ConfigError'

def test_vaIngest():
    with shell.tempDir() as d:
        p = mkPipeline(writeWorkspace(d))
        store = cmdVaIngest(p)
        assert len(store) == 50
        assert shell.isDir(shell.pjoin(d, 'db'))

def test_prepareDbNeedsVaSources():
    with shell.tempDir() as d:
        p = mkPipeline(writeWorkspace(d, extra={'va': {'sources': []}}))
        with pytest.raises(PipelineError) as err:
            cmdPrepareDb(p)
        assert err.value.kind == 'ConfigError'

def test_prepareDb():
    with shell.tempDir() as d:
        p = mkPipeline(writeWorkspace(d))
        m = cmdPrepareDb(p)
        # 12 of the 20 reports form the historical part
        assert m.count == 12
        assert set(m.statuses.values()) == {'ok'}
        assert m.configHash == dbConfigHash(p.cfg)
        assert len(p.openDb().loadGraphs()) == 12

@pytest.mark.slow
def test_runAll():
    with shell.tempDir() as d:
        p = mkPipeline(writeWorkspace(d))
        res = cmdRunAll(p)
        assert (res.mean.precision, res.mean.recall, res.mean.f1) == pytest.approx((1.0, 1.0, 1.0))
        assert res.mean.auroc == pytest.approx(1.0)
        assert res.mean.macroF1 == pytest.approx(1.0)
        assert res.mean.meanLatency is None
        assert sorted(res.subsets) == ['plain_text', 'rich_text']
        assert res.excluded == []
        preds = utils.readJsonl(shell.pjoin(d, 'out', PREDS_FILE))
        assert [x['ir_id'] for x in preds] == [f'syn/app#{i}' for i in range(13, 21)]
        assert all(x['config_hash'] == configHash(p.cfg) for x in preds)
        report = json.loads(utils.readTextFile(shell.pjoin(d, 'out', REPORT_FILE)))
        assert report == json.loads(json.dumps(res.toJson(configHash(p.cfg))))
        curve = utils.readTextFile(shell.pjoin(d, 'out', CURVE_FILE))
        assert curve.startswith(f'# config_hash: {configHash(p.cfg)}\ntheta,precision,recall,f1\n')
        run = runJson(d)
        assert run['stages'] == {'prepare-db': 'ok', 'identify': 'ok', 'evaluate': 'ok'}
        assert run['config_hash'] == configHash(p.cfg)
        assert run['db_config_hash'] == dbConfigHash(p.cfg)
        assert sorted(run['timings']) == ['evaluate', 'identify', 'prepare-db']

@pytest.mark.slow
def test_runAllIsDeterministic():
    with shell.tempDir() as d1, shell.tempDir() as d2:
        cmdRunAll(mkPipeline(writeWorkspace(d1)))
        cmdRunAll(mkPipeline(writeWorkspace(d2)))
        first = outFiles(d1)
        assert first == outFiles(d2)
        # a second run reuses the database
        cmdRunAll(mkPipeline(writeWorkspace(d1)))
        assert outFiles(d1) == first

@pytest.mark.slow
def test_runAllSeveralRuns():
    with shell.tempDir() as d:
        res = cmdRunAll(mkPipeline(writeWorkspace(d, extra={'runs': 2})))
        assert sorted(res.perRun) == [0, 1]
        assert res.mean.nRuns == 2
        preds = utils.readJsonl(shell.pjoin(d, 'out', PREDS_FILE))
        assert len(preds) == 16
        assert [x['run'] for x in preds] == [0] * 8 + [1] * 8

@pytest.mark.slow
def test_hashMismatch():
    with shell.tempDir() as d:
        cfgFile = writeWorkspace(d)
        cmdRunAll(mkPipeline(cfgFile))
        p = mkPipeline(cfgFile, seed=18)
        with pytest.raises(PipelineError) as err:
            cmdRunAll(p)
        assert err.value.kind == 'HashMismatch'
        assert runJson(d)['stages'] == {'prepare-db': 'failed: HashMismatch'}
        with pytest.raises(PipelineError) as err:
            cmdIdentify(p)
        assert err.value.kind == 'HashMismatch'

@pytest.mark.slow
def test_stageFailed():
    irs = syntheticCorpus()
    # no identification rules: every prediction is unscored
    rules = syntheticRules(irs)[:-len(irs)]
    with shell.tempDir() as d:
        p = mkPipeline(writeWorkspace(d, rules=rules))
        with pytest.raises(PipelineError) as err:
            cmdRunAll(p)
        assert err.value.kind == 'StageFailed'
        assert isinstance(err.value.__cause__, PipelineError)
        assert err.value.__cause__.kind == 'NothingToEvaluate'
        assert runJson(d)['stages'] == {'prepare-db': 'ok', 'identify': 'ok',
                                        'evaluate': 'failed: NothingToEvaluate'}
        preds = utils.readJsonl(shell.pjoin(d, 'out', PREDS_FILE))
        assert len(preds) == 8
        assert all(x['p_yes'] is None for x in preds)
        assert all(x['diagnostics'] == ['failed: BackendRejected'] for x in preds)
        assert not shell.isFile(shell.pjoin(d, 'out', REPORT_FILE))

@pytest.mark.slow
def test_retrieve():
    with shell.tempDir() as d:
        p = mkPipeline(writeWorkspace(d))
        cmdPrepareDb(p)
        res = cmdRetrieve(p)
        assert list(res) == [0]
        assert sorted(res[0]) == [f'syn/app#{i}' for i in range(13, 21)]
        lines = utils.readJsonl(shell.pjoin(d, 'out', RETRIEVED_FILE))
        assert [x['target'] for x in lines] == [f'syn/app#{i}' for i in range(13, 21)]
        for hits in res[0].values():
            assert all(h.similarity > p.cfg.thetaSim for h in hits)

def test_evaluateWithoutPredictions():
    with shell.tempDir() as d:
        p = mkPipeline(writeWorkspace(d))
        with pytest.raises(PipelineError) as err:
            cmdEvaluate(p)
        assert err.value.kind == 'ConfigError'

def test_dryRun():
    with shell.tempDir() as d:
        cfg = loadConfig(writeWorkspace(d))
        before = treeBytes(d)
        res = dryRun(cfg)
        assert res['config_hash'] == configHash(cfg)
        assert res['db_config_hash'] == dbConfigHash(cfg)
        assert res['config']['seed'] == 17
        assert treeBytes(d) == before

@pytest.mark.slow
def test_knownAnswer():
    irs = syntheticCorpus(50)
    # targets are syn/app#31 .. #50; two positives and two negatives are scored wrong
    wrong = {'syn/app#32': 0.3, 'syn/app#34': 0.3, 'syn/app#31': 0.7, 'syn/app#33': 0.7}
    def pYes(ir: CanonicalIR) -> Optional[float]:
        return wrong.get(ir.id, 0.85 if ir.labelVul else 0.15)
    with shell.tempDir() as d:
        p = mkPipeline(writeWorkspace(d, n=50, rules=syntheticRules(irs, pYes)))
        res = cmdRunAll(p)
        # TP 8, FN 2, FP 2, TN 8
        assert (res.mean.precision, res.mean.recall, res.mean.f1) == pytest.approx((0.8, 0.8, 0.8), abs=1e-12)
        preds = [Prediction.fromJson(x) for x in utils.readJsonl(shell.pjoin(d, 'out', PREDS_FILE))]
        assert len(preds) == 20
        correct = [x for x in preds if x.verdict == (int(x.irId.split('#')[1]) % 2 == 0)]
        assert len(correct) == 16
        lines = utils.readTextFile(shell.pjoin(d, 'out', CURVE_FILE)).splitlines()
        [row] = [l for l in lines if l.startswith('0.55,')]
        assert [float(x) for x in row.split(',')[1:]] == [res.mean.precision, res.mean.recall, res.mean.f1]

def test_vaIngestFile():
    with shell.tempDir() as d:
        p = mkPipeline(writeWorkspace(d, extra={'va': {'sources': []}}))
        f = shell.pjoin(d, 'export.jsonl')
        utils.writeJsonl(f, [r.toJson() for r in vaRecords()[:3]])
        assert len(cmdVaIngest(p, f)) == 3
        with pytest.raises(PipelineError) as err:
            cmdVaIngest(p)
        assert err.value.kind == 'ConfigError'
        with pytest.raises(PipelineError) as err:
            cmdVaIngest(p, shell.pjoin(d, 'missing.jsonl'))
        assert err.value.kind == 'ConfigError'

def test_evaluateChecksConfigHash():
    with shell.tempDir() as d:
        p = mkPipeline(writeWorkspace(d))
        f = shell.pjoin(d, 'preds.jsonl')
        preds = [Prediction('syn/app#13', 0.15, False, None, 0.55, True, configHash=configHash(p.cfg)),
                 Prediction('syn/app#14', 0.85, True, 'CWE-79', 0.55, True, configHash='0' * 64)]
        utils.writeJsonl(f, [x.toJson() for x in preds])
        with pytest.raises(PipelineError) as err:
            cmdEvaluate(p, f)
        assert err.value.kind == 'HashMismatch'
        assert not shell.isFile(shell.pjoin(d, 'out', REPORT_FILE))

@pytest.mark.slow
def test_targetAndTruthFiles():
    targets = syntheticCorpus()[12:16]
    with shell.tempDir() as d:
        cfgFile = writeWorkspace(d)
        targetFile = shell.pjoin(d, 'targets.jsonl')
        writeCorpus(targetFile, targets)
        p = mkPipeline(cfgFile, **{'corpus.targets': targetFile, 'corpus.truth': targetFile,
                                   'output.pr_csv': shell.pjoin(d, 'curves', 'pr.csv')})
        cmdPrepareDb(p)
        assert sorted(cmdRetrieve(p)[0]) == [t.id for t in targets]
        preds = cmdIdentify(p)
        assert [x.irId for x in preds] == [t.id for t in targets]
        res = cmdEvaluate(p)
        assert res.mean.f1 == pytest.approx(1.0)
        assert shell.isFile(shell.pjoin(d, 'curves', 'pr.csv'))
        assert not shell.isFile(shell.pjoin(d, 'out', CURVE_FILE))
        # the grid step is not part of the hash, the output threshold is
        cmdEvaluate(mkPipeline(cfgFile, **{'corpus.truth': targetFile, 'evaluation.pr_interval': 0.1}))
        with pytest.raises(PipelineError) as err:
            cmdEvaluate(mkPipeline(cfgFile, **{'corpus.truth': targetFile, 'theta_out': 0.3}))
        assert err.value.kind == 'HashMismatch'
