"""
The stages of the pipeline as called by the command line:

    ingest / fetch / stats     corpus handling
    va ingest                  VA knowledge store
    prepare-db                 reasoning graphs of the historical IRs
    retrieve / identify        per target IR, for every run
    evaluate                   metrics over the predictions
    run-all                    everything, with a run.json manifest
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import *
from common.constants import SEED_STAGE_IDENTIFY
from common.pipelineSupport import PipelineError
from common.seeds import requestSeed
from evaluation.evaluate import EvaluationResult, evaluatePredictions, writeEvaluation
from identifier.guidance import generateGuidance
from identifier.identify import Prediction, identify, unscoredPrediction
from ir_corpus.corpus_io import buildCorpus, readCorpus, writeCorpus
from ir_corpus.corpus_transform import corpusStats, splitCorpus
from ir_corpus.corpus_types import CanonicalIR, CorpusSplit, CorpusStats
from ir_corpus.page_fetcher import fetchPages, readManifest
from llm_gateway.gateway import LlmGateway
from pipeline.config import PipelineConfig, configHash, dbConfigHash
from reasoner.reasoner import ReasonerEnv, buildDatabase
from reasoning_graph.graph_store import ReasoningDb, DbManifest
from retrieval.retriever import RelevantGraphRetriever, RetrievedGraph
from tool_adapters.http_tools import mkToolBox
from tool_adapters.tools import ToolBox
from va_knowledge.va_sources import VaSettings, VaSource, loadSources
from va_knowledge.va_store import KnowledgeStore, ingest, saveStore, EMPTY_STORE
import common.log as log
import common.utils as utils
import shell

PREDS_FILE = 'preds.jsonl'
RETRIEVED_FILE = 'retrieved.jsonl'
REPORT_FILE = 'report.json'
CURVE_FILE = 'curve.csv'
RUN_FILE = 'run.json'
TOOL_CACHE_DIR = 'tool-cache'

class Pipeline:
    """
    Shared state of the stages: the configuration and the lazily created LLM
    gateway and tool box.
    """
    def __init__(self, cfg: PipelineConfig, gateway: Optional[LlmGateway] = None,
                 tools: Optional[ToolBox] = None):
        self.cfg = cfg
        self.__gateway = gateway
        self.__tools = tools
    @property
    def gateway(self) -> LlmGateway:
        if self.__gateway is None:
            self.__gateway = LlmGateway.fromSettings(self.cfg.llm)
        return self.__gateway
    @property
    def tools(self) -> ToolBox:
        if self.__tools is None:
            self.__tools = mkToolBox(self.cfg.tools, shell.pjoin(self.cfg.output.dbDir, TOOL_CACHE_DIR))
        return self.__tools
    @property
    def db(self) -> ReasoningDb:
        return ReasoningDb(self.cfg.output.dbDir)
    def outFile(self, name: str) -> str:
        shell.mkdirs(self.cfg.output.outDir)
        return shell.pjoin(self.cfg.output.outDir, name)
    def corpus(self) -> list[CanonicalIR]:
        f = self.cfg.corpus.file
        if not f or not shell.isFile(f):
            raise PipelineError.configError(f'corpus.file does not name an existing file: {f!r}')
        return readCorpus(f)
    def split(self) -> CorpusSplit:
        return splitCorpus(self.corpus(), self.cfg.corpus.historicalProportion)
    def targets(self) -> list[CanonicalIR]:
        f = self.cfg.corpus.targets
        return readCorpus(f) if f else self.split().target
    def truth(self) -> list[CanonicalIR]:
        f = self.cfg.corpus.truth
        return readCorpus(f) if f else self.split().target
    def curveFile(self) -> str:
        f = self.cfg.output.prCsv
        if not f:
            return self.outFile(CURVE_FILE)
        if shell.dirname(f):
            shell.mkdirs(shell.dirname(f))
        return f
    def vaStore(self, sourceFile: Optional[str] = None) -> KnowledgeStore:
        if sourceFile:
            return ingest(loadSources(VaSettings((VaSource(sourceFile),))))
        if not self.cfg.va.sources:
            return EMPTY_STORE
        return ingest(loadSources(self.cfg.va))
    def openDb(self) -> ReasoningDb:
        db = self.db
        db.checkHash(dbConfigHash(self.cfg))
        return db
    def retriever(self, db: ReasoningDb) -> RelevantGraphRetriever:
        return RelevantGraphRetriever(db.loadGraphs(), self.tools, self.cfg.retrievalConfig())

def cmdIngest(p: Pipeline) -> list[CanonicalIR]:
    c = p.cfg.corpus
    if not c.labels or not c.file:
        raise PipelineError.configError('ingest needs corpus.labels and corpus.file')
    irs = buildCorpus(utils.readJsonl(c.labels), c.snapshotDir, c.mergeThreshold)
    writeCorpus(c.file, irs)
    log.info(f'Wrote {len(irs)} IRs to {c.file}')
    return irs

def cmdFetch(p: Pipeline) -> list[str]:
    c = p.cfg.corpus
    if not c.manifest or not c.snapshotDir:
        raise PipelineError.configError('fetch needs corpus.manifest and corpus.snapshot_dir')
    _fetched, missing = fetchPages(readManifest(c.manifest), c.snapshotDir,
                                   timeout=p.cfg.tools.timeoutSeconds)
    return missing

def cmdStats(p: Pipeline) -> CorpusStats:
    return corpusStats(p.corpus())

def cmdVaIngest(p: Pipeline, sourceFile: Optional[str] = None) -> KnowledgeStore:
    """
    Ingests sourceFile (a JSONL export of knowledge records) or, without it, the
    configured va.sources.
    """
    if not sourceFile and not p.cfg.va.sources:
        raise PipelineError.configError('va ingest needs a source file or an entry in va.sources')
    if sourceFile and not shell.isFile(sourceFile):
        raise PipelineError.configError(f'VA source {sourceFile} does not exist')
    store = p.vaStore(sourceFile)
    saveStore(store, p.cfg.output.dbDir)
    return store

def cmdPrepareDb(p: Pipeline) -> DbManifest:
    cfg = p.cfg
    rcfg = cfg.reasonerConfig()
    if rcfg.correctionEnabled and not cfg.va.sources:
        raise PipelineError.configError('factual-error correction is enabled but va.sources is empty')
    split = p.split()
    store = p.vaStore()
    db = p.db
    saveStore(store, db.path)
    env = ReasonerEnv(p.gateway, p.tools, store)
    return buildDatabase(split.historical, rcfg, env, db, dbConfigHash(cfg))

def cmdRetrieve(p: Pipeline) -> dict[int, dict[str, list[RetrievedGraph]]]:
    """
    Returns, per run and target IR, the relevant graphs. Also writes them to
    retrieved.jsonl.
    """
    retriever = p.retriever(p.openDb())
    targets = p.targets()
    res: dict[int, dict[str, list[RetrievedGraph]]] = {}
    lines: list[dict[str, Any]] = []
    for run in range(p.cfg.runs):
        res[run] = {}
        for t in targets:
            hits = retriever.retrieve(t, run)
            res[run][t.id] = hits
            lines.append({'run': run, 'target': t.id, 'graphs': [h.toJson() for h in hits]})
    utils.writeJsonl(p.outFile(RETRIEVED_FILE), lines)
    return res

def predictTarget(p: Pipeline, retriever: RelevantGraphRetriever, target: CanonicalIR, run: int,
                  cfgHash: str) -> Prediction:
    cfg = p.cfg
    seed = requestSeed(cfg.seed, SEED_STAGE_IDENTIFY, target.id, run)
    hits = retriever.retrieve(target, run)
    try:
        guide = generateGuidance(hits, target, p.gateway, seed)
        return identify(target, guide, hits, p.gateway, cfg.thetaOut, seed, run, cfgHash,
                        cfg.recordLatency())
    except PipelineError as e:
        if not e.isGatewayError():
            raise
        log.warn(f'{target.id} (run {run}): identification failed: {e}')
        return unscoredPrediction(target, cfg.thetaOut, e, run, cfgHash)

def cmdIdentify(p: Pipeline) -> list[Prediction]:
    retriever = p.retriever(p.openDb())
    targets = p.targets()
    cfgHash = configHash(p.cfg)
    preds: list[Prediction] = []
    for run in range(p.cfg.runs):
        for t in targets:
            preds.append(predictTarget(p, retriever, t, run, cfgHash))
    utils.writeJsonl(p.outFile(PREDS_FILE), [x.toJson() for x in preds])
    log.info(f'Wrote {len(preds)} predictions for {len(targets)} targets and {p.cfg.runs} runs')
    return preds

def checkPredictionHash(preds: list[Prediction], expected: str, origin: str):
    stale = utils.dedup(x.configHash for x in preds if x.configHash != expected)
    if stale:
        raise PipelineError('HashMismatch', f'predictions in {origin} were made with config '
                            f'{stale[0][:12] or "<none>"}, current config is {expected[:12]}')

def cmdEvaluate(p: Pipeline, predsFile: Optional[str] = None) -> EvaluationResult:
    f = predsFile or shell.pjoin(p.cfg.output.outDir, PREDS_FILE)
    if not shell.isFile(f):
        raise PipelineError.configError(f'No predictions at {f}, run identify first')
    preds = [Prediction.fromJson(d) for d in utils.readJsonl(f)]
    cfgHash = configHash(p.cfg)
    checkPredictionHash(preds, cfgHash, f)
    res = evaluatePredictions(preds, p.truth(), p.cfg.thetaOut, p.cfg.evaluation.prInterval)
    writeEvaluation(res, p.outFile(REPORT_FILE), p.curveFile(), cfgHash)
    return res

@dataclass
class RunManifest:
    configHash: str
    dbConfigHash: str
    runs: int
    stages: dict[str, str] = field(default_factory=dict[str, str])
    timings: dict[str, float] = field(default_factory=dict[str, float])
    def toJson(self) -> dict[str, Any]:
        return {'config_hash': self.configHash, 'db_config_hash': self.dbConfigHash,
                'runs': self.runs, 'stages': dict(self.stages), 'timings': dict(self.timings)}

def dryRun(cfg: PipelineConfig) -> dict[str, Any]:
    return {'config': cfg.toJson(), 'config_hash': configHash(cfg),
            'db_config_hash': dbConfigHash(cfg)}

def cmdRunAll(p: Pipeline) -> EvaluationResult:
    """
    prepare-db (reusing a matching database), identify and evaluate. A failing stage
    raises StageFailed; artifacts of earlier stages and run.json stay.
    """
    cfg = p.cfg
    m = RunManifest(configHash(cfg), dbConfigHash(cfg), cfg.runs)
    runFile = p.outFile(RUN_FILE)
    def stage[T](name: str, f: Callable[[], T]) -> T:
        m.stages[name] = 'running'
        try:
            with log.stage(name, m.timings):
                x = f()
            m.stages[name] = 'ok'
            return x
        except PipelineError as e:
            m.stages[name] = f'failed: {e.kind}'
            if e.kind in ('ConfigError', 'HashMismatch'):
                raise
            raise PipelineError.stageFailed(name, e)
        finally:
            utils.writeTextFileAtomic(runFile, utils.dumpJson(m.toJson()))
    def prepare():
        if p.db.exists():
            p.openDb()
            log.info(f'Reusing reasoning database {p.db.path}')
        else:
            cmdPrepareDb(p)
    stage('prepare-db', prepare)
    stage('identify', lambda: cmdIdentify(p))
    return stage('evaluate', lambda: cmdEvaluate(p))
