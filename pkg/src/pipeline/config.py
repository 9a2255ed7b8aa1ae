"""
The pipeline configuration. It is read from a TOML file; command-line flags override
single values. Keys are snake_case in the file and camelCase in the code.

    seed = 17
    theta_sim = 0.7
    [llm]
    backend = "stub"
    stub_fixtures = "fixtures/llm.jsonl"
    [reasoner]
    max_nodes = 24
"""
from __future__ import annotations
from dataclasses import dataclass, field, fields, replace, is_dataclass
from typing import *
from common.constants import ALL_KINDS
from common.pipelineSupport import PipelineError
from llm_gateway.gateway_types import LlmSettings
from reasoner.reasoner import ReasonerConfig
from retrieval.retriever import RetrievalConfig, PruningMode
from tool_adapters.tools import ToolSettings
from va_knowledge.va_sources import VaSettings, VaSource, FIELD_MAPS
import common.utils as utils
import re
import toml

@dataclass(frozen=True)
class CorpusSection:
    file: str = ''
    labels: str = ''
    snapshotDir: str = ''
    manifest: str = ''
    # target and truth IRs; unset: the target part of the split corpus
    targets: str = ''
    truth: str = ''
    historicalProportion: float = 0.6
    mergeThreshold: float = 0.9

@dataclass(frozen=True)
class ReasonerSection:
    maxDepth: int = 6
    maxNodes: int = 24
    branchLimit: int = 4
    correctionEnabled: bool = True
    inclusionOrder: bool = True
    kinds: tuple[str, ...] = tuple(ALL_KINDS)
    temperature: Optional[float] = None

@dataclass(frozen=True)
class RetrievalSection:
    walks: int = 4
    pruning: PruningMode = 'random_walk'

@dataclass(frozen=True)
class EvaluationSection:
    prInterval: float = 0.05
    # unset: record latencies unless the LLM backend is the stub
    recordLatency: Optional[bool] = None

@dataclass(frozen=True)
class OutputSection:
    dbDir: str = 'irtriage-db'
    outDir: str = 'irtriage-out'
    # unset: <out_dir>/curve.csv
    prCsv: str = ''

@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 17
    runs: int = 1
    thetaSim: float = 0.7
    thetaOut: float = 0.55
    corpus: CorpusSection = field(default_factory=CorpusSection)
    llm: LlmSettings = field(default_factory=LlmSettings)
    tools: ToolSettings = field(default_factory=ToolSettings)
    va: VaSettings = field(default_factory=VaSettings)
    reasoner: ReasonerSection = field(default_factory=ReasonerSection)
    retrieval: RetrievalSection = field(default_factory=RetrievalSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    output: OutputSection = field(default_factory=OutputSection)
    def reasonerConfig(self) -> ReasonerConfig:
        r = self.reasoner
        return ReasonerConfig(r.maxDepth, r.maxNodes, r.branchLimit, r.correctionEnabled,
                              self.thetaSim, r.inclusionOrder, cast(Any, r.kinds),
                              r.temperature, self.seed)
    def retrievalConfig(self) -> RetrievalConfig:
        return RetrievalConfig(self.thetaSim, self.retrieval.walks, self.retrieval.pruning, self.seed)
    def recordLatency(self) -> bool:
        x = self.evaluation.recordLatency
        return self.llm.backend != 'stub' if x is None else x
    def toJson(self) -> dict[str, Any]:
        return cast(dict[str, Any], _toJson(self))

SECTIONS = ['corpus', 'llm', 'tools', 'va', 'reasoner', 'retrieval', 'evaluation', 'output']

# excluded from the config hashes: paths, and the grid step that only shapes the curve
UNHASHED_KEYS = {
    'corpus': ['file', 'labels', 'snapshot_dir', 'manifest', 'targets', 'truth'],
    'llm': ['stub_fixtures'],
    'tools': ['sidecar_dir', 'cache_dir'],
    'evaluation': ['pr_interval'],
    'output': ['db_dir', 'out_dir', 'pr_csv']
}

def snakeCase(name: str) -> str:
    return re.sub(r'([A-Z])', lambda m: '_' + m.group(1).lower(), name)

def camelCase(key: str) -> str:
    parts = key.split('_')
    return parts[0] + ''.join(p.capitalize() for p in parts[1:])

def _toJson(x: Any) -> Any:
    if is_dataclass(x) and not isinstance(x, type):
        return {snakeCase(f.name): _toJson(getattr(x, f.name)) for f in fields(x)}
    if isinstance(x, (tuple, list)):
        return [_toJson(y) for y in cast(Sequence[Any], x)]
    return x

def _coerce(where: str, default: Any, v: Any) -> Any:
    def bad(expected: str) -> NoReturn:
        raise PipelineError.configError(f'{where}: expected {expected}, got {v!r}')
    match default:
        case bool():
            if not isinstance(v, bool):
                bad('a boolean')
            return v
        case int():
            if isinstance(v, bool) or not isinstance(v, int):
                bad('an integer')
            return v
        case float():
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                bad('a number')
            return float(v)
        case str():
            if not isinstance(v, str):
                bad('a string')
            return v
        case tuple():
            if not isinstance(v, list):
                bad('a list')
            return tuple(cast(list[Any], v))
        case None:
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                return float(v)
            return v
        case _:
            bad(type(default).__name__)

def _vaSources(v: Any) -> tuple[VaSource, ...]:
    if not isinstance(v, list):
        raise PipelineError.configError(f'va.sources: expected a list of tables, got {v!r}')
    res: list[VaSource] = []
    for d in cast(list[Any], v):
        if not isinstance(d, dict) or 'path' not in d:
            raise PipelineError.configError(f'va.sources: entry without path: {d!r}')
        t = cast(dict[str, Any], d)
        unknown = set(t) - {'path', 'format'}
        if unknown:
            raise PipelineError.configError(f'va.sources: unknown keys {sorted(unknown)}')
        res.append(VaSource(str(t['path']), cast(Any, t.get('format', 'jsonl'))))
    return tuple(res)

def _section[T](cls: type[T], name: str, table: Any) -> T:
    if not isinstance(table, dict):
        raise PipelineError.configError(f'[{name}] must be a table')
    defaults = cls()
    known = {f.name for f in fields(cast(Any, cls))}
    kwargs: dict[str, Any] = {}
    for k, v in cast(dict[str, Any], table).items():
        attr = camelCase(k)
        if attr not in known:
            raise PipelineError.configError(f'Unknown configuration key {name}.{k}')
        if cls is VaSettings and attr == 'sources':
            kwargs[attr] = _vaSources(v)
        else:
            kwargs[attr] = _coerce(f'{name}.{k}', getattr(defaults, attr), v)
    return cls(**kwargs)

SECTION_TYPES: dict[str, type[Any]] = {
    'corpus': CorpusSection, 'llm': LlmSettings, 'tools': ToolSettings, 'va': VaSettings,
    'reasoner': ReasonerSection, 'retrieval': RetrievalSection,
    'evaluation': EvaluationSection, 'output': OutputSection
}

def configFromDict(d: dict[str, Any]) -> PipelineConfig:
    defaults = PipelineConfig()
    kwargs: dict[str, Any] = {}
    for k, v in d.items():
        if k in SECTION_TYPES:
            kwargs[k] = _section(SECTION_TYPES[k], k, v)
            continue
        attr = camelCase(k)
        if attr not in ('seed', 'runs', 'thetaSim', 'thetaOut'):
            raise PipelineError.configError(f'Unknown configuration key {k}')
        kwargs[attr] = _coerce(k, getattr(defaults, attr), v)
    cfg = PipelineConfig(**kwargs)
    validate(cfg)
    return cfg

def loadConfig(path: Optional[str]) -> PipelineConfig:
    if path is None:
        return configFromDict({})
    try:
        d = toml.load(path)
    except (OSError, toml.TomlDecodeError) as e:
        raise PipelineError.configError(f'Cannot read configuration {path}: {e}')
    return configFromDict(d)

def withOverrides(cfg: PipelineConfig, overrides: dict[str, Any]) -> PipelineConfig:
    """
    Applies dotted overrides like {"seed": 3, "output.db_dir": "db"}. None values are
    ignored (flag not given).
    """
    d = cfg.toJson()
    for key, v in overrides.items():
        if v is None:
            continue
        parts = key.split('.')
        target = d
        for p in parts[:-1]:
            if p not in target:
                raise PipelineError.configError(f'Unknown configuration key {key}')
            target = target[p]
        target[parts[-1]] = v
    return configFromDict(d)

def _checkFraction(name: str, x: float, lowOpen: bool = False, highOpen: bool = False):
    lowOk = x > 0.0 if lowOpen else x >= 0.0
    highOk = x < 1.0 if highOpen else x <= 1.0
    if not (lowOk and highOk):
        raise PipelineError.configError(f'{name} out of range: {x}')

def _checkPositive(name: str, x: int | float):
    if x <= 0:
        raise PipelineError.configError(f'{name} must be positive, got {x}')

def validate(cfg: PipelineConfig):
    _checkFraction('theta_sim', cfg.thetaSim)
    _checkFraction('theta_out', cfg.thetaOut)
    _checkFraction('corpus.historical_proportion', cfg.corpus.historicalProportion, True, True)
    _checkFraction('corpus.merge_threshold', cfg.corpus.mergeThreshold, lowOpen=True)
    _checkFraction('evaluation.pr_interval', cfg.evaluation.prInterval, True, True)
    _checkPositive('runs', cfg.runs)
    _checkPositive('retrieval.walks', cfg.retrieval.walks)
    _checkPositive('llm.max_tokens', cfg.llm.maxTokens)
    _checkPositive('llm.deadline_seconds', cfg.llm.deadlineSeconds)
    _checkPositive('llm.concurrency_limit', cfg.llm.concurrencyLimit)
    _checkPositive('tools.timeout_seconds', cfg.tools.timeoutSeconds)
    if cfg.llm.maxRetries < 0:
        raise PipelineError.configError(f'llm.max_retries must not be negative')
    if cfg.llm.stubJitter < 0:
        raise PipelineError.configError(f'llm.stub_jitter must not be negative')
    if cfg.seed < 0:
        raise PipelineError.configError(f'seed must not be negative, got {cfg.seed}')
    if cfg.llm.backend not in ('stub', 'http'):
        raise PipelineError.configError(f'Unknown llm.backend {cfg.llm.backend}')
    for name, b in [('scr_backend', cfg.tools.scrBackend), ('code_backend', cfg.tools.codeBackend)]:
        if b not in ('stub', 'http'):
            raise PipelineError.configError(f'Unknown tools.{name} {b}')
    for s in cfg.va.sources:
        if s.format != 'jsonl' and s.format not in FIELD_MAPS:
            raise PipelineError.configError(f'Unknown VA source format {s.format}')
    cfg.reasonerConfig().validate()
    cfg.retrievalConfig().validate()

def _semanticJson(cfg: PipelineConfig) -> dict[str, Any]:
    d = cfg.toJson()
    for section, keys in UNHASHED_KEYS.items():
        for k in keys:
            d[section].pop(k, None)
    d['va']['sources'] = [s['format'] for s in d['va']['sources']]
    return d

def configHash(cfg: PipelineConfig) -> str:
    return utils.sha256Hex(utils.canonicalJson(_semanticJson(cfg)))

def dbConfigHash(cfg: PipelineConfig) -> str:
    """
    Hash over the settings that shape the reasoning database.
    """
    d = _semanticJson(cfg)
    sub = {
        'seed': d['seed'],
        'theta_sim': d['theta_sim'],
        'historical_proportion': d['corpus']['historical_proportion'],
        'merge_threshold': d['corpus']['merge_threshold'],
        'reasoner': d['reasoner'],
        'llm': d['llm'],
        'tools': d['tools'],
        'va': d['va']
    }
    return utils.sha256Hex(utils.canonicalJson(sub))
