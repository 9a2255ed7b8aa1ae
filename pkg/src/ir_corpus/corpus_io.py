"""
Corpus files (JSON lines of canonical records) and the assembly of a labelled corpus
from page snapshots.
"""
from dataclasses import replace
from typing import *
from common.pipelineSupport import PipelineError
from ir_corpus.corpus_types import *
from ir_corpus.corpus_parser import parseIssuePage, issueIdFromUrl, parseTimestamp
import common.log as log
import common.utils as utils
import ir_corpus.corpus_transform as transform
import shell

def snapshotName(url: str) -> str:
    return utils.sha256Hex(url) + '.html'

def readCorpus(path: str) -> list[CanonicalIR]:
    if not shell.isFile(path):
        raise PipelineError.configError(f'corpus file {path} does not exist')
    irs = [CanonicalIR.fromJson(d) for d in utils.readJsonl(path)]
    seen: set[str] = set()
    for ir in irs:
        if ir.id in seen:
            raise PipelineError('DuplicateId', f'record {ir.id} occurs twice in {path}')
        seen.add(ir.id)
        ir.checkTags()
    log.info(f'Read {len(irs)} records from {path}')
    return irs

def renderCorpus(irs: Iterable[CanonicalIR]) -> str:
    return utils.renderJsonl(ir.toJson() for ir in irs)

def writeCorpus(path: str, irs: Iterable[CanonicalIR]):
    utils.writeTextFileAtomic(path, renderCorpus(irs))

def _labelTimestamp(entry: dict[str, Any]) -> Optional[int]:
    x = entry.get('created_at')
    if x is None:
        return None
    if isinstance(x, (int, float)):
        return int(x)
    return parseTimestamp(str(x))

def _missingPageRecord(entry: dict[str, Any]) -> CanonicalIR:
    url = str(entry['url'])
    return CanonicalIR(id=issueIdFromUrl(url), title=str(entry.get('title') or ''),
                       content=' '.join(str(entry.get('body') or '').split()),
                       richText=(), createdAt=_labelTimestamp(entry) or 0,
                       pageMissing=True)

def buildCorpus(labels: list[dict[str, Any]], snapshotDir: str,
                mergeThreshold: float = transform.DEFAULT_MERGE_THRESHOLD) -> list[CanonicalIR]:
    """
    Builds the canonical corpus from a label manifest. Each entry has the keys url,
    label_vul and optionally title, body, created_at, cwe_ids and cve_id. Pages without
    snapshot are kept with the manifest text and the page_missing flag.
    """
    res: list[CanonicalIR] = []
    for entry in labels:
        url = str(entry['url'])
        snap = shell.pjoin(snapshotDir, snapshotName(url))
        if shell.isFile(snap):
            page = RawIssuePage(url, utils.readTextFile(snap), _labelTimestamp(entry) or 0)
            try:
                ir = parseIssuePage(page)
            except PipelineError as e:
                log.warn(f'Snapshot of {url} unusable ({e}), using manifest text')
                ir = _missingPageRecord(entry)
            ts = _labelTimestamp(entry)
            if ts is not None:
                ir = replace(ir, createdAt=ts)
        else:
            log.warn(f'No snapshot for {url}, record marked as page_missing')
            ir = _missingPageRecord(entry)
        label = entry.get('label_vul')
        ir = replace(ir, labelVul=None if label is None else bool(label),
                     cveId=entry.get('cve_id'))
        ir = transform.normalizeText(transform.mergeSimilarElements(ir, mergeThreshold))
        cwes = utils.dedup(str(c) for c in entry.get('cwe_ids') or [])
        if len(cwes) > 1:
            res.extend(transform.splitMultiCwe(ir, cwes))
        elif len(cwes) == 1:
            if CWE_RE.match(cwes[0]) is None:
                raise PipelineError('InvalidCweId', f'{ir.id}: {cwes[0]!r}')
            res.append(ir.withCwe(cwes[0], suffix=False))
        else:
            res.append(ir)
    return res
