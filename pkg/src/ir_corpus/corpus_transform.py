"""
Record-level refinements of the corpus: text normalization, merging of near-duplicate
rich-text elements, multi-CWE splitting and the time-ordered historical/target split.
"""
from dataclasses import replace
from typing import *
from common.constants import ALL_KINDS, RichTextKind
from common.pipelineSupport import PipelineError
from ir_corpus.corpus_types import *
import common.log as log
import common.utils as utils
import re
import text_index.tfidf as tfidf

DEFAULT_MERGE_THRESHOLD = 0.9

_WORD_RE = re.compile(r'[a-z]+')
_VOWELS = set('aeiouy')

def _hasVowel(s: str) -> bool:
    return any(c in _VOWELS for c in s)

def lemmatizeWord(w: str) -> str:
    """
    Three suffix rules: -ing and -ed are stripped when the stem keeps three letters
    and a vowel, plural -s is stripped unless the word ends in ss, us or is.
    """
    for suffix in ['ing', 'ed']:
        if w.endswith(suffix):
            stem = w[:-len(suffix)]
            if len(stem) >= 3 and _hasVowel(stem):
                return stem
            return w
    if w.endswith('s') and len(w) > 3 and not w.endswith(('ss', 'us', 'is')):
        return w[:-1]
    return w

def normalizeString(s: str) -> str:
    parts: list[str] = []
    pos = 0
    for m in TAG_RE.finditer(s):
        parts.append(_normalizePlain(s[pos:m.start()]))
        parts.append(m.group(0))
        pos = m.end()
    parts.append(_normalizePlain(s[pos:]))
    return ' '.join(' '.join(parts).split())

def _normalizePlain(s: str) -> str:
    s = ' '.join(s.lower().split())
    return _WORD_RE.sub(lambda m: lemmatizeWord(m.group(0)), s)

def normalizeText(ir: CanonicalIR) -> CanonicalIR:
    return replace(ir, title=normalizeString(ir.title), content=normalizeString(ir.content))

def renumberTags(content: str, elements: Iterable[RichTextElement]) -> tuple[str, tuple[RichTextElement, ...]]:
    """
    Renumbers the tags densely per kind in order of first appearance in content.
    Elements whose tag does not occur in content are dropped.
    """
    byTag = {e.tag: e for e in elements}
    counters: dict[RichTextKind, int] = {k: 0 for k in ALL_KINDS}
    mapping: dict[str, str] = {}
    newElems: list[RichTextElement] = []
    for tag in tagsInText(content):
        e = byTag.get(tag)
        if e is None:
            log.warn(f'Tag {tag} has no rich-text entry, leaving it as plain text')
            continue
        counters[e.kind] += 1
        newTag = mkTag(e.kind, counters[e.kind])
        mapping[tag] = newTag
        newElems.append(RichTextElement(e.kind, newTag, e.payload))
    newContent = TAG_RE.sub(lambda m: mapping.get(m.group(0), m.group(0).strip('[]')),
                            content)
    return (newContent, tuple(newElems))

def _mergeOnce(irId: str, elements: tuple[RichTextElement, ...],
               threshold: float) -> tuple[list[RichTextElement], dict[str, str]]:
    index = tfidf.buildIndex(utils.dedup(e.payload for e in elements))
    survivors: list[RichTextElement] = []
    rewrite: dict[str, str] = {}
    for e in elements:
        target: Optional[RichTextElement] = None
        for s in survivors:
            if s.kind != e.kind:
                continue
            if s.payload == e.payload or tfidf.similarity(index, s.payload, e.payload) >= threshold:
                target = s
                break
        if target is None:
            survivors.append(e)
        else:
            log.debug(f'{irId}: merging {e.tag} into {target.tag}')
            rewrite[e.tag] = target.tag
    return (survivors, rewrite)

def mergeSimilarElements(ir: CanonicalIR,
                         threshold: float = DEFAULT_MERGE_THRESHOLD) -> CanonicalIR:
    """
    Merges elements of the same kind whose payloads are identical or have a TF-IDF
    cosine of at least threshold into their first occurrence. The index is rebuilt
    over the survivors until no pair merges, so the result is a fixpoint.
    """
    if not (0 < threshold <= 1):
        raise PipelineError.configError(f'merge threshold must be in (0,1], got {threshold}')
    content, elems = ir.content, ir.richText
    while len(elems) >= 2:
        survivors, rewrite = _mergeOnce(ir.id, elems, threshold)
        if not rewrite:
            break
        content = TAG_RE.sub(lambda m: rewrite.get(m.group(0), m.group(0)), content)
        content, elems = renumberTags(content, survivors)
    if elems is ir.richText:
        return ir
    return replace(ir, content=content, richText=elems)

def splitMultiCwe(ir: CanonicalIR, cweIds: list[str]) -> list[CanonicalIR]:
    if not cweIds:
        raise PipelineError('InvalidCweId', f'{ir.id}: no CWE-ID given')
    for c in cweIds:
        if CWE_RE.match(c) is None:
            raise PipelineError('InvalidCweId', f'{ir.id}: {c!r} is not of the form CWE-<n>')
    return [ir.withCwe(c, suffix=True) for c in utils.dedup(cweIds)]

def sortByTime(irs: Iterable[CanonicalIR]) -> list[CanonicalIR]:
    return sorted(irs, key=lambda ir: (ir.createdAt, ir.id))

def splitCorpus(irs: list[CanonicalIR], proportion: float) -> CorpusSplit:
    if not irs:
        raise PipelineError('EmptyCorpus', 'cannot split an empty corpus')
    if not (0 < proportion < 1):
        raise PipelineError.configError(f'proportion must be in (0,1), got {proportion}')
    ordered = sortByTime(irs)
    n = utils.roundHalfUp(proportion * len(ordered))
    return CorpusSplit(ordered[:n], ordered[n:], proportion)

def corpusStats(irs: Iterable[CanonicalIR]) -> CorpusStats:
    st = CorpusStats()
    for ir in irs:
        st.total += 1
        if ir.hasRichText():
            st.richText += 1
        st.scr += len(ir.tags('SCR'))
        st.code += len(ir.tags('CODE'))
        if ir.pageMissing:
            st.pageMissing += 1
        match ir.labelVul:
            case True:
                st.vul += 1
                if ir.cweId:
                    st.cwes[ir.cweId] = st.cwes.get(ir.cweId, 0) + 1
            case False:
                st.nonVul += 1
            case None:
                st.unlabelled += 1
    return st
