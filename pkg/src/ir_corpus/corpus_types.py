from __future__ import annotations
from dataclasses import dataclass, field, replace
from typing import *
from common.constants import RichTextKind
from common.pipelineSupport import PipelineError
import re

TAG_RE = re.compile(r'\[(SCR|CODE)([1-9][0-9]*)\]')
CWE_RE = re.compile(r'^CWE-[0-9]+$')

def mkTag(kind: RichTextKind, n: int) -> str:
    return f'[{kind}{n}]'

def tagKind(tag: str) -> RichTextKind:
    m = TAG_RE.fullmatch(tag)
    if m is None:
        raise ValueError(f'Not a rich-text tag: {tag}')
    return cast(RichTextKind, m.group(1))

def tagsInText(s: str) -> list[str]:
    """
    Returns the distinct tags of s in order of first appearance.
    """
    res: list[str] = []
    for m in TAG_RE.finditer(s):
        if m.group(0) not in res:
            res.append(m.group(0))
    return res

@dataclass(frozen=True)
class RawIssuePage:
    sourceUrl: str
    html: str
    fetchedAt: int

@dataclass(frozen=True)
class RichTextElement:
    kind: RichTextKind
    tag: str
    payload: str
    def __post_init__(self):
        if TAG_RE.fullmatch(self.tag) is None or tagKind(self.tag) != self.kind:
            raise ValueError(f'Tag {self.tag} does not match kind {self.kind}')
        if not self.payload:
            raise ValueError(f'Empty payload for {self.tag}')
    def toJson(self) -> dict[str, Any]:
        return {'tag': self.tag, 'kind': self.kind, 'payload': self.payload}
    @staticmethod
    def fromJson(d: dict[str, Any]) -> RichTextElement:
        tag = str(d['tag'])
        kind = d.get('kind') or tagKind(tag)
        return RichTextElement(cast(RichTextKind, kind), tag, str(d['payload']))

@dataclass(frozen=True)
class CanonicalIR:
    id: str
    title: str
    content: str
    richText: tuple[RichTextElement, ...]
    createdAt: int
    labelVul: Optional[bool] = None
    cweId: Optional[str] = None
    cveId: Optional[str] = None
    pageMissing: bool = False
    def element(self, tag: str) -> Optional[RichTextElement]:
        for e in self.richText:
            if e.tag == tag:
                return e
        return None
    def tags(self, kind: Optional[RichTextKind] = None) -> list[str]:
        return [e.tag for e in self.richText if kind is None or e.kind == kind]
    def hasRichText(self) -> bool:
        return len(self.richText) > 0
    def checkTags(self):
        """
        Checks that the tags of the content and the rich-text table correspond
        one-to-one.
        """
        inContent = tagsInText(self.content)
        inTable = [e.tag for e in self.richText]
        if len(set(inTable)) != len(inTable):
            raise ValueError(f'Duplicate rich-text entries in {self.id}: {inTable}')
        if set(inContent) != set(inTable):
            raise ValueError(f'Tags of {self.id} do not match: content {inContent}, '
                             f'rich text {inTable}')
    def withCwe(self, cweId: str, suffix: bool) -> CanonicalIR:
        newId = f'{self.id}#cwe-{cweId.split("-")[1]}' if suffix else self.id
        return replace(self, id=newId, cweId=cweId, labelVul=True)
    def toJson(self) -> dict[str, Any]:
        return {
            'id': self.id,
            'Title': self.title,
            'Content': self.content,
            'Rich-Text': [e.toJson() for e in self.richText],
            'created_at': self.createdAt,
            'label_vul': self.labelVul,
            'cwe_id': self.cweId,
            'cve_id': self.cveId,
            'page_missing': self.pageMissing
        }
    @staticmethod
    def fromJson(d: dict[str, Any]) -> CanonicalIR:
        def get(*keys: str) -> Any:
            for k in keys:
                if k in d:
                    return d[k]
            return None
        rich = get('Rich-Text', 'rich_text') or []
        label = get('label_vul')
        ir = CanonicalIR(
            id=str(d['id']),
            title=str(get('Title', 'title') or ''),
            content=str(get('Content', 'content') or ''),
            richText=tuple(RichTextElement.fromJson(e) for e in rich),
            createdAt=int(get('created_at') or 0),
            labelVul=None if label is None else bool(label),
            cweId=get('cwe_id'),
            cveId=get('cve_id'),
            pageMissing=bool(get('page_missing') or False)
        )
        if ir.cweId is not None and CWE_RE.match(ir.cweId) is None:
            raise PipelineError('InvalidCweId', f'{ir.id}: {ir.cweId}')
        return ir

@dataclass(frozen=True)
class CorpusSplit:
    historical: list[CanonicalIR]
    target: list[CanonicalIR]
    proportion: float

@dataclass
class CorpusStats:
    total: int = 0
    richText: int = 0
    scr: int = 0
    code: int = 0
    vul: int = 0
    nonVul: int = 0
    unlabelled: int = 0
    pageMissing: int = 0
    cwes: dict[str, int] = field(default_factory=dict[str, int])
    def toJson(self) -> dict[str, Any]:
        return {'total': self.total, 'rich_text': self.richText, 'scr': self.scr,
                'code': self.code, 'vul': self.vul, 'non_vul': self.nonVul,
                'unlabelled': self.unlabelled, 'page_missing': self.pageMissing,
                'cwes': dict(sorted(self.cwes.items()))}
