"""
Parsing of issue-page snapshots into canonical records. Screenshot links and code
blocks are replaced inline by [SCRn]/[CODEn] tags and collected in the rich-text table;
all other markup is stripped.
"""
from datetime import datetime, timezone
from typing import *
from urllib.parse import urlparse
from bs4 import BeautifulSoup, NavigableString, Tag
from common.constants import RichTextKind
from common.pipelineSupport import PipelineError
from ir_corpus.corpus_types import *
from ir_corpus.corpus_transform import renumberTags
import common.log as log
import re

IMAGE_EXTS = ('.png', '.jpg', '.jpeg', '.gif')

_ISSUE_URL_RE = re.compile(r'github\.com/([^/]+)/([^/]+)/issues/([0-9]+)')
_FENCE_RE = re.compile(r'```[^\n`]*\n(.*?)```', re.S)

def isImageUrl(url: Optional[str]) -> bool:
    if not url:
        return False
    return urlparse(url).path.lower().endswith(IMAGE_EXTS)

def issueIdFromUrl(url: str) -> str:
    m = _ISSUE_URL_RE.search(url)
    if m is None:
        return url
    return f'{m.group(1)}/{m.group(2)}#{m.group(3)}'

def parseTimestamp(s: str) -> Optional[int]:
    try:
        dt = datetime.fromisoformat(s.strip())
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())

def _attr(el: Tag, name: str) -> Optional[str]:
    x = el.get(name)
    if isinstance(x, list):
        return ' '.join(x)
    return x

def _text(el: Tag) -> str:
    return ' '.join(el.get_text(' ').split())

def _findTitle(soup: BeautifulSoup) -> Optional[Tag]:
    for el in [soup.find(class_='js-issue-title'), soup.find('h1'), soup.find('title')]:
        if isinstance(el, Tag) and _text(el):
            return el
    return None

def _findBody(soup: BeautifulSoup) -> Tag:
    for el in [soup.find(class_='comment-body'), soup.find(class_='markdown-body'), soup.body]:
        if isinstance(el, Tag):
            return el
    return soup

def _createdAt(soup: BeautifulSoup, default: int) -> int:
    for name in ['relative-time', 'time']:
        el = soup.find(name)
        if isinstance(el, Tag):
            dt = _attr(el, 'datetime')
            ts = parseTimestamp(dt) if dt else None
            if ts is not None:
                return ts
    return default

def _richKind(el: Tag) -> Optional[RichTextKind]:
    match el.name:
        case 'a':
            return 'SCR' if isImageUrl(_attr(el, 'href')) else None
        case 'img':
            return 'SCR' if isImageUrl(_attr(el, 'src')) else None
        case 'pre' | 'code':
            return 'CODE'
        case _:
            return None

def _extractElements(body: Tag) -> list[RichTextElement]:
    """
    Replaces rich-text elements of body by tags, in document order.
    """
    elems: list[RichTextElement] = []
    counters: dict[RichTextKind, int] = {'SCR': 0, 'CODE': 0}
    while True:
        el = body.find(lambda t: _richKind(t) is not None)
        if not isinstance(el, Tag):
            break
        kind = _richKind(el)
        match kind:
            case 'SCR':
                payload = _attr(el, 'href') if el.name == 'a' else _attr(el, 'src')
                payload = (payload or '').strip()
            case 'CODE':
                payload = el.get_text().strip('\n')
            case None:
                raise ValueError('unreachable')
        if not payload.strip():
            el.decompose()
            continue
        counters[kind] += 1
        tag = mkTag(kind, counters[kind])
        elems.append(RichTextElement(kind, tag, payload))
        el.replace_with(NavigableString(f' {tag} '))
    return elems

def _extractFences(text: str, elems: list[RichTextElement]) -> str:
    n = len([e for e in elems if e.kind == 'CODE'])
    def repl(m: re.Match[str]) -> str:
        nonlocal n
        payload = m.group(1).strip('\n')
        if not payload.strip():
            return ' '
        n += 1
        tag = mkTag('CODE', n)
        elems.append(RichTextElement('CODE', tag, payload))
        return f' {tag} '
    return _FENCE_RE.sub(repl, text)

def parseIssuePage(page: RawIssuePage) -> CanonicalIR:
    soup = BeautifulSoup(page.html, 'html.parser')
    titleEl = _findTitle(soup)
    if titleEl is None:
        raise PipelineError('MalformedPage', f'no title in page {page.sourceUrl}')
    title = _text(titleEl)
    createdAt = _createdAt(soup, page.fetchedAt)
    for junk in soup.find_all(['script', 'style']):
        junk.decompose()
    body = _findBody(soup)
    if titleEl in body.descendants:
        titleEl.decompose()
    elems = _extractElements(body)
    text = _extractFences(body.get_text(' '), elems)
    content, richText = renumberTags(' '.join(text.split()), elems)
    ir = CanonicalIR(id=issueIdFromUrl(page.sourceUrl), title=title, content=content,
                     richText=richText, createdAt=createdAt)
    ir.checkTags()
    log.debug(f'Parsed {page.sourceUrl}: {len(richText)} rich-text elements')
    return ir
