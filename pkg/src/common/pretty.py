"""
Human-readable output of the command line (the --json flag bypasses it).
"""
from prettyprinter import doc
from prettyprinter import doctypes
from prettyprinter import render
from prettyprinter import layout
from prettyprinter import syntax
from prettyprinter import pformat
from typing import *

type Doc = doc.Doc

def strDoc(s: str) -> Doc:
    return doc.annotate(syntax.Token.NAME_BUILTIN, s)

def numDoc(x: float) -> Doc:
    return doc.annotate(syntax.Token.NUMBER_FLOAT, f'{x:.4f}')

def concat(ds: Iterable[Doc]) -> Doc:
    return doc.concat(ds)

def intersperse(sep: Doc, ys: list[Doc]) -> list[Doc]:
    l: list[Doc] = []
    for i, y in enumerate(ys):
        l.append(y)
        if i < len(ys) - 1:
            l.append(sep)
    return l

def vsep(docs: list[Doc]) -> Doc:
    return doc.concat(intersperse(doctypes.HARDLINE, docs))

def indent(d: Doc) -> Doc:
    return doc.nest(2, d)

def renderDoc(d: Doc) -> str:
    return render.default_render_to_str(layout.layout_smart(d))

def valueDoc(v: Any) -> Doc:
    match v:
        case bool() | None:
            return strDoc(str(v))
        case int():
            return strDoc(str(v))
        case float():
            return numDoc(v)
        case _:
            return strDoc(str(v))

def sectionDoc(title: str, d: dict[str, Any]) -> Doc:
    """
    A title line followed by indented "key: value" lines; nested dicts become
    subsections.
    """
    lines: list[Doc] = []
    for k, v in d.items():
        if isinstance(v, dict):
            lines.append(sectionDoc(k, cast(dict[str, Any], v)))
        else:
            lines.append(concat([strDoc(k), ': ', valueDoc(v)]))
    if not lines:
        return strDoc(title + ': (empty)')
    return concat([strDoc(title + ':'), indent(concat([doctypes.HARDLINE, vsep(lines)]))])

def renderSection(title: str, d: dict[str, Any]) -> str:
    return renderDoc(sectionDoc(title, d))

def renderValue(x: Any, width: int = 100) -> str:
    return pformat(x, width=width, sort_dict_keys=True)
