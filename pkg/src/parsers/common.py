from typing import *
from lark import Lark, Token, ParseTree, exceptions
import common.log as log
import common.utils as utils
import os
import threading

class ParseError(Exception):
    def __init__(self, msg: str):
        super().__init__(msg)

def asToken(x: Token | ParseTree) -> Token:
    match x:
        case Token(): return x
        case _:
            raise ValueError(f'Expected single token but got a parse tree: {repr(x)}')

def asTree(x: Token | ParseTree) -> ParseTree:
    match x:
        case Token(): raise ValueError(f'Expected parse tree but got a single token: {repr(x)}')
        case _: return x

def tokens(t: ParseTree) -> list[Token]:
    """
    Returns the tokens directly below t, skipping subtrees and None placeholders.
    """
    return [c for c in t.children if isinstance(c, Token)]

def grammarPath(moduleFile: str, grammarName: str) -> str:
    """
    Returns the path of a grammar file living next to the given module file.
    """
    return os.path.join(os.path.dirname(os.path.abspath(moduleFile)), grammarName)

def mkParser(grammarFile: str, start: str | list[str]) -> Lark:
    grammar = utils.readTextFile(grammarFile)
    try:
        return Lark(grammar, start=start, parser='lalr', lexer='contextual',
                    maybe_placeholders=True)
    except exceptions.LarkError as err:
        raise ParseError(f'Error constructing parser from grammar in {grammarFile}: {err}')

_parserCache: dict[tuple[str, str], Lark] = {}
_parserLock = threading.Lock()

def cachedParser(grammarFile: str, start: list[str]) -> Lark:
    """
    Builds an LALR parser for the grammar once per process. Lark parsers are
    safe to share between threads for parsing.
    """
    key = (grammarFile, ','.join(start))
    with _parserLock:
        p = _parserCache.get(key)
        if p is None:
            p = mkParser(grammarFile, start)
            _parserCache[key] = p
        return p

def parseLine(parser: Lark, line: str, start: str) -> ParseTree:
    """
    Parses a single line of text with the given start symbol.
    """
    try:
        t = parser.parse(line.strip(), start=start)
    except exceptions.LarkError as err:
        raise ParseError(str(err))
    log.debug(f'parse tree for {utils.shorten(line, 60)!r}: {t}')
    return t
