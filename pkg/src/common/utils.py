import sys
from typing import *
import hashlib
import json
import math
import os
import tempfile
import zlib

def abort(msg: str) -> Never:
    sys.stderr.write(f'ERROR: {msg}\nAborting!\n')
    sys.exit(1)

def readTextFile(path: str) -> str:
    with open(path, 'r', encoding='utf-8') as f:
        try:
            return f.read()
        except UnicodeDecodeError as err:
            err.add_note(f'Cannot decode content of file {path}')
            raise err

def writeTextFile(path: str, content: str):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        return f.write(content)

def writeTextFileAtomic(path: str, content: str):
    """
    Writes content to a temporary file in the directory of path and renames it to path
    afterwards. Concurrent readers either see the old or the new content.
    """
    d = os.path.dirname(path) or '.'
    fd, tmp = tempfile.mkstemp(dir=d, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as f:
            f.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise

def sha256Hex(s: str) -> str:
    return hashlib.sha256(s.encode('utf-8')).hexdigest()

def stableKey(s: str) -> int:
    """
    A hash of s that is stable across interpreter runs (unlike hash()).
    """
    return zlib.crc32(s.encode('utf-8'))

def canonicalJson(x: Any) -> str:
    return json.dumps(x, sort_keys=True, ensure_ascii=False, separators=(',', ':'))

def dumpJson(x: Any) -> str:
    return json.dumps(x, sort_keys=True, ensure_ascii=False, indent=2) + '\n'

def readJsonl(path: str) -> list[dict[str, Any]]:
    res: list[dict[str, Any]] = []
    for i, line in enumerate(readTextFile(path).splitlines()):
        line = line.strip()
        if not line:
            continue
        try:
            x = json.loads(line)
        except json.JSONDecodeError as err:
            err.add_note(f'{path}:{i + 1}: invalid JSON line')
            raise err
        if not isinstance(x, dict):
            raise ValueError(f'{path}:{i + 1}: expected a JSON object, got {shorten(line, 40)}')
        res.append(cast(dict[str, Any], x))
    return res

def renderJsonl(xs: Iterable[Any]) -> str:
    return ''.join(canonicalJson(x) + '\n' for x in xs)

def writeJsonl(path: str, xs: Iterable[Any]):
    writeTextFileAtomic(path, renderJsonl(xs))

def roundHalfUp(x: float) -> int:
    return int(math.floor(x + 0.5))

def listDictAdd[K, V](d: dict[K, list[V]], k: K, v: V | list[V]):
    if not isinstance(v, list):
        listV = [v]
    else:
        listV: list[V] = v
    old = d.get(k)
    if old is None:
        d[k] = listV[:]
    else:
        d[k] = old + listV

def shorten(s: str, n: int):
    if len(s) < n:
        return s
    else:
        return s[:n] + '...'

def flatten[T](ls: Iterable[list[T]]) -> list[T]:
    res: list[T] = []
    for x in ls:
        res.extend(x)
    return res

def dedup[T](xs: Iterable[T]) -> list[T]:
    """
    Removes duplicates, keeping the first occurrence of each element.
    """
    seen: set[T] = set()
    res: list[T] = []
    for x in xs:
        if x not in seen:
            seen.add(x)
            res.append(x)
    return res
