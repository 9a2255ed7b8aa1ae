"""
Deterministic analyzers backed by fixture files.
"""
from typing import *
from common.pipelineSupport import PipelineError
import common.utils as utils
import shell

class SidecarScrAnalyzer:
    """
    Resolves a screenshot URL to the text file <sidecarDir>/<sha256(url)>.txt.
    """
    def __init__(self, sidecarDir: str):
        self.sidecarDir = sidecarDir
        self.calls = 0
    def sidecarPath(self, url: str) -> str:
        return shell.pjoin(self.sidecarDir, utils.sha256Hex(url) + '.txt')
    def analyze(self, payload: str) -> str:
        self.calls += 1
        p = self.sidecarPath(payload)
        if not shell.isFile(p):
            raise PipelineError('ToolBackendUnavailable', f'no sidecar text for screenshot {payload}')
        return utils.readTextFile(p)

# first matching language wins
LANGUAGE_KEYWORDS: list[tuple[str, list[str]]] = [
    ('php', ['<?php', '$_get', '$_post', 'echo $']),
    ('python', ['def ', 'import ', 'print(']),
    ('javascript', ['function', 'const ', '=>', 'document.', '<script']),
    ('sql', ['select ', 'insert into', 'union ', 'drop table']),
    ('c', ['#include', 'malloc(', 'printf(']),
    ('shell', ['#!/bin', 'echo ', 'sudo ', 'curl ', 'rm -'])
]

def guessLanguage(code: str) -> str:
    low = code.lower()
    for lang, kws in LANGUAGE_KEYWORDS:
        if any(k in low for k in kws):
            return lang
    return 'unknown'

class KeywordCodeAnalyzer:
    def __init__(self):
        self.calls = 0
    def analyze(self, payload: str) -> str:
        self.calls += 1
        lines = [l.strip() for l in payload.splitlines() if l.strip()]
        first = lines[0] if lines else ''
        return f'code snippet in {guessLanguage(payload)}: {first}'
