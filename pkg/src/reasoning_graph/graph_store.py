"""
The reasoning database on disk:

    <db>/graphs/<quoted ir id>.json
    <db>/manifest.json
"""
from dataclasses import dataclass, field
from typing import *
from urllib.parse import quote, unquote
from common.constants import DB_SCHEMA_VERSION
from common.pipelineSupport import PipelineError
from reasoning_graph.graph_types import ReasoningGraph
import common.log as log
import common.utils as utils
import json
import os
import shell

GRAPHS_DIR = 'graphs'
MANIFEST_FILE = 'manifest.json'

def graphFileName(irId: str) -> str:
    return quote(irId, safe='') + '.json'

def irIdFromFileName(name: str) -> str:
    return unquote(name[:-len('.json')])

@dataclass
class DbManifest:
    configHash: str
    statuses: dict[str, str] = field(default_factory=dict[str, str])
    schemaVersion: int = DB_SCHEMA_VERSION
    @property
    def count(self) -> int:
        return len([s for s in self.statuses.values() if s in ('ok', 'partial')])
    def toJson(self) -> dict[str, Any]:
        return {'schema_version': self.schemaVersion, 'count': self.count,
                'config_hash': self.configHash, 'statuses': dict(sorted(self.statuses.items()))}
    @staticmethod
    def fromJson(d: dict[str, Any]) -> 'DbManifest':
        return DbManifest(str(d['config_hash']), {str(k): str(v) for k, v in d['statuses'].items()},
                          int(d['schema_version']))

class ReasoningDb:
    def __init__(self, path: str):
        self.path = path
        self.graphsDir = shell.pjoin(path, GRAPHS_DIR)
    def create(self):
        """
        Creates an empty database, removing graphs of an earlier run.
        """
        shell.mkdirs(self.graphsDir)
        for name in os.listdir(self.graphsDir):
            if name.endswith('.json'):
                os.remove(shell.pjoin(self.graphsDir, name))
    def exists(self) -> bool:
        return shell.isFile(shell.pjoin(self.path, MANIFEST_FILE))
    def saveGraph(self, g: ReasoningGraph):
        shell.mkdirs(self.graphsDir)
        utils.writeTextFileAtomic(shell.pjoin(self.graphsDir, graphFileName(g.irId)),
                                  utils.dumpJson(g.toJson()))
    def loadGraph(self, irId: str) -> ReasoningGraph:
        p = shell.pjoin(self.graphsDir, graphFileName(irId))
        return ReasoningGraph.fromJson(json.loads(utils.readTextFile(p)))
    def graphIds(self) -> list[str]:
        if not shell.isDir(self.graphsDir):
            return []
        names = [n for n in os.listdir(self.graphsDir) if n.endswith('.json')]
        return sorted(irIdFromFileName(n) for n in names)
    def loadGraphs(self) -> list[ReasoningGraph]:
        return [self.loadGraph(i) for i in self.graphIds()]
    def writeManifest(self, m: DbManifest):
        shell.mkdirs(self.path)
        utils.writeTextFileAtomic(shell.pjoin(self.path, MANIFEST_FILE), utils.dumpJson(m.toJson()))
    def readManifest(self) -> DbManifest:
        p = shell.pjoin(self.path, MANIFEST_FILE)
        if not shell.isFile(p):
            raise PipelineError('EmptyDatabase', f'no reasoning database at {self.path}')
        return DbManifest.fromJson(json.loads(utils.readTextFile(p)))
    def checkHash(self, expected: str):
        m = self.readManifest()
        if m.configHash != expected:
            raise PipelineError('HashMismatch', f'database {self.path} was built with config '
                                f'{m.configHash[:12]}, current config is {expected[:12]}')
        log.debug(f'Database {self.path} matches config hash {expected[:12]}')
