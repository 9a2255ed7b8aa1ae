"""
Manifest-driven snapshotting of issue pages.
"""
from typing import *
import common.log as log
import common.utils as utils
import requests
import shell
from ir_corpus.corpus_io import snapshotName

USER_AGENT = 'irtriage-fetcher/1.0'
DEFAULT_TIMEOUT = 30

def readManifest(path: str) -> list[str]:
    urls: list[str] = []
    for line in utils.readTextFile(path).splitlines():
        line = line.strip()
        if line and not line.startswith('#'):
            urls.append(line)
    return urls

def fetchPages(urls: list[str], outDir: str, session: Optional[requests.Session] = None,
               timeout: float = DEFAULT_TIMEOUT) -> tuple[list[str], list[str]]:
    """
    Downloads every url into outDir/<sha256(url)>.html. Returns the fetched and the
    missing urls; the latter are also listed in outDir/missing.txt.
    """
    shell.mkdirs(outDir)
    sess = session or requests.Session()
    sess.headers.update({'User-Agent': USER_AGENT})
    fetched: list[str] = []
    missing: list[str] = []
    for url in urls:
        try:
            resp = sess.get(url, timeout=timeout)
        except requests.RequestException as e:
            log.warn(f'Fetching {url} failed: {e}')
            missing.append(url)
            continue
        if resp.status_code // 100 != 2 or not resp.text:
            log.warn(f'Fetching {url} returned status {resp.status_code}')
            missing.append(url)
            continue
        utils.writeTextFileAtomic(shell.pjoin(outDir, snapshotName(url)), resp.text)
        fetched.append(url)
        log.info(f'Fetched {url}')
    utils.writeTextFile(shell.pjoin(outDir, 'missing.txt'), ''.join(u + '\n' for u in missing))
    return (fetched, missing)
