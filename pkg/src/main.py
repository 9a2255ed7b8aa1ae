import argparse
from typing import *
from common.pipelineSupport import PipelineError
from pipeline.config import PipelineConfig, configHash, loadConfig, withOverrides
from pipeline.pipeline import *
import common.constants as constants
import common.log as log
import common.pretty as pretty
import common.utils as utils
import json
import sys

LOG_FILE = 'irtriage.log'

def parseArgs(argv: Optional[list[str]] = None):
    parser = argparse.ArgumentParser(
        description='Identify vulnerability-related issue reports from their rich-text content')
    parser.add_argument('--config', metavar='FILE', help='TOML configuration file')
    parser.add_argument('--level', help='The loglevel (debug, info, warn)')
    parser.add_argument('--json', action='store_true', help='Print results as JSON')
    parser.add_argument('--seed', type=int, help='Master seed (overrides the configuration)')
    subparsers = parser.add_subparsers(help='Commands', dest='cmd')

    def addDirs(p: argparse.ArgumentParser):
        p.add_argument('--db', help='Reasoning database directory')
        p.add_argument('--out', help='Output directory')

    def addTargets(p: argparse.ArgumentParser):
        p.add_argument('--target', help='Target IRs (JSONL, default: the target part of the corpus)')
        p.add_argument('--runs', type=int, help='Number of seed-varied runs')
        p.add_argument('--corpus', help='Corpus file (JSONL)')

    ing = subparsers.add_parser('ingest', help='Builds the corpus file from a label manifest ' \
                                'and the page snapshots')
    ing.add_argument('--labels', help='Label manifest (JSONL)')
    ing.add_argument('--snapshots', help='Directory with the page snapshots')
    ing.add_argument('--corpus', help='Output corpus file (JSONL)')

    fetch = subparsers.add_parser('fetch', help='Downloads the issue pages listed in a manifest')
    fetch.add_argument('--manifest', help='File with one URL per line')
    fetch.add_argument('--snapshots', help='Output directory')

    stats = subparsers.add_parser('stats', help='Prints statistics of the corpus')
    stats.add_argument('--corpus', help='Corpus file (JSONL)')

    va = subparsers.add_parser('va', help='VA knowledge store')
    vaSub = va.add_subparsers(dest='vaCmd')
    vaIngest = vaSub.add_parser('ingest', help='Ingests a VA export (or the configured VA sources) ' \
                                'into the database')
    vaIngest.add_argument('source', nargs='?', metavar='FILE',
                          help='JSONL file of knowledge records (default: va.sources)')
    vaIngest.add_argument('--db', help='Reasoning database directory')

    helpPrepare = f'''Builds the reasoning graphs of the historical IRs.

Exit code {constants.CONFIG_ERROR_EXIT_CODE} for configuration errors.'''
    prep = subparsers.add_parser('prepare-db', help=helpPrepare)
    prep.add_argument('--corpus', help='Corpus file (JSONL)')
    addDirs(prep)

    ret = subparsers.add_parser('retrieve', help='Retrieves the relevant graphs of every target IR')
    ret.add_argument('--theta', type=float, help='Similarity threshold theta_sim')
    addTargets(ret)
    addDirs(ret)

    ident = subparsers.add_parser('identify', help='Identifies the vulnerability of every target IR')
    ident.add_argument('--theta-out', type=float, help='Output probability threshold')
    addTargets(ident)
    addDirs(ident)

    ev = subparsers.add_parser('evaluate', help='Computes the metrics of the predictions')
    ev.add_argument('--preds', help='Predictions file (default: <out>/preds.jsonl)')
    ev.add_argument('--truth', help='Labelled IRs (JSONL, default: the target part of the corpus)')
    ev.add_argument('--runs', type=int, help='Number of runs the predictions were made with')
    ev.add_argument('--pr-interval', type=float, help='Step of the threshold grid')
    ev.add_argument('--pr-csv', help='Output file of the PR curve (default: <out>/curve.csv)')
    ev.add_argument('--corpus', help='Corpus file (JSONL)')
    addDirs(ev)

    runAll = subparsers.add_parser('run-all', help=f'''Runs prepare-db, identify and evaluate.

Exit code {constants.STAGE_FAILED_EXIT_CODE} if a stage fails.''')
    runAll.add_argument('--runs', type=int, help='Number of seed-varied runs')
    runAll.add_argument('--dry-run', action='store_true',
                        help='Print the resolved configuration and exit')
    runAll.add_argument('--corpus', help='Corpus file (JSONL)')
    addDirs(runAll)

    args = parser.parse_args(argv)
    if args.cmd is None:
        utils.abort('No command given')
    if args.cmd == 'va' and args.vaCmd is None:
        utils.abort('No va command given')
    return args

def resolveConfig(args: argparse.Namespace) -> PipelineConfig:
    def flag(name: str) -> Any:
        return getattr(args, name, None)
    overrides: dict[str, Any] = {
        'seed': args.seed,
        'theta_sim': flag('theta'),
        'theta_out': flag('theta_out'),
        'runs': flag('runs'),
        'corpus.file': flag('corpus'),
        'corpus.labels': flag('labels'),
        'corpus.snapshot_dir': flag('snapshots'),
        'corpus.manifest': flag('manifest'),
        'corpus.targets': flag('target'),
        'corpus.truth': flag('truth'),
        'evaluation.pr_interval': flag('pr_interval'),
        'output.db_dir': flag('db'),
        'output.out_dir': flag('out'),
        'output.pr_csv': flag('pr_csv')
    }
    return withOverrides(loadConfig(args.config), overrides)

def output(args: argparse.Namespace, title: str, x: Any):
    if args.json:
        print(json.dumps(x, sort_keys=True, indent=2))
    elif isinstance(x, dict):
        print(pretty.renderSection(title, cast(dict[str, Any], x)))
    else:
        print(pretty.renderValue(x))

def runCommand(args: argparse.Namespace):
    cfg = resolveConfig(args)
    p = Pipeline(cfg)
    match args.cmd:
        case 'ingest':
            irs = cmdIngest(p)
            output(args, 'ingest', {'irs': len(irs), 'corpus': cfg.corpus.file})
        case 'fetch':
            missing = cmdFetch(p)
            output(args, 'fetch', {'missing': len(missing)})
        case 'stats':
            output(args, 'corpus', cmdStats(p).toJson())
        case 'va':
            store = cmdVaIngest(p, args.source)
            output(args, 'va', {'records': len(store), 'db': cfg.output.dbDir})
        case 'prepare-db':
            m = cmdPrepareDb(p)
            output(args, 'reasoning database', m.toJson())
        case 'retrieve':
            res = cmdRetrieve(p)
            output(args, 'retrieved', [{'run': run, 'target': t, 'graphs': [h.toJson() for h in hits]}
                                       for run, byTarget in res.items()
                                       for t, hits in byTarget.items()])
        case 'identify':
            preds = cmdIdentify(p)
            output(args, 'predictions', [x.toJson() for x in preds])
        case 'evaluate':
            res = cmdEvaluate(p, args.preds)
            output(args, 'report', res.toJson(configHash(cfg)))
        case 'run-all':
            if args.dry_run:
                output(args, 'resolved configuration', dryRun(cfg))
                return
            res = cmdRunAll(p)
            output(args, 'report', res.toJson(configHash(cfg)))
        case _:
            utils.abort(f'Unknown command: {args.cmd}')

def main(argv: Optional[list[str]] = None):
    args = parseArgs(argv)
    level = log.resolveLevelName(args.level or 'warn')
    log.init(level, None if getattr(args, 'dry_run', False) else LOG_FILE)
    try:
        runCommand(args)
    except PipelineError as e:
        e.displayAndDie()
    sys.exit(0)

if __name__ == '__main__':
    main()
