import os
import sys
import pytest
import common.log as log

# assertion rewriting for the fixture builders
pytest.register_assert_rewrite('common.testsupport')

LEVEL_ENV_VAR = 'IRTRIAGE_TEST_LOG_LEVEL'

def _testLogLevel() -> int:
    """
    The console level of the test run: --log-level on the pytest command line wins
    over the environment variable, warnings are the default.
    """
    args = sys.argv
    if '--log-level' in args[:-1]:
        return log.resolveLevelName(args[args.index('--log-level') + 1])
    return log.resolveLevelName(os.environ.get(LEVEL_ENV_VAR, 'warn'))

log.init(_testLogLevel(), 'irtriage_tests.log')
