from __future__ import annotations
from typing import *
import common.constants as constants
import common.log as log
import sys
import traceback

type ErrorKind = Literal[
    'MalformedPage', 'InvalidCweId', 'EmptyCorpus',
    'CycleIntroduced', 'DanglingEndpoint', 'DuplicateId',
    'Transport', 'RateLimited', 'BackendRejected', 'LogprobsUnavailable', 'NoLabelToken',
    'ToolBackendUnavailable', 'KindMismatch',
    'DuplicateKey',
    'GatewayExhausted',
    'IsolatedNonTerminal', 'EmptyDatabase',
    'SingleClass', 'NoPositiveRows', 'NothingToEvaluate',
    'ConfigError', 'HashMismatch', 'StageFailed'
]

GATEWAY_ERRORS: list[ErrorKind] = ['Transport', 'RateLimited', 'BackendRejected',
                                   'LogprobsUnavailable', 'GatewayExhausted']

class PipelineError(Exception):
    """
    The error raised by all pipeline stages. The kind identifies the failure,
    the message gives the details.
    """
    def __init__(self, kind: ErrorKind, msg: str):
        super().__init__(kind + ': ' + msg)
        self.kind: ErrorKind = kind
        self.msg = msg
    @staticmethod
    def configError(msg: str) -> PipelineError:
        return PipelineError('ConfigError', msg)
    @staticmethod
    def stageFailed(stage: str, cause: Exception) -> PipelineError:
        err = PipelineError('StageFailed', f'stage {stage} failed: {cause}')
        err.__cause__ = cause
        return err
    def isGatewayError(self) -> bool:
        return self.kind in GATEWAY_ERRORS
    def exitCode(self) -> int:
        match self.kind:
            case 'ConfigError' | 'HashMismatch':
                return constants.CONFIG_ERROR_EXIT_CODE
            case 'StageFailed':
                return constants.STAGE_FAILED_EXIT_CODE
            case _:
                return constants.PIPELINE_ERROR_EXIT_CODE
    def displayAndDie(self) -> Never:
        lines = traceback.format_exception(self)
        log.debug(''.join(lines))
        log.error(str(self))
        sys.exit(self.exitCode())
