"""
Derivation of the random streams. Every stage gets its own stream per IR and run,
so that results do not depend on the processing order.
"""
import numpy as np
import common.utils as utils

def stageSeedSequence(seed: int, stage: int, key: str, run: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(stage, utils.stableKey(key), run))

def stageRng(seed: int, stage: int, key: str, run: int = 0) -> np.random.Generator:
    return np.random.default_rng(stageSeedSequence(seed, stage, key, run))

def requestSeed(seed: int, stage: int, key: str, run: int = 0) -> int:
    """
    A 31-bit integer seed for LLM requests.
    """
    state = stageSeedSequence(seed, stage, key, run).generate_state(1)
    return int(state[0]) & 0x7FFFFFFF
