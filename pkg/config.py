"""
Runtime configuration for the dephasing simulator
"""

import os
from typing import Optional

from dotenv import load_dotenv

from services.errors import ConfigurationError

# Load environment variables
load_dotenv()

# Worker pool
JOBS_ENV_VAR = 'DEPHASE_JOBS'

# Oracle settings
ORACLE_SIZE_CAP = int(os.getenv('DEPHASE_ORACLE_CAP', 4096))

# Output settings
OUTPUT_DIR = os.getenv('DEPHASE_OUTPUT_DIR', 'output')

# Thermal truncation: discarded tail mass
TAIL_EPSILON = float(os.getenv('DEPHASE_TAIL_EPSILON', 1e-12))

LOG_LEVEL = os.getenv('DEPHASE_LOG_LEVEL', 'INFO').upper()


def resolve_jobs(cli_value: Optional[int] = None) -> int:
    """
    Worker count for sweeps

    Precedence: --jobs flag, then DEPHASE_JOBS, then the CPU count.
    """
    if cli_value is not None:
        if cli_value < 1:
            raise ConfigurationError([f"--jobs must be >= 1, got {cli_value}"])
        return cli_value

    env_value = os.getenv(JOBS_ENV_VAR)
    if env_value:
        try:
            jobs = int(env_value)
        except ValueError:
            raise ConfigurationError([f"{JOBS_ENV_VAR} must be an integer, got {env_value!r}"])
        if jobs < 1:
            raise ConfigurationError([f"{JOBS_ENV_VAR} must be >= 1, got {jobs}"])
        return jobs

    return max(os.cpu_count() or 1, 1)
