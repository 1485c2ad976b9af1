import os
from pathlib import Path

# File paths
PROJECT_ROOT = Path(__file__).parent.parent
REFERENCE_DIR = PROJECT_ROOT / 'data' / 'reference'
OUTPUT_DIR = Path(os.environ.get('GENIE_SECRETARY_OUTPUT_DIR', PROJECT_ROOT / 'data' / 'output'))

# Logging
LOG_LEVEL = os.environ.get('GENIE_SECRETARY_LOG_LEVEL', 'INFO')

# Exact enumeration
ENUMERATION_CAP = 8

# Proxy lengths for the finite-N stand-ins of N -> infinity
EXPECTATION_PROXY_N = 2000

# Asymptotic threshold search
SEARCH_CAP = 1000
TAIL_TOL = 1e-14
QUAD_TOL = 1e-10

# Monte Carlo
SIM_BATCH_SIZE = 20_000
SIM_TRIALS = 100_000
SIM_SEED = 20240601

# Output formatting
SIGNIFICANT_DIGITS = 10

# Theta grids
TABLE1_THETAS = [
    0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9,
    0.91, 0.92, 0.93, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99,
    1.01, 1.02, 1.03, 1.04, 1.05, 1.06, 1.07, 1.08, 1.09, 1.1,
    1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2, 3, 4, 5,
]
TABLE2_THETAS = TABLE1_THETAS[:19] + [1] + TABLE1_THETAS[19:]
MAX_SELECTIONS = 5
