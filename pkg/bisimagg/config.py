# bisimagg Configuration
# Values are loaded from ~/.bisimagg/.env (written by `bisimagg-config`), then ./.env

import os
from pathlib import Path

# ─── User data directory ──────────────────────────────────────────────────────
# Override with BISIMAGG_HOME env var for custom locations (CI, shared machines).
# Default: ~/.bisimagg/
USER_DATA_DIR = Path(os.environ.get("BISIMAGG_HOME", Path.home() / ".bisimagg"))

# Load .env from user data dir, then fallback to cwd
for _env_path in [USER_DATA_DIR / ".env", Path.cwd() / ".env"]:
    if _env_path.exists():
        try:
            from dotenv import load_dotenv
            load_dotenv(str(_env_path))
        except ImportError:
            pass
        break

# ─── Metric parameters ────────────────────────────────────────────────────────
# c_R / c_T default to (1 - gamma, gamma); override per run with --cR / --cT.
DEFAULT_GAMMA      = float(os.getenv("DEFAULT_GAMMA", "0.9"))
DEFAULT_DELTA      = float(os.getenv("DEFAULT_DELTA", "0.01"))      # d_fix accuracy
DEFAULT_EPSILON_VI = float(os.getenv("DEFAULT_EPSILON_VI", "1e-8"))  # value iteration accuracy

# ─── Tolerances ───────────────────────────────────────────────────────────────
PARTITION_TOL   = float(os.getenv("PARTITION_TOL", "1e-9"))    # signature bucket size
CERTIFICATE_TOL = float(os.getenv("CERTIFICATE_TOL", "1e-9"))  # duality gap / feasibility

# ─── Iteration caps ───────────────────────────────────────────────────────────
VI_ITERATION_CAP    = int(os.getenv("VI_ITERATION_CAP", "10000000"))
TRANSPORT_PIVOT_CAP = int(os.getenv("TRANSPORT_PIVOT_CAP", "100000"))

# ─── Experiment sweep ─────────────────────────────────────────────────────────
EPS_STEPS = int(os.getenv("EPS_STEPS", "50"))   # K + 1 evenly spaced epsilons in [0, 1]
WORKERS   = int(os.getenv("WORKERS", "1"))      # thread pool size for sweep cells

# ─── Logging ──────────────────────────────────────────────────────────────────
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

# ─── Paths (all in ~/.bisimagg/) ─────────────────────────────────────────────
LOGS_DIR   = USER_DATA_DIR / "logs"
OUTPUT_DIR = Path(os.getenv("OUTPUT_DIR") or USER_DATA_DIR / "runs")  # empty value means default
LOG_PATH   = LOGS_DIR / "bisimagg.log"


def ensure_dirs():
    """Create the data, log and output directories (called by the CLI, not on import)."""
    for d in (USER_DATA_DIR, LOGS_DIR, OUTPUT_DIR):
        d.mkdir(parents=True, exist_ok=True)
