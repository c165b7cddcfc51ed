#!/usr/bin/env python3
"""
bisimagg-config: open ~/.bisimagg/.env in the system text editor.
Run: bisimagg-config
"""

import os
import subprocess
import sys
from pathlib import Path

ENV_PATH = Path(os.environ.get("BISIMAGG_HOME", Path.home() / ".bisimagg")) / ".env"

DEFAULT_ENV = (
    "# bisimagg configuration\n"
    "# Command-line flags override these values.\n\n"
    "DEFAULT_GAMMA=0.9\n"
    "DEFAULT_DELTA=0.01\n"
    "DEFAULT_EPSILON_VI=1e-8\n\n"
    "PARTITION_TOL=1e-9\n"
    "CERTIFICATE_TOL=1e-9\n\n"
    "VI_ITERATION_CAP=10000000\n"
    "TRANSPORT_PIVOT_CAP=100000\n\n"
    "EPS_STEPS=50\n"
    "WORKERS=1\n\n"
    "LOG_LEVEL=INFO\n"
    "OUTPUT_DIR=\n"
)


def write_default_env(path: Path = ENV_PATH) -> bool:
    """Write the default .env unless one exists. Returns True if a file was created."""
    path = Path(path)
    if path.exists():
        return False
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(DEFAULT_ENV, encoding="utf-8")
    return True


def main():
    if write_default_env(ENV_PATH):
        print(f"Created new .env at {ENV_PATH}")

    print(f"Opening {ENV_PATH} ...")

    try:
        if sys.platform == "win32":
            os.startfile(str(ENV_PATH))
        elif sys.platform == "darwin":
            subprocess.run(["open", "-t", str(ENV_PATH)])
        else:
            editor = os.environ.get("EDITOR", "nano")
            subprocess.run([editor, str(ENV_PATH)])
    except Exception as e:
        print(f"Could not open editor automatically: {e}")
        print(f"Manually open: {ENV_PATH}")


if __name__ == "__main__":
    main()
