#!/usr/bin/env python3
"""
subspace-ae - command-line entry point without installation.

Usage:
    python3 run_pipeline.py gen-data --out data/sprites.sds --count 4096 --seed 7
    python3 run_pipeline.py train --config config/run.json --data data/sprites.sds --out runs/isa
    python3 run_pipeline.py train --config config/run.json --data data/sprites.sds --out runs/no-isa --no-isa
    python3 run_pipeline.py eval-mixing --ckpt runs/isa/final.sdck --data data/sprites.sds \\
        --groups 200 --seed 0 --out reports/mixing_isa.json
    python3 run_pipeline.py analyze-subspaces --ckpt runs/isa/final.sdck --data data/sprites.sds \\
        --out reports/analysis.json
    python3 run_pipeline.py edit-attribute --ckpt runs/isa/final.sdck --data data/sprites.sds \\
        --attr mouth_open --index 3 --strength 2 --out out/edit.ppm
    python3 run_pipeline.py mix-grid --ckpt runs/isa/final.sdck --data data/sprites.sds \\
        --indices 3,17,42 --out out/grid.ppm
"""

import sys
from pathlib import Path

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

try:
    import numpy  # noqa: F401
    import typer  # noqa: F401
    import yaml  # noqa: F401
    from rich.console import Console  # noqa: F401
except ImportError:
    print("ERROR: install the dependencies first:")
    print("  pip install -r requirements.txt")
    sys.exit(1)

from app.jobs.cli import app

if __name__ == "__main__":
    app()
