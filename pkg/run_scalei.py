"""
SCALE-I - Main Launcher
=======================
Eksperimen latent causal recovery dari command line.

Usage:
    python run_scalei.py experiment --config configs/chain.cfg
    python run_scalei.py audit --config configs/linear_diamond.cfg
"""

import sys
from pathlib import Path

# Add current directory to path
sys.path.insert(0, str(Path(__file__).parent))

from harness.cli import main

if __name__ == "__main__":
    sys.exit(main())
