#!/usr/bin/env python
"""
LPO - location preference optimization at desk scale

Main entry point for running the application.

Usage:
    Entropy map of a screenshot:
        python run.py entropy-map shot.pgm --out-dir out

    Score a dataset of predicted/target actions:
        python run.py score data.jsonl --out-dir out

    Generate a synthetic suite, train, evaluate:
        python run.py gen-data --count 32 --out-dir data
        python run.py train --train.iterations=300
        python run.py eval --checkpoint runs/default/checkpoint.json --suite data/suite.jsonl

    Server mode:
        python run.py serve --port 8000
"""

import sys

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
