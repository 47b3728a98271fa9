#!/usr/bin/env python3
"""
morita-lab command line: python main.py gen|verify|demo|report
"""

import sys

from src.morita.cli import main

if __name__ == "__main__":
    sys.exit(main())
