#!/usr/bin/env python3
"""
Test runner for morita-lab.

Wraps pytest over morita_tests/ with marker selection, coverage and an
optional HTML report.
"""

import argparse
import os
import subprocess
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent
TEST_DIR = "morita_tests/"
MARKERS = ("unit", "integration", "slow")


def build_command(test_type="all", verbose=False, coverage=False, fast=False,
                  html_report=False, keyword=None):
    """Assemble the pytest command line for the requested selection."""
    cmd = [sys.executable, "-m", "pytest", TEST_DIR]

    if test_type in MARKERS:
        cmd += ["-m", test_type]
    elif fast:
        cmd += ["-m", "not slow"]
    if keyword:
        cmd += ["-k", keyword]
    if verbose:
        cmd.append("-v")
    if coverage:
        cmd += ["--cov=src", "--cov=utils", "--cov-report=term-missing", "--cov-report=html"]
    if html_report:
        cmd += ["--html=test_report.html", "--self-contained-html"]
    return cmd


def run_tests(cmd, seed=None):
    """Run one pytest invocation; True when every selected test passed."""
    env = dict(os.environ)
    if seed is not None:
        env["MORITA_LAB_SEED"] = str(seed)

    print(f"Running tests: {' '.join(cmd)}")
    print("=" * 50)
    try:
        subprocess.run(cmd, check=True, cwd=PROJECT_ROOT, env=env)
    except subprocess.CalledProcessError as e:
        print("\n" + "=" * 50)
        print(f"❌ Tests failed with exit code {e.returncode}")
        return False
    except OSError as e:
        print(f"❌ Error running tests: {e}")
        return False
    print("\n" + "=" * 50)
    print("✅ All tests passed!")
    return True


def main():
    parser = argparse.ArgumentParser(description="Run morita-lab tests")
    parser.add_argument("--type", choices=["all", *MARKERS], default="all",
                        help="Marker selection")
    parser.add_argument("--fast", action="store_true",
                        help="Skip the preset sweep (tests marked slow)")
    parser.add_argument("-k", dest="keyword", default=None,
                        help="Only run tests matching this pytest expression")
    parser.add_argument("--seed", type=int, default=None,
                        help="Default seed exported as MORITA_LAB_SEED")
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose pytest output")
    parser.add_argument("--coverage", "-c", action="store_true", help="Coverage for src/ and utils/")
    parser.add_argument("--html-report", action="store_true", help="Write test_report.html")
    args = parser.parse_args()

    cmd = build_command(args.type, args.verbose, args.coverage, args.fast,
                        args.html_report, args.keyword)
    if not run_tests(cmd, args.seed):
        print("\n💥 Test run failed!")
        sys.exit(1)

    print("\n🎉 Test run completed successfully!")
    if args.coverage:
        print("📊 Coverage report generated in htmlcov/")
    if args.html_report:
        print("📄 HTML test report generated: test_report.html")


if __name__ == "__main__":
    main()
