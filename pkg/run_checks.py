#!/usr/bin/env python
"""
Quality checks for the DARSAN simulator.

    python run_checks.py            formatting, lint, types, fast tests, coverage
    python run_checks.py --slow     the above plus the full-scale acceptance runs
    python run_checks.py black mypy only the named checks
"""

import subprocess
import sys
from pathlib import Path

SOURCES = "darsan tests main.py run_checks.py"

# key, title, command, timeout in seconds
CHECKS = [
    ("black", "Black (Code Formatting)", f"black --check {SOURCES} --line-length=100", 120),
    ("isort", "isort (Import Sorting)", f"isort --check-only {SOURCES}", 120),
    (
        "flake8",
        "Flake8 (Linting)",
        f"flake8 {SOURCES} --max-line-length=100 --extend-ignore=E203,W503",
        120,
    ),
    ("mypy", "MyPy (Type Checking)", "mypy darsan --ignore-missing-imports", 300),
    ("pytest", "Pytest (Fast Suite)", "pytest tests/ --no-cov --tb=short", 1800),
    (
        "coverage",
        "Coverage (target 80%)",
        "pytest tests/ -q --cov=darsan --cov-report=term --cov-fail-under=80",
        1800,
    ),
]
SLOW_CHECK = (
    "acceptance",
    "Pytest (Acceptance Runs)",
    "pytest tests/ -m slow --no-cov --tb=short",
    4 * 3600,
)


def print_header(text):
    """Print formatted header"""
    print("\n" + "=" * 70)
    print(f"  {text}")
    print("=" * 70 + "\n")


def run_check(title, command, timeout):
    """Run one check command; True when it exits 0"""
    print(f"Running: {title}")
    print(f"Command: {command}")
    print("-" * 70)
    try:
        result = subprocess.run(
            command, shell=True, capture_output=True, text=True, timeout=timeout
        )
    except subprocess.TimeoutExpired:
        print(f"{title} TIMEOUT after {timeout}s\n")
        return False

    print(result.stdout)
    if result.stderr:
        print(result.stderr)
    status = "PASSED" if result.returncode == 0 else f"FAILED (exit code: {result.returncode})"
    print(f"{title} {status}\n")
    return result.returncode == 0


def select_checks(argv):
    checks = list(CHECKS)
    if "--slow" in argv:
        checks.append(SLOW_CHECK)
    wanted = [arg for arg in argv if not arg.startswith("-")]
    if wanted:
        known = {key for key, *_ in CHECKS + [SLOW_CHECK]}
        unknown = sorted(set(wanted) - known)
        if unknown:
            raise SystemExit(f"Unknown checks: {', '.join(unknown)}")
        checks = [check for check in CHECKS + [SLOW_CHECK] if check[0] in wanted]
    return checks


def main(argv=None):
    """Run the selected checks and print a summary; returns the exit status"""
    print_header("DARSAN - Quality Checks")
    checks = select_checks(sys.argv[1:] if argv is None else argv)

    root = Path(__file__).parent
    results = {}
    for key, title, command, timeout in checks:
        results[key] = run_check(title, f"cd {root} && {command}", timeout)

    print_header("Quality Check Summary")
    failed = [key for key, ok in results.items() if not ok]
    print(f"Passed: {len(results) - len(failed)} of {len(results)}")
    for key, ok in results.items():
        print(f"  {key.upper():15} : {'PASS' if ok else 'FAIL'}")
    print("\n" + "=" * 70)
    return 1 if failed else 0


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\nQuality checks cancelled by user.\n")
        sys.exit(1)
