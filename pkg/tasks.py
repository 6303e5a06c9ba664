"""Invoke tasks for development workflow."""

from invoke import task

PACKAGES = ["ringsolve-core", "ringsolve-bench"]


@task
def setup_venv(c):
    """Create virtual environment with uv."""
    c.run("uv venv")
    print("\n✓ Virtual environment created")
    print("Activate with: source .venv/bin/activate")


@task
def install(c):
    """Install all packages in development mode using uv."""
    for package in PACKAGES:
        c.run(f"uv pip install -e './packages/{package}[dev]'")
    print("\n✓ All packages installed")
    print("\nThen you can use:")
    print("  ringsolve --help")


@task
def test(c, verbose=False, slow=False):
    """Run the fast test suites of both packages.

    Examples:
        invoke test                 # Skip acceptance-scale tests
        invoke test --slow          # Include them (minutes)
    """
    for package in PACKAGES:
        cmd = f"uv run pytest packages/{package}/tests"
        if verbose:
            cmd += " -v"
        if slow:
            cmd += " -m ''"
        c.run(cmd)
    print("\n✓ Tests passed!")


@task
def test_all(c, verbose=True, coverage=True, parallel=True, workers=4):
    """Run every test, including slow acceptance runs.

    Args:
        verbose: Show verbose test output (default: True)
        coverage: Generate coverage report (default: True)
        parallel: Run tests in parallel (default: True)
        workers: Number of parallel workers (default: 4)

    Examples:
        invoke test-all                     # Run all tests
        invoke test-all --workers=8         # Use 8 workers
        invoke test-all --parallel=False    # Run serially
    """
    for package in PACKAGES:
        module = package.replace("-", "_")
        cmd = f"uv run pytest packages/{package}/tests -m '' --tb=short"
        if verbose:
            cmd += " -v"
        if parallel:
            cmd += f" -n {workers} --dist loadscope"
        if coverage:
            cmd += f" --cov={module} --cov-report=term-missing"
        c.run(cmd)
    print("\n✓ All tests passed!")


@task
def test_one(c, path):
    """Run a single test file or test function.

    Examples:
        inv test-one packages/ringsolve-core/tests/test_hss.py
        inv test-one packages/ringsolve-core/tests/test_hss.py::TestInvert
    """
    c.run(f"uv run pytest {path} -v")


@task
def lint(c, fix=False):
    """Run ruff linter on both packages."""
    cmd = "uv run ruff check " + " ".join(
        f"packages/{p}/src packages/{p}/tests" for p in PACKAGES
    )
    if fix:
        cmd += " --fix"
    c.run(cmd)


@task
def format(c, check=False):
    """Format code with ruff for both packages."""
    cmd = "uv run ruff format " + " ".join(
        f"packages/{p}/src packages/{p}/tests" for p in PACKAGES
    )
    if check:
        cmd += " --check"
    c.run(cmd)


@task
def typecheck(c):
    """Run mypy type checker on both packages."""
    c.run("uv run mypy " + " ".join(f"packages/{p}/src" for p in PACKAGES))


@task
def check(c):
    """Run all checks: format, lint, typecheck, and test."""
    format(c, check=True)
    lint(c)
    typecheck(c)
    test(c)


@task
def bench(c, sizes="64 128 256 512", seeds="1 2 3", out="bench-results", errors=False):
    """Run the scaling benchmark and write reports and plot data.

    Examples:
        invoke bench                                  # Timing only, m = 64..512
        invoke bench --sizes="50 100" --errors        # With error oracles
    """
    cmd = f"uv run ringsolve bench --sizes {sizes} --seeds {seeds} --out {out}"
    if not errors:
        cmd += " --no-errors"
    c.run(cmd)


@task
def verify(c, level="quick"):
    """Run the installed self-check suite."""
    c.run(f"uv run ringsolve verify --level {level}")


@task
def clean(c):
    """Remove build artifacts and caches."""
    patterns = [
        "build",
        "dist",
        "*.egg-info",
        ".pytest_cache",
        ".mypy_cache",
        ".ruff_cache",
        "htmlcov",
        ".coverage",
        "bench-results",
        "**/__pycache__",
        "**/*.pyc",
    ]
    for pattern in patterns:
        c.run(f"rm -rf {pattern}", warn=True)


@task
def build(c):
    """Build all packages."""
    clean(c)
    for package in PACKAGES:
        c.run(f"cd packages/{package} && uv build")
        print(f"\n✓ {package} built")
        print(f"  Distribution files in: packages/{package}/dist/")
