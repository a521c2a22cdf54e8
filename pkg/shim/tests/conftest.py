import os
import pathlib
import subprocess
import time

import pytest

ROOT = pathlib.Path(__file__).resolve().parent.parent
BUILD = ROOT / "build"


@pytest.fixture(scope="session", autouse=True)
def built_artifacts():
    """Build everything once, then hold the whole run to desk scale."""
    proc = subprocess.run(
        ["make", "-C", str(ROOT), "all"], capture_output=True, text=True
    )
    if proc.returncode != 0:
        pytest.fail(f"build failed:\n{proc.stdout}\n{proc.stderr}")
    started = time.monotonic()
    yield
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"suite took {elapsed:.1f}s, budget is 10s"


@pytest.fixture
def run_driver():
    """Run a driver binary under the preloaded shim with a shaped stub world.

    check_mpi/slurm_ntasks of None mean the variable is absent. Extra
    stub knobs go in ``env``. preload=False drops the shim for baseline
    comparisons.
    """

    def _run(
        driver="init_c",
        *,
        check_mpi=None,
        slurm_ntasks=None,
        rank=0,
        size=1,
        env=None,
        preload=True,
    ):
        child_env = os.environ.copy()
        for var in ("CHECK_MPI", "SLURM_NTASKS", "LD_PRELOAD", "STUB_MPI_TRACE"):
            child_env.pop(var, None)
        child_env["STUB_MPI_RANK"] = str(rank)
        child_env["STUB_MPI_SIZE"] = str(size)
        if preload:
            child_env["LD_PRELOAD"] = str(BUILD / "intercept.so")
        if check_mpi is not None:
            child_env["CHECK_MPI"] = check_mpi
        if slurm_ntasks is not None:
            child_env["SLURM_NTASKS"] = str(slurm_ntasks)
        if env:
            child_env.update(env)
        return subprocess.run(
            [str(BUILD / driver)],
            env=child_env,
            capture_output=True,
            text=True,
            timeout=10,
        )

    return _run
