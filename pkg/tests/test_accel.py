import importlib.util
import pathlib

import pytest

from optstrat import _accel

BENCH = pathlib.Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


def _bench():
    spec = importlib.util.spec_from_file_location("bench_kernels", BENCH)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def test_switch_passes_function_through_when_disabled(monkeypatch):
    monkeypatch.setattr(_accel, "NUMBA_ENABLED", False)

    def f(x):
        return x + 1

    assert _accel.njit(f) is f


@pytest.mark.slow
def test_numba_and_numpy_paths_agree():
    bench = _bench()
    fast = bench.run_child(False, 1)
    slow = bench.run_child(True, 1)
    assert fast["numba"] is True and slow["numba"] is False
    assert bench.compare(fast, slow) == []
