"""Real FFTs backed by FFTW with deterministic planning.

Plans are built with ``FFTW_ESTIMATE`` so the chosen algorithm, and hence
every rounding, is the same in every process.  Plans hold scratch buffers,
so each thread keeps its own cache.
"""

from __future__ import annotations

import threading

import numpy as np
import pyfftw

_local = threading.local()


def _plans() -> dict:
    cache = getattr(_local, "plans", None)
    if cache is None:
        cache = _local.plans = {}
    return cache


def _plan(kind: str, n: int):
    cache = _plans()
    key = (kind, n)
    plan = cache.get(key)
    if plan is None:
        if kind == "r":
            buf = pyfftw.empty_aligned(n, dtype="float64")
            plan = pyfftw.builders.rfft(buf, planner_effort="FFTW_ESTIMATE", threads=1)
        else:
            buf = pyfftw.empty_aligned(n // 2 + 1, dtype="complex128")
            plan = pyfftw.builders.irfft(buf, n=n, planner_effort="FFTW_ESTIMATE", threads=1)
        cache[key] = plan
    return plan


def rfft(samples: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(samples, dtype=float)
    return _plan("r", x.size)(x).copy()


def irfft(spectrum: np.ndarray, n: int) -> np.ndarray:
    s = np.ascontiguousarray(spectrum, dtype=complex)
    if s.size != n // 2 + 1:
        raise ValueError(f"half spectrum of length {s.size} does not match n={n}")
    return _plan("c", n)(s).copy()
