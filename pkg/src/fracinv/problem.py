"""Grids, problem description and time-series containers."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParameterError

__all__ = [
    "SpaceGrid",
    "TimeGrid",
    "Excitation",
    "ProblemSetup",
    "Trace",
    "FieldHistory",
]


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform partition of [0, 1] into ``m`` subintervals."""

    m: int

    def __post_init__(self):
        if self.m < 4:
            raise ParameterError("need at least 4 subintervals")

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.m + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def inner(self, f, g) -> float:
        """Composite trapezoid approximation of the L2(0,1) inner product."""
        return float(np.dot(self.trapezoid_weights() * np.asarray(f), np.asarray(g)))

    def norm(self, f) -> float:
        return math.sqrt(max(self.inner(f, f), 0.0))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time levels ``t_j = j * dt`` on [0, t_final]."""

    t_final: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 2 or not self.t_final > 0:
            raise ParameterError("need n_steps >= 2 and t_final > 0")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def index(self, t: float) -> int:
        """Index of the time level closest to ``t``."""
        j = int(round(t / self.dt))
        if j < 0 or j > self.n_steps or abs(j * self.dt - t) > 1e-9 * max(1.0, t):
            raise ParameterError(f"t={t} is not a level of the time grid")
        return j

    def truncated(self, t_end: float) -> "TimeGrid":
        return TimeGrid(self.index(t_end) * self.dt, self.index(t_end))


@dataclass(frozen=True)
class Excitation:
    """Neumann flux ``g(t)`` applied at x = 0.

    ``kind`` is ``"zero"``, ``"step"`` (``amplitude`` times the indicator of
    ``[t_on, inf)``) or ``"samples"`` (piecewise linear through uniformly
    spaced ``(times, values)``, held constant after the last sample).
    """

    kind: str = "zero"
    t_on: float = 0.0
    amplitude: float = 1.0
    times: Optional[tuple] = None
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("zero", "step", "samples"):
            raise ParameterError(f"unknown excitation kind {self.kind!r}")
        if self.kind == "samples":
            if self.times is None or self.values is None or len(self.times) != len(self.values):
                raise ParameterError("sampled excitation needs matching times and values")
            dts = np.diff(np.asarray(self.times, dtype=float))
            if len(dts) == 0 or np.any(dts <= 0) or np.ptp(dts) > 1e-9 * dts.max():
                raise ParameterError("excitation samples must be uniformly spaced")

    @classmethod
    def step(cls, t_on: float, amplitude: float = 1.0) -> "Excitation":
        return cls("step", t_on=float(t_on), amplitude=float(amplitude))

    @classmethod
    def sampled(cls, times, values) -> "Excitation":
        return cls("samples", times=tuple(map(float, times)), values=tuple(map(float, values)))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "step":
            return np.where(t >= self.t_on, self.amplitude, 0.0)
        ts = np.asarray(self.times)
        vals = np.interp(t, ts, np.asarray(self.values))
        return np.where(t >= ts[0], vals, 0.0)

    def step_loads(self, tg: TimeGrid) -> np.ndarray:
        """Load values ``g_j``, j = 1..N, for the backward Euler scheme.

        Steps use the exact average of ``g`` over ``(t_{j-1}, t_j]`` so a
        switch-on between grid levels is represented to first order; other
        kinds are sampled at ``t_j``.
        """
        t = tg.times
        if self.kind == "step":
            lo = np.maximum(t[:-1], self.t_on)
            frac = np.clip((t[1:] - lo) / tg.dt, 0.0, 1.0)
            return self.amplitude * frac
        return self(t[1:])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "t_on": self.t_on,
            "amplitude": self.amplitude,
            "times": list(self.times) if self.times else None,
            "values": list(self.values) if self.values else None,
        }


@dataclass(frozen=True, eq=False)
class ProblemSetup:
    """Nodal data of the direct problem on a :class:`SpaceGrid`.

    ``a``, ``q``, ``u0`` and ``f`` hold values at the ``m + 1`` grid nodes.
    """

    a: np.ndarray
    q: np.ndarray
    u0: np.ndarray
    f: np.ndarray
    alpha: float
    t_final: float = 1.0
    t_split: float = 0.5
    g: Excitation = field(default_factory=Excitation)

    def __post_init__(self):
        arrays = {}
        for name in ("a", "q", "u0", "f"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise ParameterError(f"{name} must be a 1-D nodal array")
            arr.setflags(write=False)
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        sizes = {arr.size for arr in arrays.values()}
        if len(sizes) != 1:
            raise ParameterError("a, q, u0, f must share one grid")
        if np.any(arrays["a"] <= 0):
            raise ParameterError("diffusion coefficient must be positive")
        if np.any(arrays["q"] < 0):
            raise ParameterError("potential must be non-negative")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError("alpha must lie in (0, 1)")
        if not 0.0 <= self.t_split < self.t_final:
            raise ParameterError("need 0 <= t_split < t_final")

    @property
    def grid(self) -> SpaceGrid:
        return SpaceGrid(self.a.size - 1)

    @classmethod
    def from_functions(cls, grid: SpaceGrid, *, a=1.0, q=0.0, u0=0.0, f=0.0, **kw) -> "ProblemSetup":
        x = grid.nodes

        def ev(v):
            return np.broadcast_to(np.asarray(v(x) if callable(v) else v, dtype=float), x.shape)

        return cls(a=ev(a), q=ev(q), u0=ev(u0), f=ev(f), **kw)

    def replace(self, **changes) -> "ProblemSetup":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "m": self.grid.m,
            "alpha": self.alpha,
            "t_final": self.t_final,
            "t_split": self.t_split,
            "g": self.g.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class Trace:
    """Samples ``h(t_j)`` of a boundary trace on strictly increasing times."""

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ParameterError("times and values must be 1-D of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ParameterError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size

    def window(self, lo: float, hi: float) -> "Trace":
        sel = (self.times >= lo - 1e-12) & (self.times <= hi + 1e-12)
        return Trace(self.times[sel], self.values[sel], dict(self.meta))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,h\n")
            for t, v in zip(self.times, self.values):
                fh.write(f"{t:.17g},{v:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "Trace":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["t", "h"]:
            raise ParameterError(f"{path}: expected header 't,h'")
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
        if data.size == 0:
            return cls(np.zeros(0), np.zeros(0))
        return cls(data[:, 0], data[:, 1])


@dataclass(frozen=True, eq=False)
class FieldHistory:
    """Nodal values ``u_j`` for j = 0..N, stored time-major ``(N + 1, m + 1)``."""

    times: np.ndarray
    values: np.ndarray

    @property
    def trace(self) -> Trace:
        return Trace(self.times, self.values[:, 0].copy())

    def dump(self, path) -> None:
        """Write raw float64 values (row-major) plus a JSON sidecar."""
        path = Path(path)
        np.ascontiguousarray(self.values, dtype="<f8").tofile(path)
        sidecar = {
            "dtype": "float64",
            "byte_order": "little",
            "layout": "row-major, time-major",
            "n_times": int(self.values.shape[0]),
            "n_nodes": int(self.values.shape[1]),
            "t0": float(self.times[0]),
            "dt": float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0,
        }
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))

    @classmethod
    def load(cls, path) -> "FieldHistory":
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        vals = np.fromfile(path, dtype="<f8").reshape(meta["n_times"], meta["n_nodes"])
        times = meta["t0"] + meta["dt"] * np.arange(meta["n_times"])
        return cls(times, vals)
