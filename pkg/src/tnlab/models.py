"""Scalar models for the flux function ``a`` and its antiderivative ``F``.

All models evaluate elementwise on floats or numpy arrays. Subclasses only
need the four evaluation methods; :meth:`ScalarModel.check` spot-checks the
structural assumptions (a' > 0, a'' > 0, F' = a) on a seeded grid.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidInputError, ModelEvaluationError


class ScalarModel(ABC):
    """Strictly increasing, strictly convex ``a`` together with ``F`` (F' = a)."""

    name = "abstract"

    @abstractmethod
    def a(self, t): ...

    @abstractmethod
    def a_prime(self, t): ...

    @abstractmethod
    def a_double_prime(self, t): ...

    @abstractmethod
    def F(self, t): ...

    def domain(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def describe(self) -> dict:
        return {"name": self.name}

    def is_normalized(self, atol: float = 1e-14) -> bool:
        return abs(float(self.a(0.0))) <= atol and abs(float(self.F(0.0))) <= atol

    def check(self, lo: float = -5.0, hi: float = 2.0, n: int = 200, seed: int = 0,
              h: float = 1e-4, fd_const: float = 10.0) -> None:
        """Spot-check a' > 0, a'' > 0 and the central-difference identity F' = a.

        The finite-difference bound is ``fd_const * h**2 * max(1, |a'''| proxy)``
        where the proxy is the local spread of a''; raises ModelEvaluationError.
        """
        dlo, dhi = self.domain()
        lo, hi = max(lo, dlo + 2 * h), min(hi, dhi - 2 * h)
        t = np.sort(np.random.default_rng(seed).uniform(lo, hi, n))
        with np.errstate(all="ignore"):
            ap = np.asarray(self.a_prime(t), dtype=float)
            app = np.asarray(self.a_double_prime(t), dtype=float)
            fd = (np.asarray(self.F(t + h)) - np.asarray(self.F(t - h))) / (2 * h)
            av = np.asarray(self.a(t), dtype=float)
            spread = np.abs(np.asarray(self.a_double_prime(t + h)) - np.asarray(self.a_double_prime(t - h))) / (2 * h)
        if not (np.all(np.isfinite(ap)) and np.all(np.isfinite(app)) and np.all(np.isfinite(fd))):
            raise ModelEvaluationError(f"{self.name}: non-finite values on the check grid")
        if np.any(ap <= 0):
            raise ModelEvaluationError(f"{self.name}: a' <= 0 at t={t[np.argmax(ap <= 0)]:.6g}")
        if np.any(app <= 0):
            raise ModelEvaluationError(f"{self.name}: a'' <= 0 at t={t[np.argmax(app <= 0)]:.6g}")
        bound = fd_const * h**2 * np.maximum(1.0, spread + np.abs(app)) + 1e-9 * (1 + np.abs(av))
        bad = np.abs(fd - av) > bound
        if np.any(bad):
            k = int(np.argmax(bad))
            raise ModelEvaluationError(f"{self.name}: F' != a at t={t[k]:.6g} (diff {fd[k] - av[k]:.3g})")


def _finite(x, name):
    arr = np.asarray(x)
    if not np.all(np.isfinite(arr)):
        raise ModelEvaluationError(f"{name} produced a non-finite value")
    return x


class ExpModel(ScalarModel):
    """a(t) = e^t - 1, F(t) = e^t - t - 1."""

    name = "exp"

    def a(self, t):
        return np.expm1(t)

    def a_prime(self, t):
        return np.exp(t)

    def a_double_prime(self, t):
        return np.exp(t)

    def F(self, t):
        return np.expm1(t) - t


class AppendixModel(ScalarModel):
    """Exponential for t <= 0, cubic k t^3/6 + t^2/2 + t for t > 0.

    C^2 across t = 0 with a(0) = F(0) = 0 and a'(0) = a''(0) = 1; the constant
    ``k`` sharpens the curvature of ``a`` just to the right of the origin.
    """

    name = "appendix"

    def __init__(self, k: float = 1e8):
        if not (k > 0 and math.isfinite(k)):
            raise InvalidInputError("appendix model needs a finite k > 0")
        self.k = float(k)

    def describe(self) -> dict:
        return {"name": self.name, "k": self.k}

    def _piecewise(self, t, neg, pos):
        t_arr = np.asarray(t, dtype=float)
        out = np.empty_like(t_arr)
        m = t_arr <= 0
        with np.errstate(over="ignore"):
            out[m] = neg(t_arr[m])
            out[~m] = pos(t_arr[~m])
        return out if out.ndim else float(out)

    def a(self, t):
        k = self.k
        return self._piecewise(t, np.expm1, lambda x: ((k / 6.0) * x + 0.5) * x * x + x)

    def a_prime(self, t):
        k = self.k
        return self._piecewise(t, np.exp, lambda x: (k / 2.0) * x * x + x + 1.0)

    def a_double_prime(self, t):
        k = self.k
        return self._piecewise(t, np.exp, lambda x: k * x + 1.0)

    def F(self, t):
        k = self.k
        return self._piecewise(t, lambda x: np.expm1(x) - x,
                               lambda x: ((k / 24.0) * x + 1.0 / 6.0) * x**3 + 0.5 * x * x)


class TableModel(ScalarModel):
    """Cubic-spline model through tabulated samples of ``a``.

    ``F`` is the spline antiderivative shifted so that F(0) = 0 when 0 lies in
    the table range. Evaluation outside the table raises ModelEvaluationError.
    """

    name = "table"

    def __init__(self, t, a_values):
        t = np.asarray(t, dtype=float)
        y = np.asarray(a_values, dtype=float)
        if t.ndim != 1 or t.shape != y.shape or t.size < 4:
            raise InvalidInputError("table model needs at least 4 (t, a) samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise InvalidInputError("table model has non-finite samples")
        order = np.argsort(t)
        t, y = t[order], y[order]
        if np.any(np.diff(t) <= 0):
            raise InvalidInputError("table abscissae must be distinct")
        self.t = t
        self.values = y
        self._spline = CubicSpline(t, y, bc_type="not-a-knot", extrapolate=False)
        self._d1 = self._spline.derivative(1)
        self._d2 = self._spline.derivative(2)
        anti = self._spline.antiderivative(1)
        self._F0 = float(anti(0.0)) if t[0] <= 0.0 <= t[-1] else float(anti(t[0]))
        self._anti = anti

    def domain(self) -> tuple[float, float]:
        return (float(self.t[0]), float(self.t[-1]))

    def describe(self) -> dict:
        return {"name": self.name, "t": self.t.tolist(), "a": self.values.tolist()}

    def _eval(self, f, t, label):
        out = f(np.asarray(t, dtype=float))
        _finite(out, f"table model {label} (outside [{self.t[0]}, {self.t[-1]}]?)")
        return out if np.ndim(out) else float(out)

    def a(self, t):
        return self._eval(self._spline, t, "a")

    def a_prime(self, t):
        return self._eval(self._d1, t, "a'")

    def a_double_prime(self, t):
        return self._eval(self._d2, t, "a''")

    def F(self, t):
        out = self._eval(self._anti, t, "F")
        return out - self._F0


def make_model(kind: str, k: float = 1e8, table=None) -> ScalarModel:
    kind = kind.strip().lower()
    if kind == "exp":
        return ExpModel()
    if kind == "appendix":
        return AppendixModel(k)
    if kind in ("table", "custom-table", "custom_table"):
        if table is None:
            raise InvalidInputError("table model requires (t, a) samples")
        t, y = table
        return TableModel(t, y)
    raise InvalidInputError(f"unknown model {kind!r} (expected exp, appendix or table)")
