"""Boundary-distance weight psi, distance rho and the dyadic bump family zeta."""
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from coefficients import Field
from config import GENERATOR_SLACK, ZETA_SAMPLES, ZETA_SCALE

GeneratorReport = Dict[str, object]


def rho(x):
    """Distance to the boundary of (0, 1)."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(np.isnan(arr)):
        raise ValueError("rho is defined on [0, 1] only")
    out = np.minimum(arr, 1.0 - arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WeightFn:
    """psi(x) = -cosh(K1 (2x - 1)) + cosh(K1) with K1 = 3K / (2 delta0)."""

    K: float
    delta0: float
    K1: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.cosh(self.K1) - np.cosh(self.K1 * (2.0 * x - 1.0))

    def d1(self, x):
        x = np.asarray(x, dtype=float)
        return -2.0 * self.K1 * np.sinh(self.K1 * (2.0 * x - 1.0))

    def d2(self, x):
        x = np.asarray(x, dtype=float)
        return -4.0 * self.K1 ** 2 * np.cosh(self.K1 * (2.0 * x - 1.0))

    @property
    def maximum(self) -> float:
        return float(math.cosh(self.K1) - 1.0)


def make_psi(K: float, delta0: float) -> WeightFn:
    if K <= 0 or delta0 <= 0:
        raise ValueError("K and delta0 must be positive")
    return WeightFn(K=float(K), delta0=float(delta0), K1=3.0 * K / (2.0 * delta0))


def interior_grid(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n + 1)[1:-1]


def check_generator_condition(
    psi: WeightFn,
    a: Field,
    a_x: Field,
    b: Field,
    grid: int,
    times: Iterable[float],
    tol: float = GENERATOR_SLACK,
) -> GeneratorReport:
    """Evaluate a psi'' + (2 a_x - b) psi' on interior nodes at every sample time.

    ``status`` is ``"pass"``, ``"fail"`` or ``"precondition"``; the last one means the
    coefficients violate a >= delta0 or sup|2a_x - b| <= 3K and the condition itself
    was not judged.
    """
    x = interior_grid(grid)
    worst = -math.inf
    precondition: List[str] = []
    for t in times:
        a_t = np.broadcast_to(a(t, x), x.shape)
        drift = np.broadcast_to(2.0 * a_x(t, x) - b(t, x), x.shape)
        if np.min(a_t) < psi.delta0:
            precondition.append(f"a < delta0 at t={t:g} (min a = {np.min(a_t):.6g})")
        if np.max(np.abs(drift)) > 3.0 * psi.K:
            precondition.append(f"|2a_x - b| > 3K at t={t:g} (sup = {np.max(np.abs(drift)):.6g})")
        values = a_t * psi.d2(x) + drift * psi.d1(x)
        worst = max(worst, float(np.max(values)))

    if precondition:
        status = "precondition"
    else:
        status = "pass" if worst <= tol else "fail"
    return {
        "status": status,
        "passed": status == "pass",
        "worst": worst,
        "precondition_violations": precondition,
    }


def comparability_constants(psi: WeightFn, grid: int) -> Tuple[float, float]:
    """Sampled min and max of rho / psi over interior nodes."""
    if grid - 1 < 1000:
        raise ValueError("comparability needs at least 1000 interior points")
    x = interior_grid(grid)
    ratio = rho(x) / psi(x)
    return float(np.min(ratio)), float(np.max(ratio))


def _smooth_step(t):
    """C-infinity transition from 0 (t <= 0) to 1 (t >= 1)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
        g = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
    return f / (f + g)


@dataclass(frozen=True)
class ZetaFamily:
    """Smooth bump on (0, inf), equal to 1 on [s, e s], supported in [s/e, e^2 s]."""

    p: float
    scale: float
    c: float
    c_half: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            y = np.where(x > 0.0, np.log(np.where(x > 0.0, x, 1.0) / self.scale), -np.inf)
        rise = _smooth_step(y + 1.0)
        fall = _smooth_step(2.0 - y)
        return np.where(np.isfinite(y), rise * fall, 0.0)

    def support(self) -> Tuple[float, float]:
        return self.scale / math.e, self.scale * math.e ** 2

    def index_range(self, value: float, direction: int = 1) -> range:
        """Indices n with zeta(e^{direction n} value) possibly nonzero."""
        lo, hi = self.support()
        a = math.log(lo / value)
        b = math.log(hi / value)
        if direction > 0:
            return range(math.floor(a), math.ceil(b) + 1)
        return range(math.floor(-b), math.ceil(-a) + 1)

    def period_sum(self, x, power: float = None) -> np.ndarray:
        """sum_n zeta^power(e^n x); defaults to power = p."""
        power = self.p if power is None else power
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for i, xv in enumerate(x):
            span = self.index_range(xv)
            ns = np.arange(span.start, span.stop)
            out[i] = float(np.sum(self(np.exp(ns) * xv) ** power))
        return out

    def member(self, n: int, psi: WeightFn):
        """zeta_n(x) = zeta(e^n psi(x)) on (0, 1), zero outside."""

        def zeta_n(x):
            x = np.asarray(x, dtype=float)
            inside = (x > 0.0) & (x < 1.0)
            return np.where(inside, self(math.exp(n) * psi(np.clip(x, 0.0, 1.0))), 0.0)

        return zeta_n


def _certify_lower_bound(bump: ZetaFamily, power: float) -> float:
    y = np.linspace(0.0, 1.0, ZETA_SAMPLES, endpoint=False)
    x = bump.scale * np.exp(y)
    sums = bump.period_sum(x, power)
    k = int(np.argmin(sums))
    res = minimize_scalar(
        lambda yy: float(bump.period_sum(bump.scale * math.exp(yy), power)[0]),
        bounds=(y[max(k - 1, 0)], y[min(k + 1, len(y) - 1)]),
        method="bounded",
    )
    return float(min(sums[k], res.fun))


def make_zeta(p: float, scale: float = ZETA_SCALE) -> ZetaFamily:
    if p <= 1.0:
        raise ValueError("zeta family needs p > 1")
    if scale <= 0.0:
        raise ValueError("scale must be positive")
    draft = ZetaFamily(p=float(p), scale=float(scale), c=0.0, c_half=0.0)
    c = _certify_lower_bound(draft, p)
    c_half = _certify_lower_bound(draft, p / 2.0)
    return ZetaFamily(p=float(p), scale=float(scale), c=c, c_half=c_half)
