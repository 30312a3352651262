"""Weighted Sobolev norms on I = (0, 1).

Three renditions are supported: the integral form with rho^k D^k u (orders 0, 1, 2),
the dyadic form built from the zeta family (order 0) and the negative fractional
order -(1/2 + kappa) computed by convolution with the Bessel kernel R_kappa.
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.signal import fftconvolve
from scipy.special import gamma as gamma_fn

from config import DYADIC_TRUNCATION, KERNEL_PER_DECADE, KERNEL_REL_TOL, KERNEL_X_MAX, KERNEL_X_MIN
from weight import WeightFn, ZetaFamily, rho

NormVerdict = Dict[str, object]


@dataclass(frozen=True)
class SpaceSpec:
    p: float
    theta: float
    gamma: float = 0.0
    kappa: Optional[float] = None

    def __post_init__(self):
        if self.p <= 1.0:
            raise ValueError("p must exceed 1")
        if self.gamma in (0.0, 1.0, 2.0):
            return
        if self.kappa is None or not 0.0 < self.kappa < 0.5:
            raise ValueError("fractional order needs kappa in (0, 1/2)")
        if not math.isclose(self.gamma, -(0.5 + self.kappa), rel_tol=0.0, abs_tol=1e-12):
            raise ValueError("supported orders are 0, 1, 2 and -(1/2 + kappa)")

    @classmethod
    def negative(cls, p: float, theta: float, kappa: float) -> "SpaceSpec":
        return cls(p=p, theta=theta, gamma=-(0.5 + kappa), kappa=kappa)

    @property
    def is_negative(self) -> bool:
        return self.gamma < 0.0

    def solver_facing(self) -> bool:
        return 0.0 < self.theta < self.p


def _check_kappa(kappa: float) -> None:
    if not 0.0 < kappa < 0.5:
        raise ValueError("kappa must lie in (0, 1/2)")


def kernel_exponent(kappa: float) -> float:
    """beta with R_kappa(x) ~ A |x|^{-beta} near 0."""
    return (1.0 - 2.0 * kappa) / 2.0


def kernel_asymptote_constant(kappa: float) -> float:
    """A = 4^nu Gamma(nu), nu = (1 - 2 kappa) / 4."""
    _check_kappa(kappa)
    nu = (1.0 - 2.0 * kappa) / 4.0
    return 4.0 ** nu * float(gamma_fn(nu))


def _kernel_scalar(kappa: float, x: float) -> float:
    ax = abs(x)
    a = (5.0 - 2.0 * kappa) / 4.0

    # t = e^s
    def integrand(s: float) -> float:
        return math.exp((1.0 - a) * s - ax * ax * math.exp(s) - 0.25 * math.exp(-s))

    s_lo = -math.log(4.0 * 60.0)
    s_hi = max(math.log(60.0 / (ax * ax)), 1.0)
    points = [p for p in (0.0, -2.0 * math.log(ax)) if s_lo < p < s_hi]
    value, _ = quad(integrand, s_lo, s_hi, points=points or None, epsabs=0.0, epsrel=KERNEL_REL_TOL, limit=500)
    return ax ** (-kernel_exponent(kappa)) * value


def kernel_R(kappa: float, x):
    """R_kappa(x) = |x|^{-(1-2 kappa)/2} int_0^inf t^{-(5-2 kappa)/4} exp(-t x^2 - 1/(4t)) dt."""
    _check_kappa(kappa)
    arr = np.asarray(x, dtype=float)
    if np.any(arr == 0.0):
        raise ValueError("R_kappa is singular at x = 0")
    if arr.ndim == 0:
        return _kernel_scalar(kappa, float(arr))
    return np.array([_kernel_scalar(kappa, float(v)) for v in arr.ravel()]).reshape(arr.shape)


@dataclass(frozen=True, eq=False)
class KernelTable:
    kappa: float
    x: np.ndarray
    values: np.ndarray
    x_max: float
    A: float

    def __call__(self, x) -> np.ndarray:
        ax = np.abs(np.asarray(x, dtype=float))
        beta = kernel_exponent(self.kappa)
        out = np.zeros_like(ax)
        small = (ax > 0.0) & (ax < self.x[0])
        mid = (ax >= self.x[0]) & (ax <= self.x_max)
        with np.errstate(divide="ignore"):
            out[small] = self.A * ax[small] ** (-beta)
        out[mid] = np.exp(np.interp(np.log(ax[mid]), np.log(self.x), np.log(self.values)))
        out[ax == 0.0] = np.inf
        return out

    def weights(self, h: float, M: int) -> np.ndarray:
        """Product-integration weights for offsets -(M-1)..(M-1) on spacing h."""
        beta = kernel_exponent(self.kappa)
        k = np.arange(1, M)
        side = h * self(k * h)
        center = 2.0 * self.A * (0.5 * h) ** (1.0 - beta) / (1.0 - beta)
        return np.concatenate((side[::-1], [center], side))


def make_kernel_table(
    kappa: float,
    x_min: float = KERNEL_X_MIN,
    x_max: float = KERNEL_X_MAX,
    per_decade: int = KERNEL_PER_DECADE,
) -> KernelTable:
    _check_kappa(kappa)
    decades = math.log10(x_max / x_min)
    xs = np.logspace(math.log10(x_min), math.log10(x_max), int(math.ceil(decades * per_decade)) + 1)
    values = kernel_R(kappa, xs)
    beta = kernel_exponent(kappa)
    # asymptote constant from the two samples nearest the origin
    A = float(np.mean(values[:2] * xs[:2] ** beta))
    return KernelTable(kappa=kappa, x=xs, values=values, x_max=x_max, A=A)


def convolve(f: np.ndarray, h: float, table: KernelTable) -> np.ndarray:
    """(R_kappa * f)(y_i) for f sampled on a uniform grid of spacing h."""
    M = len(f)
    w = table.weights(h, M)
    return fftconvolve(f, w, mode="full")[M - 1 : 2 * M - 1]


def integrability_test(
    kappa: float,
    r: float,
    levels: int = 12,
    per_decade: int = 16,
    x_max: float = KERNEL_X_MAX,
    decades_per_level: int = 4,
) -> NormVerdict:
    """Discrete L_{2r} norms of R_kappa on meshes reaching ever closer to the origin.

    Level l integrates over eps_l <= |x| <= x_max with eps_l = 10^{-decades_per_level * l}.
    """
    _check_kappa(kappa)
    if r <= 1.0:
        raise ValueError("r must exceed 1")
    if levels < 4:
        raise ValueError("the ladder needs at least 4 levels")
    lo = -decades_per_level * levels
    count = int((math.log10(x_max) - lo) * per_decade) + 1
    xs = np.logspace(lo, math.log10(x_max), count)
    values = kernel_R(kappa, xs)
    log_x = np.log(xs)
    integrand = values ** (2.0 * r) * xs

    norms: List[float] = []
    for level in range(1, levels + 1):
        keep = xs >= 10.0 ** (-decades_per_level * level) * (1.0 - 1e-12)
        total = 2.0 * trapezoid(integrand[keep], log_x[keep])
        norms.append(float(total ** (1.0 / (2.0 * r))))
    changes = [(norms[i] - norms[i - 1]) / norms[i - 1] for i in range(1, len(norms))]
    d1, d2, d3 = changes[-3:]
    if d3 < 0.01 and d3 < d2 < d1:
        verdict = "finite"
    elif d3 >= 0.01 and d3 >= 0.9 * d2 and d2 >= 0.9 * d1:
        verdict = "divergent"
    else:
        verdict = "inconclusive"
    return {
        "verdict": verdict,
        "threshold": 1.0 / (1.0 - 2.0 * kappa),
        "norms": norms,
        "changes": changes,
    }


def _values(u) -> np.ndarray:
    return np.asarray(getattr(u, "values", u), dtype=float)


def _trapezoid_weights(n_nodes: int, h: float) -> np.ndarray:
    w = np.full(n_nodes, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _derivative(values: np.ndarray, h: float, order: int) -> np.ndarray:
    """Central stencils, one-sided second-order stencils at the first interior nodes."""
    d = np.zeros_like(values)
    if order == 1:
        d[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
        d[1] = (-3.0 * values[1] + 4.0 * values[2] - values[3]) / (2.0 * h)
        d[-2] = (3.0 * values[-2] - 4.0 * values[-3] + values[-4]) / (2.0 * h)
    elif order == 2:
        d[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / h ** 2
        d[1] = (2.0 * values[1] - 5.0 * values[2] + 4.0 * values[3] - values[4]) / h ** 2
        d[-2] = (2.0 * values[-2] - 5.0 * values[-3] + 4.0 * values[-4] - values[-5]) / h ** 2
    else:
        d = values.copy()
    return d


def _integer_norm_raw(values: np.ndarray, gamma: int, p: float, theta: float, weight: str, psi) -> float:
    N = len(values) - 1
    h = 1.0 / N
    x = np.linspace(0.0, 1.0, N + 1)
    w = rho(x) if weight == "rho" else psi(x)
    interior = w > 0.0
    integrand = np.zeros_like(values)
    for k in range(gamma + 1):
        dk = _derivative(values, h, k)
        integrand[interior] += np.abs(w[interior] ** k * dk[interior]) ** p
    integrand[interior] *= w[interior] ** (theta - 1.0)
    return float(np.sum(_trapezoid_weights(N + 1, h) * integrand)) ** (1.0 / p)


def weighted_integer_norm(u, gamma: int, spec: SpaceSpec, weight: str = "rho", psi: Optional[WeightFn] = None) -> float:
    """(sum_{k<=gamma} int |w^k D^k u|^p w^{theta-1} dx)^{1/p} with w = rho or psi."""
    if gamma not in (0, 1, 2):
        raise ValueError("integer orders 0, 1, 2 only")
    if weight not in ("rho", "psi"):
        raise ValueError("weight must be 'rho' or 'psi'")
    if weight == "psi" and psi is None:
        raise ValueError("psi weight requested without a WeightFn")
    values = _values(u)
    value = _integer_norm_raw(values, gamma, spec.p, spec.theta, weight, psi)
    N = len(values) - 1
    if spec.theta <= 0.0 and N % 4 == 0 and N >= 32:
        ladder = [_integer_norm_raw(values[::s], gamma, spec.p, spec.theta, weight, psi) for s in (4, 2)] + [value]
        growth = [ladder[i + 1] / ladder[i] if ladder[i] > 0 else 1.0 for i in range(2)]
        if growth[0] > 1.05 and growth[1] > 1.05 and growth[1] >= 0.5 * growth[0]:
            return math.inf
    return value


def _dyadic_range(psi_values: np.ndarray, zeta: ZetaFamily) -> range:
    lo, hi = zeta.support()
    positive = psi_values[psi_values > 0.0]
    n_lo = math.floor(math.log(np.min(positive) / hi))
    n_hi = math.ceil(math.log(np.max(positive) / lo))
    return range(n_lo, n_hi + 1)


def dyadic_weight(x, spec: SpaceSpec, zeta: ZetaFamily, psi: WeightFn) -> np.ndarray:
    """sum_n e^{n(theta-1)} zeta^p(e^{-n} psi(x)) on interior points."""
    psi_x = psi(np.asarray(x, dtype=float))
    out = np.zeros_like(psi_x)
    for n in _dyadic_range(np.atleast_1d(psi_x), zeta):
        out += math.exp(n * (spec.theta - 1.0)) * zeta(math.exp(-n) * psi_x) ** spec.p
    return out


def dyadic_terms(u, spec: SpaceSpec, zeta: ZetaFamily, psi: WeightFn) -> List[Tuple[int, float]]:
    """(n, e^{n theta} ||zeta_{-n}(e^n .) u(e^n .)||_p^p) for every n the grid can see."""
    values = _values(u)
    N = len(values) - 1
    x = np.linspace(0.0, 1.0, N + 1)
    psi_x = psi(x)
    weights = _trapezoid_weights(N + 1, 1.0 / N)
    abs_p = np.abs(values) ** spec.p
    terms = []
    for n in _dyadic_range(psi_x[1:-1], zeta):
        z = np.where(psi_x > 0.0, zeta(math.exp(-n) * psi_x), 0.0)
        terms.append((n, math.exp(n * (spec.theta - 1.0)) * float(np.sum(weights * z ** spec.p * abs_p))))
    return terms


def dyadic_norm(u, spec: SpaceSpec, zeta: ZetaFamily, psi: WeightFn) -> float:
    if spec.gamma != 0.0:
        raise ValueError("dyadic_norm computes the order-0 norm")
    terms = sorted((t for _, t in dyadic_terms(u, spec, zeta, psi)), reverse=True)
    total = 0.0
    for term in terms:
        if total > 0.0 and term < DYADIC_TRUNCATION * total:
            break
        total += term
    return total ** (1.0 / spec.p)


def bessel_negative_norm(u, spec: SpaceSpec, zeta: ZetaFamily, psi: WeightFn, table: KernelTable) -> float:
    """Order -(1/2 + kappa) norm with the convolution constant c(kappa) fixed to 1."""
    if not spec.is_negative:
        raise ValueError("bessel_negative_norm needs a negative-order SpaceSpec")
    if not math.isclose(table.kappa, spec.kappa):
        raise ValueError(f"kernel table built for kappa={table.kappa}, space uses kappa={spec.kappa}")
    values = _values(u)
    N = len(values) - 1
    x = np.linspace(0.0, 1.0, N + 1)
    psi_x = psi(x)
    total = 0.0
    for n in _dyadic_range(psi_x[1:-1], zeta):
        z = np.where(psi_x > 0.0, zeta(math.exp(-n) * psi_x), 0.0)
        f = z * values
        nonzero = np.nonzero(f)[0]
        if len(nonzero) == 0:
            continue
        h = math.exp(-n) / N
        pad = int(math.ceil(table.x_max / h))
        padded = np.concatenate((np.zeros(pad), f[nonzero[0] : nonzero[-1] + 1], np.zeros(pad)))
        g = convolve(padded, h, table)
        total += math.exp(n * spec.theta) * float(trapezoid(np.abs(g) ** spec.p, dx=h))
    return total ** (1.0 / spec.p)


def weighted_sup(u, nu: float, psi: WeightFn) -> float:
    """max over interior nodes of psi^{-nu} |u|, with 0/0 = 0."""
    values = _values(u)
    x = np.linspace(0.0, 1.0, len(values))[1:-1]
    inner = np.abs(values[1:-1])
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        denom = psi(x) ** nu
        ratio = np.where(inner == 0.0, 0.0, np.where(denom > 0.0, inner / np.where(denom > 0.0, denom, 1.0), np.inf))
    return float(np.max(ratio)) if len(ratio) else 0.0
