"""Empirical Hoelder exponents, boundary decay and the predicted regularity targets."""
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from config import BOUNDARY_WINDOW, INTERIOR_MARGIN, LAG_OCTAVES, TIME_LAG_OCTAVES
from sobolev import weighted_sup
from solver import Trajectory
from weight import WeightFn

Estimate = Dict[str, object]

STATISTICS = {
    "median": np.median,
    "mean": np.mean,
    "max": np.max,
}


def target_violations(
    kappa: float,
    lam: float,
    p: float,
    theta: float,
    alpha: Optional[float] = None,
    beta: Optional[float] = None,
    delta: float = 0.0,
) -> List[str]:
    """Every violated hypothesis of the regularity theorem, named by its inequality."""
    out: List[str] = []
    if not 0.0 <= lam < 0.5:
        out.append("lambda not in [0, 1/2)")
    if not kappa > lam:
        out.append("kappa <= lambda (need kappa in (lambda, 1/2))")
    if not kappa < 0.5:
        out.append("kappa >= 1/2")
    if kappa < 0.5 and not p > 6.0 / (1.0 - 2.0 * kappa):
        out.append("p <= 6/(1-2*kappa)")
    if lam < 0.5 and not p > 2.0 * lam * theta / (1.0 - 2.0 * lam):
        out.append("p <= 2*lambda*theta/(1-2*lambda)")
    if not theta > 0.0:
        out.append("theta <= 0 (need theta in (0, 1+p(1/2+kappa)])")
    if not theta <= 1.0 + p * (0.5 + kappa):
        out.append("theta > 1+p(1/2+kappa)")
    if alpha is not None and beta is not None and p > 0:
        beta_max = 0.25 - kappa / 2.0 - 1.0 / (2.0 * p)
        if not alpha > 1.0 / p:
            out.append("alpha <= 1/p")
        if not beta > alpha:
            out.append("beta <= alpha")
        if not beta < beta_max:
            out.append("beta >= 1/4-kappa/2-1/(2p)")
        if not 0.0 <= delta < 0.5 - kappa - 2.0 * beta - 1.0 / p:
            out.append("delta not in [0, 1/2-kappa-2*beta-1/p)")
    return out


def default_alpha_beta(kappa: float, p: float) -> Tuple[float, float]:
    """Split (1/p, 1/4-kappa/2-1/(2p)) in thirds."""
    lo = 1.0 / p
    hi = 0.25 - kappa / 2.0 - 1.0 / (2.0 * p)
    return lo + (hi - lo) / 3.0, lo + 2.0 * (hi - lo) / 3.0


@dataclass(frozen=True)
class HolderTargets:
    kappa: float
    lam: float
    p: float
    theta: float
    alpha: float
    beta: float
    delta: float = 0.0

    def __post_init__(self):
        problems = target_violations(self.kappa, self.lam, self.p, self.theta, self.alpha, self.beta, self.delta)
        if problems:
            raise ValueError("; ".join(problems))
        if self.space_exponent <= 0.0:
            raise ValueError("space exponent must be positive")

    @classmethod
    def with_defaults(cls, kappa: float, lam: float, p: float, theta: float, delta: float = 0.0) -> "HolderTargets":
        alpha, beta = default_alpha_beta(kappa, p)
        return cls(kappa=kappa, lam=lam, p=p, theta=theta, alpha=alpha, beta=beta, delta=delta)

    @property
    def time_exponent(self) -> float:
        return self.alpha - 1.0 / self.p

    @property
    def space_exponent(self) -> float:
        return 0.5 - self.kappa - 2.0 * self.beta - 1.0 / self.p - self.delta

    @property
    def weight_exponent(self) -> float:
        return -0.5 - self.kappa - 1.0 / self.p + self.theta / self.p - self.delta

    @property
    def cutoff_exponent(self) -> float:
        """nu in sup_x psi^{-nu}|u| of the cutoff threshold."""
        return 0.5 + self.kappa + 1.0 / self.p - self.theta / self.p


def target_exponents(targets: HolderTargets) -> Dict[str, float]:
    k, p = targets.kappa, targets.p
    return {
        "time": targets.time_exponent,
        "space": targets.space_exponent,
        "weight": targets.weight_exponent,
        "interior_space": 0.5 - k - 3.0 / p,
        "interior_time": 0.25 - k / 2.0 - 3.0 / (2.0 * p),
        "limit_time": 0.25 - k / 2.0,
        "limit_space": 0.5 - k,
        "limit_weight": -0.5 - k,
    }


def limiting_exponents(lam: float) -> Tuple[float, float]:
    """(time, space) exponents approached as kappa -> lambda and p -> infinity."""
    return 0.25 - lam / 2.0, 0.5 - lam


def _fit(lags: np.ndarray, values: np.ndarray) -> Optional[Tuple[float, float, float]]:
    ok = values > 0.0
    if np.count_nonzero(ok) < 3:
        return None
    res = linregress(np.log(lags[ok]), np.log(values[ok]))
    return float(res.slope), float(res.stderr), float(res.rvalue ** 2)


def _undefined(reason: str, lags=()) -> Estimate:
    return {"estimate": math.nan, "half_width": math.nan, "r2": math.nan, "defined": False, "reason": reason, "lags": list(lags)}


def dyadic_lags(max_steps: int, octaves: int = LAG_OCTAVES) -> List[int]:
    """Powers of two from 2 up to max_steps; starts at 1 when that is needed for 3 octaves."""
    lags = [2 ** j for j in range(1, 32) if 2 ** j <= max_steps]
    if len(lags) < 4:
        lags = [2 ** j for j in range(0, 32) if 2 ** j <= max_steps]
    if len(lags) < 4:
        raise ValueError(f"lags up to {max_steps} steps span fewer than 3 octaves")
    return lags[: max(octaves + 1, 4)] if octaves else lags


def default_space_lags(N: int, margin: float) -> List[int]:
    """Lags in grid steps with the largest at most a quarter of the margin (0.1 when margin is 0)."""
    return dyadic_lags(int((margin if margin > 0.0 else INTERIOR_MARGIN) / 4.0 * N))


def guarded(fn, *args, **kwargs) -> Estimate:
    """Run an estimator; a violated precondition becomes an undefined estimate."""
    try:
        return fn(*args, **kwargs)
    except ValueError as exc:
        return _undefined(str(exc))


def _aggregate(fits: List[Tuple[float, float, float]], lags: Sequence[int], unit: float) -> Estimate:
    slopes = np.array([f[0] for f in fits])
    errors = np.array([f[1] for f in fits])
    r2 = np.array([f[2] for f in fits])
    return {
        "estimate": float(np.median(slopes)),
        "half_width": float(np.median(errors)),
        "r2": float(np.clip(np.median(r2), 0.0, 1.0)),
        "defined": True,
        "lags": [float(l * unit) for l in lags],
        "fits": len(fits),
    }


def space_increments(values: np.ndarray, lags: Sequence[int], lo: int, hi: int, statistic: str = "median") -> np.ndarray:
    """Statistic over x of |u(x+h) - u(x)| for each lag, x and x+h within nodes [lo, hi]."""
    stat = STATISTICS[statistic]
    return np.array([stat(np.abs(values[lo + l : hi + 1] - values[lo : hi + 1 - l])) for l in lags])


def holder_exponent_space(
    traj: Trajectory,
    margin: float = INTERIOR_MARGIN,
    lags: Optional[Sequence[int]] = None,
    statistic: str = "median",
) -> Estimate:
    """Slope of log increment vs log lag, per snapshot, median over snapshots.

    ``lags`` are in grid steps. ``margin = 0`` uses the whole interval.
    """
    N = traj.N
    lo = int(math.ceil(margin * N))
    hi = N - lo
    if lags is None:
        lags = default_space_lags(N, margin)
    lags = np.asarray(lags, dtype=int)
    if lags[-1] / lags[0] < 8:
        raise ValueError("lags must span at least 3 octaves")
    fits = []
    for row in traj.values:
        incs = space_increments(row, lags, lo, hi, statistic)
        if np.all(incs == 0.0):
            continue
        fit = _fit(lags.astype(float), incs)
        if fit is not None:
            fits.append(fit)
    if not fits:
        return _undefined("field vanishes on the window", lags / N)
    return _aggregate(fits, lags, 1.0 / N)


def time_increments(values: np.ndarray, lags: Sequence[int], statistic: str = "median") -> np.ndarray:
    """Statistic over t of |u(t+tau) - u(t)| for each lag (rows are snapshots)."""
    stat = STATISTICS[statistic]
    return np.array([stat(np.abs(values[l:] - values[:-l])) for l in lags])


def holder_exponent_time(
    traj: Trajectory,
    x_window: Tuple[float, float] = (0.25, 0.75),
    lags: Optional[Sequence[int]] = None,
    statistic: str = "median",
) -> Estimate:
    """Log-log fit of time increments at each x in the window, median over x."""
    S = len(traj.times)
    if S < 64:
        return _undefined("fewer than 64 snapshots")
    gaps = np.diff(traj.times)
    if not np.allclose(gaps, gaps.mean(), rtol=0.05):
        raise ValueError("time estimator needs uniformly spaced snapshots")
    if lags is None:
        lags = dyadic_lags(S // 8, TIME_LAG_OCTAVES)
    lags = np.asarray(lags, dtype=int)
    if lags[-1] / lags[0] < 8:
        raise ValueError("lags must span at least 3 octaves")
    N = traj.N
    lo = max(int(math.ceil(x_window[0] * N)), 1)
    hi = min(int(math.floor(x_window[1] * N)), N - 1)
    fits = []
    for i in range(lo, hi + 1):
        incs = time_increments(traj.values[:, i], lags, statistic)
        if np.all(incs == 0.0):
            continue
        fit = _fit(lags.astype(float), incs)
        if fit is not None:
            fits.append(fit)
    if not fits:
        return _undefined("field is constant in time on the window", lags * gaps.mean())
    return _aggregate(fits, lags, float(gaps.mean()))


def decay_profile(traj: Trajectory, fit_window: Optional[Tuple[float, float]] = None) -> Dict[str, np.ndarray]:
    """rho(x) and sup_t |u(t, x)| on the left window and its mirror at x = 1."""
    N = traj.N
    if fit_window is None:
        fit_window = (2.0 / N, BOUNDARY_WINDOW)
    lo = int(math.ceil(fit_window[0] * N - 1e-9))
    hi = int(math.floor(fit_window[1] * N + 1e-9))
    idx = np.arange(max(lo, 1), hi + 1)
    M = np.max(np.abs(traj.values), axis=0)
    return {"rho": idx / N, "left": M[idx], "right": M[N - idx]}


def boundary_decay(traj: Trajectory, fit_window: Optional[Tuple[float, float]] = None) -> Estimate:
    """Slope of log sup_t|u| vs log rho near x = 0, mirrored at x = 1 and averaged."""
    if fit_window is not None and not 0.0 < fit_window[1] <= 0.1:
        raise ValueError("fit window must lie inside (0, 0.1]")
    prof = decay_profile(traj, fit_window)
    if len(prof["rho"]) < 8:
        raise ValueError("fit window holds fewer than 8 grid points")
    fits = []
    for side in ("left", "right"):
        fit = _fit(prof["rho"], prof[side])
        if fit is not None:
            fits.append(fit)
    if not fits:
        return _undefined("sup_t |u| vanishes on the window")
    slopes = [f[0] for f in fits]
    spread = 0.5 * (max(slopes) - min(slopes))
    return {
        "estimate": float(np.mean(slopes)),
        "half_width": float(np.mean([f[1] for f in fits]) + spread),
        "r2": float(np.clip(np.mean([f[2] for f in fits]), 0.0, 1.0)),
        "defined": True,
        "sides": slopes,
        "window": [float(prof["rho"][0]), float(prof["rho"][-1])],
    }


@dataclass
class HolderReport:
    time_exponent: Estimate
    space_exponent: Estimate
    boundary_slope: Estimate
    targets: Dict[str, float]
    weighted_sup: float = 0.0
    weighted_sup_finite: bool = True
    max_weighted_sup: float = 0.0
    cutoff_threshold: float = math.inf
    weighted_sup_bounded: bool = True
    checks: Dict[str, bool] = field(default_factory=dict)
    interior: Dict[str, Estimate] = field(default_factory=dict)
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def weighted_field(traj: Trajectory, exponent: float, psi: WeightFn) -> Trajectory:
    """Copy of ``traj`` with values psi^{-exponent} u, zero on the boundary."""
    x = traj.x
    v = np.zeros_like(traj.values)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v[:, 1:-1] = traj.values[:, 1:-1] / psi(x[1:-1]) ** exponent
    return Trajectory(times=traj.times, values=v, master_seed=traj.master_seed, path_index=traj.path_index, dt=traj.dt)


def cutoff_margin(traj: Trajectory, psi: WeightFn) -> Tuple[float, float]:
    """Largest psi^{-nu}|u| the path reached and the cutoff threshold m / max(psi)^nu it is held against."""
    seen = max((weighted_sup(row, traj.nu, psi) for row in traj.values), default=0.0)
    observed = max(float(traj.max_weighted_sup), seen)
    threshold = traj.m / psi.maximum ** traj.nu if math.isfinite(traj.m) else math.inf
    return observed, float(threshold)


def weighted_holder_field(
    traj: Trajectory,
    targets: HolderTargets,
    psi: WeightFn,
    statistic: str = "median",
    tolerance: float = 0.1,
    fit_window: Optional[Tuple[float, float]] = None,
) -> HolderReport:
    """Hoelder estimates of psi^{weight} u over the whole interval against the targets."""
    exponent = -targets.weight_exponent
    sup = max((weighted_sup(row, exponent, psi) for row in traj.values), default=0.0)
    finite = bool(np.isfinite(sup))
    v = weighted_field(traj, exponent, psi)
    if finite:
        space = guarded(holder_exponent_space, v, margin=0.0, statistic=statistic)
        time = guarded(holder_exponent_time, v, x_window=(0.0, 1.0), statistic=statistic)
    else:
        space = _undefined("weighted sup infinite")
        time = _undefined("weighted sup infinite")
    if np.any(traj.values != 0.0):
        decay = guarded(boundary_decay, traj, fit_window)
    else:
        decay = _undefined("field vanishes")
    observed, threshold = cutoff_margin(traj, psi)
    bundle = target_exponents(targets)
    checks = {
        "weighted_sup_finite": finite,
        "weighted_sup_bounded": observed < threshold,
        "space_consistent": (not space["defined"]) or space["estimate"] >= bundle["space"] - tolerance,
        "time_consistent": (not time["defined"]) or time["estimate"] >= bundle["time"] - tolerance,
    }
    checks["all"] = all(checks.values())
    return HolderReport(
        time_exponent=time,
        space_exponent=space,
        boundary_slope=decay,
        targets=bundle,
        weighted_sup=sup,
        weighted_sup_finite=finite,
        max_weighted_sup=observed,
        cutoff_threshold=threshold,
        weighted_sup_bounded=observed < threshold,
        checks=checks,
        diagnostics={"weight_exponent": -exponent, "statistic": statistic, "tolerance": tolerance},
    )
