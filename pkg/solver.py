"""Semi-implicit Euler-Maruyama integration of the Dirichlet SPDE

    du = (a u_xx + b u_x + c u) dt + sum_k xi |u|^{1+lam} eta_k dw^k

with the cutoff nonlinearity |(-m) v u ^ m|^{1+lam}.
"""
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_banded

from coefficients import Field, PolynomialField, as_field, c2_norm
from config import DIVERGENCE_LIMIT, DT_PER_DX2, NEGATIVITY_FACTOR
from noise import BasisSpec, RngStream, noise_field, sample_increments
from weight import make_psi

RuleReport = Dict[str, bool]


class PathDiverged(RuntimeError):
    """Raised by ``step`` when the new state is not finite or exceeds the divergence limit."""


@dataclass(frozen=True, eq=False)
class GridFunction:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or len(values) < 3:
            raise ValueError("grid function needs a 1-d array with at least 3 nodes")
        if values[0] != 0.0 or values[-1] != 0.0:
            raise ValueError("grid function must vanish at x=0 and x=1")
        object.__setattr__(self, "values", values)

    @classmethod
    def pinned(cls, values) -> "GridFunction":
        """Copy of ``values`` with both boundary nodes set to 0."""
        arr = np.array(values, dtype=float)
        arr[0] = arr[-1] = 0.0
        return cls(arr)

    @classmethod
    def zeros(cls, N: int) -> "GridFunction":
        return cls(np.zeros(N + 1))

    @property
    def N(self) -> int:
        return len(self.values) - 1

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)


def initial_profile(name: str, N: int) -> GridFunction:
    x = np.linspace(0.0, 1.0, N + 1)
    if name == "sine":
        return GridFunction.pinned(np.sin(math.pi * x))
    if name == "parabola":
        return GridFunction.pinned(x * (1.0 - x))
    if name == "bump":
        return GridFunction.pinned(np.exp(-((x - 0.5) / 0.1) ** 2) * x * (1.0 - x) * 4.0)
    if name == "zero":
        return GridFunction.zeros(N)
    raise ValueError(f"unknown initial profile '{name}'")


@dataclass(frozen=True)
class SpdeProblem:
    a: Field
    b: Field
    c: Field
    xi: Field
    lam: float
    u0: GridFunction
    T: float
    delta0: float = 1.0
    K: float = 2.0
    noise_mode: str = "multiplicative"

    @classmethod
    def build(cls, a=1.0, b=0.0, c=0.0, xi=1.0, **kwargs) -> "SpdeProblem":
        return cls(a=as_field(a), b=as_field(b), c=as_field(c), xi=as_field(xi), **kwargs)

    def validate(self, times: Optional[Sequence[float]] = None, samples: int = 512) -> RuleReport:
        times = list(np.linspace(0.0, self.T, 5)) if times is None else list(times)
        x = np.linspace(0.0, 1.0, samples + 1)
        rule_a = all(np.min(np.broadcast_to(self.a(t, x), x.shape)) >= self.delta0 for t in times)
        rule_c2 = all(
            c2_norm(self.a, t, x) + c2_norm(self.b, t, x) + c2_norm(self.c, t, x) < self.K for t in times
        )
        rule_xi = all(np.max(np.abs(self.xi(t, x))) <= self.K for t in times)
        rule_lam = 0.0 <= self.lam < 0.5
        rule_u0 = bool(np.all(self.u0.values >= 0.0))
        rule_dirichlet = self.u0.values[0] == 0.0 and self.u0.values[-1] == 0.0
        rule_mode = self.noise_mode in ("multiplicative", "additive")
        rules = {
            "a_lower_bound": bool(rule_a),
            "c2_bound": bool(rule_c2),
            "xi_bound": bool(rule_xi),
            "lambda_range": bool(rule_lam),
            "u0_nonnegative": rule_u0,
            "u0_dirichlet": bool(rule_dirichlet),
            "noise_mode": rule_mode,
        }
        rules["all"] = all(rules.values())
        return rules

    def sup_xi(self, samples: int = 512) -> float:
        x = np.linspace(0.0, 1.0, samples + 1)
        return float(max(np.max(np.abs(self.xi(t, x))) for t in np.linspace(0.0, self.T, 5)))


@dataclass(frozen=True)
class SchemeSpec:
    N: int
    m: float
    dt: Optional[float] = None
    K_modes: Optional[int] = None
    snapshots: int = 64
    snapshot_times: Optional[Tuple[float, ...]] = None
    nu: float = 0.8  # exponent of the weighted sup psi^{-nu}|u|

    def resolved_dt(self) -> float:
        if self.dt is not None:
            return float(self.dt)
        return DT_PER_DX2 / self.N ** 2

    def resolved_modes(self) -> int:
        return self.N - 1 if self.K_modes is None else int(self.K_modes)


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    master_seed: int = 0
    path_index: int = 0
    dt: float = 0.0
    K_modes: int = 0
    m: float = math.inf
    nu: float = 0.0
    cutoff_active: bool = False
    cutoff_exit_time: Optional[float] = None
    max_weighted_sup: float = 0.0
    running_min: float = 0.0
    negativity_tol: float = 0.0
    diverged: bool = False

    @property
    def N(self) -> int:
        return self.values.shape[1] - 1

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)

    @property
    def snapshots(self) -> List[Tuple[float, GridFunction]]:
        return [(float(t), GridFunction(row)) for t, row in zip(self.times, self.values)]

    @property
    def final(self) -> GridFunction:
        return GridFunction(self.values[-1])

    def metadata(self) -> Dict[str, object]:
        return {
            "master_seed": int(self.master_seed),
            "path_index": int(self.path_index),
            "N": self.N,
            "dt": self.dt,
            "K_modes": int(self.K_modes),
            "m": self.m,
            "nu": self.nu,
            "cutoff_active": bool(self.cutoff_active),
            "cutoff_exit_time": self.cutoff_exit_time,
            "max_weighted_sup": self.max_weighted_sup,
            "running_min": self.running_min,
            "negativity_tol": self.negativity_tol,
            "diverged": bool(self.diverged),
        }


def cutoff_nonlinearity(u, m: float, lam: float):
    """|clamp(u, -m, m)|^{1+lam}."""
    out = np.abs(np.clip(u, -m, m)) ** (1.0 + lam)
    return float(out) if np.ndim(out) == 0 else out


def lipschitz_bound(m: float, lam: float) -> float:
    if m <= 0:
        raise ValueError("cutoff m must be positive")
    return (1.0 + lam) * (2.0 * m) ** lam


def _time_constant(problem: SpdeProblem) -> bool:
    return all(isinstance(f, PolynomialField) for f in (problem.a, problem.b, problem.c, problem.xi))


def assemble_operator(problem: SpdeProblem, t: float, dt: float, N: int) -> Tuple[np.ndarray, np.ndarray]:
    """Banded form of Id - dt L_t on interior nodes and xi(t, .) on interior nodes."""
    h = 1.0 / N
    x = np.linspace(0.0, 1.0, N + 1)[1:-1]
    a = np.broadcast_to(problem.a(t, x), x.shape)
    b = np.broadcast_to(problem.b(t, x), x.shape)
    c = np.broadcast_to(problem.c(t, x), x.shape)
    c_max = float(np.max(c))
    if c_max > 0.0 and dt >= 1.0 / (2.0 * c_max):
        raise ValueError(f"dt={dt:g} violates dt < 1/(2 sup c) = {1.0 / (2.0 * c_max):g}")
    lower = -dt * (a / h ** 2 - b / (2.0 * h))
    upper = -dt * (a / h ** 2 + b / (2.0 * h))
    diag = 1.0 + dt * (2.0 * a / h ** 2 - c)
    ab = np.zeros((3, N - 1))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    xi = np.broadcast_to(problem.xi(t, x), x.shape).astype(float)
    return ab, xi


def noise_term(u_int: np.ndarray, xi: np.ndarray, noise_int: np.ndarray, problem: SpdeProblem, m: float) -> np.ndarray:
    if problem.noise_mode == "additive":
        return xi * noise_int
    return xi * cutoff_nonlinearity(u_int, m, problem.lam) * noise_int


def _advance(u: np.ndarray, ab: np.ndarray, xi: np.ndarray, noise, problem: SpdeProblem, m: float) -> np.ndarray:
    noise = np.asarray(getattr(noise, "values", noise), dtype=float)
    rhs = u[1:-1] + noise_term(u[1:-1], xi, noise[1:-1], problem, m)
    out = np.zeros_like(u)
    out[1:-1] = solve_banded((1, 1), ab, rhs, check_finite=False)
    if not np.all(np.isfinite(out)) or np.max(np.abs(out)) > DIVERGENCE_LIMIT:
        raise PathDiverged("state left the finite range")
    return out


def step(u: GridFunction, t: float, dt: float, problem: SpdeProblem, m: float, noise) -> GridFunction:
    """One step of (Id - dt L_t) u_next = u + xi(t,.) f_m(u) dW."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    ab, xi = assemble_operator(problem, t, dt, u.N)
    return GridFunction(_advance(u.values, ab, xi, noise, problem, m))


def negativity_tolerance(problem: SpdeProblem, dt: float, K_modes: int) -> float:
    return NEGATIVITY_FACTOR * math.sqrt(dt) * problem.sup_xi() * math.sqrt(2.0) * math.sqrt(K_modes * dt)


def snapshot_steps(scheme: SchemeSpec, T: float, n_steps: int) -> np.ndarray:
    if scheme.snapshot_times is not None:
        requested = np.asarray(scheme.snapshot_times, dtype=float)
        if np.any(requested < 0.0) or np.any(requested > T):
            raise ValueError("snapshot times must lie in [0, T]")
        idx = np.rint(requested / T * n_steps).astype(int)
        idx = np.concatenate(([0], idx, [n_steps]))
    else:
        idx = np.rint(np.linspace(0, n_steps, scheme.snapshots + 1)).astype(int)
    return np.unique(idx)


def simulate_path(problem: SpdeProblem, scheme: SchemeSpec, rng: RngStream) -> Trajectory:
    """Iterate ``step`` from u0 to T, recording snapshots and cutoff diagnostics."""
    N = scheme.N
    if problem.u0.N != N:
        raise ValueError(f"u0 has N={problem.u0.N}, scheme has N={N}")
    if scheme.m <= 0 or N < 3:
        raise ValueError("scheme parameters must be positive")
    n_steps = max(1, int(round(problem.T / scheme.resolved_dt())))
    dt = problem.T / n_steps
    basis = BasisSpec(K_modes=scheme.resolved_modes(), N=N)
    keep = set(int(i) for i in snapshot_steps(scheme, problem.T, n_steps))

    psi = make_psi(problem.K, problem.delta0)
    x_int = np.linspace(0.0, 1.0, N + 1)[1:-1]
    psi_nu = psi(x_int) ** scheme.nu
    threshold = scheme.m / psi.maximum ** scheme.nu

    traj = Trajectory(
        times=np.zeros(0),
        values=np.zeros((0, N + 1)),
        master_seed=rng.master_seed,
        path_index=rng.path_index,
        dt=dt,
        K_modes=basis.K_modes,
        m=scheme.m,
        nu=scheme.nu,
        negativity_tol=negativity_tolerance(problem, dt, basis.K_modes),
    )
    times: List[float] = [0.0]
    rows: List[np.ndarray] = [problem.u0.values.copy()]

    def observe(u: np.ndarray, t: float) -> None:
        ws = float(np.max(np.abs(u[1:-1]) / psi_nu))
        traj.max_weighted_sup = max(traj.max_weighted_sup, ws)
        traj.running_min = min(traj.running_min, float(np.min(u)))
        if ws >= threshold and not traj.cutoff_active:
            traj.cutoff_active = True
            traj.cutoff_exit_time = t

    u = problem.u0.values.copy()
    observe(u, 0.0)
    constant = _time_constant(problem)
    ab, xi = assemble_operator(problem, 0.0, dt, N)
    for k in range(n_steps):
        t = k * dt
        if not constant and k > 0:
            ab, xi = assemble_operator(problem, t, dt, N)
        inc = sample_increments(basis, dt, rng)
        try:
            u = _advance(u, ab, xi, noise_field(inc, basis), problem, scheme.m)
        except PathDiverged:
            traj.diverged = True
            break
        observe(u, t + dt)
        if k + 1 in keep:
            times.append((k + 1) * dt)
            rows.append(u.copy())

    traj.times = np.asarray(times)
    traj.values = np.vstack(rows)
    return traj


def check_max_principle(traj: Trajectory, tol: float) -> Dict[str, object]:
    worst = float(np.min(traj.values))
    return {"worst": worst, "passed": worst >= -tol, "tol": float(tol)}


def self_convergence(problem_for, scheme: SchemeSpec, levels: int, seed: int, path_index: int = 0) -> Dict[str, object]:
    """Same noise on grids N, 2N, 4N, ...; sup differences of final states on coarse nodes.

    ``problem_for(N)`` builds the problem on an N-grid. The noise keeps the coarse
    grid's N-1 modes and the finest level's time step so every level sees the same
    Brownian increments.
    """
    finest = scheme.N * 2 ** (levels - 1)
    dt = scheme.dt if scheme.dt is not None else DT_PER_DX2 / finest ** 2
    finals: List[np.ndarray] = []
    for level in range(levels):
        N = scheme.N * 2 ** level
        level_scheme = replace(scheme, N=N, dt=dt, K_modes=scheme.N - 1)
        traj = simulate_path(problem_for(N), level_scheme, RngStream(seed, path_index))
        finals.append(traj.values[-1][:: 2 ** level])
    diffs = [float(np.max(np.abs(finals[i + 1] - finals[i]))) for i in range(levels - 1)]
    ratios = [diffs[i] / diffs[i + 1] if diffs[i + 1] > 0 else math.inf for i in range(len(diffs) - 1)]
    return {"differences": diffs, "ratios": ratios}
