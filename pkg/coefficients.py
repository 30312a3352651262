"""Coefficient fields a, b, c and the noise amplitude xi as callables of (t, x)."""
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

Field = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PolynomialField:
    """Time-constant polynomial in x; coefficients in ascending order."""

    coeffs: Tuple[float, ...]

    def __call__(self, t: float, x) -> np.ndarray:
        return P.polyval(np.asarray(x, dtype=float), self.coeffs)

    def derivative(self) -> "PolynomialField":
        d = P.polyder(self.coeffs) if len(self.coeffs) > 1 else np.zeros(1)
        return PolynomialField(tuple(float(v) for v in d))

    @classmethod
    def constant(cls, value: float) -> "PolynomialField":
        return cls((float(value),))


@dataclass(frozen=True)
class PiecewiseField:
    """Piecewise-constant-in-time sequence of polynomial fields.

    ``breaks`` are the left endpoints of each piece, starting at 0.
    """

    breaks: Tuple[float, ...]
    pieces: Tuple[PolynomialField, ...]

    def _piece(self, t: float) -> PolynomialField:
        idx = int(np.searchsorted(self.breaks, t, side="right")) - 1
        return self.pieces[max(idx, 0)]

    def __call__(self, t: float, x) -> np.ndarray:
        return self._piece(t)(t, x)

    def derivative(self) -> "PiecewiseField":
        return PiecewiseField(self.breaks, tuple(p.derivative() for p in self.pieces))


def as_field(spec) -> Field:
    """Build a field from a number, a coefficient list or an existing field."""
    if isinstance(spec, (PolynomialField, PiecewiseField)):
        return spec
    if callable(spec):
        return spec
    if isinstance(spec, (int, float)):
        return PolynomialField.constant(float(spec))
    return PolynomialField(tuple(float(v) for v in spec))


def c2_norm(field: Field, t: float, x: np.ndarray) -> float:
    """sup|f| + sup|f_x| + sup|f_xx| sampled on x."""
    values = np.broadcast_to(field(t, x), x.shape).astype(float)
    first = np.gradient(values, x, edge_order=2)
    second = np.gradient(first, x, edge_order=2)
    return float(np.max(np.abs(values)) + np.max(np.abs(first)) + np.max(np.abs(second)))


def _random_cubic_a(rng: np.random.Generator, delta0: float) -> PolynomialField:
    # nonnegative coefficients keep a >= delta0 on [0, 1]
    alphas = rng.uniform(0.0, 0.25, size=4)
    return PolynomialField(tuple(float(v) for v in delta0 * np.concatenate(([1.0 + alphas[0]], alphas[1:]))))


def random_admissible_fields(
    rng: np.random.Generator,
    K: float,
    delta0: float,
    pieces: int = 1,
    T: float = 1.0,
) -> Tuple[Field, Field, Field]:
    """Draw (a, a_x, b) with a >= delta0 and sup|2a_x - b| <= 3K.

    Each field is a cubic in x; with ``pieces > 1`` the coefficients are redrawn on
    equal time pieces of [0, T].
    """
    a_pieces: List[PolynomialField] = []
    b_pieces: List[PolynomialField] = []
    for _ in range(pieces):
        a = _random_cubic_a(rng, delta0)
        gamma = rng.uniform(-1.0, 1.0, size=4)
        # |g| <= sum|gamma_i| on [0, 1]
        gamma = gamma * (0.99 * 3.0 * K / np.sum(np.abs(gamma)))
        two_ax = 2.0 * np.asarray(a.derivative().coeffs)
        b_coeffs = np.zeros(4)
        b_coeffs[: len(two_ax)] += two_ax
        b_coeffs -= gamma
        a_pieces.append(a)
        b_pieces.append(PolynomialField(tuple(float(v) for v in b_coeffs)))
    breaks = tuple(float(v) for v in np.linspace(0.0, T, pieces, endpoint=False))
    a_field = PiecewiseField(breaks, tuple(a_pieces))
    b_field = PiecewiseField(breaks, tuple(b_pieces))
    return a_field, a_field.derivative(), b_field


def sample_times(T: float, count: int) -> Sequence[float]:
    return list(np.linspace(0.0, T, count))
