"""Cylindrical Brownian increments and their synthesis into a white-noise grid field."""
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.fft import dst

from config import NOISE_BLOCK


def basis_eta(k: int, x):
    """Dirichlet sine basis sqrt(2) sin(k pi x)."""
    if k < 1:
        raise ValueError("basis index starts at 1")
    out = math.sqrt(2.0) * np.sin(k * math.pi * np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BasisSpec:
    K_modes: int
    N: int

    def __post_init__(self):
        if self.K_modes < 1:
            raise ValueError("K_modes must be positive")
        if self.K_modes > self.N - 1:
            raise ValueError(f"K_modes={self.K_modes} exceeds the N-1={self.N - 1} modes the grid resolves")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)

    def matrix(self) -> np.ndarray:
        """Rows eta_k sampled on the grid, k = 1..K_modes."""
        k = np.arange(1, self.K_modes + 1)[:, None]
        return math.sqrt(2.0) * np.sin(k * math.pi * self.x[None, :])

    @property
    def sup_eta(self) -> float:
        return math.sqrt(2.0)


@dataclass
class RngStream:
    """Counter-based stream; each block of NOISE_BLOCK counters owns one Philox counter offset.

    The draws for counter ``c`` depend only on (master_seed, path_index, c), so any
    step can be replayed without the ones before it.
    """

    master_seed: int
    path_index: int
    counter: int = 0
    _key: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    _block: Optional[Tuple[int, int, np.ndarray]] = field(default=None, repr=False, compare=False)

    def key(self) -> np.ndarray:
        if self._key is None:
            seq = np.random.SeedSequence([int(self.master_seed) & 0xFFFFFFFFFFFFFFFF, int(self.path_index)])
            self._key = seq.generate_state(2, dtype=np.uint64)
        return self._key

    def generator(self, block: int) -> np.random.Generator:
        bitgen = np.random.Philox(key=self.key(), counter=np.array([0, int(block), 0, 0], dtype=np.uint64))
        return np.random.Generator(bitgen)

    def normals(self, counter: int, size: int) -> np.ndarray:
        """``size`` standard normals owned by ``counter``; one block is drawn and cached at a time."""
        block, row = divmod(int(counter), NOISE_BLOCK)
        if self._block is None or self._block[0] != block or self._block[1] != size:
            self._block = (block, size, self.generator(block).standard_normal((NOISE_BLOCK, size)))
        return self._block[2][row]


@dataclass(frozen=True)
class NoiseIncrement:
    dw: np.ndarray
    dt: float
    step_index: int


def sample_increments(spec: BasisSpec, dt: float, rng: RngStream) -> NoiseIncrement:
    """K_modes independent N(0, dt) draws; advances the stream counter by one."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    index = rng.counter
    z = rng.normals(index, spec.K_modes)
    rng.counter = index + 1
    return NoiseIncrement(dw=math.sqrt(dt) * z, dt=float(dt), step_index=index)


def noise_field(inc: NoiseIncrement, spec: BasisSpec, N: Optional[int] = None) -> np.ndarray:
    """sum_k eta_k(x_i) dw^k on nodes x_i = i/N, zero at both ends."""
    N = spec.N if N is None else N
    if len(inc.dw) != spec.K_modes:
        raise ValueError("increment does not match the basis")
    if spec.K_modes > N - 1:
        raise ValueError("grid too coarse for the retained modes")
    coeffs = np.zeros(N - 1)
    coeffs[: spec.K_modes] = inc.dw
    out = np.zeros(N + 1)
    # DST-I: y_j = 2 sum_k c_k sin(pi (k+1)(j+1) / N)
    out[1:-1] = (math.sqrt(2.0) / 2.0) * dst(coeffs, type=1)
    return out


def pairing(values: np.ndarray, phi: np.ndarray) -> float:
    """Trapezoid inner product on the uniform grid."""
    h = 1.0 / (len(values) - 1)
    w = np.full(len(values), h)
    w[0] = w[-1] = 0.5 * h
    return float(np.sum(w * values * phi))
