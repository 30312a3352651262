import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from config import NOISE_BLOCK
from noise import BasisSpec, NoiseIncrement, RngStream, basis_eta, noise_field, pairing, sample_increments


def test_basis_eta_values():
    assert basis_eta(1, 0.5) == pytest.approx(math.sqrt(2.0))
    assert basis_eta(2, 0.25) == pytest.approx(math.sqrt(2.0))
    assert basis_eta(3, 0.0) == 0.0


def test_basis_eta_rejects_zero_index():
    with pytest.raises(ValueError):
        basis_eta(0, 0.3)


def test_basis_is_orthonormal_on_fine_grid():
    spec = BasisSpec(K_modes=8, N=4096)
    rows = spec.matrix()
    gram = np.array([[pairing(rows[i], rows[j]) for j in range(8)] for i in range(8)])
    assert np.allclose(gram, np.eye(8), atol=1e-10)


def test_basis_spec_rejects_too_many_modes():
    with pytest.raises(ValueError):
        BasisSpec(K_modes=64, N=64)
    with pytest.raises(ValueError):
        BasisSpec(K_modes=0, N=64)


def test_increment_variance_and_independence():
    spec = BasisSpec(K_modes=3, N=16)
    rng = RngStream(master_seed=2024, path_index=0)
    dt = 0.01
    draws = np.array([sample_increments(spec, dt, rng).dw for _ in range(10_000)])
    var = draws.var(axis=0)
    assert np.all(var >= 0.94 * dt)
    assert np.all(var <= 1.06 * dt)
    cov = np.cov(draws, rowvar=False)
    se = dt / math.sqrt(len(draws))
    off = cov[~np.eye(3, dtype=bool)]
    assert np.all(np.abs(off) <= 3.0 * se)


def test_zero_dt_gives_zero_increment():
    inc = sample_increments(BasisSpec(K_modes=5, N=16), 0.0, RngStream(1, 0))
    assert np.all(inc.dw == 0.0)


def test_negative_dt_rejected():
    with pytest.raises(ValueError):
        sample_increments(BasisSpec(K_modes=5, N=16), -1.0, RngStream(1, 0))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**63 - 1), path=st.integers(min_value=0, max_value=10_000))
def test_streams_are_deterministic_per_seed_and_path(seed, path):
    spec = BasisSpec(K_modes=4, N=8)
    a = sample_increments(spec, 1.0, RngStream(seed, path)).dw
    b = sample_increments(spec, 1.0, RngStream(seed, path)).dw
    c = sample_increments(spec, 1.0, RngStream(seed, path + 1)).dw
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_counter_gives_random_access():
    spec = BasisSpec(K_modes=6, N=16)
    rng = RngStream(99, 3)
    sequence = [sample_increments(spec, 0.5, rng) for _ in range(5)]
    assert rng.counter == 5
    assert [inc.step_index for inc in sequence] == list(range(5))
    jumped = sample_increments(spec, 0.5, RngStream(99, 3, counter=3))
    assert np.array_equal(jumped.dw, sequence[3].dw)


def test_block_cache_builds_one_generator_per_block(monkeypatch):
    spec = BasisSpec(K_modes=3, N=8)
    rng = RngStream(7, 2)
    built = []
    original = RngStream.generator

    def counting(self, block):
        built.append(block)
        return original(self, block)

    monkeypatch.setattr(RngStream, "generator", counting)
    sequence = [sample_increments(spec, 1.0, rng).dw for _ in range(NOISE_BLOCK + 4)]
    assert built == [0, 1]
    across = sample_increments(spec, 1.0, RngStream(7, 2, counter=NOISE_BLOCK + 2)).dw
    assert np.array_equal(across, sequence[NOISE_BLOCK + 2])
    assert not np.array_equal(sequence[0], sequence[NOISE_BLOCK])


def test_noise_field_matches_direct_sum():
    spec = BasisSpec(K_modes=20, N=64)
    inc = sample_increments(spec, 0.1, RngStream(5, 0))
    field = noise_field(inc, spec)
    direct = spec.matrix().T @ inc.dw
    assert field[0] == 0.0 and field[-1] == 0.0
    assert np.allclose(field, direct, atol=1e-12)


def test_noise_field_on_finer_grid():
    coarse = BasisSpec(K_modes=7, N=8)
    inc = sample_increments(coarse, 0.1, RngStream(5, 1))
    fine = noise_field(inc, coarse, N=32)
    assert len(fine) == 33
    assert np.allclose(fine[::4], noise_field(inc, coarse), atol=1e-12)


def test_noise_field_rejects_coarse_grid():
    spec = BasisSpec(K_modes=10, N=32)
    inc = NoiseIncrement(dw=np.ones(10), dt=1.0, step_index=0)
    with pytest.raises(ValueError):
        noise_field(inc, spec, N=8)


def test_noise_field_covariance_matches_basis_kernel():
    spec = BasisSpec(K_modes=4, N=16)
    rng = RngStream(master_seed=77, path_index=0)
    dt = 0.02
    fields = np.array([noise_field(sample_increments(spec, dt, rng), spec) for _ in range(20_000)])
    nodes = [2, 5, 8, 11]
    empirical = (fields[:, nodes].T @ fields[:, nodes]) / len(fields) / dt
    rows = spec.matrix()[:, nodes]
    expected = rows.T @ rows
    assert np.all(np.abs(empirical - expected) <= 0.05 * np.max(np.abs(expected)))


@pytest.mark.parametrize("k", [1, 3])
def test_pairing_with_a_basis_function_has_variance_dt(k):
    spec = BasisSpec(K_modes=8, N=64)
    rng = RngStream(master_seed=31, path_index=k)
    dt = 0.01
    phi = basis_eta(k, spec.x)
    norm2 = pairing(phi, phi)
    pairs = np.array([pairing(noise_field(sample_increments(spec, dt, rng), spec), phi) for _ in range(20_000)])
    assert norm2 == pytest.approx(1.0, abs=1e-12)
    assert 0.94 * dt * norm2 <= pairs.var() <= 1.06 * dt * norm2
