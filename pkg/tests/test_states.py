from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qlyapunov.states import (as_density, bell_state, count_diagonal_stationary, flag_manifold_dim,
                              is_fully_connected, is_pseudo_pure_exceptional, is_regular,
                              is_strongly_regular, pure_state, sample_isospectral,
                              spectrum_signature, to_drift_eigenbasis)
from qlyapunov.su_algebra import bloch_of_density, build_basis

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2)


def test_as_density_validation():
    with pytest.raises(ValueError, match="trace"):
        as_density(np.eye(2))
    with pytest.raises(ValueError, match="negative"):
        as_density(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError, match="Hermitian"):
        as_density(np.array([[0.5, 0.2], [0.0, 0.5]]))
    rho = as_density(np.array([[0.5, 1e-11], [0.0, 0.5]]))
    assert rho[0, 1] == rho[1, 0]


class TestSpectrumSignature:
    def test_example_one_target(self):
        sig = spectrum_signature(np.diag([0.25, 0.25, 0.5]))
        assert sig.values == pytest.approx((0.5, 0.25))
        assert sig.multiplicities == (1, 2)
        assert sig.kind == "pseudo-pure"

    def test_two_by_two_block(self):
        sig = spectrum_signature(np.diag([0.35, 0.35, 0.15, 0.15]))
        assert sig.multiplicities == (2, 2)
        assert sig.kind == "mixed-degenerate"

    def test_maximally_mixed(self):
        sig = spectrum_signature(np.eye(4) / 4)
        assert sig.values == pytest.approx((0.25,))
        assert sig.multiplicities == (4,)

    def test_generic_and_pure(self):
        assert spectrum_signature(np.diag([0.5, 0.3, 0.2])).kind == "generic"
        assert spectrum_signature(bell_state()).kind == "pure"

    def test_qubit_is_both_generic_and_pseudo_pure(self):
        sig = spectrum_signature(np.diag([0.7, 0.3]))
        assert sig.kind == "generic" and sig.is_pseudo_pure
        assert sig.pseudo_pure_weights == pytest.approx((0.7, 0.3))

    def test_ambiguous_gap_raises(self):
        with pytest.raises(ValueError, match="ambiguous"):
            spectrum_signature(np.diag([0.5, 0.5 - 5e-8, 5e-8]), cluster_tol=1e-8)
        sig = spectrum_signature(np.diag([0.5, 0.5 - 5e-8, 5e-8]), cluster_tol=1e-6)
        assert sig.multiplicities == (2, 1)


def test_flag_manifold_dims():
    assert flag_manifold_dim(spectrum_signature(np.diag([0.25, 0.25, 0.5]))) == 4
    assert flag_manifold_dim(spectrum_signature(np.diag([0.35, 0.35, 0.15, 0.15]))) == 8
    for n in (2, 3, 5):
        d = np.arange(1, n + 1, dtype=float)
        assert flag_manifold_dim(spectrum_signature(np.diag(d / d.sum()))) == n * n - n


def _brute_force_count(labels):
    return len(set(permutations(labels)))


def test_stationary_counts_examples():
    assert count_diagonal_stationary(spectrum_signature(np.diag([0.35, 0.35, 0.15, 0.15]))) == 6
    assert count_diagonal_stationary(spectrum_signature(np.diag([0.5, 0.3, 0.2]))) == 6
    for n in (3, 4, 5):
        rho = np.diag([0.5] + [0.5 / (n - 1)] * (n - 1))
        assert count_diagonal_stationary(spectrum_signature(rho)) == n


def _partitions(n, largest=None):
    largest = largest or n
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in _partitions(n - k, k):
            yield (k,) + rest


@pytest.mark.parametrize("n", range(1, 7))
def test_stationary_count_matches_permutation_enumeration(n):
    for part in _partitions(n):
        labels = [i for i, m in enumerate(part) for _ in range(m)]
        values = np.array([1.0 + i for i in labels])
        sig = spectrum_signature(np.diag(values / values.sum()))
        assert count_diagonal_stationary(sig) == _brute_force_count(labels)


class TestStrongRegularity:
    def test_equally_spaced_is_not(self):
        chk = is_strongly_regular(np.diag([-1.0, 0.0, 1.0]))
        assert not chk.ok
        kind, p1, p2, omega = chk.witness
        assert kind == "coincident" and {p1, p2} == {(0, 1), (1, 2)} and abs(omega) == 1.0

    def test_ising_drift_is_not_even_regular(self):
        h0 = 0.1 * np.kron(SZ, SZ)
        assert not is_regular(h0)
        chk = is_strongly_regular(h0)
        assert not chk.ok and chk.witness[0] == "degenerate"

    def test_chosen_four_level_drift(self):
        # gaps 1, 2.5, 4.1, 1.5, 3.1, 1.6 are pairwise distinct
        assert is_strongly_regular(np.diag([0.0, 1.0, 2.5, 4.1])).ok

    def test_non_diagonal_input(self, rng):
        u = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
        h0 = u @ np.diag([0.0, 1.0, 2.5, 4.1]) @ u.conj().T
        assert is_strongly_regular(h0).ok

    def test_implies_regular(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            h0 = np.diag(rng.integers(0, 6, size=4).astype(float))
            if is_strongly_regular(h0).ok:
                assert is_regular(h0)


class TestFullConnectivity:
    def test_all_ones(self):
        assert is_fully_connected(np.ones((3, 3)) - np.eye(3)).ok

    def test_local_x_controls(self):
        h1 = np.kron(SX, I2) + 0.9 * np.kron(I2, SX)
        chk = is_fully_connected(h1)
        assert not chk.ok and set(chk.witness) == {(0, 3), (1, 2)}

    def test_zero(self):
        assert not is_fully_connected(np.zeros((3, 3))).ok


def test_drift_eigenbasis_sorts_diagonal_stably():
    h0 = np.diag([0.1, -0.1, -0.1, 0.1])
    energies, u, (h0e,) = to_drift_eigenbasis(h0, h0)
    assert list(energies) == [-0.1, -0.1, 0.1, 0.1]
    assert np.allclose(np.abs(u), np.eye(4)[:, [1, 2, 0, 3]])
    assert np.allclose(h0e, np.diag(energies))


class TestSampling:
    def test_spectrum_preserved_and_deterministic(self):
        rho = np.diag([0.5, 0.3, 0.2])
        for seed in range(10):
            out = sample_isospectral(rho, seed)
            assert np.allclose(np.linalg.eigvalsh(out), [0.2, 0.3, 0.5], atol=1e-10)
        assert np.array_equal(sample_isospectral(rho, 0), sample_isospectral(rho, 0))
        assert not np.allclose(sample_isospectral(rho, 0), sample_isospectral(rho, 1))

    def test_haar_mean_bloch_vector_vanishes(self):
        # unitary invariance of Haar measure => E[U rho U^dag] = I/n
        b = build_basis(3)
        rho = pure_state([1, 0, 0])
        n = 10_000
        mean = sum(bloch_of_density(sample_isospectral(rho, (5, i)), b) for i in range(n)) / n
        assert np.max(np.abs(mean)) <= 3 / np.sqrt(n)


class TestExceptionality:
    def test_bell_state(self):
        ex = is_pseudo_pure_exceptional(bell_state())
        assert ex.exceptional and ex.pair == (0, 3)
        assert ex.v_max == pytest.approx(1.0)

    def test_unequal_weights(self):
        assert not is_pseudo_pure_exceptional(pure_state([1, 0, 0, 2])).exceptional

    def test_diagonal(self):
        assert not is_pseudo_pure_exceptional(np.diag([0.6, 0.2, 0.2])).exceptional

    def test_mixed_pseudo_pure_exceptional_form(self):
        w, u = 0.7, 0.1
        rho = np.diag([u, (w + u) / 2, u, (w + u) / 2]).astype(complex)
        rho[1, 3] = 0.5 * (w - u) * np.exp(0.3j)
        rho[3, 1] = np.conj(rho[1, 3])
        ex = is_pseudo_pure_exceptional(rho)
        assert ex.exceptional and ex.pair == (1, 3)
        assert ex.alpha == pytest.approx(0.3)
        assert ex.v_max == pytest.approx((w - u) ** 2)

    def test_rejects_non_pseudo_pure(self):
        with pytest.raises(ValueError):
            is_pseudo_pure_exceptional(np.diag([0.35, 0.35, 0.15, 0.15]))

    @settings(max_examples=50, deadline=None)
    @given(phases=st.lists(st.floats(-np.pi, np.pi), min_size=4, max_size=4),
           which=st.sampled_from(["bell", "unequal", "triple"]))
    def test_invariant_under_diagonal_phases(self, phases, which):
        rho = {"bell": bell_state(), "unequal": pure_state([1, 0, 0, 2]),
               "triple": pure_state([1, 1, 0, 1])}[which]
        d = np.diag(np.exp(1j * np.array(phases)))
        before = is_pseudo_pure_exceptional(rho).exceptional
        after = is_pseudo_pure_exceptional(d @ rho @ d.conj().T).exceptional
        assert before == after
