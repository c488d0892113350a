"""Density matrices, Hamiltonians, spectrum classification and ideality checks.

States and Hamiltonians are plain complex numpy arrays; ``as_density`` and
``as_hamiltonian`` validate and symmetrize them.  Every ideality and
exceptionality check works in the eigenbasis of the drift Hamiltonian, see
``to_drift_eigenbasis``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .su_algebra import HERMITIAN_TOL, hermitian_part

TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-9


def as_hamiltonian(h, what: str = "Hamiltonian") -> np.ndarray:
    return hermitian_part(np.asarray(h, dtype=complex), HERMITIAN_TOL, what)


def as_density(rho, what: str = "density matrix") -> np.ndarray:
    rho = hermitian_part(np.asarray(rho, dtype=complex), HERMITIAN_TOL, what)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"{what} has trace {tr:.12g}, expected 1")
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < -POSITIVITY_TOL:
        raise ValueError(f"{what} has negative eigenvalue {lo:.3g}")
    return rho


def pure_state(amplitudes) -> np.ndarray:
    """Projector onto the normalized ket with the given amplitudes."""
    psi = np.asarray(amplitudes, dtype=complex).ravel()
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("zero vector is not a state")
    psi = psi / nrm
    return np.outer(psi, psi.conj())


def bell_state(n: int = 4) -> np.ndarray:
    """|Psi+> = (|00> + |11>)/sqrt(2) as a density matrix."""
    amp = np.zeros(n)
    amp[0] = amp[-1] = 1.0
    return pure_state(amp)


# ---------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True)
class SpectrumSignature:
    values: tuple          # distinct eigenvalues, strictly decreasing
    multiplicities: tuple  # matching multiplicities, sum n
    kind: str              # generic | pure | pseudo-pure | mixed-degenerate

    @property
    def n(self) -> int:
        return sum(self.multiplicities)

    @property
    def is_generic(self) -> bool:
        return all(m == 1 for m in self.multiplicities)

    @property
    def is_pseudo_pure(self) -> bool:
        """Two distinct values with multiplicities 1 and n - 1 (pure included)."""
        return len(self.multiplicities) == 2 and sorted(self.multiplicities) == [1, self.n - 1]

    @property
    def pseudo_pure_weights(self) -> tuple:
        """(w, u): the singleton eigenvalue and the (n-1)-fold one."""
        if not self.is_pseudo_pure:
            raise ValueError(f"spectrum {self.values} is not pseudo-pure")
        if self.multiplicities == (1, self.n - 1):
            return self.values[0], self.values[1]
        return self.values[1], self.values[0]


def spectrum_signature(rho, cluster_tol: float = 1e-8) -> SpectrumSignature:
    """Cluster the eigenvalues of ``rho`` and classify the spectrum.

    Consecutive eigenvalues closer than ``cluster_tol`` are merged.  A gap
    between ``cluster_tol`` and ``10 * cluster_tol`` is ambiguous and raises.
    For n = 2 any two distinct eigenvalues are both generic and pseudo-pure;
    ``kind`` then reports ``generic`` (or ``pure``), ``is_pseudo_pure`` is
    still true.
    """
    if cluster_tol <= 0:
        raise ValueError("cluster_tol must be positive")
    rho = hermitian_part(np.asarray(rho, dtype=complex), HERMITIAN_TOL, "state")
    ev = np.sort(np.linalg.eigvalsh(rho))[::-1]
    groups = [[ev[0]]]
    for prev, cur in zip(ev[:-1], ev[1:]):
        gap = prev - cur
        if cluster_tol < gap < 10 * cluster_tol:
            raise ValueError(
                f"ambiguous eigenvalue gap {gap:.3g} near cluster_tol={cluster_tol:g}; "
                "pass an explicit tolerance"
            )
        if gap <= cluster_tol:
            groups[-1].append(cur)
        else:
            groups.append([cur])
    for g in groups:
        if g[0] - g[-1] > cluster_tol:
            raise ValueError(
                f"eigenvalue cluster spread {g[0] - g[-1]:.3g} exceeds cluster_tol={cluster_tol:g}"
            )
    values = tuple(float(np.mean(g)) for g in groups)
    mult = tuple(len(g) for g in groups)
    n = len(ev)

    pseudo = len(mult) == 2 and sorted(mult) == [1, n - 1]
    if pseudo and abs(max(values) - 1.0) <= cluster_tol and abs(min(values)) <= cluster_tol:
        kind = "pure"
    elif all(m == 1 for m in mult):
        kind = "generic"
    elif pseudo:
        kind = "pseudo-pure"
    else:
        kind = "mixed-degenerate"
    return SpectrumSignature(values, mult, kind)


def flag_manifold_dim(sig: SpectrumSignature) -> int:
    """Real dimension n^2 - sum n_l^2 of the isospectral orbit."""
    return sig.n ** 2 - sum(m * m for m in sig.multiplicities)


def count_diagonal_stationary(sig: SpectrumSignature) -> int:
    """Number of distinct diagonal arrangements, n! / prod(n_l!)."""
    if sig.n > 20:
        raise OverflowError("stationary-state counts are supported for n <= 20 only")
    count = math.factorial(sig.n)
    for m in sig.multiplicities:
        count //= math.factorial(m)
    return count


# ---------------------------------------------------------------------------
# drift eigenbasis and ideality


def to_drift_eigenbasis(h0, *ops, tol: float = 1e-12):
    """Energies of ``h0`` (ascending) and ``ops`` conjugated into its eigenbasis.

    A diagonal ``h0`` is only permuted (stable sort), so already-sorted
    diagonal drifts leave every operator untouched.  Returns
    ``(energies, U, [U^dag op U ...])``.
    """
    h0 = as_hamiltonian(h0, "H0")
    n = h0.shape[0]
    if np.max(np.abs(h0 - np.diag(np.diag(h0)))) <= tol:
        diag = np.diag(h0).real
        order = np.argsort(diag, kind="stable")
        u = np.eye(n, dtype=complex)[:, order]
        energies = diag[order]
    else:
        energies, u = np.linalg.eigh(h0)
    out = [u.conj().T @ np.asarray(op, dtype=complex) @ u for op in ops]
    return energies, u, out


class Check(NamedTuple):
    ok: bool
    witness: object = None


def transition_frequencies(energies) -> dict:
    """omega_kl = a_k - a_l for k < l (0-based keys)."""
    a = np.asarray(energies, dtype=float)
    return {(k, l): a[k] - a[l] for k, l in combinations(range(len(a)), 2)}


def is_strongly_regular(h0, tol: float = 1e-8) -> Check:
    """All transition frequencies nonzero and pairwise distinct.

    The witness is either ``("degenerate", (k, l), omega)`` or
    ``("coincident", (k, l), (p, q), omega)`` with 0-based level indices.
    """
    h0 = as_hamiltonian(h0, "H0")
    a = np.linalg.eigvalsh(h0)
    omegas = transition_frequencies(a)
    for pair, w in omegas.items():
        if abs(w) <= tol:
            return Check(False, ("degenerate", pair, float(w)))
    items = list(omegas.items())
    for (p1, w1), (p2, w2) in combinations(items, 2):
        if abs(w1 - w2) <= tol:
            return Check(False, ("coincident", p1, p2, float(w1)))
    return Check(True)


def is_regular(h0, tol: float = 1e-8) -> bool:
    a = np.linalg.eigvalsh(as_hamiltonian(h0, "H0"))
    return bool(np.all(np.diff(a) > tol))


def is_fully_connected(h1, tol: float = 1e-10) -> Check:
    """Every off-diagonal entry of ``h1`` is nonzero.

    ``h1`` must already be expressed in the drift eigenbasis.  The witness
    lists the vanishing (k, l) pairs, k < l, 0-based.
    """
    h1 = as_hamiltonian(h1, "H1")
    zeros = [(k, l) for k, l in combinations(range(h1.shape[0]), 2) if abs(h1[k, l]) <= tol]
    return Check(not zeros, zeros or None)


def is_ideal(h0, h1, tol_regular: float = 1e-8, tol_connected: float = 1e-10) -> bool:
    _, _, (h1e,) = to_drift_eigenbasis(h0, h1)
    return is_strongly_regular(h0, tol_regular).ok and is_fully_connected(h1e, tol_connected).ok


# ---------------------------------------------------------------------------
# sampling


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR factorization of a complex Ginibre matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def sample_isospectral(rho_d, seed) -> np.ndarray:
    """``U rho_d U^dag`` with ``U`` Haar distributed; ``seed`` is anything
    ``numpy.random.default_rng`` accepts (an int or a sequence of ints)."""
    rho_d = np.asarray(rho_d, dtype=complex)
    u = haar_unitary(rho_d.shape[0], np.random.default_rng(seed))
    out = u @ rho_d @ u.conj().T
    return 0.5 * (out + out.conj().T)


# ---------------------------------------------------------------------------
# exceptional pseudo-pure targets


class Exceptionality(NamedTuple):
    exceptional: bool
    pair: tuple | None   # 0-based (k, l) of the single coherent pair
    alpha: float | None  # arg r_kl
    w: float
    u: float
    v_max: float         # (w - u)^2, Lyapunov value between orthogonal orbit points


def is_pseudo_pure_exceptional(rho_d0, tol: float = 1e-8, cluster_tol: float = 1e-8) -> Exceptionality:
    """Detect the pseudo-pure targets for which tracking can stall.

    ``rho_d0`` must be expressed in the drift eigenbasis.  Exceptional means
    exactly one coherent pair (k, l) with ``|r_kl| = (w - u)/2``,
    ``r_kk = r_ll = (w + u)/2`` and every other diagonal entry equal to u.
    """
    rho = as_density(rho_d0, "target state")
    sig = spectrum_signature(rho, cluster_tol)
    if not sig.is_pseudo_pure:
        raise ValueError(f"target spectrum {sig.values} with multiplicities {sig.multiplicities} is not pseudo-pure")
    w, u = sig.pseudo_pure_weights
    v_max = (w - u) ** 2
    n = rho.shape[0]
    coherent = [(k, l) for k, l in combinations(range(n), 2) if abs(rho[k, l]) > tol]
    if len(coherent) != 1:
        return Exceptionality(False, None, None, w, u, v_max)
    k, l = coherent[0]
    r = rho[k, l]
    diag = np.diag(rho).real
    others = [j for j in range(n) if j not in (k, l)]
    ok = (
        abs(abs(r) - 0.5 * abs(w - u)) <= tol
        and abs(diag[k] - 0.5 * (w + u)) <= tol
        and abs(diag[l] - 0.5 * (w + u)) <= tol
        and all(abs(diag[j] - u) <= tol for j in others)
    )
    if not ok:
        return Exceptionality(False, None, None, w, u, v_max)
    return Exceptionality(True, (k, l), float(np.angle(r)), w, u, v_max)
