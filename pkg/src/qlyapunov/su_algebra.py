"""Orthonormal su(n) basis and the density-matrix <-> Bloch-vector maps.

The generators are stored in Hermitian form, ``mu_k = -i sigma_k`` where
``sigma_k`` is the skew-Hermitian basis element, normalized so that
``Tr(mu_j mu_k) = delta_jk``.  With this convention Bloch coordinates and
the adjoint matrices built from them are real.

Ordering of the ``n**2 - 1`` generators:

* symmetric off-diagonal ``(e_kl + e_lk)/sqrt(2)``, ``k < l`` lexicographic,
* antisymmetric off-diagonal ``-i (e_kl - e_lk)/sqrt(2)``, same pair order,
* Cartan ``diag(1, ..., 1, -r, 0, ...)/sqrt(r (r + 1))`` for ``r = 1..n-1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

HERMITIAN_TOL = 1e-9
IMAG_DISCARD_TOL = 1e-10


def matrix_unit(m: int, k: int, n: int) -> np.ndarray:
    """``e_mk``: the n x n matrix with a single one at (m, k) (0-based)."""
    e = np.zeros((n, n), dtype=complex)
    e[m, k] = 1.0
    return e


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise ValueError(f"commutator needs equal square matrices, got {a.shape} and {b.shape}")
    return a @ b - b @ a


def skew_generators(n: int) -> dict:
    """The unnormalized skew-Hermitian generators lambda_k, lambda_kl, lambda-bar_kl.

    Returned as a dict with keys ``("cartan", k)``, ``("sym", k, l)`` and
    ``("anti", k, l)`` using 0-based indices.
    """
    if n < 2:
        raise ValueError("su(n) needs n >= 2")
    gens = {}
    for k in range(n - 1):
        gens[("cartan", k)] = 1j * (matrix_unit(k, k, n) - matrix_unit(k + 1, k + 1, n))
    for k, l in combinations(range(n), 2):
        gens[("sym", k, l)] = 1j * (matrix_unit(k, l, n) + matrix_unit(l, k, n))
        gens[("anti", k, l)] = matrix_unit(k, l, n) - matrix_unit(l, k, n)
    return gens


@dataclass(frozen=True, eq=False)
class GeneratorBasis:
    """Orthonormal Hermitian basis of traceless n x n matrices.

    ``index_map`` maps ``("sym", k, l)``, ``("anti", k, l)`` (0-based, k < l)
    and ``("cartan", r)`` (r = 1..n-1) to flat positions in ``generators``.
    """

    n: int
    generators: np.ndarray = field(repr=False)
    index_map: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return self.n * self.n - 1

    @property
    def pairs(self) -> list:
        return list(combinations(range(self.n), 2))

    def pair_indices(self, k: int, l: int) -> tuple:
        """Flat (symmetric, antisymmetric) indices of the pair plane (k, l)."""
        if k > l:
            k, l = l, k
        return self.index_map[("sym", k, l)], self.index_map[("anti", k, l)]

    @property
    def cartan_indices(self) -> list:
        return [self.index_map[("cartan", r)] for r in range(1, self.n)]

    @property
    def offdiagonal_indices(self) -> list:
        return list(range(self.n * (self.n - 1)))

    def __hash__(self):
        return hash(("GeneratorBasis", self.n))

    def __eq__(self, other):
        return isinstance(other, GeneratorBasis) and other.n == self.n


@lru_cache(maxsize=None)
def build_basis(n: int) -> GeneratorBasis:
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"basis dimension must be an integer >= 2, got {n!r}")
    n = int(n)
    pairs = list(combinations(range(n), 2))
    gens = []
    index_map = {}
    s = 1.0 / np.sqrt(2.0)
    for k, l in pairs:
        index_map[("sym", k, l)] = len(gens)
        gens.append(s * (matrix_unit(k, l, n) + matrix_unit(l, k, n)))
    for k, l in pairs:
        index_map[("anti", k, l)] = len(gens)
        gens.append(-1j * s * (matrix_unit(k, l, n) - matrix_unit(l, k, n)))
    for r in range(1, n):
        d = np.zeros(n)
        d[:r] = 1.0
        d[r] = -r
        index_map[("cartan", r)] = len(gens)
        gens.append(np.diag(d / np.sqrt(r * (r + 1))).astype(complex))
    arr = np.array(gens)
    arr.setflags(write=False)
    return GeneratorBasis(n=n, generators=arr, index_map=index_map)


def hermitian_part(m: np.ndarray, tol: float = HERMITIAN_TOL, what: str = "matrix") -> np.ndarray:
    """Symmetrize ``m``; raise if it is further than ``tol`` from Hermitian."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be square, got shape {m.shape}")
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > tol:
        raise ValueError(f"{what} is not Hermitian (max deviation {dev:.3g} > {tol:g})")
    return 0.5 * (m + m.conj().T)


def bloch_of_density(rho: np.ndarray, basis: GeneratorBasis) -> np.ndarray:
    """Real Bloch coordinates ``s_k = Tr(mu_k rho)``; the trace part is dropped."""
    rho = np.asarray(rho)
    if rho.shape != (basis.n, basis.n):
        raise ValueError(f"state of shape {rho.shape} does not match basis dimension {basis.n}")
    rho = hermitian_part(rho, what="state")
    # Tr(mu rho) = sum_ij mu_ji rho_ij
    s = np.einsum("kji,ij->k", basis.generators, rho)
    # Hermitian inputs give real coordinates up to rounding.
    if np.max(np.abs(s.imag), initial=0.0) > IMAG_DISCARD_TOL:
        raise ValueError("Bloch coordinates have a non-negligible imaginary part")
    return s.real.copy()


def bloch_of_operator(x: np.ndarray, basis: GeneratorBasis) -> np.ndarray:
    """Coordinates of a traceless Hermitian operator, no symmetrization or checks."""
    return np.einsum("kji,ij->k", basis.generators, x).real


def density_of_bloch(s: np.ndarray, basis: GeneratorBasis) -> np.ndarray:
    """``I/n + sum_k s_k mu_k``.  Positivity is not enforced."""
    s = np.asarray(s, dtype=float)
    if s.shape != (basis.dim,):
        raise ValueError(f"Bloch vector must have length {basis.dim}, got shape {s.shape}")
    return np.eye(basis.n, dtype=complex) / basis.n + np.tensordot(s, basis.generators, axes=1)


def adjoint_matrix(h: np.ndarray, basis: GeneratorBasis) -> np.ndarray:
    """Real antisymmetric matrix ``A(j, k) = Tr(i h [mu_j, mu_k])``.

    ``A s`` is the Bloch form of ``-i [h, rho]``.
    """
    h = np.asarray(h, dtype=complex)
    g = basis.generators
    # Tr(h [mu_j, mu_k]) = Tr(h mu_j mu_k) - Tr(h mu_k mu_j)
    hg = np.einsum("ab,jbc->jac", h, g)
    t = np.einsum("jab,kba->jk", hg, g)
    a = (1j * (t - t.T)).real
    return 0.5 * (a - a.T)
