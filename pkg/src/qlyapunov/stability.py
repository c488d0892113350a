"""Stationary states of the closed loop and their local stability.

Linearization happens in Bloch coordinates and is restricted to the tangent
space of the isospectral orbit through the stationary state.  The Hessian
of V on the orbit is estimated independently by finite differences along
unitary curves ``exp(X t) rho0 exp(-X t)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.linalg import expm

from .dynamics import (ControlModel, control_field, lyapunov_value, reduced_bloch_rhs)
from .states import spectrum_signature, to_drift_eigenbasis
from .su_algebra import GeneratorBasis, bloch_of_density, bloch_of_operator, commutator

STATIONARY_RHS_TOL = 1e-8
RANK_TOL = 1e-9
RANK_AMBIGUOUS = (1e-10, 1e-8)
PROJECTION_RESIDUAL_TOL = 1e-6


def linearization(s0, model: ControlModel) -> np.ndarray:
    """Jacobian of the reduced Bloch flow at the stationary point ``s0``.

    Equals ``A0 + (A1 s0)(s_d^T A1)`` wherever the control vanishes; the
    ``f(s0) A1`` term is kept so the matrix is the exact Jacobian.
    """
    s0 = np.asarray(s0, dtype=float)
    rhs = reduced_bloch_rhs(s0, model)
    if np.linalg.norm(rhs) > STATIONARY_RHS_TOL:
        raise ValueError(f"s0 is not stationary (|rhs| = {np.linalg.norm(rhs):.3g})")
    s_d = model.s_d0
    a1s = model.a1 @ s0
    f0 = s_d @ a1s
    return model.a0 + f0 * model.a1 + np.outer(a1s, s_d @ model.a1)


def _orbit_velocity_matrix(rho0, basis: GeneratorBasis) -> np.ndarray:
    """Column k is the Bloch vector of ``-i [mu_k, rho0]``."""
    cols = [bloch_of_operator(-1j * commutator(mu, rho0), basis) for mu in basis.generators]
    return np.array(cols).T


def tangent_basis(rho0, basis: GeneratorBasis) -> np.ndarray:
    """Orthonormal frame (rows) of the orbit's tangent space at ``rho0``."""
    rho0 = np.asarray(rho0, dtype=complex)
    u, sv, _ = np.linalg.svd(_orbit_velocity_matrix(rho0, basis))
    lo, hi = RANK_AMBIGUOUS
    if np.any((sv > lo) & (sv < hi)):
        raise ValueError("tangent rank is ambiguous: singular value between "
                         f"{lo:g} and {hi:g}")
    rank = int(np.sum(sv > RANK_TOL))
    return u[:, :rank].T.copy()


VERDICTS = ("hyperbolic_sink", "hyperbolic_source", "hyperbolic_saddle",
            "center_with_unstable", "center", "degenerate")


@dataclass
class StationaryClassification:
    state: np.ndarray
    lyapunov_level: float
    tangent_dim: int
    n_stable: int
    n_unstable: int
    n_center: int
    eigenvalues: np.ndarray
    verdict: str
    zero_eps: float
    projection_residual: float
    diagnostic: str = ""

    def to_record(self) -> dict:
        st = self.state
        diagonal = np.max(np.abs(st - np.diag(np.diag(st)))) < 1e-12
        return {
            "state_diag": [float(x) for x in np.diag(st).real] if diagonal else None,
            "state": None if diagonal else [[[float(z.real), float(z.imag)] for z in row] for row in st],
            "V0": self.lyapunov_level,
            "tangent_dim": self.tangent_dim,
            "n_stable": self.n_stable,
            "n_unstable": self.n_unstable,
            "n_center": self.n_center,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "verdict": self.verdict,
            "zero_eps": self.zero_eps,
            "projection_residual": self.projection_residual,
            "diagnostic": self.diagnostic,
        }


def _check_closed_loop_stationary(rho0, model: ControlModel, tol: float = 1e-8):
    drift = np.max(np.abs(commutator(model.h0, rho0)))
    f = control_field(rho0, model.rho_d0, model)
    if drift > tol or abs(f) > tol:
        raise ValueError(f"state is not stationary: |[H0, rho]| = {drift:.3g}, f = {f:.3g}")


def classify_stationary(rho0, model: ControlModel, zero_eps: float | None = None) -> StationaryClassification:
    """Count tangent eigenvalues of the linearization by the sign of their real part.

    ``zero_eps`` defaults to ``1e-7 * ||D_f||_2``; real parts inside the band
    count as center directions.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    _check_closed_loop_stationary(rho0, model)
    basis = model.basis
    s0 = bloch_of_density(rho0, basis)
    jac = linearization(s0, model)
    if zero_eps is None:
        zero_eps = 1e-7 * np.linalg.norm(jac, 2)
    frame = tangent_basis(rho0, basis)
    dim = frame.shape[0]
    v0 = lyapunov_value(rho0, model.rho_d0)
    if dim == 0:
        return StationaryClassification(rho0, v0, 0, 0, 0, 0, np.array([]), "degenerate",
                                        zero_eps, 0.0, "zero-dimensional orbit")
    restricted = frame @ jac @ frame.T
    residual = float(np.max(np.abs(jac @ frame.T - frame.T @ restricted)))
    eig = np.linalg.eigvals(restricted)
    eig = eig[np.lexsort((eig.imag, eig.real))]
    n_stable = int(np.sum(eig.real < -zero_eps))
    n_unstable = int(np.sum(eig.real > zero_eps))
    n_center = dim - n_stable - n_unstable
    diagnostic = ""
    if residual > PROJECTION_RESIDUAL_TOL:
        verdict = "degenerate"
        diagnostic = f"linearization leaves the tangent space (residual {residual:.3g})"
    elif n_stable == dim:
        verdict = "hyperbolic_sink"
    elif n_unstable == dim:
        verdict = "hyperbolic_source"
    elif n_center == 0:
        verdict = "hyperbolic_saddle"
    elif n_unstable > 0:
        verdict = "center_with_unstable"
    else:
        verdict = "center"
    return StationaryClassification(rho0, v0, dim, n_stable, n_unstable, n_center, eig, verdict,
                                    float(zero_eps), residual, diagnostic)


def _multiset_permutations(items):
    items = sorted(items)
    if not items:
        yield ()
        return
    seen = set()
    for i, x in enumerate(items):
        if x in seen:
            continue
        seen.add(x)
        for rest in _multiset_permutations(items[:i] + items[i + 1:]):
            yield (x,) + rest


def enumerate_diagonal_stationary(model: ControlModel, cluster_tol: float = 1e-8) -> list:
    """All diagonal (in the drift eigenbasis) rearrangements of the target spectrum.

    The target's own arrangement comes first, the rest follow in
    lexicographic order of eigenvalue labels (0 = largest eigenvalue).
    """
    if not model.target_stationary:
        raise ValueError("stationary states are enumerated for stationary targets only")
    _, u, (rho_e,) = to_drift_eigenbasis(model.h0, model.rho_d0)
    sig = spectrum_signature(model.rho_d0, cluster_tol)
    values = np.array(sig.values)
    diag = np.diag(rho_e).real

    def label(x):
        return int(np.argmin(np.abs(values - x)))

    own = tuple(label(x) for x in diag)
    multiset = [i for i, m in enumerate(sig.multiplicities) for _ in range(m)]
    arrangements = [own] + [p for p in _multiset_permutations(multiset) if p != own]
    out = []
    for labels in arrangements:
        rho = u @ np.diag(values[list(labels)]).astype(complex) @ u.conj().T
        _check_closed_loop_stationary(rho, model)
        out.append(rho)
    return out


def hessian_signature(rho0, rho_d, basis: GeneratorBasis, step: float = 1e-4,
                      threshold: float = 1e-6, grad_tol: float = 1e-8) -> tuple:
    """Inertia ``(n_plus, n_minus, n_zero)`` of the Hessian of V on the orbit.

    Each tangent direction ``t_i`` is realized by a skew-Hermitian generator
    ``X_i`` with ``[X_i, rho0] = t_i``; the Hessian of
    ``V(exp(Y) rho0 exp(-Y), rho_d)``, ``Y = sum y_i X_i``, is taken by
    central differences.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    rho_d = np.asarray(rho_d, dtype=complex)
    comm = np.max(np.abs(commutator(rho0, rho_d)))
    if comm > 1e-8:
        raise ValueError(f"rho0 does not commute with the target (|[rho0, rho_d]| = {comm:.3g})")
    frame = tangent_basis(rho0, basis)
    k = frame.shape[0]
    if k == 0:
        return 0, 0, 0
    vel = _orbit_velocity_matrix(rho0, basis)
    coeffs = np.linalg.lstsq(vel, frame.T, rcond=None)[0]      # (N, k)
    gens = -1j * np.tensordot(coeffs.T, basis.generators, axes=1)  # (k, n, n)

    def v_at(y):
        x = np.tensordot(y, gens, axes=1)
        u = expm(x)
        return lyapunov_value(u @ rho0 @ u.conj().T, rho_d)

    h = step
    e = np.eye(k) * h
    v0 = v_at(np.zeros(k))
    plus = np.array([v_at(e[i]) for i in range(k)])
    minus = np.array([v_at(-e[i]) for i in range(k)])
    grad = (plus - minus) / (2 * h)
    if np.max(np.abs(grad)) > grad_tol:
        raise ValueError(f"rho0 is not a critical point of V (max gradient {np.max(np.abs(grad)):.3g})")
    hess = np.diag((plus - 2 * v0 + minus) / h ** 2)
    for i, j in combinations(range(k), 2):
        val = (v_at(e[i] + e[j]) - v_at(e[i] - e[j]) - v_at(-e[i] + e[j]) + v_at(-e[i] - e[j])) / (4 * h * h)
        hess[i, j] = hess[j, i] = val
    w = np.linalg.eigvalsh(hess)
    return int(np.sum(w > threshold)), int(np.sum(w < -threshold)), int(np.sum(np.abs(w) <= threshold))


# ---------------------------------------------------------------------------
# block structure at a diagonal target


@dataclass
class CartanSplit:
    """Linearization at the target restricted to the off-diagonal coordinates.

    ``operator = drift_block - outer(v, v)``; ``v`` is ``A1 s_d`` on the
    off-diagonal block, and ``v_analytic`` its closed form
    ``-sqrt(2) * (alpha_k - alpha_l) * (Im b_kl, Re b_kl)`` per pair.
    """

    operator: np.ndarray
    drift_block: np.ndarray
    v: np.ndarray
    v_analytic: np.ndarray
    cartan_coupling: float  # max |D_f| entry between off-diagonal and Cartan blocks
    pairs: list = field(default_factory=list)


def cartan_split(model: ControlModel) -> CartanSplit:
    """Needs H0 and rho_d diagonal (drift eigenbasis)."""
    rd = model.rho_d0
    if np.max(np.abs(rd - np.diag(np.diag(rd)))) > 1e-12 or \
            np.max(np.abs(model.h0 - np.diag(np.diag(model.h0)))) > 1e-12:
        raise ValueError("the Cartan split needs diagonal H0 and target")
    basis = model.basis
    jac = linearization(model.s_d0, model)
    off = basis.offdiagonal_indices
    cart = basis.cartan_indices
    v = (model.a1 @ model.s_d0)[off]
    alpha = np.diag(rd).real
    v_an = np.zeros(len(off))
    pos = {j: i for i, j in enumerate(off)}
    for k, l in basis.pairs:
        i_sym, i_anti = basis.pair_indices(k, l)
        b = model.h1[k, l]
        d = alpha[k] - alpha[l]
        v_an[pos[i_sym]] = -np.sqrt(2.0) * d * b.imag
        v_an[pos[i_anti]] = -np.sqrt(2.0) * d * b.real
    coupling = max(np.max(np.abs(jac[np.ix_(off, cart)])), np.max(np.abs(jac[np.ix_(cart, off)])))
    return CartanSplit(jac[np.ix_(off, off)], model.a0[np.ix_(off, off)], v, v_an,
                       float(coupling), basis.pairs)


def degenerate_pair_modes(model: ControlModel, tol: float = 1e-12) -> list:
    """For pairs (k, l) with equal target populations, the 2-plane of the pair.

    Returns ``[(pair, plane)]`` with ``plane`` a (2, N) array of unit Bloch
    vectors; these planes are invariant under the linearization at the
    target and orthogonal to the orbit's tangent space.
    """
    basis = model.basis
    alpha = np.diag(model.rho_d0).real
    out = []
    for k, l in basis.pairs:
        if abs(alpha[k] - alpha[l]) <= tol:
            plane = np.zeros((2, basis.dim))
            i_sym, i_anti = basis.pair_indices(k, l)
            plane[0, i_sym] = plane[1, i_anti] = 1.0
            out.append(((k, l), plane))
    return out


# ---------------------------------------------------------------------------
# Example 3 (non-ideal qutrit, target diag(0, 1, 0)) endpoint relations


def example3_relations(rho) -> dict:
    """Residuals of the invariant-set relations for the three-level example.

    ``abs_beta12_squared`` checks ``|b12|^2 = b11 - 2 b11^2``; the printed
    unsquared variant is reported as ``abs_beta12_literal`` only.
    """
    b = np.asarray(rho)
    b11 = b[0, 0].real
    res = {
        "beta11_eq_beta33": float(abs(b[0, 0] - b[2, 2])),
        "beta12_eq_beta23": float(abs(b[0, 1] - b[1, 2])),
        "abs_beta13_eq_beta11": float(abs(abs(b[0, 2]) - b11)),
        "abs_beta12_squared": float(abs(abs(b[0, 1]) ** 2 - (b11 - 2 * b11 ** 2))),
    }
    res["max_residual"] = max(res.values())
    res["abs_beta12_literal"] = float(abs(abs(b[0, 1]) - (b11 - 2 * b11 ** 2)))
    return res


def invariant_set_probe(model: ControlModel, rho_d=None, n_samples: int = 50, seed: int = 0,
                        opts=None, endpoint_check=None, lasalle_tol: float = 1e-3,
                        jobs: int = 1) -> dict:
    """Integrate random initial states and inspect where they end up.

    Flatlined endpoints are tested for invariant-set membership
    (``lasalle_membership`` at ``lasalle_tol``) and, if given, with
    ``endpoint_check(final_state) -> dict`` whose ``max_residual`` is
    reported.  States are assumed to be in the drift eigenbasis.
    """
    from .batch import run_samples, verdict_counts
    from .dynamics import lasalle_membership

    if rho_d is not None:
        model = model.with_target(rho_d)
    if not model.target_stationary:
        raise ValueError("invariant_set_probe needs a stationary target")
    results = run_samples(model, n_samples, seed, opts, jobs)
    samples = []
    for r in results:
        entry = {"sample_id": r.sample_id, "verdict": r.verdict, "final_V": r.final_v,
                 "slope": r.slope}
        if r.verdict == "flatlined":
            chk = lasalle_membership(r.final_state, r.final_target, model, lasalle_tol)
            entry["lasalle_member"] = chk.member
            entry["lasalle_max_offdiag"] = chk.max_offdiag
            entry["lasalle_exact"] = chk.exact
            if endpoint_check is not None:
                entry["relations"] = endpoint_check(r.final_state)
        samples.append(entry)
    counts = verdict_counts(results)
    return {
        "n_samples": n_samples,
        "counts": counts,
        "fractions": {k: v / n_samples for k, v in counts.items()},
        "samples": samples,
        "results": results,
    }
