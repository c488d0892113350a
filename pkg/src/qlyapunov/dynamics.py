"""Closed-loop Lyapunov control of a density matrix.

The feedback ``f = Tr([-i H1, rho] rho_d)`` makes the Hilbert-Schmidt
distance ``V = 1/2 Tr[(rho - rho_d)^2]`` non-increasing, ``dV/dt = -f^2``.
Two equivalent forms of the flow are available: the extended matrix system
for (rho, rho_d) and, for stationary targets, the reduced real system
``ds/dt = (A0 + f(s) A1) s`` in Bloch coordinates.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .states import as_density, as_hamiltonian, is_ideal
from .su_algebra import GeneratorBasis, adjoint_matrix, bloch_of_density, build_basis, density_of_bloch

log = logging.getLogger(__name__)

STATIONARY_TOL = 1e-10
ISOSPECTRAL_WARN_TOL = 1e-8


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ControlModel:
    h0: np.ndarray
    h1: np.ndarray
    rho_d0: np.ndarray
    basis: GeneratorBasis
    a0: np.ndarray
    a1: np.ndarray
    target_stationary: bool

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def s_d0(self) -> np.ndarray:
        return bloch_of_density(self.rho_d0, self.basis)

    @property
    def ideal(self) -> bool:
        return is_ideal(self.h0, self.h1)

    def with_target(self, rho_d0) -> "ControlModel":
        rho_d0 = as_density(rho_d0, "target state")
        return replace(self, rho_d0=rho_d0, target_stationary=_commutes(self.h0, rho_d0))


def _commutes(h0, rho) -> bool:
    return float(np.max(np.abs(h0 @ rho - rho @ h0))) <= STATIONARY_TOL


def build_model(h0, h1, rho_d0, basis: GeneratorBasis | None = None) -> ControlModel:
    h0 = as_hamiltonian(h0, "H0")
    h1 = as_hamiltonian(h1, "H1")
    rho_d0 = as_density(rho_d0, "target state")
    n = h0.shape[0]
    if h1.shape != (n, n) or rho_d0.shape != (n, n):
        raise ValueError(f"dimension mismatch: H0 {h0.shape}, H1 {h1.shape}, target {rho_d0.shape}")
    basis = basis or build_basis(n)
    if basis.n != n:
        raise ValueError(f"basis dimension {basis.n} does not match H0 dimension {n}")
    return ControlModel(
        h0=h0,
        h1=h1,
        rho_d0=rho_d0,
        basis=basis,
        a0=adjoint_matrix(h0, basis),
        a1=adjoint_matrix(h1, basis),
        target_stationary=_commutes(h0, rho_d0),
    )


def control_field(rho, rho_d, model: ControlModel) -> float:
    """``Tr([-i H1, rho] rho_d)``."""
    h1 = model.h1
    c = -1j * (h1 @ rho - rho @ h1)
    return float(np.real(np.sum(c * np.asarray(rho_d).T)))


def control_field_bloch(s, s_d, model: ControlModel) -> float:
    return float(s_d @ model.a1 @ s)


def lyapunov_value(rho1, rho2) -> float:
    """``1/2 Tr[(rho1 - rho2)^2]``."""
    d = np.asarray(rho1) - np.asarray(rho2)
    return 0.5 * float(np.real(np.sum(d * d.T)))


def extended_rhs(rho, rho_d, model: ControlModel):
    """Time derivatives ``(-i[H0 + f H1, rho], -i[H0, rho_d])``."""
    f = control_field(rho, rho_d, model)
    h = model.h0 + f * model.h1
    return -1j * (h @ rho - rho @ h), -1j * (model.h0 @ rho_d - rho_d @ model.h0)


def reduced_bloch_rhs(s, model: ControlModel, s_d=None) -> np.ndarray:
    """``(A0 + f(s) A1) s`` with ``f(s) = s_d^T A1 s``; stationary targets only."""
    if not model.target_stationary:
        raise ValueError("the reduced Bloch system needs a stationary target")
    if s_d is None:
        s_d = model.s_d0
    a1s = model.a1 @ s
    return model.a0 @ s + (s_d @ a1s) * a1s


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    t_final: float = 300.0
    sample_count: int = 601
    reduced_mode: bool = False
    # Time between polar re-projections onto the isospectral orbit; 0 disables.
    reprojection_interval: float = 0.0
    # Non-stationary targets: rotate rho_d exactly instead of integrating it.
    exact_target: bool = False
    # Extended system in Bloch coordinates ("bloch") or as matrices ("matrix").
    representation: str = "bloch"
    method: str = "DOP853"


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray       # (m, n, n)
    targets: np.ndarray      # (m, n, n)
    controls: np.ndarray     # f(t)
    lyapunov: np.ndarray     # V(t)
    dvdt: np.ndarray         # dV/dt from the dense interpolant
    stats: dict = field(default_factory=dict)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_target(self) -> np.ndarray:
        return self.targets[-1]


def _pack(m: np.ndarray) -> np.ndarray:
    # interleaved (re, im) so that unpacking is a zero-copy view
    return np.ascontiguousarray(m, dtype=complex).ravel().view(float)


def _unpack(y: np.ndarray, n: int) -> np.ndarray:
    return np.ascontiguousarray(y[:2 * n * n]).view(complex).reshape(n, n)


def _retract(rho: np.ndarray, spectrum: np.ndarray) -> np.ndarray:
    """Nearest matrix with the prescribed (ascending) spectrum."""
    herm = 0.5 * (rho + rho.conj().T)
    _, w = np.linalg.eigh(herm)
    return (w * spectrum) @ w.conj().T


class _System:
    """Right-hand side and state packing for one integration mode.

    Bloch mode integrates ``s`` (and ``s_d`` for moving targets); matrix
    mode integrates ``rho`` (and ``rho_d``) as interleaved real arrays.
    A stationary target is held fixed; with ``exact_target`` a moving one
    is rotated by ``exp(-i H0 t)`` instead of being integrated.
    """

    def __init__(self, model: ControlModel, opts: IntegratorOptions):
        if opts.representation not in ("bloch", "matrix"):
            raise ValueError(f"unknown representation {opts.representation!r}")
        self.model = model
        self.n = model.n
        self.bloch = opts.reduced_mode or opts.representation == "bloch"
        self.reduced = bool(opts.reduced_mode)
        if self.reduced and not model.target_stationary:
            raise ValueError("reduced_mode needs a stationary target")
        self.fixed_target = model.target_stationary
        self.exact_target = opts.exact_target and not self.fixed_target
        self.joint = not (self.fixed_target or self.exact_target)
        evals, evecs = np.linalg.eigh(model.h0)
        self._h0_eig = (evals, evecs)
        self._s_d0 = model.s_d0
        self._h1t = model.h1.T.copy()

    def target_at(self, t: float) -> np.ndarray:
        if self.fixed_target:
            return self.model.rho_d0
        evals, w = self._h0_eig
        u = (w * np.exp(-1j * evals * t)) @ w.conj().T
        return u @ self.model.rho_d0 @ u.conj().T

    def pack(self, rho, rho_d) -> np.ndarray:
        basis = self.model.basis
        if self.bloch:
            s = bloch_of_density(rho, basis)
            return np.concatenate([s, bloch_of_density(rho_d, basis)]) if self.joint else s
        return np.concatenate([_pack(rho), _pack(rho_d)]) if self.joint else _pack(rho)

    def unpack(self, y: np.ndarray, t: float):
        basis = self.model.basis
        if self.bloch:
            d = basis.dim
            rho = density_of_bloch(y[:d], basis)
            rho_d = density_of_bloch(y[d:], basis) if self.joint else self.target_at(t)
            return rho, rho_d
        rho = _unpack(y, self.n)
        rho_d = _unpack(y[2 * self.n * self.n:], self.n) if self.joint else self.target_at(t)
        return rho, rho_d

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        m = self.model
        if self.bloch:
            d = m.basis.dim
            s = y[:d]
            if self.joint:
                s_d = y[d:]
            elif self.exact_target:
                s_d = bloch_of_density(self.target_at(t), m.basis)
            else:
                s_d = self._s_d0
            a1s = m.a1 @ s
            ds = m.a0 @ s + (s_d @ a1s) * a1s
            return np.concatenate([ds, m.a0 @ s_d]) if self.joint else ds
        rho = _unpack(y, self.n)
        rho_d = _unpack(y[2 * self.n * self.n:], self.n) if self.joint else self.target_at(t)
        c = rho @ rho_d - rho_d @ rho
        f = float(np.real(-1j * np.sum(self._h1t * c)))
        h = m.h0 + f * m.h1
        drho = -1j * (h @ rho - rho @ h)
        if not self.joint:
            return _pack(drho)
        return np.concatenate([_pack(drho), _pack(-1j * (m.h0 @ rho_d - rho_d @ m.h0))])


def integrate(model: ControlModel, rho0, t_final: float | None = None,
              opts: IntegratorOptions | None = None) -> Trajectory:
    """Integrate the closed loop from ``rho0`` and sample it uniformly.

    ``dvdt`` is a central difference of V along the dense-output
    interpolant, independent of the analytic identity ``dV/dt = -f^2``.
    """
    opts = opts or IntegratorOptions()
    if t_final is None:
        t_final = opts.t_final
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    rho0 = as_density(rho0, "initial state")
    if rho0.shape != model.rho_d0.shape:
        raise ValueError("initial state dimension does not match the model")
    spec0 = np.linalg.eigvalsh(rho0)
    spec_d = np.linalg.eigvalsh(model.rho_d0)
    if np.max(np.abs(spec0 - spec_d)) > ISOSPECTRAL_WARN_TOL:
        log.warning("initial state is not isospectral with the target (max gap %.3g)",
                    np.max(np.abs(spec0 - spec_d)))

    system = _System(model, opts)
    times = np.linspace(0.0, t_final, opts.sample_count)
    if opts.reprojection_interval and opts.reprojection_interval > 0:
        edges = np.arange(0.0, t_final, opts.reprojection_interval)
        edges = np.append(edges, t_final)
    else:
        edges = np.array([0.0, t_final])

    def rhs(t, y):
        out = system.rhs(t, y)
        # scipy keeps shrinking the step forever on NaN
        if not np.all(np.isfinite(out)):
            raise IntegrationError(f"non-finite derivative at t={t:.6g}")
        return out

    y = system.pack(rho0, model.rho_d0)
    sols = []
    nfev = nsteps = 0
    for j, (t0, t1) in enumerate(zip(edges[:-1], edges[1:])):
        if j > 0:
            rho, rho_d = system.unpack(y, t0)
            rho = _retract(rho, spec0)
            if not (system.fixed_target or system.exact_target):
                rho_d = _retract(rho_d, spec_d)
            y = system.pack(rho, rho_d)
        sol = solve_ivp(rhs, (t0, t1), y, method=opts.method, rtol=opts.rel_tol,
                        atol=opts.abs_tol, dense_output=True)
        if sol.status != 0:
            raise IntegrationError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
        sols.append(sol)
        nfev += sol.nfev
        nsteps += len(sol.t) - 1
        y = sol.y[:, -1]

    def evaluate(t):
        idx = min(np.searchsorted(edges, t, side="right") - 1, len(sols) - 1)
        return sols[max(idx, 0)].sol(t)

    m = len(times)
    n = model.n
    states = np.empty((m, n, n), dtype=complex)
    targets = np.empty((m, n, n), dtype=complex)
    controls = np.empty(m)
    lyap = np.empty(m)
    dvdt = np.empty(m)
    span = min(1e-5, 1e-3 * t_final)

    def v_at(t):
        r, rd = system.unpack(evaluate(t), t)
        return lyapunov_value(r, rd)

    for i, t in enumerate(times):
        rho, rho_d = system.unpack(evaluate(t), t)
        states[i] = rho
        targets[i] = rho_d
        controls[i] = control_field(rho, rho_d, model)
        lyap[i] = lyapunov_value(rho, rho_d)
        # second-order differences, one-sided at the ends of the interval
        if t - span < 0.0:
            dvdt[i] = (-3 * lyap[i] + 4 * v_at(t + span) - v_at(t + 2 * span)) / (2 * span)
        elif t + span > t_final:
            dvdt[i] = (3 * lyap[i] - 4 * v_at(t - span) + v_at(t - 2 * span)) / (2 * span)
        else:
            dvdt[i] = (v_at(t + span) - v_at(t - span)) / (2 * span)

    spec_drift = float(np.max(np.abs(np.linalg.eigvalsh(states) - spec0)))
    target_drift = float(np.max(np.abs(np.linalg.eigvalsh(targets) - spec_d)))
    trace_drift = float(np.max(np.abs(np.trace(states, axis1=1, axis2=2) - 1.0)))
    herm_dev = float(np.max(np.abs(states - np.conj(np.swapaxes(states, 1, 2)))))
    stats = {
        "method": opts.method,
        "mode": "reduced" if system.reduced else "extended",
        "representation": "bloch" if system.bloch else "matrix",
        "nfev": int(nfev),
        "steps": int(nsteps),
        "spectrum_drift": spec_drift,
        "target_spectrum_drift": target_drift,
        "trace_drift": trace_drift,
        "hermiticity_deviation": herm_dev,
    }
    return Trajectory(times, states, targets, controls, lyap, dvdt, stats)


# ---------------------------------------------------------------------------
# invariant set and endpoint classification


class LaSalleCheck(NamedTuple):
    """``member``: all off-diagonal entries of [rho1, rho2] within tol.

    ``exact`` is true when the model is ideal, where that condition
    characterizes the invariant set; otherwise it is only a diagnostic.
    """

    member: bool
    max_offdiag: float
    exact: bool


def lasalle_membership(rho1, rho2, model: ControlModel | None = None, tol: float = 1e-8) -> LaSalleCheck:
    """States are assumed to be in the drift eigenbasis."""
    c = np.asarray(rho1) @ np.asarray(rho2) - np.asarray(rho2) @ np.asarray(rho1)
    off = c - np.diag(np.diag(c))
    worst = float(np.max(np.abs(off)))
    exact = model.ideal if model is not None else False
    return LaSalleCheck(member=worst <= tol, max_offdiag=worst, exact=exact)


CONVERGED_SLOPE = -1e-3
CONVERGED_V = 1e-4
FLAT_SLOPE = 1e-5
FLAT_V = 1e-3
# Below this V the log-slope is dominated by rounding.
NUMERICAL_FLOOR = 1e-12


def log_slope(times, lyap, tail: float = 0.2) -> float:
    """Least-squares slope of log10 V over the last ``tail`` fraction of samples."""
    times = np.asarray(times)
    lyap = np.asarray(lyap)
    k = max(2, int(round(tail * len(times))))
    t = times[-k:]
    logv = np.log10(np.maximum(lyap[-k:], 1e-300))
    return float(np.polyfit(t, logv, 1)[0])


def classify_convergence(times, lyap) -> tuple:
    """('converged' | 'flatlined' | 'undecided', slope)."""
    slope = log_slope(times, lyap)
    v_end = float(lyap[-1])
    if v_end < NUMERICAL_FLOOR:
        return "converged", slope
    if slope < CONVERGED_SLOPE and v_end < CONVERGED_V:
        return "converged", slope
    if abs(slope) < FLAT_SLOPE and v_end > FLAT_V:
        return "flatlined", slope
    return "undecided", slope
