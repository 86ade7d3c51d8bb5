"""Lindblad model, right-hand side and fixed-step RK4 propagation.

Operators are plain complex ``numpy`` arrays.  The ``check_*`` helpers
validate them against the invariants the rest of the package relies on.
Units are hbar = 1 and all times are dimensionless.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence, Union

import numpy as np

from .errors import DimensionError, IntegrationError, ValidationError


@dataclass(frozen=True)
class Tolerances:
    hermiticity: float = 1e-10
    trace: float = 1e-9
    psd: float = 1e-8
    # Beyond this, propagation aborts instead of reporting.
    hard: float = 1e-5


DEFAULT_TOL = Tolerances()

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": SX, "Y": SY, "Z": SZ}


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def check_hermitian(a, tol: float = DEFAULT_TOL.hermiticity, name: str = "operator") -> np.ndarray:
    m = as_matrix(a, name)
    err = np.max(np.abs(m - m.conj().T))
    if err > tol:
        raise ValidationError(f"{name} is not Hermitian (max deviation {err:.3e} > {tol:.1e})")
    return m


def density_defects(rho: np.ndarray) -> dict[str, float]:
    """Size of each density-matrix invariant violation (0 means satisfied)."""
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    trace = float(abs(np.trace(rho) - 1.0))
    hpart = 0.5 * (rho + rho.conj().T)
    min_eig = float(np.linalg.eigvalsh(hpart)[0])
    return {"hermiticity": herm, "trace": trace, "psd": max(0.0, -min_eig)}


def check_density(a, tol: Tolerances = DEFAULT_TOL, name: str = "rho") -> np.ndarray:
    rho = as_matrix(a, name)
    d = density_defects(rho)
    if d["hermiticity"] > tol.hermiticity:
        raise ValidationError(f"{name} is not Hermitian (deviation {d['hermiticity']:.3e})")
    if d["trace"] > tol.trace:
        raise ValidationError(f"{name} does not have unit trace (|Tr-1| = {d['trace']:.3e})")
    if d["psd"] > tol.psd:
        raise ValidationError(f"{name} has a negative eigenvalue (-{d['psd']:.3e})")
    return rho


def commutator(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"commutator of shapes {a.shape} and {b.shape}")
    return a @ b - b @ a


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, ops)


def pauli_label_matrix(label: str) -> np.ndarray:
    """Tensor product for a label such as ``"ZI"`` (leftmost letter = qubit 1)."""
    try:
        return kron_all([PAULI[c] for c in label])
    except KeyError as exc:
        raise ValidationError(f"unknown Pauli letter {exc.args[0]!r} in {label!r}") from None


def pauli_labels(num_qubits: int) -> list[str]:
    if num_qubits < 1:
        raise ValidationError("num_qubits must be >= 1")
    return ["".join(p) for p in itertools.product("IXYZ", repeat=num_qubits)]


def pauli_product_basis(num_qubits: int) -> list[np.ndarray]:
    """All 4**q Pauli products, identity first, ordered I, X, Y, Z per qubit.

    Tr[s_i s_j] = 2**q delta_ij.
    """
    return [pauli_label_matrix(lab) for lab in pauli_labels(num_qubits)]


def lindbladian_apply(f, rho) -> np.ndarray:
    """Dissipator of one jump operator: 1/2 ([F, rho F^+] + [F rho, F^+])."""
    f = np.asarray(f, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if f.shape != rho.shape:
        raise DimensionError(f"jump operator {f.shape} vs state {rho.shape}")
    fd = f.conj().T
    return 0.5 * (commutator(f, rho @ fd) + commutator(f @ rho, fd))


def _dissipator_fast(f: np.ndarray, fdf: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return f @ rho @ f.conj().T - 0.5 * (fdf @ rho + rho @ fdf)


@dataclass(frozen=True)
class PiecewiseConstant:
    """Signal equal to ``values[k]`` on ``[times[k], times[k+1])``.

    Before ``times[0]`` the first value is held, after ``times[-1]`` the last.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float)
        if t.size == 0 or v.shape[0] != t.size:
            raise ValidationError("piecewise signal needs one value per breakpoint")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValidationError("piecewise signal has non-finite entries")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value) -> "PiecewiseConstant":
        return cls(np.array([0.0]), np.array([value], dtype=float))

    def __call__(self, t: float):
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.values[max(k, 0)]


RateSignal = Union[float, PiecewiseConstant]


def _rate_value(rate: RateSignal, t: float) -> float:
    return float(rate(t)) if isinstance(rate, PiecewiseConstant) else float(rate)


@dataclass(frozen=True)
class LindbladModel:
    H0: np.ndarray
    controls: tuple[tuple[str, np.ndarray], ...] = ()
    jumps: tuple[tuple[str, np.ndarray], ...] = ()
    rates: tuple[RateSignal, ...] = ()
    hermiticity_tol: float = DEFAULT_TOL.hermiticity

    def __post_init__(self):
        h0 = check_hermitian(self.H0, self.hermiticity_tol, "H0")
        n = h0.shape[0]
        ctrls = []
        for label, h in self.controls:
            h = check_hermitian(h, self.hermiticity_tol, f"control {label!r}")
            if h.shape != (n, n):
                raise DimensionError(f"control {label!r} has shape {h.shape}, expected {(n, n)}")
            ctrls.append((str(label), h))
        jumps = []
        for label, f in self.jumps:
            f = as_matrix(f, f"jump {label!r}")
            if f.shape != (n, n):
                raise DimensionError(f"jump {label!r} has shape {f.shape}, expected {(n, n)}")
            jumps.append((str(label), f))
        rates = tuple(self.rates) if self.rates else tuple(1.0 for _ in jumps)
        if len(rates) != len(jumps):
            raise DimensionError(f"{len(rates)} rate signals for {len(jumps)} jump operators")
        for r in rates:
            vals = r.values if isinstance(r, PiecewiseConstant) else np.array([r], dtype=float)
            if np.any(vals < 0) or not np.all(np.isfinite(vals)):
                raise ValidationError("rate signals must be finite and nonnegative")
        object.__setattr__(self, "H0", h0)
        object.__setattr__(self, "controls", tuple(ctrls))
        object.__setattr__(self, "jumps", tuple(jumps))
        object.__setattr__(self, "rates", rates)

    @property
    def n(self) -> int:
        return self.H0.shape[0]

    @property
    def control_labels(self) -> list[str]:
        return [lab for lab, _ in self.controls]

    @property
    def jump_labels(self) -> list[str]:
        return [lab for lab, _ in self.jumps]

    def rates_at(self, t: float) -> np.ndarray:
        return np.array([_rate_value(r, t) for r in self.rates], dtype=float)

    def hamiltonian(self, u=None) -> np.ndarray:
        u = self._check_u(u)
        h = self.H0.copy()
        for (_, hc), ua in zip(self.controls, u):
            h = h + ua * hc
        return h

    def _check_u(self, u) -> np.ndarray:
        u = np.zeros(len(self.controls)) if u is None else np.asarray(u, dtype=float).ravel()
        if u.size != len(self.controls):
            raise DimensionError(f"{u.size} control values for {len(self.controls)} controls")
        return u

    def _check_gamma(self, gamma) -> np.ndarray:
        g = np.asarray(gamma, dtype=float).ravel()
        if g.size != len(self.jumps):
            raise DimensionError(f"{g.size} rates for {len(self.jumps)} jump operators")
        if np.any(g < 0):
            raise ValidationError("rates must be nonnegative")
        return g


def lindblad_rhs(model: LindbladModel, rho, u=None, gamma=None) -> np.ndarray:
    """-i[H0 + sum u_a H_a, rho] + sum gamma_a L_a(rho)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (model.n, model.n):
        raise DimensionError(f"state shape {rho.shape} does not match model dimension {model.n}")
    gamma = model.rates_at(0.0) if gamma is None else model._check_gamma(gamma)
    h = model.hamiltonian(u)
    out = -1j * commutator(h, rho)
    for (_, f), g in zip(model.jumps, gamma):
        if g != 0.0:
            out = out + g * lindbladian_apply(f, rho)
    return out


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant control values; row k holds u(t) on [times[k], times[k+1])."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v.reshape(t.size, -1) if t.size else v
        if t.size == 0 or v.shape[0] != t.size:
            raise ValidationError("control schedule needs one row of values per grid time")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("control grid must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValidationError("control schedule has non-finite entries")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, num_controls: int) -> "ControlSchedule":
        return cls(np.array([0.0]), np.zeros((1, num_controls)))

    @classmethod
    def constant(cls, u) -> "ControlSchedule":
        u = np.asarray(u, dtype=float).ravel()
        return cls(np.array([0.0]), u.reshape(1, -1))

    @property
    def num_controls(self) -> int:
        return self.values.shape[1]

    def __call__(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.values[max(k, 0)]


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    u: np.ndarray
    gamma: np.ndarray
    # (grid index, invariant name, size) for every reporting-tolerance violation
    violations: tuple[tuple[int, str, float], ...] = field(default=())

    def __len__(self) -> int:
        return self.t.size

    @property
    def ok(self) -> bool:
        return not self.violations

    @classmethod
    def from_states(cls, t, states) -> "Trajectory":
        """Wrap externally produced states (no control or rate record)."""
        t = np.asarray(t, dtype=float)
        states = np.asarray(states, dtype=complex)
        if states.shape[0] != t.size:
            raise DimensionError("one state per grid point is required")
        return cls(t, states, np.zeros((t.size, 0)), np.zeros((t.size, 0)))


def _rk4_step(model, rho, h, u, gamma, jump_cache):
    ham = model.hamiltonian(u)

    def f(r):
        out = -1j * (ham @ r - r @ ham)
        for (fj, fdf), g in zip(jump_cache, gamma):
            if g != 0.0:
                out = out + g * _dissipator_fast(fj, fdf, r)
        return out

    k1 = f(rho)
    k2 = f(rho + 0.5 * h * k1)
    k3 = f(rho + 0.5 * h * k2)
    k4 = f(rho + h * k3)
    return rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def propagate(
    model: LindbladModel,
    rho0,
    schedule: ControlSchedule | None = None,
    t_grid=None,
    dt: float = 1e-3,
    tol: Tolerances = DEFAULT_TOL,
) -> Trajectory:
    """Integrate the master equation with classical RK4 and report invariant drift.

    Each grid interval is split into ``ceil(interval / dt)`` equal substeps.
    Controls and rates are sampled at the start of each substep, so schedule
    breakpoints should coincide with substep boundaries.
    """
    rho = check_density(rho0, tol, "rho0")
    if rho.shape != (model.n, model.n):
        raise DimensionError(f"rho0 shape {rho.shape} does not match model dimension {model.n}")
    t_grid = np.asarray(t_grid, dtype=float).ravel()
    if t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValidationError("t_grid needs at least two strictly increasing points")
    if dt <= 0:
        raise ValidationError("dt must be positive")
    schedule = schedule or ControlSchedule.zeros(len(model.controls))
    if schedule.num_controls != len(model.controls):
        raise DimensionError(
            f"schedule has {schedule.num_controls} controls, model has {len(model.controls)}"
        )

    jump_cache = [(f, f.conj().T @ f) for _, f in model.jumps]
    states = np.empty((t_grid.size, model.n, model.n), dtype=complex)
    us = np.empty((t_grid.size, len(model.controls)))
    gs = np.empty((t_grid.size, len(model.jumps)))
    states[0] = rho
    us[0] = schedule(t_grid[0])
    gs[0] = model.rates_at(t_grid[0])
    violations = []

    for k in range(t_grid.size - 1):
        t0, t1 = t_grid[k], t_grid[k + 1]
        nsub = max(1, math.ceil((t1 - t0) / dt - 1e-9))
        h = (t1 - t0) / nsub
        for j in range(nsub):
            ts = t0 + j * h
            rho = _rk4_step(model, rho, h, schedule(ts), model.rates_at(ts), jump_cache)
        states[k + 1] = rho
        us[k + 1] = schedule(t1)
        gs[k + 1] = model.rates_at(t1)
        for name, size in density_defects(rho).items():
            limit = getattr(tol, name)
            if size > tol.hard:
                raise IntegrationError(
                    f"{name} violation {size:.3e} at t={t1:g} exceeds hard tolerance "
                    f"{tol.hard:.1e}; reduce dt (currently {dt:g})"
                )
            if size > limit:
                violations.append((k + 1, name, size))

    return Trajectory(t_grid, states, us, gs, tuple(violations))


def basis_state(n: int, index: int) -> np.ndarray:
    rho = np.zeros((n, n), dtype=complex)
    rho[index, index] = 1.0
    return rho


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())
