"""Real coherence-vector coordinates and the bilinear form of the master equation.

Three coordinate modes are supported:

``paper_15``
    rho_11 - rho_ii (i = 2..n), then rho_ij + rho_ji and i(rho_ij - rho_ji)
    for i > j in row-major order; n**2 - 1 components, trace dropped.
``paper_16``
    ``paper_15`` with Tr(rho) appended; n**2 components.
``pauli_full``
    x_k = Tr(rho s_k) over the identity-first Pauli product basis; n must be
    a power of two.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, ModeError
from .lindblad import LindbladModel, commutator, lindbladian_apply, pauli_labels, pauli_product_basis

PAPER_15 = "paper_15"
PAPER_16 = "paper_16"
PAULI_FULL = "pauli_full"
MODES = (PAPER_15, PAPER_16, PAULI_FULL)


def _num_qubits(n: int) -> int:
    q = n.bit_length() - 1
    if n < 2 or 2 ** q != n:
        raise ModeError(f"pauli_full needs a power-of-two dimension, got n = {n}")
    return q


def coordinate_length(n: int, mode: str) -> int:
    check_mode(n, mode)
    return n * n - 1 if mode == PAPER_15 else n * n


def check_mode(n: int, mode: str) -> None:
    if mode not in MODES:
        raise ModeError(f"unknown coordinate mode {mode!r}; choose from {MODES}")
    if mode == PAULI_FULL:
        _num_qubits(n)


def _lower_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(1, n) for j in range(i)]


def coordinate_labels(n: int, mode: str) -> list[str]:
    check_mode(n, mode)
    if mode == PAULI_FULL:
        return pauli_labels(_num_qubits(n))
    labels = [f"d{i + 1}" for i in range(1, n)]
    labels += [f"s{i + 1}{j + 1}" for i, j in _lower_pairs(n)]
    labels += [f"a{i + 1}{j + 1}" for i, j in _lower_pairs(n)]
    if mode == PAPER_16:
        labels.append("tr")
    return labels


def coherence_map(rho, mode: str = PAPER_16) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    check_mode(n, mode)
    if mode == PAULI_FULL:
        return np.array([np.trace(rho @ s).real for s in pauli_product_basis(_num_qubits(n))])
    diag = rho.diagonal()
    parts = [(diag[0] - diag[1:]).real]
    pairs = _lower_pairs(n)
    parts.append(np.array([(rho[i, j] + rho[j, i]).real for i, j in pairs]))
    parts.append(np.array([(1j * (rho[i, j] - rho[j, i])).real for i, j in pairs]))
    if mode == PAPER_16:
        parts.append(np.array([np.trace(rho).real]))
    return np.concatenate(parts)


def inverse_coherence_map(x, mode: str = PAPER_16, n: int | None = None, trace_hint: float = 1.0) -> np.ndarray:
    """Hermitian matrix with the given coordinates.

    ``n`` is inferred from the vector length when omitted.  In ``paper_15``
    mode the trace is not encoded and is taken from ``trace_hint``.
    """
    x = np.asarray(x, dtype=float).ravel()
    if n is None:
        n = int(round(np.sqrt(x.size + (1 if mode == PAPER_15 else 0))))
    if x.size != coordinate_length(n, mode):
        raise DimensionError(f"{mode} vector for n={n} needs {coordinate_length(n, mode)} entries, got {x.size}")
    if mode == PAULI_FULL:
        basis = pauli_product_basis(_num_qubits(n))
        return sum(xk * s for xk, s in zip(x, basis)) / n
    trace = x[-1] if mode == PAPER_16 else trace_hint
    d = x[: n - 1]
    pairs = _lower_pairs(n)
    s = x[n - 1: n - 1 + len(pairs)]
    a = x[n - 1 + len(pairs): n - 1 + 2 * len(pairs)]
    rho = np.zeros((n, n), dtype=complex)
    r11 = (trace + d.sum()) / n
    rho[0, 0] = r11
    for i in range(1, n):
        rho[i, i] = r11 - d[i - 1]
    for (i, j), sk, ak in zip(pairs, s, a):
        rho[i, j] = 0.5 * (sk - 1j * ak)
        rho[j, i] = np.conj(rho[i, j])
    return rho


def coordinate_transform(n: int, source: str, target: str) -> np.ndarray:
    """Matrix T with coherence_map(rho, target) = T @ coherence_map(rho, source)."""
    length = coordinate_length(n, source)
    cols = []
    for j in range(length):
        e = np.zeros(length)
        e[j] = 1.0
        cols.append(coherence_map(inverse_coherence_map(e, source, n, trace_hint=0.0), target))
    return np.array(cols).T


def superoperator_matrix(superop: Callable[[np.ndarray], np.ndarray], n: int, mode: str) -> np.ndarray:
    """Matrix of a linear map on Hermitian operators in the chosen coordinates."""
    length = coordinate_length(n, mode)
    if mode == PAPER_15:
        # Coordinates drop the identity direction, so it must map to a multiple of itself.
        leak = coherence_map(superop(np.eye(n, dtype=complex)), mode)
        if np.max(np.abs(leak)) > 1e-12:
            raise ModeError("map does not preserve the identity direction; paper_15 cannot represent it")
    m = np.empty((length, length))
    for j in range(length):
        e = np.zeros(length)
        e[j] = 1.0
        basis_op = inverse_coherence_map(e, mode, n, trace_hint=0.0)
        m[:, j] = coherence_map(superop(basis_op), mode)
    return m


@dataclass(frozen=True)
class BilinearModel:
    mode: str
    A: np.ndarray
    B: tuple[np.ndarray, ...]
    G: tuple[np.ndarray, ...]
    control_labels: tuple[str, ...] = ()
    jump_labels: tuple[str, ...] = ()

    def __post_init__(self):
        N = self.A.shape[0]
        for m in (self.A, *self.B, *self.G):
            if m.shape != (N, N) or not np.all(np.isfinite(m)):
                raise DimensionError("bilinear model matrices must be finite and N x N")

    @property
    def N(self) -> int:
        return self.A.shape[0]

    def conjugated(self, t: np.ndarray, mode: str | None = None) -> "BilinearModel":
        """Same dynamics in coordinates y = T x."""
        tinv = np.linalg.inv(t)
        return BilinearModel(
            mode or self.mode,
            t @ self.A @ tinv,
            tuple(t @ b @ tinv for b in self.B),
            tuple(t @ g @ tinv for g in self.G),
            self.control_labels,
            self.jump_labels,
        )


def hamiltonian_superop(h: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    return lambda rho: -1j * commutator(h, rho)


def dissipator_superop(f: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    return lambda rho: lindbladian_apply(f, rho)


def build_bilinear(model: LindbladModel, mode: str = PAPER_16) -> BilinearModel:
    n = model.n
    check_mode(n, mode)
    return BilinearModel(
        mode,
        superoperator_matrix(hamiltonian_superop(model.H0), n, mode),
        tuple(superoperator_matrix(hamiltonian_superop(h), n, mode) for _, h in model.controls),
        tuple(superoperator_matrix(dissipator_superop(f), n, mode) for _, f in model.jumps),
        tuple(model.control_labels),
        tuple(model.jump_labels),
    )


def bilinear_rhs(bm: BilinearModel, x, u=None, gamma=None) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != bm.N:
        raise DimensionError(f"state has {x.size} entries, model has N = {bm.N}")
    u = np.zeros(len(bm.B)) if u is None else np.asarray(u, dtype=float).ravel()
    gamma = np.zeros(len(bm.G)) if gamma is None else np.asarray(gamma, dtype=float).ravel()
    if u.size != len(bm.B) or gamma.size != len(bm.G):
        raise DimensionError(f"expected {len(bm.B)} controls and {len(bm.G)} rates")
    out = bm.A @ x
    for b, ua in zip(bm.B, u):
        out = out + ua * (b @ x)
    for g, ga in zip(bm.G, gamma):
        out = out + ga * (g @ x)
    return out


def integrate_bilinear(bm: BilinearModel, x0, t_grid, u=None, gamma=None, dt: float = 1e-3) -> np.ndarray:
    """RK4 integration of the bilinear system with constant u and rates."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise DimensionError("t_grid needs at least two strictly increasing points")
    # One evaluation builds the constant generator column by column.
    m = np.column_stack([bilinear_rhs(bm, e, u, gamma) for e in np.eye(bm.N)])
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (bm.N,):
        raise DimensionError(f"x0 has shape {x.shape}, model has N = {bm.N}")
    out = [x.copy()]
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        nsub = max(1, int(np.ceil((t1 - t0) / dt - 1e-9)))
        h = (t1 - t0) / nsub
        for _ in range(nsub):
            k1 = m @ x
            k2 = m @ (x + 0.5 * h * k1)
            k3 = m @ (x + 0.5 * h * k2)
            k4 = m @ (x + h * k3)
            x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(x.copy())
    return np.array(out)
