"""Eigenvalue-block analysis of density matrices and time-varying DFS tracking.

Eigenvalues are ordered in descending order throughout, so block 0 is the
block with the largest eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BlockCrossingError,
    ClusteringError,
    SelectionError,
    StepTooCoarseError,
    ValidationError,
)
from .lindblad import LindbladModel, Trajectory, check_hermitian, commutator, lindblad_rhs

DEFAULT_CLUSTER_TOL = 1e-8
DEFAULT_FD_TOL = 1e-5


@dataclass(frozen=True)
class Block:
    value: float
    multiplicity: int
    start: int
    vectors: np.ndarray

    @property
    def indices(self) -> range:
        return range(self.start, self.start + self.multiplicity)

    @property
    def projector(self) -> np.ndarray:
        return self.vectors @ self.vectors.conj().T


@dataclass(frozen=True)
class BlockSpectrum:
    blocks: tuple[Block, ...]
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    cluster_tol: float

    @property
    def n(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(b.multiplicity for b in self.blocks)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(b.value for b in self.blocks)

    @property
    def projectors(self) -> list[np.ndarray]:
        return [b.projector for b in self.blocks]

    def reconstruct(self) -> np.ndarray:
        return sum(b.value * b.projector for b in self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)


def cluster_sorted(values: Sequence[float], cluster_tol: float) -> list[list[int]]:
    """Single-linkage groups of a descending sequence: split where the gap exceeds the tolerance."""
    groups: list[list[int]] = []
    for i, v in enumerate(values):
        if groups and values[i - 1] - v <= cluster_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _eigh_desc(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    return w[::-1], v[:, ::-1]


def spectral_blocks(rho, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> BlockSpectrum:
    if cluster_tol <= 0:
        raise ValidationError("cluster_tol must be positive")
    rho = check_hermitian(rho, name="rho")
    if abs(np.trace(rho).real - 1.0) > 1e-6:
        raise ValidationError(f"rho has trace {np.trace(rho).real:.6g}, expected 1")
    w, v = _eigh_desc(rho)
    blocks = []
    for grp in cluster_sorted(w, cluster_tol):
        vals = w[grp]
        spread = vals[0] - vals[-1]
        if spread > cluster_tol / 2:
            raise ClusteringError(
                f"eigenvalues {vals[0]:.3e}..{vals[-1]:.3e} chain into one block with spread "
                f"{spread:.3e} > cluster_tol/2; the spectrum is ill-separated at this tolerance"
            )
        blocks.append(Block(float(vals.mean()), len(grp), grp[0], v[:, grp]))
    return BlockSpectrum(tuple(blocks), w, v, cluster_tol)


@dataclass(frozen=True)
class BlockSelection:
    """Indices of the blocks whose eigenvalues are to be preserved (the set K)."""

    keep: frozenset[int]

    def __init__(self, keep: Iterable[int]):
        object.__setattr__(self, "keep", frozenset(int(k) for k in keep))

    def validate(self, spec: BlockSpectrum) -> "BlockSelection":
        if not self.keep:
            raise SelectionError("the preserved block set must be nonempty")
        bad = [k for k in self.keep if not 0 <= k < len(spec)]
        if bad:
            raise SelectionError(f"block indices {sorted(bad)} out of range for {len(spec)} blocks")
        return self

    def complement(self, spec: BlockSpectrum) -> list[int]:
        return [k for k in range(len(spec)) if k not in self.keep]

    def index_positions(self, spec: BlockSpectrum) -> list[int]:
        self.validate(spec)
        return [i for k in sorted(self.keep) for i in spec.blocks[k].indices]

    @classmethod
    def all_blocks(cls, spec: BlockSpectrum) -> "BlockSelection":
        return cls(range(len(spec)))


def dfs_projector(spec: BlockSpectrum, sel: BlockSelection) -> np.ndarray:
    sel.validate(spec)
    return sum(spec.blocks[k].projector for k in sorted(sel.keep))


def dfs_state(rho, spec: BlockSpectrum, sel: BlockSelection, tol: float = 1e-12) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    p = dfs_projector(spec, sel)
    prp = p @ rho @ p
    weight = np.trace(prp).real
    if weight <= tol:
        raise SelectionError(f"selected blocks carry weight {weight:.3e}; cannot normalise")
    return prp / weight


def procrustes_align(reference: np.ndarray, raw: np.ndarray) -> np.ndarray:
    """Right-multiply ``raw`` by the unitary that maximises overlap with ``reference``."""
    u, _, vh = np.linalg.svd(reference.conj().T @ raw)
    return raw @ (u @ vh).conj().T


@dataclass(frozen=True)
class EigenframePath:
    t: np.ndarray
    frames: np.ndarray  # (T, n, m_K), gauge-aligned K-eigenspace frames
    complements: np.ndarray  # (T, n, n - m_K), aligned frames of the complement
    positions: tuple[int, ...]  # descending-order eigenvalue positions of K
    eigenvalues: np.ndarray = field(repr=False, default=None)  # (T, n) descending

    def projectors(self) -> np.ndarray:
        return np.einsum("tim,tjm->tij", self.frames, self.frames.conj())

    def completed(self) -> np.ndarray:
        """Unitary path V(t) = [F_K(t) F_c(t)] [F_K(0) F_c(0)]^+, with V(0) = I."""
        full = np.concatenate([self.frames, self.complements], axis=2)
        return full @ full[0].conj().T

    def regauged(self, w) -> "EigenframePath":
        """Apply a K-frame gauge: a fixed (m_K, m_K) unitary or one per time step."""
        w = np.asarray(w, dtype=complex)
        frames = self.frames @ w if w.ndim == 3 else self.frames @ w[None]
        return EigenframePath(self.t, frames, self.complements, self.positions, self.eigenvalues)


def _min_gap(w: np.ndarray, pos: Sequence[int], other: Sequence[int]) -> float:
    if not pos or not other:
        return np.inf
    return float(np.min(np.abs(w[list(pos)][:, None] - w[list(other)][None, :])))


def eigenframe_path(
    traj: Trajectory,
    sel: BlockSelection,
    cluster_tol: float = DEFAULT_CLUSTER_TOL,
) -> EigenframePath:
    """Continuous orthonormal frame of the tracked eigenspace along a trajectory.

    Raises BlockCrossingError when a tracked eigenvalue comes within
    ``cluster_tol`` of an untracked one, since the projector is then not
    continuous.
    """
    spec0 = spectral_blocks(traj.states[0], cluster_tol)
    pos = sel.index_positions(spec0)
    other = [i for i in range(spec0.n) if i not in pos]
    block_slices, start = [], 0
    for k in sorted(sel.keep):
        m = spec0.blocks[k].multiplicity
        block_slices.append(slice(start, start + m))
        start += m
    frames, comps, eigs = [], [], []
    for k, rho in enumerate(traj.states):
        w, v = _eigh_desc(rho)
        gap = _min_gap(w, pos, other)
        if gap <= cluster_tol:
            raise BlockCrossingError(
                f"tracked eigenvalues approach untracked ones at t={traj.t[k]:g} (gap {gap:.3e})"
            )
        raw_k, raw_c = v[:, pos], v[:, other]
        if k == 0:
            fk, fc = spec0.eigenvectors[:, pos], spec0.eigenvectors[:, other]
        else:
            # Align each preserved block on its own so distinct eigenvalues never mix.
            fk = np.empty_like(raw_k)
            for sl in block_slices:
                fk[:, sl] = procrustes_align(frames[-1][:, sl], raw_k[:, sl])
            fc = procrustes_align(comps[-1], raw_c) if other else raw_c
        frames.append(fk)
        comps.append(fc)
        eigs.append(w)
    n = spec0.n
    return EigenframePath(
        np.asarray(traj.t, dtype=float),
        np.array(frames),
        np.array(comps).reshape(len(frames), n, len(other)),
        tuple(pos),
        np.array(eigs),
    )


def _time_derivative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second-order finite differences along axis 0 (one-sided at the ends)."""
    if t.size == 2:
        d = (y[1] - y[0]) / (t[1] - t[0])
        return np.array([d, d])
    out = np.empty_like(y)
    out[1:-1] = (y[2:] - y[:-2]) / (t[2:] - t[:-2])[:, None, None]
    h0, h1 = t[1] - t[0], t[2] - t[1]
    out[0] = (-(2 * h0 + h1) / (h0 * (h0 + h1)) * y[0] + (h0 + h1) / (h0 * h1) * y[1]
              - h0 / (h1 * (h0 + h1)) * y[2])
    h0, h1 = t[-2] - t[-3], t[-1] - t[-2]
    out[-1] = (h1 / (h0 * (h0 + h1)) * y[-3] - (h0 + h1) / (h0 * h1) * y[-2]
               + (2 * h1 + h0) / (h1 * (h0 + h1)) * y[-1])
    return out


def dfs_hamiltonian(path: EigenframePath, fd_tol: float = DEFAULT_FD_TOL) -> np.ndarray:
    """H(t) = i dV/dt V^+ along the completed frame path; shape (T, n, n)."""
    if path.t.size < 2:
        raise ValidationError("need at least two time points")
    v = path.completed()
    h = 1j * np.einsum("tij,tkj->tik", _time_derivative(path.t, v), v.conj())
    skew = np.max(np.abs(h - np.conj(np.swapaxes(h, 1, 2))))
    if skew > fd_tol:
        raise StepTooCoarseError(
            f"finite-difference generator is non-Hermitian by {skew:.3e} > {fd_tol:.1e}; refine the grid"
        )
    return 0.5 * (h + np.conj(np.swapaxes(h, 1, 2)))


def eigenframe_generator(
    model: LindbladModel,
    rho,
    u=None,
    gamma=None,
    cluster_tol: float = DEFAULT_CLUSTER_TOL,
) -> np.ndarray:
    """Instantaneous H with dV/dt = -i H V, from the master-equation velocity.

    First-order eigenvector perturbation in the parallel-transport gauge: in
    the eigenbasis, H_ij = i (V^+ rho' V)_ij / (lambda_j - lambda_i) between
    distinct blocks and zero inside each block.  This is the exact derivative
    of the frame path, so no time grid is involved.
    """
    rho = np.asarray(rho, dtype=complex)
    spec = spectral_blocks(rho, cluster_tol)
    v = spec.eigenvectors
    d = v.conj().T @ lindblad_rhs(model, rho, u, gamma) @ v
    lam = spec.eigenvalues
    h = np.zeros_like(d)
    for bi in spec.blocks:
        for bj in spec.blocks:
            if bi is bj:
                continue
            i, j = bi.indices, bj.indices
            h[i.start:i.stop, j.start:j.stop] = (
                1j * d[i.start:i.stop, j.start:j.stop] / (lam[j.start] - lam[i.start])
            )
    return v @ h @ v.conj().T


def consistency_residual(
    model: LindbladModel,
    rho,
    u,
    gamma,
    h_dfs,
    spec: BlockSpectrum,
    sel: BlockSelection,
) -> float:
    """Frobenius norm of P rho' P + i P [H_DFS, rho] P, with rho' from the master equation."""
    rho = np.asarray(rho, dtype=complex)
    p = dfs_projector(spec, sel)
    rdot = lindblad_rhs(model, rho, u, gamma)
    res = p @ rdot @ p + 1j * p @ commutator(np.asarray(h_dfs, dtype=complex), rho) @ p
    return float(np.linalg.norm(res))


def _null_space(m: np.ndarray, tol: float) -> np.ndarray:
    if m.shape[1] == 0:
        return np.zeros((m.shape[1], 0), dtype=m.dtype)
    _, s, vh = np.linalg.svd(m)
    scale = max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].conj().T


def _cluster_values(vals: np.ndarray, tol: float) -> list:
    reps: list = []
    for c in vals:
        if not any(abs(c - r) <= tol for r in reps):
            reps.append(c)
    return reps


def joint_eigenspaces(ops: Sequence[np.ndarray], tol: float = 1e-9, real: bool = False):
    """Maximal subspaces on which every operator acts as a scalar.

    Returns a list of (orthonormal basis, tuple of scalars).  With
    ``real=True`` only real eigenvalues and real eigenvectors are searched.
    Candidate eigenvalues come from compressions onto the current subspace;
    each candidate is confirmed by a null-space computation at ``tol``.
    """
    dtype = float if real else complex
    ops = [np.asarray(op, dtype=dtype) for op in ops]
    if not ops:
        return []
    n = ops[0].shape[0]
    if any(op.shape != (n, n) for op in ops):
        raise ValidationError("all operators must be square of equal dimension")
    pending = [(np.eye(n, dtype=dtype), ())]
    for op in ops:
        scale = max(1.0, np.linalg.norm(op, 2))
        # Eigenvalues of non-normal compressions are only accurate to ~sqrt(eps).
        cand_tol = 1e-6 * scale
        nxt = []
        for basis, tup in pending:
            cand = np.linalg.eigvals(basis.conj().T @ op @ basis)
            if real:
                cand = cand[np.abs(cand.imag) <= cand_tol].real
            for c in _cluster_values(cand, cand_tol):
                c = round(float(c), 12) if real else complex(c)
                ns = _null_space((op - c * np.eye(n)) @ basis, tol)
                if ns.shape[1]:
                    sub, _ = np.linalg.qr(basis @ ns)
                    nxt.append((sub, tup + (c,)))
        pending = nxt
        if not pending:
            break
    return pending


def common_eigenvector_subspace(jumps: Sequence[np.ndarray], tol: float = 1e-9):
    """Joint eigenspaces of the jump operators, as (basis, eigenvalue tuple) pairs."""
    out = []
    for basis, tup in joint_eigenspaces(jumps, tol):
        out.append((basis, tuple(complex(c) for c in tup)))
    return out


@dataclass(frozen=True)
class PreservationReport:
    t: np.ndarray
    reference_values: tuple[float, ...]  # preserved block eigenvalues at t=0
    deviations: np.ndarray  # (T, |K|) max |lambda_i(t) - lambda_[k](0)| per preserved block
    kbar_multiplicities: tuple[tuple[int, ...], ...]
    multiplicity_changed: np.ndarray  # (T,) bool
    tracking_failures: tuple[tuple[int, str], ...]
    max_deviation: float
    preserve_tol: float

    @property
    def df_compatible(self) -> bool:
        return (
            self.max_deviation <= self.preserve_tol
            and not bool(np.any(self.multiplicity_changed))
            and not self.tracking_failures
        )


def eigenvalue_preservation_report(
    traj: Trajectory,
    sel: BlockSelection,
    cluster_tol: float = DEFAULT_CLUSTER_TOL,
    preserve_tol: float = 1e-8,
) -> PreservationReport:
    spec0 = spectral_blocks(traj.states[0], cluster_tol)
    sel.validate(spec0)
    keep = sorted(sel.keep)
    pos = sel.index_positions(spec0)
    other = [i for i in range(spec0.n) if i not in pos]
    ref = tuple(spec0.blocks[k].value for k in keep)
    devs = np.zeros((len(traj.states), len(keep)))
    mults, changed, failures = [], [], []
    for j, rho in enumerate(traj.states):
        w, _ = _eigh_desc(np.asarray(rho))
        for c, k in enumerate(keep):
            idx = list(spec0.blocks[k].indices)
            devs[j, c] = np.max(np.abs(w[idx] - ref[c]))
        gap = _min_gap(w, pos, other)
        if gap <= cluster_tol:
            failures.append((j, f"tracked and untracked eigenvalues within {gap:.3e} at t={traj.t[j]:g}"))
        wk = w[other]
        m = tuple(len(g) for g in cluster_sorted(wk, cluster_tol)) if other else ()
        mults.append(m)
        changed.append(m != mults[0])
    return PreservationReport(
        np.asarray(traj.t, dtype=float),
        ref,
        devs,
        tuple(mults),
        np.array(changed, dtype=bool),
        tuple(failures),
        float(devs.max()) if devs.size else 0.0,
        preserve_tol,
    )
