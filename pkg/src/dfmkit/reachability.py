"""Degree-1 reachability distributions of bilinear systems.

A linear vector field x -> P x is stored as its matrix P.  The Lie bracket of
two linear fields is again linear, [P x, Q x] = (Q P - P Q) x, so the closure
runs entirely on real N x N matrices.  Spans are kept with an orthonormal
frame of the vectorised generators and all rank decisions are relative to
the largest generator norm.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import subspace_angles

from .bloch import BilinearModel, coherence_map
from .errors import DimensionError, IncompatibleBasePointError, NonlinearGeneratorError

log = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-9


class MatrixSpan:
    """Real-linear span of N x N matrices with tolerance-based membership."""

    def __init__(self, N: int, rank_tol: float = DEFAULT_RANK_TOL, generators: Sequence[np.ndarray] = ()):
        self.N = int(N)
        self.rank_tol = float(rank_tol)
        self.basis: list[np.ndarray] = []
        self._frame = np.zeros((self.N * self.N, 0))
        self._scale = 0.0
        for g in generators:
            self.add(g)

    def __len__(self) -> int:
        return len(self.basis)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def copy(self) -> "MatrixSpan":
        out = MatrixSpan(self.N, self.rank_tol)
        out.basis = list(self.basis)
        out._frame = self._frame.copy()
        out._scale = self._scale
        return out

    def _check(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        if m.shape != (self.N, self.N):
            raise DimensionError(f"expected a {self.N}x{self.N} matrix, got {m.shape}")
        return m

    def threshold(self, candidate_norm: float = 0.0) -> float:
        return self.rank_tol * max(self._scale, candidate_norm)

    def reduce(self, candidate) -> tuple[np.ndarray, float]:
        """Candidate minus its Frobenius-orthogonal projection onto the span."""
        c = self._check(candidate).ravel()
        r = c - self._frame @ (self._frame.T @ c)
        r = r - self._frame @ (self._frame.T @ r)
        return r.reshape(self.N, self.N), float(np.linalg.norm(r))

    def contains(self, candidate) -> bool:
        c = self._check(candidate)
        _, norm = self.reduce(c)
        return norm <= self.threshold(float(np.linalg.norm(c)))

    def add(self, candidate, store=None) -> bool:
        """Add ``candidate`` if it is not already in the span.

        ``store`` optionally replaces the matrix recorded in :attr:`basis`;
        it must differ from ``candidate`` by an element of the span.
        """
        c = self._check(candidate)
        cnorm = float(np.linalg.norm(c))
        r, rnorm = self.reduce(c)
        if rnorm <= self.threshold(cnorm):
            return False
        self.basis.append(self._check(store) if store is not None else c)
        self._frame = np.column_stack([self._frame, r.ravel() / rnorm])
        self._scale = max(self._scale, cnorm)
        return True

    def singular_values(self) -> np.ndarray:
        """Singular values of the stacked generators, each normalised to unit norm."""
        if not self.basis:
            return np.zeros(0)
        m = np.array([b.ravel() / np.linalg.norm(b) for b in self.basis])
        return np.linalg.svd(m, compute_uv=False)

    def svd_rank(self, tol: float | None = None) -> int:
        s = self.singular_values()
        tol = self.rank_tol if tol is None else tol
        return int(np.sum(s > tol * (s[0] if s.size else 0)))


def span_reduce(candidate, span: MatrixSpan) -> tuple[np.ndarray, float]:
    return span.reduce(candidate)


def bracket(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Matrix of the vector-field bracket [P x, Q x] = (QP - PQ) x."""
    return q @ p - p @ q


@dataclass(frozen=True)
class Degree0Report:
    subspaces: tuple[tuple[np.ndarray, tuple[float, ...]], ...]
    N: int

    @property
    def vectors(self) -> list[np.ndarray]:
        return [basis[:, i] for basis, _ in self.subspaces for i in range(basis.shape[1])]

    @property
    def empty(self) -> bool:
        return not self.subspaces

    @property
    def full_space(self) -> bool:
        return len(self.subspaces) == 1 and self.subspaces[0][0].shape[1] == self.N


def degree0_check(A, B_list: Sequence[np.ndarray], tol: float = 1e-9) -> Degree0Report:
    """Common real eigenvectors of A and every B, grouped into joint eigenspaces."""
    from .spectral import joint_eigenspaces

    A = np.asarray(A, dtype=float)
    ops = [A, *[np.asarray(b, dtype=float) for b in B_list]]
    subs = joint_eigenspaces(ops, tol, real=True)
    return Degree0Report(tuple((b, tuple(float(c) for c in tup)) for b, tup in subs), A.shape[0])


@dataclass(frozen=True)
class Provenance:
    iteration: int
    operator: str
    source: int  # index of the bracketed generator in the final basis
    residual_norm: float


@dataclass
class ClosureReport:
    span: MatrixSpan
    iterations: int
    stable: bool
    variant: str
    provenance: list[Provenance] = field(default_factory=list)
    reduction_log: list[tuple[int, str, int, float, float]] = field(default_factory=list)
    smallest_singular_value: float = float("nan")
    warnings: list[str] = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return self.span.dimension


STOCHASTIC = "stochastic"
CONSTANT = "constant"


def _check_linear(fields) -> list[np.ndarray]:
    out = []
    for f in fields:
        if not isinstance(f, np.ndarray) or f.ndim != 2:
            raise NonlinearGeneratorError(
                "closure supports degree-1 fields only; pass each extra field as its N x N matrix"
            )
        out.append(np.asarray(f, dtype=float))
    return out


def reachability_distribution(
    bm: BilinearModel,
    variant: str = STOCHASTIC,
    rates: Sequence[float] | None = None,
    rank_tol: float = DEFAULT_RANK_TOL,
    max_iter: int = 64,
    extra_fields: Sequence[np.ndarray] = (),
) -> ClosureReport:
    """Smallest degree-1 distribution containing the dissipation fields and
    closed, modulo the control fields, under brackets with drift and controls.

    ``variant="stochastic"`` seeds with every G_a and brackets with A.
    ``variant="constant"`` uses the drift A + sum rates_a G_a and seeds with
    sum rates_a G_a; ``rates`` defaults to all ones (equal rates).

    ``extra_fields`` adds further linear seed fields; anything that is not a
    matrix is rejected.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    N = bm.N
    if variant == STOCHASTIC:
        drift = bm.A
        seeds = list(bm.G)
        seed_names = [f"G[{lab}]" for lab in (bm.jump_labels or range(len(bm.G)))]
    elif variant == CONSTANT:
        rates = np.ones(len(bm.G)) if rates is None else np.asarray(rates, dtype=float).ravel()
        if rates.size != len(bm.G):
            raise DimensionError(f"{rates.size} rates for {len(bm.G)} dissipation channels")
        diss = sum((r * g for r, g in zip(rates, bm.G)), np.zeros((N, N)))
        drift = bm.A + diss
        seeds = [diss]
        seed_names = ["sum_a rate_a G_a"]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    seeds += _check_linear(extra_fields)
    seed_names += [f"extra[{i}]" for i in range(len(extra_fields))]

    partners = [("A", drift)] + [
        (f"B[{lab}]", b) for lab, b in zip(bm.control_labels or range(len(bm.B)), bm.B)
    ]
    span = MatrixSpan(N, rank_tol)
    # Membership is decided against span(V + B); only V's own residual is stored.
    span_with_b = MatrixSpan(N, rank_tol, bm.B)
    report = ClosureReport(span, 0, False, variant)

    frontier = []
    for name, s in zip(seed_names, seeds):
        r, rn = span.reduce(s)
        if span.add(s, store=r):
            span_with_b.add(s)
            frontier.append(len(span.basis) - 1)
            report.provenance.append(Provenance(0, name, -1, rn))

    it = 0
    while frontier:
        if it >= max_iter:
            report.warnings.append(f"closure did not stabilise within {max_iter} iterations")
            report.iterations = it
            _finish(report)
            return report
        it += 1
        new = []
        for idx in frontier:
            w = span.basis[idx]
            for name, p in partners:
                c = bracket(p, w)
                _, norm_vb = span_with_b.reduce(c)
                r, norm_v = span.reduce(c)
                added = span_with_b.add(c)
                report.reduction_log.append((it, name, idx, norm_vb, norm_v))
                if added:
                    span.add(c, store=r)
                    new.append(len(span.basis) - 1)
                    report.provenance.append(Provenance(it, name, idx, norm_vb))
        log.debug("closure iteration %d added %d generators (dim %d)", it, len(new), span.dimension)
        frontier = new
    report.iterations = it
    report.stable = True
    _finish(report)
    return report


def _finish(report: ClosureReport) -> None:
    s = report.span.singular_values()
    report.smallest_singular_value = float(s[-1]) if s.size else float("nan")
    if s.size and s[-1] < 10 * report.span.rank_tol:
        msg = f"smallest retained singular value {s[-1]:.2e} is within 10x of rank_tol"
        report.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


def closure_defect(bm: BilinearModel, report: ClosureReport, rates=None) -> float:
    """Largest relative residual of one more bracket pass (0 at a fixpoint)."""
    span = report.span
    drift = bm.A
    if report.variant == CONSTANT:
        rates = np.ones(len(bm.G)) if rates is None else np.asarray(rates, dtype=float)
        drift = bm.A + sum(r * g for r, g in zip(rates, bm.G))
    both = MatrixSpan(bm.N, span.rank_tol, list(span.basis) + list(bm.B))
    worst = 0.0
    for w in span.basis:
        for p in (drift, *bm.B):
            c = bracket(p, w)
            cn = np.linalg.norm(c)
            if cn > 0:
                worst = max(worst, both.reduce(c)[1] / max(cn, both._scale))
    return worst


def evaluate_distribution(span: MatrixSpan, x0) -> list[np.ndarray]:
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != span.N:
        raise DimensionError(f"point has {x0.size} entries, span acts on R^{span.N}")
    return [v @ x0 for v in span.basis]


def pointwise_rank(vectors: Sequence[np.ndarray], rel_tol: float = 1e-9) -> int:
    if not vectors:
        return 0
    m = np.array(vectors, dtype=float)
    s = np.linalg.svd(m, compute_uv=False)
    if not s.size or s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def _orth(vectors: Sequence[np.ndarray], rel_tol: float, ambient: int) -> np.ndarray:
    if not vectors:
        return np.zeros((ambient, 0))
    m = np.array(vectors, dtype=float).T
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if not s.size or s[0] == 0:
        return np.zeros((ambient, 0))
    return u[:, s > rel_tol * s[0]]


@dataclass(frozen=True)
class ContainmentReport:
    contained: bool
    tangent_dimension: int
    distribution_dimension: int
    intersection_dimension: int
    principal_angles: np.ndarray
    worst_residual: float


def tangent_containment(
    span: MatrixSpan,
    rho0,
    dfm_tangent: Sequence[np.ndarray],
    mode: str,
    rank_tol: float = 1e-9,
    spectrum=None,
    selection=None,
) -> ContainmentReport:
    """Compare the distribution at coherence_map(rho0) with a DFM tangent space.

    When ``spectrum`` and ``selection`` are given, rho0 must carry that block
    structure and every tangent direction must leave its preserved blocks
    stationary, otherwise IncompatibleBasePointError is raised.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if spectrum is not None and selection is not None:
        if np.max(np.abs(spectrum.reconstruct() - rho0)) > 1e-8:
            raise IncompatibleBasePointError("rho0 does not match the supplied block spectrum")
        for k in selection.keep:
            p = spectrum.blocks[k].projector
            for d in dfm_tangent:
                if np.max(np.abs(p @ d @ p)) > 1e-8:
                    raise IncompatibleBasePointError(
                        "tangent direction moves a preserved block at rho0"
                    )
    x0 = coherence_map(rho0, mode)
    if x0.size != span.N:
        raise DimensionError(f"coordinates have {x0.size} entries, span acts on R^{span.N}")
    tvecs = [coherence_map(d, mode) for d in dfm_tangent]
    dvecs = evaluate_distribution(span, x0)
    qt = _orth(tvecs, rank_tol, span.N)
    qd = _orth(dvecs, rank_tol, span.N)
    scale = max([np.linalg.norm(v) for v in dvecs] + [0.0])
    worst = 0.0
    for v in dvecs:
        r = v - qt @ (qt.T @ v)
        worst = max(worst, float(np.linalg.norm(r)))
    contained = worst <= rank_tol * max(scale, 1.0)
    joint = _orth(list(qt.T) + list(qd.T), rank_tol, span.N)
    inter = qt.shape[1] + qd.shape[1] - joint.shape[1]
    angles = subspace_angles(qt, qd) if qt.shape[1] and qd.shape[1] else np.zeros(0)
    return ContainmentReport(contained, qt.shape[1], qd.shape[1], inter, np.sort(angles), worst)
