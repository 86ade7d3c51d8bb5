"""Dimension counts for multiplicity strata, isospectral leaves and DFMs.

A DFM is specified by the multiplicities of the preserved (fixed-value)
blocks and of the free blocks whose multiplicities are held constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import ValidationError
from .spectral import BlockSelection, BlockSpectrum


def _as_multiplicities(values: Sequence[int], name: str, allow_empty: bool) -> tuple[int, ...]:
    out = tuple(int(v) for v in values)
    if not allow_empty and not out:
        raise ValidationError(f"{name} must be nonempty")
    if any(v < 1 for v in out) or any(int(v) != v for v in values):
        raise ValidationError(f"{name} entries must be positive integers, got {list(values)}")
    return out


@dataclass(frozen=True)
class MultiplicitySignature:
    mu: tuple[int, ...]

    def __init__(self, mu: Sequence[int]):
        object.__setattr__(self, "mu", _as_multiplicities(mu, "mu", allow_empty=False))

    @property
    def n(self) -> int:
        return sum(self.mu)

    @property
    def d(self) -> int:
        return len(self.mu)


@dataclass(frozen=True)
class DfmSpec:
    kept: tuple[int, ...]
    free: tuple[int, ...] = ()

    def __init__(self, kept: Sequence[int], free: Sequence[int] = ()):
        object.__setattr__(self, "kept", _as_multiplicities(kept, "kept multiplicities", False))
        object.__setattr__(self, "free", _as_multiplicities(free, "free multiplicities", True))

    @property
    def n(self) -> int:
        return sum(self.kept) + sum(self.free)

    def check_n(self, n: int) -> "DfmSpec":
        if self.n != n:
            raise ValidationError(f"multiplicities sum to {self.n}, expected n = {n}")
        return self


def stratum_codimension(mu: MultiplicitySignature) -> int:
    """Codimension of the fixed-multiplicity stratum of density matrices in Herm(n)."""
    return sum(m * m for m in mu.mu) - mu.d + 1


def isospectral_leaf_dimension(mu: MultiplicitySignature) -> int:
    """Real dimension of the unitary orbit U(n) / prod U(m_l)."""
    return mu.n ** 2 - sum(m * m for m in mu.mu)


def dfm_dimension(spec: DfmSpec) -> int:
    n = spec.n
    if not spec.free:
        # Every eigenvalue fixed: the trace condition is already implied.
        return n * n - sum(m * m for m in spec.kept)
    return (n * n + sum(spec.free) - sum(m * m for m in spec.free)
            - sum(m * m for m in spec.kept) - 1)


def tangent_dimension(spec: DfmSpec) -> int:
    """Count of the strictly multiplicity-preserving tangent construction.

    Differs from :func:`dfm_dimension` exactly when some free block has
    multiplicity > 1 (one scalar shift per free block, not one per eigenvalue).
    """
    n = spec.n
    total = n * n - sum(m * m for m in spec.kept + spec.free)
    return total + max(len(spec.free) - 1, 0)


def partitions(n: int, max_part: int | None = None) -> Iterator[tuple[int, ...]]:
    """Integer partitions of n with parts in non-increasing order."""
    if n == 0:
        yield ()
        return
    max_part = n if max_part is None else max_part
    for first in range(min(n, max_part), 0, -1):
        for rest in partitions(n - first, first):
            yield (first,) + rest


@dataclass(frozen=True)
class TableRow:
    kept: tuple[int, ...]
    free: tuple[int, ...]
    dimension: int

    def format_sets(self) -> tuple[str, str]:
        def fmt(ms):
            return "{" + ",".join(str(m) for m in sorted(ms)) + "}" if ms else "{}"
        return fmt(self.kept), fmt(self.free)


def _row_key(kept: tuple[int, ...], free: tuple[int, ...]):
    return (not free, sum(kept), tuple(sorted(kept, reverse=True)), tuple(sorted(free, reverse=True)))


def table_generate(n: int, include_redundant: bool = False) -> list[TableRow]:
    """All (kept, free) multiplicity pairs for dimension n with their DFM dimension.

    A single free block of multiplicity one is determined by the trace once the
    others are fixed, so that pair duplicates a fully specified row; such rows
    are left out unless ``include_redundant`` is set.  Rows with free blocks
    come first, then by number of preserved eigenvalues, then by the
    partitions in increasing lexicographic order of their descending form.
    """
    if n < 2:
        raise ValidationError("n must be at least 2")
    rows = []
    for s in range(1, n + 1):
        for kept in partitions(s):
            for free in partitions(n - s):
                if free == (1,) and not include_redundant:
                    continue
                rows.append(TableRow(tuple(sorted(kept)), tuple(sorted(free)),
                                     dfm_dimension(DfmSpec(kept, free))))
    rows.sort(key=lambda r: _row_key(r.kept, r.free))
    return rows


def _hermitian_pair(n: int, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    re = np.zeros((n, n), dtype=complex)
    re[a, b] = re[b, a] = 1 / np.sqrt(2)
    im = np.zeros((n, n), dtype=complex)
    im[a, b] = -1j / np.sqrt(2)
    im[b, a] = 1j / np.sqrt(2)
    return re, im


def multiplicity_preserving_tangent(rho, spec: BlockSpectrum, sel: BlockSelection) -> list[np.ndarray]:
    """Hermitian, traceless directions keeping the preserved eigenvalues stationary.

    In the eigenbasis of rho: off-diagonal blocks are free, preserved diagonal
    blocks vanish and each free diagonal block is a scalar shift, the shifts
    weighted by multiplicity summing to zero.
    """
    sel.validate(spec)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (spec.n, spec.n) or np.max(np.abs(spec.reconstruct() - rho)) > 1e-8:
        raise ValidationError("block spectrum does not belong to rho")
    n = spec.n
    v = spec.eigenvectors
    free_blocks = sel.complement(spec)
    dirs = []
    for i, bi in enumerate(spec.blocks):
        for bj in spec.blocks[i + 1:]:
            for a in bi.indices:
                for b in bj.indices:
                    dirs.extend(_hermitian_pair(n, a, b))
    for k1, k2 in zip(free_blocks, free_blocks[1:]):
        d = np.zeros((n, n), dtype=complex)
        b1, b2 = spec.blocks[k1], spec.blocks[k2]
        for a in b1.indices:
            d[a, a] = 1.0 / b1.multiplicity
        for a in b2.indices:
            d[a, a] = -1.0 / b2.multiplicity
        dirs.append(d)
    return [v @ d @ v.conj().T for d in dirs]
