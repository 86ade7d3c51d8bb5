import itertools

import numpy as np
import pytest
from scipy.linalg import null_space
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import density_with_spectrum
from dfmkit.errors import ValidationError
from dfmkit.geometry import (
    DfmSpec,
    MultiplicitySignature,
    dfm_dimension,
    isospectral_leaf_dimension,
    multiplicity_preserving_tangent,
    partitions,
    stratum_codimension,
    table_generate,
    tangent_dimension,
)
from dfmkit.spectral import BlockSelection, spectral_blocks

TABLE_N4 = [
    ((1,), (1, 1, 1), 14), ((1,), (1, 2), 12), ((1,), (3,), 8), ((1, 1), (1, 1), 13),
    ((1, 1), (2,), 11), ((2,), (1, 1), 11), ((2,), (2,), 9), ((1, 1, 1, 1), (), 12),
    ((1, 1, 2), (), 10), ((2, 2), (), 8), ((1, 3), (), 6), ((4,), (), 0),
]


def test_table_n4_exact():
    rows = [(r.kept, r.free, r.dimension) for r in table_generate(4)]
    assert rows == TABLE_N4


def test_redundant_rows_match_fully_fixed_rows():
    # A lone simple free eigenvalue is fixed by the trace: same count as fixing it.
    for r in table_generate(4, include_redundant=True):
        if r.free == (1,):
            assert r.dimension == dfm_dimension(DfmSpec(r.kept + (1,)))


@pytest.mark.parametrize("mu, expected", [((1, 1, 1, 1), 1), ((2, 2), 7), ((4,), 16)])
def test_stratum_codimension(mu, expected):
    assert stratum_codimension(MultiplicitySignature(mu)) == expected


@pytest.mark.parametrize("mu, expected", [((4,), 0), ((1, 1, 1, 1), 12), ((1, 3), 6)])
def test_leaf_dimension(mu, expected):
    assert isospectral_leaf_dimension(MultiplicitySignature(mu)) == expected


@pytest.mark.parametrize(
    "kept, free, expected",
    [((1,), (1, 1, 1), 14), ((2,), (2,), 9), ((4,), (), 0), ((1, 1), (2,), 11),
     ((2,), (), 0), ((1,), (1,), 2)],
)
def test_dfm_dimension_examples(kept, free, expected):
    assert dfm_dimension(DfmSpec(kept, free)) == expected


def test_partitions_counts():
    assert [len(list(partitions(n))) for n in range(1, 8)] == [1, 2, 3, 5, 7, 11, 15]


def test_invalid_multiplicities():
    with pytest.raises(ValidationError):
        DfmSpec([0, 4])
    with pytest.raises(ValidationError):
        DfmSpec([])
    with pytest.raises(ValidationError):
        DfmSpec([1, 1], [1]).check_n(4)
    with pytest.raises(ValidationError):
        table_generate(1)


def _spectrum_for(kept, free):
    vals, parts = [], []
    level = 1.0
    for m in kept + free:
        vals += [level] * m
        parts.append(m)
        level += 1.0
    vals = np.array(vals) / sum(vals)
    return vals


def _oracle_manifold_dimension(rho, spec, sel):
    """Rank of the unitary-orbit tangent plus the trace-free shifts of free eigenvalues."""
    n = spec.n
    gens = []
    for a, b in itertools.product(range(n), repeat=2):
        e = np.zeros((n, n), dtype=complex)
        e[a, b] = 1
        for h in (e + e.T, 1j * (e - e.T)):
            gens.append(1j * (h @ rho - rho @ h))
    free = sel.complement(spec)
    # Shifts of the free eigenvalues that keep the trace: coefficient vectors orthogonal to m.
    mults = np.array([[spec.blocks[k].multiplicity for k in free]], dtype=float)
    if free:
        for c in null_space(mults).T:
            gens.append(sum(ck * spec.blocks[k].projector for ck, k in zip(c, free)))
    vecs = [np.concatenate([g.real.ravel(), g.imag.ravel()]) for g in gens]
    return np.linalg.matrix_rank(np.array(vecs), tol=1e-9)


def _tangent_vectors(dirs):
    return np.array([np.concatenate([d.real.ravel(), d.imag.ravel()]) for d in dirs])


@pytest.mark.parametrize("kept, free", [(r[0], r[1]) for r in TABLE_N4 if r[2] > 0])
def test_tangent_construction_oracles(rng, kept, free):
    rho = density_with_spectrum(rng, _spectrum_for(kept, free))
    spec = spectral_blocks(rho, 1e-9)
    sel = BlockSelection(range(len(kept)))
    dirs = multiplicity_preserving_tangent(rho, spec, sel)
    spec_d = DfmSpec(kept, free)
    assert len(dirs) == tangent_dimension(spec_d)
    assert np.linalg.matrix_rank(_tangent_vectors(dirs), tol=1e-9) == len(dirs)
    assert len(dirs) == _oracle_manifold_dimension(rho, spec, sel)
    if all(m == 1 for m in free):
        assert len(dirs) == dfm_dimension(spec_d)
    for d in dirs:
        assert np.allclose(d, d.conj().T) and abs(np.trace(d)) < 1e-12


@pytest.mark.parametrize("kept, free", [(r[0], r[1]) for r in TABLE_N4 if r[2] > 0])
def test_tangent_directions_freeze_preserved_eigenvalues(rng, kept, free):
    rho = density_with_spectrum(rng, _spectrum_for(kept, free))
    spec = spectral_blocks(rho, 1e-9)
    sel = BlockSelection(range(len(kept)))
    pos = sel.index_positions(spec)
    eps = 1e-5
    for d in multiplicity_preserving_tangent(rho, spec, sel):
        plus = np.linalg.eigvalsh(rho + eps * d)[::-1][pos]
        minus = np.linalg.eigvalsh(rho - eps * d)[::-1][pos]
        assert np.max(np.abs(plus - minus)) / (2 * eps) <= 1e-6


def test_discrepancy_case_reports_both_counts():
    spec = DfmSpec((1,), (3,))
    assert dfm_dimension(spec) == 8
    assert tangent_dimension(spec) == 6


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 7), st.data())
def test_dimension_bounds(n, data):
    kept_sum = data.draw(st.integers(1, n))
    kept = data.draw(st.sampled_from(list(partitions(kept_sum))))
    free = data.draw(st.sampled_from(list(partitions(n - kept_sum))))
    spec = DfmSpec(kept, free)
    leaf = n * n - sum(m * m for m in kept + free)
    assert leaf <= tangent_dimension(spec) <= n * n - 1
    assert tangent_dimension(spec) <= dfm_dimension(spec)
    if all(m == 1 for m in free):
        assert tangent_dimension(spec) == dfm_dimension(spec)
    else:
        assert tangent_dimension(spec) < dfm_dimension(spec)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=5), st.randoms(use_true_random=False))
def test_stratum_leaf_gap_and_permutation_invariance(mu, rnd):
    sig = MultiplicitySignature(mu)
    n = sig.n
    assert (n * n - stratum_codimension(sig)) - isospectral_leaf_dimension(sig) == sig.d - 1
    split = rnd.randint(1, len(mu))
    kept, free = list(mu[:split]), list(mu[split:])
    shuffled_k, shuffled_f = kept[:], free[:]
    rnd.shuffle(shuffled_k)
    rnd.shuffle(shuffled_f)
    assert dfm_dimension(DfmSpec(kept, free)) == dfm_dimension(DfmSpec(shuffled_k, shuffled_f))


@pytest.mark.parametrize("n", range(2, 7))
def test_equal_fixed_eigenvalues_with_one_free(n):
    # n - 1 equal fixed eigenvalues and one free simple eigenvalue.
    assert dfm_dimension(DfmSpec([n - 1], [1])) == 2 * n - 2
    # n - 1 distinct fixed eigenvalues instead.
    assert dfm_dimension(DfmSpec([1] * (n - 1), [1])) == n * n - n
