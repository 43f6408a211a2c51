import itertools

import pytest

from orthowave.sparsegrid import (
    MultiIndex,
    anisotropic_count,
    block_pairs,
    cardinality_formula,
    enumerate_sparse,
    from_table_level,
    level_vectors,
)


def brute_force_count(d, k):
    """Count (level, translation) tuples one by one."""
    per_level = [12] + [6 * 2**j for j in range(1, k + 1)]
    total = 0
    for levels in itertools.product(range(k + 1), repeat=d):
        if sum(levels) <= k:
            for _ in itertools.product(*[range(per_level[m]) for m in levels]):
                total += 1
    return total


def test_examples():
    assert enumerate_sparse(1, 0).total_count == 12
    assert enumerate_sparse(2, 1).total_count == 432
    assert from_table_level(3, 2).total_count == 6912
    assert cardinality_formula(2, 1) == 432
    assert cardinality_formula(2, 3) == 2880
    assert cardinality_formula(3, 2) == 22464
    assert anisotropic_count(2, 1) == 144
    assert anisotropic_count(1, 3) == 48
    assert anisotropic_count(3, 2) == 13824


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("k", range(1, 9))
def test_closed_forms(d, k):
    assert enumerate_sparse(d, k).total_count == cardinality_formula(d, k)


@pytest.mark.parametrize("k", range(0, 4))
def test_five_dimensions_by_brute_force(k):
    n = brute_force_count(5, k)
    assert enumerate_sparse(5, k).total_count == n
    assert cardinality_formula(5, k) == n


@pytest.mark.parametrize("d,k", [(2, 2), (3, 1), (1, 4)])
def test_small_sets_by_brute_force(d, k):
    s = enumerate_sparse(d, k)
    assert s.total_count == brute_force_count(d, k)
    idx = list(s.indices())
    assert len(idx) == len(set(idx)) == s.total_count
    assert all(s.contains(i) for i in idx)


def test_table_column():
    assert [from_table_level(2, k).total_count for k in range(7)] == [36, 144, 432, 1152, 2880, 6912, 16128]
    assert from_table_level(4, 1).total_count == 20736


def test_nesting():
    small = enumerate_sparse(3, 2)
    big = enumerate_sparse(3, 3)
    assert set(small.blocks) < set(big.blocks)
    assert all(big.contains(i) for i in small.indices())


def test_membership_rule():
    s = enumerate_sparse(2, 2)
    assert s.contains(MultiIndex(((1, 3), (1, 12))))
    assert not s.contains(MultiIndex(((2, 3), (1, 12))))
    assert not s.contains(MultiIndex(((0, 0), (0, 0), (0, 0))))
    with pytest.raises(ValueError):
        MultiIndex(((1, 13),))
    with pytest.raises(ValueError):
        MultiIndex(((0, -6),))


def test_lexicographic_blocks():
    assert level_vectors(2, 1) == [(0, 0), (0, 1), (1, 0)]
    s = enumerate_sparse(3, 3)
    assert list(s.blocks) == sorted(s.blocks)
    assert s.offsets[-1] == sum(s.block_size(m) for m in s.blocks)


def test_block_pairs():
    assert len(list(block_pairs(enumerate_sparse(1, 1)))) == 4
    assert len(list(block_pairs(enumerate_sparse(2, 1)))) == 9
    s = enumerate_sparse(3, 2)
    assert len(list(block_pairs(s))) == len(s.blocks) ** 2


def test_errors():
    with pytest.raises(ValueError):
        cardinality_formula(6, 1)
    with pytest.raises(ValueError):
        level_vectors(0, 1)
    with pytest.raises(ValueError):
        from_table_level(2, -1)
