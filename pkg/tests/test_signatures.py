import numpy as np
import pytest

from cdnoma import signatures as sg


@pytest.mark.parametrize("N", [1, 2, 3, 4, 6, 8, 16])
def test_orthogonal_sets(N):
    s = sg.orthogonal_set(N)
    np.testing.assert_allclose(s.gram(), N * np.eye(N), atol=1e-9)
    assert s.is_orthogonal()
    assert len(s) == N and s.N == N


def test_hadamard_entries_are_pm1():
    v = sg.orthogonal_set(8).vectors
    assert set(np.unique(v.real)) == {-1.0, 1.0}


def test_random_and_sparse_norms(rng):
    r = sg.random_pm1_set(4, 50, rng)
    np.testing.assert_allclose(np.sum(np.abs(r.vectors) ** 2, 1), 4)
    s = sg.sparse_set(4, 50, rng)
    np.testing.assert_allclose(np.sum(np.abs(s.vectors) ** 2, 1), 4)
    assert np.all(np.count_nonzero(s.vectors, axis=1) == 1)
    # sparse signatures are pairwise orthogonal or identical
    G = np.abs(s.gram())
    assert np.all((G < 1e-12) | (np.abs(G - 4) < 1e-12))


def test_make_set_contract(rng):
    assert sg.make_set("orthogonal", 4).kind == "orthogonal"
    assert len(sg.make_set("random", 4, 7, rng)) == 7
    with pytest.raises(ValueError):
        sg.make_set("random", 4, 7)
    with pytest.raises(ValueError):
        sg.make_set("chaotic", 4, 7, rng)
    with pytest.raises(ValueError):
        sg.orthogonal_set(0)


def test_assignments(rng):
    np.testing.assert_array_equal(sg.cyclic_assignment(2, 5, 3), [[0, 1, 2, 0, 1]] * 2)
    np.testing.assert_array_equal(sg.distinct_assignment(2, 3), [[0, 1, 2], [3, 4, 5]])
    a = sg.random_assignment(3, 10, 4, rng)
    assert a.shape == (3, 10) and a.min() >= 0 and a.max() < 4


def test_grouped_assignment_distinct_within_groups():
    groups = [[[0, 5], [1, 2], [3, 4]], [[2, 4], [0, 1], [3, 5]]]
    a = sg.grouped_assignment(groups, 6, 2)
    for l, gs in enumerate(groups):
        for g in gs:
            assert sorted(a[l, g]) == [0, 1]
    with pytest.raises(ValueError):
        sg.grouped_assignment([[[0, 1]]], 3, 2)


def test_co_signature_index():
    a = np.array([[0, 1, 0], [1, 0, 1]])
    assert sg.co_signature_index(a, 0, 0) == {(0, 2), (1, 1)}
    assert (0, 0) in sg.co_signature_index(a, 0, 0, include_self=True)
    s = sg.orthogonal_set(2).with_assignment(a)
    assert sg.co_signature_index(s, 1, 0) == {(0, 1), (1, 2)}


def test_assigned_vectors_and_errors():
    s = sg.orthogonal_set(4)
    with pytest.raises(ValueError):
        s.assigned()
    with pytest.raises(ValueError):
        s.with_assignment([[0, 4]])
    u = s.with_assignment([[0, 3]]).assigned()
    assert u.shape == (1, 2, 4)
    np.testing.assert_array_equal(u[0, 1], s.vectors[3])


def test_csv_roundtrip(tmp_path, rng):
    s = sg.random_pm1_set(4, 6, rng).with_assignment(sg.distinct_assignment(2, 3))
    p = tmp_path / "sig.csv"
    sg.write_csv(p, s)
    back = sg.read_csv(p, "random")
    np.testing.assert_array_equal(back.vectors, s.vectors)
    np.testing.assert_array_equal(back.assignment, s.assignment)
