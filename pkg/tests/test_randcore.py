import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satkit import randcore as rc
from satkit.errors import InvalidArgumentError, PreconditionError


def test_sample_gaussian_deterministic():
    s = rc.SeedStream(987, 3)
    a = rc.sample_gaussian(5, 7, 0.5, s)
    b = rc.sample_gaussian(5, 7, 0.5, s)
    assert np.array_equal(a.entries, b.entries)


def test_sample_gaussian_streams_disjoint():
    base = rc.SeedStream(987, 3)
    a = rc.sample_gaussian(5, 7, 0.5, base.substream(0))
    b = rc.sample_gaussian(5, 7, 0.5, base.substream(1))
    assert not np.array_equal(a.entries, b.entries)


def test_sample_gaussian_tiny_variance():
    for i in range(100):
        a = rc.sample_gaussian(3, 3, 1e-20, rc.SeedStream(1, i))
        assert np.max(np.abs(a.entries)) < 1e-8


def test_sample_gaussian_moments():
    hits = 0
    for i in range(100):
        a = rc.sample_gaussian(2000, 1, 1.0, rc.SeedStream(5, i)).entries
        if -0.08 < a.mean() < 0.08 and 0.9 < a.var() < 1.1:
            hits += 1
    assert hits >= 95


def test_sample_gaussian_rejects_bad_args():
    with pytest.raises(InvalidArgumentError):
        rc.sample_gaussian(0, 3, 1.0, rc.SeedStream(0))
    with pytest.raises(InvalidArgumentError):
        rc.sample_gaussian(3, 3, 0.0, rc.SeedStream(0))


def test_haar_rotation_n1():
    vals = {round(rc.haar_rotation(1, rc.SeedStream(0, i)).entries[0, 0], 12)
            for i in range(50)}
    assert vals <= {1.0, -1.0}
    assert len(vals) == 2  # both components of O(1) occur


def test_haar_rotation_orthogonal():
    u = rc.haar_rotation(5, rc.SeedStream(11))
    assert np.max(np.abs(u.entries.T @ u.entries - np.eye(5))) < 1e-10


def test_haar_trace_centered():
    traces = [np.trace(rc.haar_rotation(3, rc.SeedStream(2, i)).entries)
              for i in range(2000)]
    assert -0.15 < np.mean(traces) < 0.15


def test_haar_left_invariance_statistic():
    # the distribution of the top-left entry is symmetric under a fixed
    # orthogonal change of frame; compare first-moment statistics
    fixed = rc.haar_rotation(4, rc.SeedStream(123)).entries
    plain, rotated = [], []
    for i in range(1500):
        u = rc.haar_rotation(4, rc.SeedStream(3, i)).entries
        plain.append(u[0, 0])
        rotated.append((fixed @ u)[0, 0])
    assert abs(np.mean(plain) - np.mean(rotated)) < 0.05
    assert abs(np.std(plain) - np.std(rotated)) < 0.05


def test_rotation_stats_identity():
    st_ = rc.rotation_stats(rc.LinearMap.from_array(np.eye(6)))
    assert st_.alpha == 0.0
    assert st_.hs_dist_to_identity == 0.0
    assert not st_.sign_flipped


def test_rotation_stats_reflection():
    u = rc.LinearMap.from_array(np.diag([1.0, -1.0]))
    st_ = rc.rotation_stats(u)
    assert st_.trace == 0.0
    assert st_.alpha == 1.0
    assert st_.hs_dist_to_identity == 2.0


def test_rotation_stats_sign_flip():
    u = rc.LinearMap.from_array(-np.eye(4))
    st_ = rc.rotation_stats(u)
    assert st_.sign_flipped
    assert st_.alpha == 0.0


def test_rotation_stats_hs_identity():
    for i in range(20):
        n = 3 + i % 5
        u = rc.haar_rotation(n, rc.SeedStream(7, i))
        st_ = rc.rotation_stats(u)
        assert abs(st_.hs_dist_to_identity ** 2 - 2 * n * st_.alpha) < 1e-9


def test_rotation_stats_rejects_nonorthogonal():
    with pytest.raises(PreconditionError):
        rc.rotation_stats(rc.LinearMap.from_array(np.ones((3, 3))))


def test_singular_values_identity_and_diag():
    assert np.allclose(rc.singular_values(rc.LinearMap.from_array(np.eye(3))),
                       [1, 1, 1])
    sv = rc.singular_values(rc.LinearMap.from_array(np.diag([3.0, 4.0])))
    assert np.allclose(sv, [4.0, 3.0])


def test_singular_values_rotation_invariance():
    a = rc.sample_gaussian(6, 4, 1.0, rc.SeedStream(9))
    u = rc.haar_rotation(6, rc.SeedStream(10)).entries
    v = rc.haar_rotation(4, rc.SeedStream(12)).entries
    sv1 = rc.singular_values(a)
    sv2 = rc.singular_values(rc.LinearMap.from_array(u @ a.entries @ v))
    assert np.max(np.abs(sv1 - sv2)) < 1e-9


def test_singular_window_frequency():
    # two-sided disc window at the block scale used by the trial events
    m, k, n = 128, 4, 256
    lo, hi = 0.5 * math.sqrt(m / n), 2.0 * math.sqrt(m / n)
    good = 0
    for i in range(500):
        a = rc.sample_gaussian(m, k, 1.0 / n, rc.SeedStream(21, i))
        sv = rc.singular_values(a)
        good += bool(sv[-1] >= lo and sv[0] <= hi)
    bound = 1.0 - math.exp(-m / 32) - math.exp(-9 * m / 32) - 0.05
    assert good / 500 >= bound


def test_project_coordinate():
    s = rc.Subspace.coordinate(3, [0])
    assert np.allclose(rc.project(s, np.array([2.0, 5.0, 7.0])), [2, 0, 0])


def test_project_idempotent_contractive():
    for i in range(10):
        s = rc.haar_subspace(6, 2, rc.SeedStream(31, i))
        x = rc.SeedStream(32, i).rng().standard_normal(6)
        px = rc.project(s, x)
        assert np.max(np.abs(rc.project(s, px) - px)) < 1e-12
        assert np.linalg.norm(px) <= np.linalg.norm(x) + 1e-12


def test_subspace_sum_coordinates():
    s1 = rc.Subspace.coordinate(4, [0])
    s2 = rc.Subspace.coordinate(4, [1])
    s = rc.subspace_sum(s1, s2)
    assert s.dim == 2
    for v in (np.eye(4)[0], np.eye(4)[1]):
        assert np.linalg.norm(rc.project(s, v) - v) < 1e-12


def test_subspace_sum_idempotent():
    s1 = rc.haar_subspace(5, 2, rc.SeedStream(41))
    assert rc.subspace_sum(s1, s1).dim == 2


def test_subspace_sum_generic_dimension():
    k, n = 3, 50
    for i in range(200):
        stream = rc.SeedStream(51, i)
        a = rc.sample_gaussian(n, k, 1.0 / n, stream)
        e = rc.Subspace.from_span(a.entries)
        u = rc.haar_rotation(n, stream.substream(1))
        ue = rc.Subspace(n, u.entries @ e.frame)
        assert rc.subspace_sum(e, ue).dim == 2 * k


def test_subspace_validation():
    with pytest.raises(PreconditionError):
        rc.Subspace(3, np.ones((3, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 62),
       st.integers(min_value=0, max_value=10_000))
def test_seedstream_reproducible(seed, idx):
    a = rc.SeedStream(seed, idx).rng().standard_normal(4)
    b = rc.SeedStream(seed, idx).rng().standard_normal(4)
    assert np.array_equal(a, b)
