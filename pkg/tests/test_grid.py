import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d2orient.errors import AllDegenerate, DegenerateViewPair, FileFormatError, InvalidParam
from d2orient.geom import KLEIN, common_line_coords, is_rotation, self_common_line_coords
from d2orient.grid import (
    TABLE_MAGIC,
    admissible_direction_pairs,
    build_candidate_tables,
    cached_candidate_table,
    grid_spacing,
    inplane_rotations,
    load_table,
    quantize,
    save_table,
    sphere_grid,
    table_cache_path,
)


def circular_gap(a, b):
    return np.abs(np.angle(np.exp(1j * (np.asarray(a) - np.asarray(b)))))


def pairwise_angles(Z):
    return np.arccos(np.clip(Z @ Z.T, -1, 1))


@pytest.fixture(scope="module")
def table50():
    return build_candidate_tables(K=50, L=4, L_rays=360)


# -- sphere grid ----------------------------------------------------------------


def test_sphere_grid_rejects_tiny_K():
    with pytest.raises(InvalidParam):
        sphere_grid(1)


def test_sphere_grid_two_points_are_the_poles():
    np.testing.assert_allclose(sphere_grid(2), [[0, 0, -1], [0, 0, 1]], atol=1e-15)


def test_sphere_grid_1200_unit_norm_and_deterministic():
    Z = sphere_grid(1200)
    assert Z.shape == (1200, 3)
    np.testing.assert_allclose(np.linalg.norm(Z, axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(Z, sphere_grid(1200))


@pytest.mark.xfail(strict=True, reason="pole-to-neighbour gap of the standard spiral is 0.57x the mean spacing")
def test_sphere_grid_100_min_separation_whole_grid():
    A = pairwise_angles(sphere_grid(100))
    np.fill_diagonal(A, np.inf)
    assert A.min() >= 0.7 * grid_spacing(100)


def test_sphere_grid_100_min_separation_away_from_poles():
    A = pairwise_angles(sphere_grid(100))[1:-1, 1:-1]
    np.fill_diagonal(A, np.inf)
    assert A.min() >= 0.7 * grid_spacing(100)


@pytest.mark.parametrize("K", [3, 10, 200, 1200])
def test_sphere_grid_points_are_distinct(K):
    A = pairwise_angles(sphere_grid(K))
    np.fill_diagonal(A, np.inf)
    assert A.min() > 0


# -- in-plane rotations ---------------------------------------------------------


def test_inplane_rotations_at_pole_use_fallback_frame():
    Q = inplane_rotations(np.array([0.0, 0.0, 1.0]), 4)
    assert len(Q) == 4
    for R in Q:
        assert is_rotation(R)
        np.testing.assert_array_equal(R[:, 2], [0, 0, 1])
    np.testing.assert_allclose(Q[0][:, 0], [1, 0, 0], atol=1e-15)


def test_inplane_rotations_single_angle_is_tangent_frame():
    z = np.array([0.0, 0.6, 0.8])
    (Q,) = inplane_rotations(z, 1)
    np.testing.assert_allclose(Q[:, 0], [-1.0, 0.0, 0.0], atol=1e-15)  # normalized (-b, a, 0)
    np.testing.assert_allclose(Q[:, 1], np.cross(z, Q[:, 0]), atol=1e-15)
    assert is_rotation(Q)


@settings(max_examples=100, deadline=None)
@given(st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1), st.integers(1, 40))
def test_inplane_rotations_keep_the_beaming_direction(v, L):
    z = np.asarray(v) / np.linalg.norm(v)
    Q = inplane_rotations(z, L)
    assert Q.shape == (L, 3, 3)
    np.testing.assert_array_equal(Q[:, :, 2], np.broadcast_to(z, (L, 3)))
    assert all(is_rotation(R, atol=1e-12) for R in Q)


def test_inplane_rotations_reject_zero_L():
    with pytest.raises(InvalidParam):
        inplane_rotations(np.array([0, 0, 1.0]), 0)


# -- candidate tables -----------------------------------------------------------


@pytest.mark.xfail(strict=True, reason="the two K=2 directions are antipodal, hence degenerate")
def test_smallest_table_has_one_pair():
    assert build_candidate_tables(K=2, L=1, L_rays=360).n_pairs == 1


def test_smallest_table_is_empty_but_well_formed():
    t = build_candidate_tables(K=2, L=1, L_rays=360)
    assert t.n_pairs == 0
    assert t.rotations.shape == (2, 3, 3)


@pytest.mark.parametrize("L_rays, L", [(361, 1), (360, 7), (0, 1)])
def test_build_rejects_bad_ray_counts(L_rays, L):
    with pytest.raises(InvalidParam):
        build_candidate_tables(K=10, L=L, L_rays=L_rays)


def test_rotation_count_and_invariants(table50):
    t = table50
    assert t.rotations.shape == (t.K * t.L, 3, 3)
    assert all(is_rotation(R) for R in t.rotations)
    for k in range(t.K):
        for l in range(t.L):
            np.testing.assert_array_equal(t.rotation(k, l)[:, 2], t.directions[k])


def test_admissible_pairs_match_symmetric_brute_force(table50):
    Z = table50.directions
    eps = table50.eps_align
    expected = set()
    for a in range(len(Z)):
        for b in range(len(Z)):
            if a == b:
                continue
            ok_ab = all(abs(Z[a] @ g @ Z[b]) < np.cos(eps) for g in KLEIN)
            ok_ba = all(abs(Z[b] @ g @ Z[a]) < np.cos(eps) for g in KLEIN)
            assert ok_ab == ok_ba
            if ok_ab and a < b:
                expected.add((a, b))
    got = {tuple(p) for p in admissible_direction_pairs(Z, eps).tolist()}
    assert got == expected
    assert {tuple(p) for p in table50.pair_dirs.tolist()} == expected


def test_table_round_trips_against_exact_geometry(table50):
    t = table50
    step = 2 * np.pi / t.L_rays
    for p, (k1, k2) in enumerate(t.pair_dirs):
        for l1 in range(t.L):
            for l2 in range(t.L):
                exact = np.array(common_line_coords(t.rotation(k1, l1), t.rotation(k2, l2), t.eps_align))
                coords = t.pair_coords(p, l1, l2)
                assert circular_gap(coords * step, exact).max() <= step / 2 + 1e-9


def test_self_coords_round_trip(table50):
    t = table50
    step = 2 * np.pi / t.L_rays
    for k in range(t.K):
        for l in range(t.L):
            try:
                exact = self_common_line_coords(t.rotation(k, l), t.eps_align)
            except AllDegenerate:
                exact = [None] * 3
            got = t.self_coords(k, l)
            for m in range(3):
                if exact[m] is None:
                    assert (got[m] == -1).all()
                else:
                    assert circular_gap(got[m] * step, np.array(exact[m])).max() <= step / 2 + 1e-9


def test_candidate_quadruple_is_grid_relative_rotation(table50):
    t = table50
    p = len(t.pair_dirs) // 2
    k1, k2 = t.pair_dirs[p]
    quad = t.candidate_quadruple(p, 1, 3)
    Ql, Qr = t.rotation(k1, 1), t.rotation(k2, 3)
    for m in range(4):
        np.testing.assert_allclose(quad[m], Ql.T @ KLEIN[m] @ Qr, atol=1e-15)


def test_degenerate_grid_pairs_are_excluded(table50):
    t = table50
    listed = {tuple(p) for p in t.pair_dirs.tolist()}
    for a in range(t.K):
        for b in range(a + 1, t.K):
            if (a, b) in listed:
                continue
            with pytest.raises(DegenerateViewPair):
                common_line_coords(t.rotation(a, 0), t.rotation(b, 0), t.eps_align)


def test_quantization_error_bound_full_size(full_table):
    t = full_table
    step = 2 * np.pi / 360
    assert circular_gap(t.pair_base * step, t.pair_angles).max() <= np.pi / 360 + 1e-12
    present = ~np.isnan(t.self_angles)
    assert circular_gap(t.self_base[present] * step, t.self_angles[present]).max() <= np.pi / 360 + 1e-12


def test_quantize_wraps_to_zero():
    assert quantize(2 * np.pi - 1e-9, 360) == 0
    assert quantize(np.pi, 360) == 180


# -- binary cache ---------------------------------------------------------------


def test_save_load_round_trip(tmp_path, table50):
    path = tmp_path / "t.bin"
    save_table(table50, path)
    raw = path.read_bytes()
    assert raw[:6] == TABLE_MAGIC
    assert np.frombuffer(raw[6:18], "<u4").tolist() == [50, 4, 360]
    assert np.frombuffer(raw[18:26], "<f8")[0] == table50.eps_align
    back = load_table(path)
    for name in ("pair_dirs", "pair_angles", "pair_base", "self_base", "rotations"):
        np.testing.assert_array_equal(getattr(back, name), getattr(table50, name))


def test_load_rejects_garbage(tmp_path, table50):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOTATABLE" * 4)
    with pytest.raises(FileFormatError):
        load_table(bad)
    save_table(table50, bad)
    bad.write_bytes(bad.read_bytes()[:-8])
    with pytest.raises(FileFormatError):
        load_table(bad)


def test_cache_written_once_and_keyed_by_parameters(tmp_path):
    t1 = cached_candidate_table(20, 4, 360, 0.017, tmp_path)
    path = table_cache_path(tmp_path, 20, 4, 360, 0.017)
    assert path.exists()
    stamp = path.stat().st_mtime_ns
    t2 = cached_candidate_table(20, 4, 360, 0.017, tmp_path)
    assert path.stat().st_mtime_ns == stamp
    np.testing.assert_array_equal(t1.pair_base, t2.pair_base)
    assert table_cache_path(tmp_path, 20, 4, 360, 0.02) != path
