from math import comb

import numpy as np
import pytest

from d2orient import signsync
from d2orient.errors import InvalidParam
from d2orient.geom import rotation_about
from d2orient.linalg import power_iteration
from d2orient.pairs import pair_list
from d2orient.signsync import adjust_signs, build_Hn, build_S, estimate_self_products
from planted import planted_color_sets, random_rotations


def unit_rows(N, seed):
    v = np.random.default_rng(seed).standard_normal((N, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def signed_set(v, rng):
    """Blocks ``s_ij v_i^T v_j`` with random planted signs."""
    s = {k: float(rng.choice([-1.0, 1.0])) for k in pair_list(len(v))}
    return {(i, j): s[(i, j)] * np.outer(v[i], v[j]) for i, j in s}, s


def svals(M):
    return np.linalg.svd(M, compute_uv=False)


def up_to_sign(a, b, atol):
    return np.allclose(a, b, atol=atol) or np.allclose(a, -b, atol=atol)


# -- self products --------------------------------------------------------------


def test_self_products_clean_are_exact():
    v = unit_rows(7, 0)
    cset, _ = signed_set(v, np.random.default_rng(0))
    P = estimate_self_products(cset)
    for i in range(7):
        np.testing.assert_allclose(P[i], np.outer(v[i], v[i]), atol=1e-12)
        np.testing.assert_allclose(P[i], P[i].T, atol=0)
        assert np.trace(P[i]) == pytest.approx(1.0, abs=1e-12)
        s = svals(P[i])
        assert s[1] < 1e-10
        assert np.linalg.eigvalsh(P[i]).min() > -1e-12


def test_self_products_need_three_images():
    with pytest.raises(InvalidParam):
        estimate_self_products({(0, 1): np.eye(3)}, 2)


def test_self_products_noisy_axes():
    N = 50
    rng = np.random.default_rng(1)
    v = unit_rows(N, 1)

    def jitter(x):
        return rotation_about(rng.standard_normal(3), np.radians(5)) @ x

    cset = {(i, j): rng.choice([-1.0, 1.0]) * np.outer(jitter(v[i]), jitter(v[j])) for i, j in pair_list(N)}
    P = estimate_self_products(cset)
    axes = np.array([np.linalg.eigh(p)[1][:, -1] for p in P])
    err = np.degrees(np.arccos(np.clip(np.abs(np.sum(axes * v, axis=1)), 0, 1)))
    assert np.mean(err <= 10) >= 0.95


# -- per-anchor block matrices --------------------------------------------------


def test_Hn_is_rank_one_with_anchor_signs():
    N = 8
    v = unit_rows(N, 2)
    cset, s = signed_set(v, np.random.default_rng(2))
    selfp = estimate_self_products(cset)

    def sign(i, j):
        return 1.0 if i == j else s[(min(i, j), max(i, j))]

    for n in range(N):
        H = build_Hn(cset, selfp, n)
        sv = svals(H)
        assert sv[1] < 1e-10 * sv[0]
        for i, j in pair_list(N):
            block = H[3 * i : 3 * i + 3, 3 * j : 3 * j + 3]
            np.testing.assert_allclose(block, sign(i, n) * sign(n, j) * np.outer(v[i], v[j]), atol=1e-12)


def test_Hn_three_images_all_positive():
    v = unit_rows(3, 3)
    cset = {(i, j): np.outer(v[i], v[j]) for i, j in pair_list(3)}
    H = build_Hn(cset, estimate_self_products(cset), 0)
    np.testing.assert_allclose(H, np.outer(v.ravel(), v.ravel()), atol=1e-12)


def test_Hn_rejects_bad_anchor():
    v = unit_rows(4, 4)
    cset = {(i, j): np.outer(v[i], v[j]) for i, j in pair_list(4)}
    with pytest.raises(InvalidParam):
        build_Hn(cset, estimate_self_products(cset), 4)


def test_inconsistent_signs_break_rank_one():
    rng = np.random.default_rng(5)
    for trial in range(20):
        v = unit_rows(6, 10 + trial)
        cset = {(i, j): np.outer(v[i], v[j]) for i, j in pair_list(6)}
        cset[(1, 2)] = -cset[(1, 2)]  # no per-image sign choice produces this
        H = signsync._assemble(cset, np.array([np.outer(x, x) for x in v]))
        sv = svals(H)
        assert sv[1] > 0.1 * sv[0]


# -- pair-sign matrix and the full chain ----------------------------------------


@pytest.fixture(scope="module")
def planted10():
    N = 10
    v = unit_rows(N, 6)
    cset, s = signed_set(v, np.random.default_rng(6))
    return v, cset, s, adjust_signs(cset)


def gauge_signs(v, anchors):
    """Per-image sign with which each anchor returned its own row."""
    own = anchors[np.arange(len(v)), np.arange(len(v))]
    return np.sign(np.sum(own * v, axis=1))


def test_S_matches_gauge_products(planted10):
    v, cset, s, res = planted10
    N = len(v)
    eps = gauge_signs(v, res.anchor_rows)
    t = np.array([eps[i] * eps[j] * s[(i, j)] for i, j in pair_list(N)])
    S = build_S(res.anchor_rows)
    pairs = pair_list(N)
    for a, p in enumerate(pairs):
        for b, q in enumerate(pairs):
            if len(set(p) & set(q)) == 1:
                assert S[a, b] == t[a] * t[b]
            else:
                assert S[a, b] == 0
    np.testing.assert_allclose(S @ t, 2 * (N - 2) * t, atol=1e-8)
    w = np.sort(np.linalg.eigvalsh(S))[::-1]
    assert w[0] == pytest.approx(2 * (N - 2), abs=1e-8)
    assert w[0] - w[1] > 1.0
    # the leading eigenvector agrees with t up to one sign and is flat in magnitude
    _, u = power_iteration(S)
    assert np.array_equal(np.sign(u), t) or np.array_equal(np.sign(u), -t)
    np.testing.assert_allclose(np.abs(u) * np.sqrt(comb(N, 2)), 1.0, atol=1e-8)
    np.testing.assert_array_equal(res.pair_signs, t)


def test_rows_recovered_up_to_image_signs(planted10):
    v, cset, _, res = planted10
    assert res.degenerate_dots == 0
    np.testing.assert_allclose(np.linalg.norm(res.rows, axis=1), 1.0, atol=1e-8)
    for i in range(len(v)):
        assert up_to_sign(res.rows[i], v[i], 1e-8)
    # the signs are those the anchors picked for themselves
    eps = gauge_signs(v, res.anchor_rows)
    np.testing.assert_allclose(res.rows * eps[:, None], v, atol=1e-8)


def test_consistent_set_gives_one_global_sign():
    v = unit_rows(9, 7)
    cset = {(i, j): np.outer(v[i], v[j]) for i, j in pair_list(9)}
    res = adjust_signs(cset)
    for i, j in pair_list(9):
        np.testing.assert_allclose(
            res.pair_signs[pair_list(9).index((i, j))] * cset[(i, j)], np.outer(res.rows[i], res.rows[j]), atol=1e-8
        )


def test_sign_adjusted_matrix_is_rank_one(planted10):
    v, cset, _, res = planted10
    tilde = {k: c * cset[k] for k, c in zip(pair_list(len(v)), res.pair_signs)}
    sv = svals(signsync._assemble(tilde, estimate_self_products(cset)))
    assert sv[1] < 1e-10 * sv[0]
    assert res.top_eigenvalue == pytest.approx(len(v), abs=1e-8)


def test_rotation_rows_color_classes():
    R = random_rotations(6, seed=8)
    for c, cset in enumerate(planted_color_sets(R)):
        res = adjust_signs(cset)
        for i in range(6):
            assert up_to_sign(res.rows[i], R[i][c], 1e-8)


def test_threads_do_not_change_the_result(planted10):
    _, cset, _, res = planted10
    other = adjust_signs(cset, threads=3)
    np.testing.assert_array_equal(other.rows, res.rows)


def test_adjust_signs_needs_four_images():
    v = unit_rows(3, 9)
    with pytest.raises(InvalidParam):
        adjust_signs({(i, j): np.outer(v[i], v[j]) for i, j in pair_list(3)})


def test_degenerate_dots_are_zeroed():
    V = np.zeros((4, 4, 3))
    V[..., 0] = 1.0
    V[1, 2] = [0.0, 1.0, 0.0]  # anchor 1 sees row 2 orthogonal to everyone else's view
    with pytest.warns(signsync.DegenerateDotWarning):
        S, count = build_S(V, return_degenerate=True)
    assert count > 0
    np.testing.assert_array_equal(S, S.T)
