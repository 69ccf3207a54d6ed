import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from d2orient.assemble import AlignmentReport, OrientationEstimate, align_and_score, assemble_rotations
from d2orient.errors import IllConditionedWarning, InvalidParam
from d2orient.geom import KLEIN, J, conjugate_by_J
from planted import random_rotations


def rows_of(R):
    return R[:, 0, :], R[:, 1, :], R[:, 2, :]


def in_orbit(A, R):
    return any(np.allclose(A, g @ R, atol=1e-12) for g in KLEIN)


# -- assembly -------------------------------------------------------------------


def test_orthogonal_rows_pass_through():
    R = random_rotations(10, seed=0)
    out = assemble_rotations(*rows_of(R))
    assert isinstance(out, OrientationEstimate)
    assert out.ill_conditioned == []
    np.testing.assert_allclose(out.rotations, R, atol=1e-12)


def test_row_signs_land_in_the_symmetry_orbit():
    R = random_rotations(32, seed=1)
    rng = np.random.default_rng(1)
    D = rng.choice([-1.0, 1.0], (32, 3))  # every sign pattern, det +1 and -1 alike
    out = assemble_rotations(*rows_of(D[:, :, None] * R))
    for A, T in zip(out.rotations, R):
        assert np.linalg.det(A) == pytest.approx(1.0)
        assert in_orbit(A, T)


def test_negated_second_group_element_is_repaired():
    R = random_rotations(1, seed=2)
    D = -KLEIN[1]  # diag(-1, 1, 1), det -1
    out = assemble_rotations(*rows_of((D @ R[0])[None]))
    np.testing.assert_allclose(out.rotations[0], KLEIN[1] @ R[0], atol=1e-12)


def test_noisy_rows_are_projected():
    R = random_rotations(5, seed=3)
    noisy = R + 0.01 * np.random.default_rng(3).standard_normal(R.shape)
    out = assemble_rotations(*rows_of(noisy))
    for A in out.rotations:
        np.testing.assert_allclose(A.T @ A, np.eye(3), atol=1e-12)
        assert np.linalg.det(A) == pytest.approx(1.0)
    assert np.abs(out.rotations - R).max() < 0.05


def test_ill_conditioned_rows_warn():
    R = random_rotations(3, seed=4)
    r1, r2, r3 = (x.copy() for x in rows_of(R))
    r3[1] = r1[1] + 1e-6 * r3[1]
    with pytest.warns(IllConditionedWarning):
        out = assemble_rotations(r1, r2, r3)
    assert out.ill_conditioned == [1]


def test_row_shapes_checked():
    with pytest.raises(InvalidParam):
        assemble_rotations(np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((4, 3)))


# -- alignment ------------------------------------------------------------------


def test_truth_scores_zero():
    R = random_rotations(8, seed=5)
    rep = align_and_score(R, R)
    assert isinstance(rep, AlignmentReport)
    assert rep.per_image_error.max() < 1e-7
    assert not rep.j_conjugated


def test_global_rotation_and_symmetry_gauge_are_removed():
    R = random_rotations(12, seed=6)
    O0 = random_rotations(1, seed=60)[0]
    m = np.random.default_rng(6).integers(0, 4, 12)
    est = np.einsum("ab,nbc,ncd->nad", O0, KLEIN[m], R)
    rep = align_and_score(OrientationEstimate(est), R)
    assert rep.per_image_error.max() < 1e-8
    assert not rep.j_conjugated


def test_mirrored_estimate_is_recognised():
    R = random_rotations(12, seed=7)
    O0 = random_rotations(1, seed=70)[0]
    est = conjugate_by_J(O0 @ R)
    rep = align_and_score(est, R)
    assert rep.per_image_error.max() < 1e-8
    assert rep.j_conjugated


def signed_permutations():
    """Rotations that permute the coordinate axes up to sign; they normalize the symmetry group."""
    out = []
    for perm in ([0, 1, 2], [1, 2, 0], [2, 0, 1], [0, 2, 1], [2, 1, 0], [1, 0, 2]):
        for signs in np.ndindex(2, 2, 2):
            P = np.eye(3)[perm] * (1 - 2 * np.array(signs))[:, None]
            if np.linalg.det(P) > 0:
                out.append(P)
    return out


def test_report_invariant_under_gauges():
    R = random_rotations(10, seed=8)
    rng = np.random.default_rng(8)
    noisy = np.array([Rotation.from_rotvec(0.05 * v).as_matrix() @ r for v, r in zip(rng.standard_normal((10, 3)), R)])
    base = align_and_score(noisy, R).per_image_error
    m = rng.integers(0, 4, 10)
    for P in signed_permutations():
        moved = np.einsum("ab,nbc,ncd->nad", P, KLEIN[m], R)
        np.testing.assert_allclose(align_and_score(noisy, moved).per_image_error, base, atol=1e-8)
    O = random_rotations(1, seed=80)[0]
    np.testing.assert_allclose(align_and_score(O @ noisy, R).per_image_error, base, atol=1e-8)
    np.testing.assert_allclose(align_and_score(conjugate_by_J(noisy), R).per_image_error, base, atol=1e-8)


def test_errors_agree_with_independent_angle():
    R = random_rotations(10, seed=10)
    rng = np.random.default_rng(10)
    est = np.array([Rotation.from_rotvec(0.1 * rng.standard_normal(3)).as_matrix() @ r for r in R])
    rep = align_and_score(est, R)
    for e, E, T, m in zip(rep.per_image_error, est, R, rep.klein):
        ref = Rotation.from_matrix(E.T @ rep.global_rotation @ KLEIN[m] @ T).magnitude()
        assert e == pytest.approx(ref, abs=1e-9)
    assert 0 <= rep.per_image_error.min() and rep.per_image_error.max() <= np.pi
    assert rep.mean_error < 0.2


def test_report_text_and_summary():
    R = random_rotations(4, seed=11)
    rep = align_and_score(R, R)
    s = rep.summary()
    assert s["n_images"] == 4 and s["j_conjugated"] == "false"
    text = rep.to_text()
    assert text.splitlines()[0].split() == ["image", "error_deg", "g"]
    assert "mean_error_deg=" in text
    assert rep.median_error == pytest.approx(np.median(rep.per_image_error))


def test_alignment_needs_matching_shapes():
    R = random_rotations(3, seed=12)
    with pytest.raises(InvalidParam):
        align_and_score(R[:2], R)
    with pytest.raises(InvalidParam):
        align_and_score(R[:1], R[:1])


def test_J_is_the_mirror_of_the_symmetry_axes():
    np.testing.assert_array_equal(J, np.diag([1.0, 1.0, -1.0]))
