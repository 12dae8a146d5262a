"""Tests for the single-particle scattering module."""

import dataclasses
import json
import math

import numpy as np
import pytest

from chiralcas import scatterers as sc
from chiralcas import wavebasis as wb

XI = 0.8


def tilted_params(**kw):
    kw.setdefault("axis", (0.3, -0.4, 0.85))
    return sc.OmegaParams(**kw)


def reality_partner(basis, mat):
    """(-1)^(m_a+m_b) conj(T[abar, bbar]) for every entry."""
    n = len(basis)
    out = np.empty((n, n), dtype=complex)
    for a in range(n):
        abar = basis.index(basis.l[a], -basis.m[a], basis.pol[a])
        for b in range(n):
            bbar = basis.index(basis.l[b], -basis.m[b], basis.pol[b])
            sign = (-1.0) ** (basis.m[a] + basis.m[b])
            out[a, b] = sign * np.conj(mat[abar, bbar])
    return out


def random_physical_tmatrix(l_max, xi, seed):
    """Synthetic dense T-matrix obeying the reality symmetry."""
    rng = np.random.default_rng(seed)
    basis = wb.multipole_basis(l_max)
    n = len(basis)
    raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    mat = 0.5 * (raw + reality_partner(basis, raw))
    return sc.TMatrix(xi=xi, basis=basis, matrix=mat)


def rotate_alpha(alpha, rot):
    q = np.zeros((6, 6))
    q[:3, :3] = rot
    q[3:, 3:] = rot
    return q @ alpha @ q.T


# ----------------------------------------------------------------------------
# polarizability model
# ----------------------------------------------------------------------------

def test_polarizability_static_limits():
    p = sc.OmegaParams()
    al = sc.omega_polarizability(p, 0.0)
    np.testing.assert_allclose(al[:3, 3:], 0.0, atol=1e-15)
    np.testing.assert_allclose(al[3:, :3], 0.0, atol=1e-15)
    np.testing.assert_allclose(al[3:, 3:], -p.a_s * np.diag([0.0, 0.0, 1.0]),
                               atol=1e-15)
    np.testing.assert_allclose(
        al[:3, :3], np.diag([p.t_perp * p.a_e, p.t_perp * p.a_e, p.a_e]),
        atol=1e-15)


def test_polarizability_crossed_term_linear_at_low_frequency():
    p = sc.OmegaParams(handedness=-1)
    slope = p.handedness * p.a_c / p.omega0
    assert slope != 0.0
    for xi in (1e-6, 1e-4):
        al = sc.omega_polarizability(p, xi)
        np.testing.assert_allclose(al[2, 5] / xi, slope, rtol=1e-6)
    # reciprocity at finite frequency
    al = sc.omega_polarizability(p, 0.7)
    np.testing.assert_allclose(al[3:, :3], -al[:3, 3:], atol=1e-16)


def test_polarizability_magnetic_response_monotone_and_bounded():
    p = sc.OmegaParams()
    xis = np.linspace(0.0, 40.0, 200)
    vals = np.array([-sc.omega_polarizability(p, x)[5, 5] for x in xis])
    assert np.all(np.diff(vals) >= 0.0)
    assert np.all(vals <= p.a_s + p.a_m + 1e-15)
    assert vals[0] == pytest.approx(p.a_s)


def test_polarizability_handedness_flips_only_crossed_block():
    left = tilted_params(handedness=-1)
    right = dataclasses.replace(left, handedness=1)
    assert left.mirrored() == right
    for xi in (0.0, 0.3, 2.5):
        al_l = sc.omega_polarizability(left, xi)
        al_r = sc.omega_polarizability(right, xi)
        np.testing.assert_allclose(al_l[:3, :3], al_r[:3, :3], atol=1e-16)
        np.testing.assert_allclose(al_l[3:, 3:], al_r[3:, 3:], atol=1e-16)
        np.testing.assert_allclose(al_l[:3, 3:], -al_r[:3, 3:], atol=1e-16)


def test_polarizability_axis_is_a_rotation_of_the_default():
    rot = wb.axis_angle_matrix(np.array([0.2, 0.9, -0.1]), 0.9)
    axis = rot @ np.array([0.0, 0.0, 1.0])
    p0 = sc.OmegaParams()
    p1 = sc.OmegaParams(axis=tuple(axis))
    for xi in (0.4, 1.7):
        expected = rotate_alpha(sc.omega_polarizability(p0, xi), rot)
        np.testing.assert_allclose(sc.omega_polarizability(p1, xi), expected,
                                   atol=1e-15)


def test_polarizability_parameter_validation():
    with pytest.raises(ValueError):
        sc.OmegaParams(a_c=0.5)  # violates a_c^2 <= a_e a_m
    with pytest.raises(ValueError):
        sc.OmegaParams(handedness=0)
    with pytest.raises(ValueError):
        sc.OmegaParams(t_perp=1.5)
    with pytest.raises(ValueError):
        sc.OmegaParams(axis=(0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        sc.OmegaParams(a_e=-1.0)
    with pytest.raises(ValueError):
        sc.omega_polarizability(sc.OmegaParams(), -0.1)


# ----------------------------------------------------------------------------
# T-matrix construction
# ----------------------------------------------------------------------------

def test_tmatrix_zero_polarizability_is_zero():
    t = sc.tmatrix_from_polarizability(np.zeros((6, 6)), XI, l_max=2)
    assert t.l_max == 2
    np.testing.assert_allclose(t.matrix, 0.0, atol=1e-300)


def test_tmatrix_isotropic_electric_is_scalar_on_electric_block():
    alpha = np.zeros((6, 6))
    alpha[:3, :3] = 0.03 * np.eye(3)
    t = sc.tmatrix_from_polarizability(alpha, XI)
    basis = t.basis
    is_e = basis.pol == wb.POL_E
    block = t.matrix[np.ix_(is_e, is_e)]
    scale = np.abs(block).max()
    assert scale > 0.0
    np.testing.assert_allclose(block, block[0, 0] * np.eye(3),
                               atol=1e-13 * scale)
    np.testing.assert_allclose(t.matrix[np.ix_(~is_e, ~is_e)], 0.0,
                               atol=1e-13 * scale)
    np.testing.assert_allclose(t.matrix[np.ix_(~is_e, is_e)], 0.0,
                               atol=1e-13 * scale)


def test_tmatrix_scales_with_the_radiation_cube_of_frequency():
    alpha = sc.omega_polarizability(sc.OmegaParams(), 0.0)
    t1 = sc.tmatrix_from_polarizability(alpha, 0.6)
    t2 = sc.tmatrix_from_polarizability(alpha, 1.2)
    np.testing.assert_allclose(t2.matrix, 8.0 * t1.matrix,
                               atol=1e-13 * np.abs(t1.matrix).max())


def test_tmatrix_reality_symmetry():
    t = sc.omega_tmatrix(tilted_params(handedness=-1), XI)
    scale = np.abs(t.matrix).max()
    np.testing.assert_allclose(t.matrix, reality_partner(t.basis, t.matrix),
                               atol=1e-13 * scale)


def test_storage_basis_is_unitary_and_realifies():
    for l_max in (1, 3):
        basis = wb.multipole_basis(l_max)
        s = sc.storage_basis(basis)
        np.testing.assert_allclose(s.conj().T @ s, np.eye(len(basis)),
                                   atol=1e-14)
    t = sc.omega_tmatrix(tilted_params(), XI)
    stored = sc.to_storage(t)
    assert stored.dtype == np.float64
    back = sc.from_storage(stored, t.xi, t.l_max)
    np.testing.assert_allclose(back.matrix, t.matrix,
                               atol=1e-13 * np.abs(t.matrix).max())


def test_rotated_polarizability_matches_rotated_tmatrix():
    rot = wb.axis_angle_matrix(np.array([0.3, -0.5, 0.8]), 1.1)
    alpha = sc.omega_polarizability(tilted_params(handedness=-1), XI)
    direct = sc.tmatrix_from_polarizability(rotate_alpha(alpha, rot), XI)
    routed = sc.rotate_tmatrix(sc.tmatrix_from_polarizability(alpha, XI), rot)
    scale = np.abs(direct.matrix).max()
    np.testing.assert_allclose(routed.matrix, direct.matrix,
                               atol=1e-12 * scale)


def test_rotation_preserves_per_l_block_norms():
    t = random_physical_tmatrix(3, XI, seed=7)
    rot = wb.axis_angle_matrix(np.array([1.0, 0.4, -0.2]), 2.0)
    tr = sc.rotate_tmatrix(t, rot)
    for l in range(1, 4):
        sel = np.flatnonzero(t.basis.l == l)
        before = np.linalg.norm(t.matrix[np.ix_(sel, sel)])
        after = np.linalg.norm(tr.matrix[np.ix_(sel, sel)])
        assert after == pytest.approx(before, rel=1e-12)
    # and the rotated matrix still obeys the reality symmetry
    np.testing.assert_allclose(tr.matrix, reality_partner(tr.basis, tr.matrix),
                               atol=1e-12 * np.abs(tr.matrix).max())


def test_mirror_equals_handedness_flip_for_contained_or_normal_axis():
    p = sc.OmegaParams(handedness=1)
    t = sc.omega_tmatrix(p, XI)
    t_flip = sc.omega_tmatrix(p.mirrored(), XI)
    scale = np.abs(t.matrix).max()
    # plane perpendicular to the axis and planes containing it all flip
    # handedness while keeping the axis projector fixed
    for plane in ("xy", "yz", "zx", np.array([1.0, 1.0, 0.0])):
        tm = sc.mirror_tmatrix(t, plane)
        np.testing.assert_allclose(tm.matrix, t_flip.matrix,
                                   atol=1e-12 * scale)
        back = sc.mirror_tmatrix(tm, plane)
        np.testing.assert_allclose(back.matrix, t.matrix, atol=1e-12 * scale)


def test_mirror_of_generic_tmatrix_is_involutive():
    t = random_physical_tmatrix(2, XI, seed=19)
    normal = np.array([0.4, -1.2, 0.3])
    back = sc.mirror_tmatrix(sc.mirror_tmatrix(t, normal), normal)
    np.testing.assert_allclose(back.matrix, t.matrix,
                               atol=1e-12 * np.abs(t.matrix).max())


def test_mirror_rejects_unknown_plane_name():
    t = sc.omega_tmatrix(sc.OmegaParams(), XI)
    with pytest.raises(ValueError):
        sc.mirror_tmatrix(t, "xz")


def test_embed_tmatrix_keeps_entries():
    t = sc.omega_tmatrix(tilted_params(), XI)
    big = sc.embed_tmatrix(t, 3)
    assert big.l_max == 3
    np.testing.assert_allclose(big.matrix[:6, :6], t.matrix, atol=0.0)
    assert np.abs(big.matrix[6:, :]).max() == 0.0
    assert np.abs(big.matrix[:, 6:]).max() == 0.0
    assert sc.embed_tmatrix(t, 1) is t
    with pytest.raises(ValueError):
        sc.embed_tmatrix(big, 1)


# ----------------------------------------------------------------------------
# file I/O
# ----------------------------------------------------------------------------

def test_file_round_trip_and_idempotence(tmp_path):
    t = sc.omega_tmatrix(tilted_params(handedness=-1), XI)
    path = tmp_path / "t.json"
    sc.save_tmatrix(t, path)
    back = sc.load_tmatrix(path)
    assert back.xi == t.xi and back.l_max == t.l_max
    np.testing.assert_allclose(back.matrix, t.matrix,
                               atol=1e-13 * np.abs(t.matrix).max())
    path2 = tmp_path / "t2.json"
    sc.save_tmatrix(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_file_accepts_real_imag_pairs(tmp_path):
    t = sc.omega_tmatrix(sc.OmegaParams(), XI)
    stored = sc.to_storage(t)
    doc = {"format": sc.CONVENTION_ID, "xi": XI, "l_max": 1,
           "entries": [[float(v), 0.0] for v in stored.ravel()]}
    path = tmp_path / "pairs.json"
    path.write_text(json.dumps(doc))
    back = sc.load_tmatrix(path)
    np.testing.assert_allclose(back.matrix, t.matrix,
                               atol=1e-13 * np.abs(t.matrix).max())


def test_file_accepts_l_max_four(tmp_path):
    t = random_physical_tmatrix(4, XI, seed=3)
    path = tmp_path / "large.json"
    sc.save_tmatrix(t, path)
    back = sc.load_tmatrix(path)
    assert back.matrix.shape == (48, 48)
    np.testing.assert_allclose(back.matrix, t.matrix,
                               atol=1e-12 * np.abs(t.matrix).max())


def test_file_validation_errors(tmp_path):
    t = sc.omega_tmatrix(sc.OmegaParams(), XI)
    stored = sc.to_storage(t)
    good = {"format": sc.CONVENTION_ID, "xi": XI, "l_max": 1,
            "entries": [float(v) for v in stored.ravel()]}

    def write(**changes):
        doc = dict(good, **changes)
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        return path

    with pytest.raises(ValueError, match="convention"):
        sc.load_tmatrix(write(format="someone-elses-convention"))
    with pytest.raises(ValueError, match="l_max"):
        sc.load_tmatrix(write(l_max=5))
    with pytest.raises(ValueError, match="entries"):
        sc.load_tmatrix(write(entries=good["entries"][:-1]))
    with pytest.raises(ValueError, match="imaginary"):
        bad_entries = [[v, 0.0] for v in good["entries"]]
        bad_entries[3][1] = 1e-3
        sc.load_tmatrix(write(entries=bad_entries))
    with pytest.raises(ValueError, match="missing"):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"xi": XI}))
        sc.load_tmatrix(path)
    # a matrix violating the reality convention cannot be saved
    t_bad = sc.TMatrix(xi=XI, basis=t.basis,
                       matrix=t.matrix + 1e-3j * np.eye(6))
    with pytest.raises(ValueError, match="reality"):
        sc.save_tmatrix(t_bad, tmp_path / "never.json")


# ----------------------------------------------------------------------------
# frequency interpolation
# ----------------------------------------------------------------------------

def test_tmatrix_table_interpolates_and_anchors(tmp_path):
    params = tilted_params(handedness=-1)
    grid = np.geomspace(0.05, 5.0, 16)
    paths = []
    for i, xi in enumerate(grid):
        path = tmp_path / f"t{i:02d}.json"
        sc.save_tmatrix(sc.omega_tmatrix(params, xi), path)
        paths.append(path)
    table = sc.TMatrixTable.from_files(paths)
    assert table.l_max == 1
    # interior accuracy against direct construction, improving under grid
    # refinement
    dense = sc.TMatrixTable.from_tmatrices(
        [sc.omega_tmatrix(params, xi) for xi in np.geomspace(0.05, 5.0, 32)])
    for xi in (0.11, 0.9, 3.3):
        ref = sc.omega_tmatrix(params, xi)
        scale = np.abs(ref.matrix).max()
        err = np.abs(table(xi).matrix - ref.matrix).max()
        err_dense = np.abs(dense(xi).matrix - ref.matrix).max()
        assert err < 1e-2 * scale
        assert err_dense < 0.5 * err
    # at a node the tabulated matrix is reproduced
    ref = sc.omega_tmatrix(params, grid[4])
    np.testing.assert_allclose(table(grid[4]).matrix, ref.matrix,
                               atol=1e-12 * np.abs(ref.matrix).max())
    # below the grid: cubic frequency anchor
    low = table(grid[0] / 4.0)
    ref0 = table(grid[0])
    np.testing.assert_allclose(low.matrix, ref0.matrix / 64.0,
                               atol=1e-15 * np.abs(ref0.matrix).max())
    # above the grid: held
    np.testing.assert_allclose(table(2 * grid[-1]).matrix,
                               table(grid[-1]).matrix, atol=1e-15)


def test_tmatrix_table_validation():
    t = sc.omega_tmatrix(sc.OmegaParams(), XI)
    with pytest.raises(ValueError):
        sc.TMatrixTable.from_tmatrices([])
    with pytest.raises(ValueError):
        sc.TMatrixTable.from_tmatrices([t, t])
    single = sc.TMatrixTable.from_tmatrices([t])
    np.testing.assert_allclose(single(XI).matrix, t.matrix,
                               atol=1e-13 * np.abs(t.matrix).max())
