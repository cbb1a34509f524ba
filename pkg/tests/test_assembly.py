import numpy as np
import pytest
import scipy.io
import scipy.linalg as sla

from lseig.assembly import SYMMETRIC_FORMS, assemble, assemble_local, dump_matrix, verify_transpose_identity
from lseig.fespace import build_space, interpolate
from conftest import coarse_meshes


def test_mass_local_matrix(right_triangle):
    U = build_space(right_triangle, "CG1", dirichlet=False)
    K = assemble("mass_u", U).toarray()
    expected = (0.5 / 12) * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]])
    np.testing.assert_allclose(K, expected, atol=1e-15)


def test_stiffness_local_matrix(right_triangle):
    U = build_space(right_triangle, "CG1", dirichlet=False)
    K = assemble("stiffness", U).toarray()
    expected = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    np.testing.assert_allclose(K, expected, atol=1e-15)


def test_rt0_divdiv_closed_form(square4):
    S = build_space(square4, "RT0")
    K = assemble_local("divdiv", S, S)
    m = square4
    le = m.edge_lengths[m.tri_edges]
    expected = np.einsum("ta,tb->tab", S.signs * le, S.signs * le) / m.areas[:, None, None]
    np.testing.assert_allclose(K, expected, rtol=1e-13)


@pytest.mark.parametrize("fam", ["RT0", "BDM1", "CG1-vec"])
def test_transpose_identity(criss_cross, square4, fam):
    for m in (criss_cross, square4):
        S, U = build_space(m, fam), build_space(m, "CG1")
        B = assemble("grad_coupling", U, S)
        D = -assemble("udiv", S, U)
        assert verify_transpose_identity(B, D)


def test_transpose_identity_fails_without_elimination(square4):
    S, U = build_space(square4, "RT0"), build_space(square4, "CG1")
    B = assemble("grad_coupling", U, S, eliminate=False)
    D = -assemble("udiv", S, U, eliminate=False)
    assert not verify_transpose_identity(B, D)


def test_transpose_identity_dimension_mismatch(square4):
    S, U = build_space(square4, "RT0"), build_space(square4, "CG1")
    B = assemble("grad_coupling", U, S)
    with pytest.raises(ValueError):
        verify_transpose_identity(B, B)


def test_incompatible_pairing_rejected(square4):
    S, U = build_space(square4, "RT0"), build_space(square4, "CG1")
    with pytest.raises(ValueError):
        assemble("divdiv", U)
    with pytest.raises(ValueError):
        assemble("stiffness", S)
    with pytest.raises(ValueError):
        assemble("no_such_form", U)


def test_deterministic(square4):
    S = build_space(square4, "BDM1")
    a, b = assemble("divdiv", S), assemble("divdiv", S)
    assert (a != b).nnz == 0


@pytest.mark.parametrize("form", SYMMETRIC_FORMS)
def test_symmetric_forms(form):
    for m in coarse_meshes():
        space = build_space(m, "CG1") if form in ("stiffness", "mass_u") else build_space(m, "BDM1")
        K = assemble(form, space)
        assert abs(K - K.T).max() < 1e-13 if K.nnz else True


@pytest.mark.parametrize("fam", ["RT0", "BDM1", "CG1-vec"])
def test_flux_block_positive_definite(fam):
    for m in coarse_meshes():
        S = build_space(m, fam)
        A = assemble("mass_sigma", S) + assemble("divdiv", S)
        if fam == "CG1-vec":
            A = A + assemble("curlcurl", S)
        assert sla.eigvalsh(A.toarray())[0] > 0


def test_stiffness_positive_definite():
    for m in coarse_meshes():
        C = assemble("stiffness", build_space(m, "CG1")).toarray()
        assert sla.eigvalsh(C)[0] > 0


def test_patch_test(square4):
    U = build_space(square4, "CG1", dirichlet=False)
    K = assemble("stiffness", U)
    u = interpolate(U, lambda x, y: 2 * x - y).coeffs
    v = interpolate(U, lambda x, y: x + 3 * y).coeffs
    # (grad u, grad v) = (2, -1) . (1, 3) * |Omega|
    assert v @ (K @ u) == pytest.approx(-1.0, abs=1e-12)


def test_curl_of_rt0_vanishes(square4):
    S = build_space(square4, "RT0")
    assert abs(assemble("curlcurl", S)).max() < 1e-12


def test_matrix_market_dump(tmp_path, square4):
    U = build_space(square4, "CG1")
    K = assemble("stiffness", U)
    path = tmp_path / "C.mtx"
    dump_matrix(K, path, comment="stiffness")
    back = scipy.io.mmread(str(path))
    assert abs(back - K).max() == 0
