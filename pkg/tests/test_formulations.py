import math
from types import SimpleNamespace

import numpy as np
import pytest

from lseig.eigsolve import solve_finite_spectrum
from lseig.fespace import FeFunction, build_space, interpolate
from lseig.formulations import (
    ErrorRecord,
    FormulationSpec,
    apply_discrete_solution_operator,
    build_pencil,
    compute_error_norms,
    solve_eigen,
    square_mode,
)
from lseig.mesh import DomainSpec, build_initial_mesh, refine_uniform

MODE = square_mode(1, 1)


def test_pencil_dimensions(criss_cross):
    assert build_pencil(FormulationSpec("F1", "RT0", criss_cross)).dim == 9
    assert build_pencil(FormulationSpec("F1curl", "CG1-vec", criss_cross)).dim == 11
    assert build_pencil(FormulationSpec("F1curl", "CG1-vec", criss_cross, sigma_bc="tangential")).dim == 3


def test_llstar_rhs_pattern(criss_cross):
    p = build_pencil(FormulationSpec("LLstar", "RT0", criss_cross))
    R = p.rhs().toarray()
    assert np.all(R[:p.n_sigma] == 0) and np.all(R[:, :p.n_sigma] == 0)
    np.testing.assert_array_equal(R[p.n_sigma:, p.n_sigma:], p.M.toarray())


@pytest.mark.parametrize("kw", [
    dict(tag="F1curl", sigma_family="RT0"),
    dict(tag="F1", sigma_family="CG1"),
    dict(tag="PEMd", sigma_family="BDM1"),
    dict(tag="F3", sigma_family="RT0"),
    dict(tag="F1", sigma_family="RT0", sigma_bc="tangential"),
])
def test_invalid_specs(criss_cross, kw):
    with pytest.raises(ValueError):
        FormulationSpec(mesh=criss_cross, **kw)


def test_baselines_have_no_pencil(criss_cross):
    with pytest.raises(ValueError):
        build_pencil(FormulationSpec("PEP", "RT0", criss_cross))


def test_baselines_converge():
    m = build_initial_mesh(DomainSpec("unit-square", 4))
    errs = {"PEP": [], "PEMd": []}
    for _ in range(3):
        for tag in errs:
            pairs, _, _ = solve_eigen(FormulationSpec(tag, "RT0", m))
            errs[tag].append(abs(pairs[0].lam - MODE.lam))
        m = refine_uniform(m)
    for e in errs.values():
        assert e[1] / e[2] == pytest.approx(4.0, rel=0.15)


def test_source_zero_data(square4):
    spec = FormulationSpec("F1", "RT0", square4)
    sol = apply_discrete_solution_operator(spec, lambda x, y: 0 * x)
    assert np.all(sol.u.coeffs == 0) and np.all(sol.sigma.coeffs == 0)


def test_source_operator_reproduces_eigenpair(square4):
    spec = FormulationSpec("F1", "RT0", square4)
    p = build_pencil(spec)
    pair = solve_finite_spectrum(p)[0]
    U = p.u_space
    sol = apply_discrete_solution_operator(spec, FeFunction(U, pair.lam * pair.u), pencil=p)
    np.testing.assert_allclose(sol.u.coeffs, pair.u, atol=1e-10)
    assert sol.residual < 1e-10


def test_lambda_T_f_minus_f_decreases():
    m = build_initial_mesh(DomainSpec("unit-square", 4))
    errs = []
    for _ in range(3):
        spec = FormulationSpec("F1", "RT0", m)
        sol = apply_discrete_solution_operator(spec, MODE.u)
        pair = SimpleNamespace(u=MODE.lam * sol.u.coeffs, sigma=sol.sigma.coeffs, lam=MODE.lam)
        rec = compute_error_norms(pair, (None, build_space(m, "CG1")), MODE)
        errs.append(rec.err_u_L2)
        m = refine_uniform(m)
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.01


def _random_pairs(U, n, seed):
    rng = np.random.default_rng(seed)
    return [(FeFunction(U, rng.standard_normal(U.nfree)), FeFunction(U, rng.standard_normal(U.nfree)))
            for _ in range(n)]


def test_llstar_operator_l2_symmetric_and_positive(square4):
    spec = FormulationSpec("LLstar", "RT0", square4)
    p = build_pencil(spec)
    M = p.M
    for f, g in _random_pairs(p.u_space, 5, 11):
        Tf = apply_discrete_solution_operator(spec, f, pencil=p).u.coeffs
        Tg = apply_discrete_solution_operator(spec, g, pencil=p).u.coeffs
        nf, ng = math.sqrt(f.coeffs @ M @ f.coeffs), math.sqrt(g.coeffs @ M @ g.coeffs)
        assert abs(g.coeffs @ M @ Tf - f.coeffs @ M @ Tg) < 1e-10 * nf * ng
        assert f.coeffs @ M @ Tf > 0


def test_f1_operator_symmetric_in_its_energy_product(square4):
    """T_h of F1 is symmetric for (f, g) -> g^T S f with S = B A^-1 B^T, where it is also positive."""
    spec = FormulationSpec("F1", "RT0", square4)
    p = build_pencil(spec)
    S = p.B @ p.solve_A(p.B.T.toarray())
    for f, g in _random_pairs(p.u_space, 5, 12):
        Tf = apply_discrete_solution_operator(spec, f, pencil=p).u.coeffs
        Tg = apply_discrete_solution_operator(spec, g, pencil=p).u.coeffs
        a, b = g.coeffs @ S @ Tf, f.coeffs @ S @ Tg
        assert abs(a - b) < 1e-10 * max(abs(a), 1.0)
        assert f.coeffs @ S @ Tf > 0


def test_error_norms_of_interpolant_rate():
    m = build_initial_mesh(DomainSpec("unit-square", 4))
    errs, hs = [], []
    for _ in range(3):
        U = build_space(m, "CG1")
        uh = interpolate(U, MODE.u)
        pair = SimpleNamespace(u=uh.coeffs, sigma=np.zeros(0), lam=MODE.lam)
        errs.append(compute_error_norms(pair, (None, U), MODE).err_u_L2)
        hs.append(m.h_max())
        m = refine_uniform(m)
    rate = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert rate == pytest.approx(2.0, abs=0.15)


def test_error_norms_identical_fields_zero(square4):
    # a linear field is reproduced by every space, so all errors vanish
    lin = type(MODE)(lam=0.0, u=lambda x, y: 0 * x + 1.0,
                     grad_u=lambda x, y: np.zeros(np.shape(x) + (2,)))
    S = build_space(square4, "RT0")
    U = build_space(square4, "CG1", dirichlet=False)
    pair = SimpleNamespace(u=np.ones(U.nfree), sigma=np.zeros(S.nfree), lam=0.0)
    rec = compute_error_norms(pair, (S, U), lin)
    assert isinstance(rec, ErrorRecord)
    assert max(rec.as_dict().values()) < 1e-13


def test_f1_rates_on_square():
    m = build_initial_mesh(DomainSpec("unit-square", 4))
    rows = []
    for _ in range(4):
        pairs, _, spaces = solve_eigen(FormulationSpec("F1", "RT0", m))
        rec = compute_error_norms(pairs[0], spaces, MODE)
        rows.append((m.h_max(), rec.err_lambda, rec.err_gradu_L2))
        m = refine_uniform(m)
    h, el, eg = np.array(rows).T
    assert np.polyfit(np.log(h[-3:]), np.log(el[-3:]), 1)[0] >= 1.8
    assert np.polyfit(np.log(h[-3:]), np.log(eg[-3:]), 1)[0] >= 0.8
