import numpy as np
import pytest
import scipy.linalg as sla

from viscwave import evolution as evo
from viscwave.errors import (BackendDisagreement, ContourTooShort,
                             CutoffMismatch)
from viscwave.quantize import (assemble_P, assemble_Q, field_from_flat,
                               field_single_mode, random_smooth_field,
                               sobolev_norm, viscous_operator)


@pytest.fixture(scope="module")
def toy():
    from viscwave.symbols import make_free

    return assemble_P(make_free(), 0), assemble_Q(0)


@pytest.fixture(scope="module")
def shear_setup(shear_symbol):
    P, Q = assemble_P(shear_symbol, 4), assemble_Q(4)
    f = random_smooth_field(4, decay=2.0, seed=7)
    return P, Q, f


def test_scalar_forced_solution(toy):
    P0, Q0 = toy
    f = field_single_mode(0, 0, 0)
    u = evo.propagate(P0, Q0, 0.1, f, t=1.0)
    # solves u' = -0.1 u - i with u(0) = 0
    assert u.flat[0] == pytest.approx(-1j * (1 - np.exp(-0.1)) / 0.1, abs=1e-12)


def test_eigenline_duhamel(shear_symbol):
    P, Q = assemble_P(shear_symbol, 3), assemble_Q(3)
    w, U = np.linalg.eigh(P.matrix)
    j = np.argmax(np.abs(w))
    f = field_from_flat(3, U[:, j])
    t = 2.0
    u = evo.propagate(P, Q, 0.0, f, t=t)
    lam = w[j]
    expected = (np.exp(-1j * lam * t) - 1.0) / lam * U[:, j]
    assert np.allclose(u.flat, expected, atol=1e-10)


def test_nonzero_forcing_frequency(toy):
    P0, Q0 = toy
    f = field_single_mode(0, 0, 0)
    omega0, nu, t = 0.3, 0.1, 2.0
    u = evo.propagate(P0, Q0, nu, f, omega0=omega0, t=t)

    # oracle: stiff-free scalar ODE u' = -i(P - i nu)u - i f e^{-i omega0 t}
    from scipy.integrate import solve_ivp

    def rhs(s, y):
        z = y[0] + 1j * y[1]
        dz = -1j * ((0.0 - 1j * nu) * z + np.exp(-1j * omega0 * s))
        return [dz.real, dz.imag]

    sol = solve_ivp(rhs, (0, t), [0.0, 0.0], rtol=1e-12, atol=1e-14)
    expected = sol.y[0, -1] + 1j * sol.y[1, -1]
    assert u.flat[0] == pytest.approx(expected, abs=1e-9)


def test_backends_agree(shear_symbol):
    P, Q = assemble_P(shear_symbol, 6), assemble_Q(6)
    f = random_smooth_field(6, decay=3.0, seed=3)
    uA = evo.propagate(P, Q, 0.05, f, t=2.0, backend="eig")
    uB = evo.propagate(P, Q, 0.05, f, t=2.0, backend="split")
    rel = np.linalg.norm(uA.flat - uB.flat) / np.linalg.norm(uA.flat)
    assert rel < 1e-6
    # the built-in cross-check path
    evo.propagate(P, Q, 0.05, f, t=2.0, check=True)


def test_split_backend_requires_viscosity(shear_setup):
    P, Q, f = shear_setup
    with pytest.raises(BackendDisagreement):
        evo.propagate(P, Q, 0.0, f, t=1.0, backend="split")


def test_contour_matches_matrix_exponential(shear_setup):
    P, Q, f = shear_setup
    nu = 0.05
    A = viscous_operator(P, Q, nu, 0.0).to_dense()
    for t in (0.1, 1.0, 10.0):
        ref = sla.expm(-1j * t * A) @ f.flat
        got = evo.semigroup_contour(P, Q, nu, t, f).flat
        assert np.linalg.norm(got - ref) / np.linalg.norm(ref) < 1e-6


def test_contour_quadrature_doubling(shear_setup):
    P, Q, f = shear_setup
    a = evo.semigroup_contour(P, Q, 0.1, 1.0, f, contour={"n_quad": 32})
    b = evo.semigroup_contour(P, Q, 0.1, 1.0, f, contour={"n_quad": 64})
    assert np.linalg.norm(a.flat - b.flat) < 1e-8


def test_contour_too_short(shear_setup):
    P, Q, f = shear_setup
    with pytest.raises(ContourTooShort):
        evo.semigroup_contour(P, Q, 0.05, 0.5, f, contour={"r_max": 1.0})


def test_decomposition_identity(shear_setup):
    P, Q, f = shear_setup
    for nu in (0.1, 0.01):
        dec = evo.Decomposer(P, Q, nu, f)
        for t in (1.0, 10.0, 100.0):
            r = dec.at_time(t)
            direct = evo.propagate(P, Q, nu, f, t=t)
            rel = (np.linalg.norm(r.u_nu_t.flat - direct.flat)
                   / np.linalg.norm(direct.flat))
            assert rel < 1e-8
            stat = -np.linalg.solve(viscous_operator(P, Q, nu, 0).to_dense(), f.flat)
            assert np.allclose(r.u_inf.flat, stat, atol=1e-10)


def test_remainder_subtraction_matches_direct_quadrature(shear_setup):
    P, Q, f = shear_setup
    for nu in (0.1, 0.01):
        dec = evo.Decomposer(P, Q, nu, f)
        for t in (1.0, 10.0):
            r = dec.at_time(t)
            direct = dec.remainder_direct(t, rel_tol=1e-7)
            rel = np.linalg.norm(r.e.flat - direct) / np.linalg.norm(direct)
            assert rel < 1e-5


def test_forcing_outside_window_gives_zero_remainder(shear_setup):
    P, Q, _ = shear_setup
    w, U = np.linalg.eigh(P.matrix)
    f_out = field_from_flat(4, U[:, np.argmax(np.abs(w))])
    dec = evo.Decomposer(P, Q, 0.1, f_out)
    r = dec.at_time(1.0)
    # phi(P) f vanishes to eigenbasis roundoff, so e is machine zero
    assert np.linalg.norm(r.e.flat) < 5e-15 * np.linalg.norm(f_out.flat)
    A = viscous_operator(P, Q, 0.1, 0.0).to_dense()
    bref = sla.expm(-1j * A) @ np.linalg.solve(A, f_out.flat)
    assert np.linalg.norm(r.b.flat - bref) / np.linalg.norm(bref) < 1e-12


def test_cutoff_mismatch_guard(shear_setup):
    P, Q, f = shear_setup
    with pytest.raises((CutoffMismatch, ValueError)):
        evo.Decomposer(P, Q, 0.1, f, inner_fraction=1.5)


def test_contraction_bound(shear_symbol):
    P, Q = assemble_P(shear_symbol, 8), assemble_Q(8)
    f = random_smooth_field(8, decay=3.0, seed=9)
    report = evo.contraction_check(P, Q, 0.05, f, np.linspace(0.0, 50.0, 26))
    assert report["ok"]
    assert report["max_margin"] <= 1e-8
    # equality at t = 0
    assert report["points"][0]["norm"] == pytest.approx(report["points"][0]["bound"])


def test_contraction_scalar_equality(toy):
    P0, Q0 = toy
    f = field_single_mode(0, 0, 0)
    report = evo.contraction_check(P0, Q0, 0.3, f, [0.0, 1.0, 5.0])
    for p in report["points"]:
        assert p["norm"] == pytest.approx(p["bound"], rel=1e-12)


def test_semigroup_property(shear_setup):
    P, Q, f = shear_setup
    prop = evo._EigPropagator(viscous_operator(P, Q, 0.05, 0.0))
    rng = np.random.default_rng(11)
    for _ in range(3):
        t, s = rng.uniform(0.1, 5.0, size=2)
        both = prop.semigroup(t, prop.semigroup(s, f.flat))
        once = prop.semigroup(t + s, f.flat)
        assert np.linalg.norm(both - once) / np.linalg.norm(once) < 1e-8


def test_inviscid_propagation_is_unitary(shear_setup):
    P, Q, f = shear_setup
    prop = evo._EigPropagator(viscous_operator(P, Q, 0.0, 0.0))
    for t in (0.5, 3.0, 20.0):
        out = prop.semigroup(t, f.flat)
        assert abs(np.linalg.norm(out) - np.linalg.norm(f.flat)) < 1e-10


def test_timescale_scan_smoke(shear_symbol):
    P, Q = assemble_P(shear_symbol, 6), assemble_Q(6)
    f = random_smooth_field(6, decay=2.0, seed=13)
    scan = evo.timescale_scan(P, Q, f, 0.15, [0.1, 0.05], s=-0.6,
                              points_per_decade=6, t_min=0.5)
    assert scan["records"]
    assert np.isfinite(scan["fits"]["b_sup_ratio"])
    nus = sorted({r["nu"] for r in scan["records"]})
    assert nus == [0.05, 0.1]
    assert all(np.isfinite(r["norm_e_s"]) for r in scan["records"])
