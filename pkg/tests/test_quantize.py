import numpy as np
import pytest

from viscwave import quantize, symbols
from viscwave.errors import TooLargeForDense
from viscwave.quantize import (SpectralField, assemble_P, assemble_Q,
                               cutoff_profiles, field_from_function,
                               field_single_mode, load_operator,
                               random_smooth_field, save_operator,
                               sobolev_norm, spectral_cutoff,
                               spectral_function, viscous_operator)

from oracles import brute_force_truncation


def test_free_is_diagonal_multiplier(free_symbol):
    P = assemble_P(free_symbol, 5)
    assert P.kind == "diagonal"
    d = P.diag.reshape(11, 11)
    assert d[3 + 5, 4 + 5] == pytest.approx(4.0 / 5.0, abs=1e-12)
    assert d[5, 5] == pytest.approx(0.0, abs=1e-12)
    K1, K2 = quantize.mode_grid(5)
    norm = np.hypot(K1, K2)
    with np.errstate(invalid="ignore"):
        expected = np.where(norm > 0, K2 / np.where(norm > 0, norm, 1.0), 0.0)
    assert np.allclose(d, expected, atol=1e-12)


def test_shear_coupling_stencil(shear_symbol):
    P = assemble_P(shear_symbol, 4)
    A = P.matrix
    side = 9
    # mode k couples to k +- (1, 0) with amplitude eps/2
    for k1 in range(-3, 3):
        for k2 in range(-4, 4):
            r = (k1 + 1 + 4) * side + (k2 + 4)
            c = (k1 + 4) * side + (k2 + 4)
            assert A[r, c] == pytest.approx(0.15, abs=1e-13)


def test_assembly_matches_entrywise_oracle(shear_symbol, two_param_symbol):
    for sym in (shear_symbol, two_param_symbol):
        A = assemble_P(sym, 2).to_dense()
        B = brute_force_truncation(sym, 2)
        assert np.max(np.abs(A - B)) < 1e-12


def test_generic_fft_route_matches_separable(shear_symbol):
    # strip the separable structure to force the generic FFT assembly
    generic = symbols.HomogeneousSymbol(
        name="shear-generic", params=dict(shear_symbol.params),
        func=shear_symbol.func, dx1=shear_symbol.dx1, dx2=shear_symbol.dx2,
        dtheta=shear_symbol.dtheta)
    assert not generic.is_separable
    A = assemble_P(generic, 3).to_dense()
    B = assemble_P(shear_symbol, 3).to_dense()
    assert np.max(np.abs(A - B)) < 1e-12


def test_hermitian_exactly_and_defect_recorded():
    mixed = symbols.HomogeneousSymbol(
        name="mixed", params={},
        func=lambda x1, x2, th: np.cos(th) * np.cos(x1),
        dx1=lambda x1, x2, th: -np.cos(th) * np.sin(x1),
        dx2=lambda x1, x2, th: np.zeros(np.broadcast(x1, x2, th).shape),
        dtheta=lambda x1, x2, th: -np.sin(th) * np.cos(x1),
    )
    P = assemble_P(mixed, 4)
    A = P.matrix
    assert np.max(np.abs(A - A.conj().T)) == 0.0
    assert P.meta["sym_defect"] > 1e-3  # direction-dependent coupling is asymmetric


def test_operator_norm_bounded_by_symbol_sup(shear_symbol):
    for N in (4, 8, 16):
        P = assemble_P(shear_symbol, N)
        norm = np.linalg.norm(P.matrix, 2)
        assert norm <= 1.0 + 0.3 + 1e-10


def test_assemble_Q_entries():
    Q = assemble_Q(4)
    d = Q.diag.reshape(9, 9)
    assert d[4, 4] == 1.0
    assert d[5, 4] == 2.0
    assert d[4 + 3, 4 + 4] == 26.0
    assert np.all(Q.diag >= 1.0)


def test_sobolev_norm_values():
    u = field_single_mode(4, 0, 0)
    for s in (-1.0, 0.0, 2.0):
        assert sobolev_norm(u, s) == pytest.approx(1.0)
    v = field_single_mode(4, 1, 1)
    assert sobolev_norm(v, 1.0) == pytest.approx(np.sqrt(3.0))
    assert sobolev_norm(v, -1.0) == pytest.approx(1.0 / np.sqrt(3.0))


def test_plancherel(rng):
    u = random_smooth_field(6, decay=2.5, seed=4)
    assert sobolev_norm(u, 0.0) == pytest.approx(np.linalg.norm(u.coeffs), abs=1e-12)
    assert u.l2_norm() == pytest.approx(1.0, abs=1e-12)


def test_field_from_function_roundtrip():
    u = field_from_function(lambda x1, x2: np.cos(x1) + np.sin(2 * x2), 4)
    c = u.coeffs
    two_pi = 2 * np.pi
    assert c[5, 4] == pytest.approx(two_pi * 0.5, abs=1e-12)   # cos(x1): k=(1,0)
    assert c[3, 4] == pytest.approx(two_pi * 0.5, abs=1e-12)   # k=(-1,0)
    assert c[4, 6] == pytest.approx(two_pi * 0.5 / 1j, abs=1e-12)  # sin(2 x2)
    assert abs(c[4, 4]) < 1e-12


def test_spectral_function_identity_and_one(shear_symbol):
    P = assemble_P(shear_symbol, 3)
    same = spectral_function(P, lambda w: w)
    assert np.max(np.abs(same.matrix - P.matrix)) < 1e-12
    one = spectral_function(P, lambda w: np.ones_like(w))
    assert np.max(np.abs(one.matrix - np.eye(P.dim))) < 1e-12


def test_spectral_function_squares_multiplier(free_symbol):
    P = assemble_P(free_symbol, 4)
    sq = spectral_function(P, lambda w: w ** 2)
    assert sq.kind == "diagonal"
    assert np.allclose(sq.diag, np.real(P.diag) ** 2)


def test_functional_calculus_homomorphism(shear_symbol):
    P = assemble_P(shear_symbol, 3)
    g = lambda w: np.exp(-w ** 2)
    h = lambda w: np.sin(w) + 0.5
    gh = spectral_function(P, lambda w: g(w) * h(w)).matrix
    prod = spectral_function(P, g).matrix @ spectral_function(P, h).matrix
    assert np.max(np.abs(gh - prod)) < 1e-10


def test_spectral_function_budget(shear_symbol):
    P = assemble_P(shear_symbol, 3)
    with pytest.raises(TooLargeForDense):
        spectral_function(P, lambda w: w, budget=10)


def test_cutoff_shapes_and_nesting(shear_symbol):
    phi, chi = cutoff_profiles(0.1, 0.5)
    assert chi(0.0) == 1.0 and phi(0.0) == 1.0
    assert chi(0.2) == 0.0 and phi(0.2) == 0.0
    assert chi(0.04) == 1.0        # inside inner plateau
    assert phi(0.06) == 0.0        # outside supp phi
    lam = np.linspace(-0.3, 0.3, 2001)
    assert np.all((phi(lam) > 0) <= (chi(lam) == 1.0))

    P = assemble_P(shear_symbol, 3)
    phi_P, chi_P = spectral_cutoff(P, 0.1, 0.5)
    # phi(P) (chi(P) - I) annihilates anything in the range of phi(P)
    M = phi_P.matrix @ (chi_P.matrix - np.eye(P.dim)) @ phi_P.matrix
    assert np.max(np.abs(M)) < 1e-10


def test_viscous_operator_forms(shear_symbol):
    P, Q = assemble_P(shear_symbol, 3), assemble_Q(3)
    A = viscous_operator(P, Q, 0.05, 0.2)
    dense = A.to_dense()
    expected = P.matrix - 0.2 * np.eye(P.dim) - 0.05j * np.diag(Q.diag)
    assert np.max(np.abs(dense - expected)) < 1e-14
    assert not A.hermitian


def test_operator_save_load_roundtrip(tmp_path, shear_symbol, free_symbol):
    for sym, N in ((shear_symbol, 3), (free_symbol, 4)):
        op = assemble_P(sym, N)
        prefix = str(tmp_path / f"op_{sym.name}")
        save_operator(op, prefix)
        back = load_operator(prefix)
        assert back.N == op.N and back.hermitian == op.hermitian
        v = np.arange(op.dim, dtype=complex)
        assert np.allclose(back.apply(v), op.apply(v), atol=1e-14)


def test_matrix_free_large_N(shear_symbol):
    P = assemble_P(shear_symbol, 40, budget=5000)
    assert P.kind == "matrix-free"
    assert P.matrix is None and P.sparse is not None
    with pytest.raises(TooLargeForDense):
        P.to_dense(5000)
    v = np.zeros(P.dim, dtype=complex)
    v[P.dim // 2] = 1.0
    assert np.isfinite(P.apply(v)).all()
