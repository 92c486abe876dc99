"""Fourier-side truncation of the wave operator and the viscosity on T^2.

Fields are complex coefficient arrays over the modes |k1|, |k2| <= N against
the orthonormal exponentials e_k = exp(i k.x) / (2 pi), so the L^2 norm is the
plain coefficient 2-norm.  The wave operator is quantized by the
Kohn-Nirenberg rule (mode k is multiplied by p(x, k/|k|) before re-expansion)
and compressed to the mode box; the result is symmetrized so hermiticity is
exact at the discrete level, with the pre-symmetrization defect recorded.
Mode 0, where the direction is undefined, carries the angular average of p.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import TooLargeForDense
from .symbols import HomogeneousSymbol, ViscositySymbol
from .util import plateau

TWO_PI = 2.0 * np.pi

DENSE_BUDGET = 5000  # largest matrix dimension eigendecompositions may touch

_THETA_AVG_POINTS = 512


def n_modes(N: int) -> int:
    return (2 * N + 1) ** 2


def mode_grid(N: int):
    """Integer mode coordinates K1, K2 with array index [k1 + N, k2 + N]."""
    k = np.arange(-N, N + 1)
    return np.meshgrid(k, k, indexing="ij")


def mode_multiplier(sym_theta: Callable, N: int, theta_average: float):
    """Evaluate a direction profile at every mode; mode 0 gets the average."""
    K1, K2 = mode_grid(N)
    theta = np.arctan2(K2, K1)
    vals = np.asarray(sym_theta(theta), dtype=float)
    vals[N, N] = theta_average
    return vals


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

@dataclass
class SpectralField:
    """Truncated Fourier coefficients, array indexed by [k1 + N, k2 + N]."""

    N: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (2 * self.N + 1, 2 * self.N + 1):
            raise ValueError("coefficient array shape does not match N")

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    def copy(self) -> "SpectralField":
        return SpectralField(self.N, self.coeffs.copy())

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other):
        return SpectralField(self.N, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SpectralField(self.N, self.coeffs - other.coeffs)

    def __mul__(self, z):
        return SpectralField(self.N, self.coeffs * z)

    __rmul__ = __mul__


def field_from_flat(N: int, flat: np.ndarray) -> SpectralField:
    return SpectralField(N, np.asarray(flat).reshape(2 * N + 1, 2 * N + 1))


def field_single_mode(N: int, k1: int, k2: int, amplitude: complex = 1.0) -> SpectralField:
    c = np.zeros((2 * N + 1, 2 * N + 1), dtype=complex)
    c[k1 + N, k2 + N] = amplitude
    return SpectralField(N, c)


def field_from_function(func: Callable, N: int) -> SpectralField:
    """Project a smooth function of (x1, x2) onto the mode box."""
    M = 4 * (N + 1)
    xs = TWO_PI * np.arange(M) / M
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    c = np.fft.fft2(np.asarray(func(X1, X2), dtype=complex)) / M ** 2
    k = np.arange(-N, N + 1)
    out = TWO_PI * c[np.ix_(k % M, k % M)]
    return SpectralField(N, out)


def random_smooth_field(N: int, decay: float = 3.0, seed: int = 0,
                        rng: Optional[np.random.Generator] = None) -> SpectralField:
    """Unit-norm field with Gaussian-decaying random coefficients."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    K1, K2 = mode_grid(N)
    envelope = np.exp(-(K1 ** 2 + K2 ** 2) / (2.0 * decay ** 2))
    z = rng.standard_normal((2 * N + 1, 2 * N + 1)) \
        + 1j * rng.standard_normal((2 * N + 1, 2 * N + 1))
    c = envelope * z
    c /= np.linalg.norm(c)
    return SpectralField(N, c)


def sobolev_norm(u: SpectralField, s: float) -> float:
    """Viscosity-weighted Sobolev norm (sum of (1+|k|^2)^s |u_k|^2)^(1/2)."""
    K1, K2 = mode_grid(u.N)
    w = (1.0 + K1 ** 2 + K2 ** 2) ** s
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


def sobolev_weights(N: int, s: float) -> np.ndarray:
    """Flat vector of (1+|k|^2)^(s/2), the half-weights defining H^s."""
    K1, K2 = mode_grid(N)
    return ((1.0 + K1 ** 2 + K2 ** 2) ** (s / 2.0)).reshape(-1)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

@dataclass
class TruncatedOperator:
    """A truncated operator on the mode box.

    ``kind`` is one of ``dense-matrix``, ``diagonal``, ``matrix-free``.  The
    representations that exist are attached: ``matrix`` (dense), ``diag``
    (flat), ``sparse`` (scipy CSC, always available for separable symbols).
    """

    N: int
    kind: str
    hermitian: bool
    matrix: Optional[np.ndarray] = None
    diag: Optional[np.ndarray] = None
    sparse: Optional[sp.spmatrix] = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def dim(self) -> int:
        return n_modes(self.N)

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.diag is not None:
            return self.diag * v
        if self.sparse is not None:
            return self.sparse @ v
        return self.matrix @ v

    def apply_adjoint(self, v: np.ndarray) -> np.ndarray:
        if self.hermitian:
            return self.apply(v)
        if self.diag is not None:
            return np.conj(self.diag) * v
        if self.sparse is not None:
            return self.sparse.conj().T @ v
        return self.matrix.conj().T @ v

    def to_dense(self, budget: int = DENSE_BUDGET) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        if self.dim > budget:
            raise TooLargeForDense(
                f"dimension {self.dim} exceeds the dense budget {budget}")
        if self.diag is not None:
            return np.diag(self.diag.astype(complex))
        return self.sparse.toarray()

    def norm_upper_bound(self) -> float:
        """An upper bound for the L^2 operator norm, exact for hermitian forms."""
        if self.diag is not None:
            return float(np.max(np.abs(self.diag)))
        if self.matrix is not None and self.hermitian:
            return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix))))
        if self.sparse is not None:
            # max column sum bounds the norm for hermitian sparse matrices
            return float(np.abs(self.sparse).sum(axis=0).max())
        return float(np.linalg.norm(self.matrix, 2))


def _theta_average(profile: Callable) -> float:
    theta = TWO_PI * np.arange(_THETA_AVG_POINTS) / _THETA_AVG_POINTS
    return float(np.mean(np.asarray(profile(theta), dtype=float)))


def _assemble_separable(sym: HomogeneousSymbol, N: int) -> sp.csc_matrix:
    """Exact truncation for p = f(theta) + sum_m a_m exp(i m.x)."""
    D = n_modes(N)
    side = 2 * N + 1
    avg = _theta_average(sym.theta_profile)
    diag_vals = mode_multiplier(sym.theta_profile, N, avg).reshape(-1).astype(complex)
    total = sp.diags(diag_vals).tocsc()
    K1, K2 = mode_grid(N)
    K1f, K2f = K1.reshape(-1), K2.reshape(-1)
    for (m1, m2), amp in sym.x_harmonics.items():
        if m1 == 0 and m2 == 0:
            total = total + sp.diags(np.full(D, complex(amp))).tocsc()
            continue
        j1, j2 = K1f + m1, K2f + m2
        ok = (np.abs(j1) <= N) & (np.abs(j2) <= N)
        rows = (j1[ok] + N) * side + (j2[ok] + N)
        cols = np.where(ok)[0]
        block = sp.coo_matrix((np.full(int(ok.sum()), complex(amp)), (rows, cols)),
                              shape=(D, D))
        total = total + block.tocsc()
    return total


def _assemble_generic_dense(sym: HomogeneousSymbol, N: int) -> np.ndarray:
    """Kohn-Nirenberg rule column by column via FFT on an anti-aliased grid."""
    D = n_modes(N)
    M = 4 * (N + 1)
    xs = TWO_PI * np.arange(M) / M
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    K1, K2 = mode_grid(N)
    K1f, K2f = K1.reshape(-1), K2.reshape(-1)
    thetas = np.arctan2(K2f, K1f)
    theta_grid = TWO_PI * np.arange(_THETA_AVG_POINTS) / _THETA_AVG_POINTS
    A = np.zeros((D, D), dtype=complex)
    for col in range(D):
        if K1f[col] == 0 and K2f[col] == 0:
            g = np.mean(np.asarray(sym(X1[..., None], X2[..., None],
                                       theta_grid[None, None, :])), axis=-1)
        else:
            g = np.asarray(sym(X1, X2, thetas[col]), dtype=float)
        c = np.fft.fft2(g) / M ** 2
        A[:, col] = c[(K1f - K1f[col]) % M, (K2f - K2f[col]) % M]
    return A


def assemble_P(sym: HomogeneousSymbol, N: int,
               budget: int = DENSE_BUDGET) -> TruncatedOperator:
    """Truncate the wave operator with symbol p to the mode box |k|_inf <= N.

    Separable catalog symbols build an exactly hermitian sparse matrix (plus
    a dense copy within budget); generic symbols go through the FFT route and
    are symmetrized, with the defect recorded under ``meta['sym_defect']``.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    D = n_modes(N)
    meta = {"symbol": sym.name, "params": dict(sym.params)}
    if sym.is_separable:
        avg = _theta_average(sym.theta_profile)
        diag_vals = mode_multiplier(sym.theta_profile, N, avg).reshape(-1)
        mean_amp = float(np.real(sym.x_harmonics.get((0, 0), 0.0)))
        nontrivial = {m: a for m, a in sym.x_harmonics.items() if m != (0, 0)}
        if not nontrivial:
            meta["sym_defect"] = 0.0
            return TruncatedOperator(N=N, kind="diagonal", hermitian=True,
                                     diag=diag_vals + mean_amp, meta=meta)
        spm = _assemble_separable(sym, N)
        defect = sp.csc_matrix(spm - spm.conj().T)
        meta["sym_defect"] = float(np.max(np.abs(defect.data))) if defect.nnz else 0.0
        spm = ((spm + spm.conj().T) * 0.5).tocsc()
        kind = "dense-matrix" if D <= budget else "matrix-free"
        op = TruncatedOperator(N=N, kind=kind, hermitian=True, sparse=spm,
                               meta=meta)
        if D <= budget:
            op.matrix = spm.toarray()
        return op
    if D > budget:
        raise TooLargeForDense(
            f"generic symbols require dense assembly; dimension {D} > budget {budget}")
    A = _assemble_generic_dense(sym, N)
    meta["sym_defect"] = float(np.max(np.abs(A - A.conj().T)))
    A = 0.5 * (A + A.conj().T)
    return TruncatedOperator(N=N, kind="dense-matrix", hermitian=True,
                             matrix=A, meta=meta)


def assemble_Q(N: int) -> TruncatedOperator:
    """Diagonal viscosity operator with multiplier 1 + |k|^2."""
    q = ViscositySymbol()
    K1, K2 = mode_grid(N)
    diag = q.multiplier(K1, K2).reshape(-1)
    return TruncatedOperator(N=N, kind="diagonal", hermitian=True, diag=diag,
                             meta={"symbol": "viscosity", "params": {"order": 2}})


def viscous_operator(P: TruncatedOperator, Q: TruncatedOperator, nu: float,
                     omega: float = 0.0) -> TruncatedOperator:
    """The damped generator P - omega - i nu Q in whatever forms P carries."""
    if P.N != Q.N:
        raise ValueError("P and Q live on different mode boxes")
    shift = omega * np.ones(P.dim) + 1j * nu * Q.diag
    meta = dict(P.meta)
    meta.update({"nu": nu, "omega": omega})
    op = TruncatedOperator(N=P.N, kind=P.kind, hermitian=False, meta=meta)
    if P.diag is not None:
        op.diag = P.diag - shift
        op.kind = "diagonal"
        return op
    if P.sparse is not None:
        op.sparse = (P.sparse - sp.diags(shift)).tocsc()
    if P.matrix is not None:
        op.matrix = P.matrix - np.diag(shift)
    return op


# ---------------------------------------------------------------------------
# Functional calculus
# ---------------------------------------------------------------------------

def spectral_function(P: TruncatedOperator, g: Callable,
                      budget: int = DENSE_BUDGET) -> TruncatedOperator:
    """g(P) for hermitian P via eigendecomposition (diagonal shortcut if any)."""
    if not P.hermitian:
        raise ValueError("spectral_function requires a hermitian operator")
    meta = {"symbol": f"g({P.meta.get('symbol', '?')})"}
    if P.diag is not None:
        vals = np.asarray(g(np.real(P.diag)))
        herm = bool(np.all(np.isreal(vals)))
        return TruncatedOperator(N=P.N, kind="diagonal", hermitian=herm,
                                 diag=vals, meta=meta)
    if P.dim > budget:
        raise TooLargeForDense(
            f"dimension {P.dim} exceeds the dense budget {budget}")
    w, U = np.linalg.eigh(P.to_dense(budget))
    gw = np.asarray(g(w))
    herm = bool(np.all(np.isreal(gw)))
    mat = (U * gw) @ U.conj().T
    return TruncatedOperator(N=P.N, kind="dense-matrix", hermitian=herm,
                             matrix=mat, meta=meta)


def cutoff_profiles(delta: float, inner_fraction: float):
    """Scalar cutoff pair (phi, chi): chi = 1 on [-a d, a d], 0 outside (-d, d);
    phi has the same shape shrunk by a, so supp phi lies where chi = 1."""
    if not 0.0 < inner_fraction < 1.0:
        raise ValueError("inner_fraction must lie in (0, 1)")
    a = inner_fraction

    def chi(lam):
        return plateau(np.abs(lam), a * delta, delta)

    def phi(lam):
        return plateau(np.abs(lam), a * a * delta, a * delta)

    return phi, chi


def spectral_cutoff(P: TruncatedOperator, delta: float, inner_fraction: float,
                    budget: int = DENSE_BUDGET):
    """Nested smooth spectral cutoffs (phi(P), chi(P)) around frequency 0."""
    phi, chi = cutoff_profiles(delta, inner_fraction)
    return (spectral_function(P, phi, budget=budget),
            spectral_function(P, chi, budget=budget))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def save_operator(op: TruncatedOperator, prefix: str) -> list[str]:
    """Binary dump plus JSON header for cross-implementation comparison."""
    header = {"N": op.N, "kind": op.kind, "hermitian": op.hermitian,
              "meta": op.meta}
    written = []
    if op.kind == "diagonal":
        np.save(prefix + ".npy", op.diag)
        header["payload"] = "diag"
        written.append(prefix + ".npy")
    elif op.matrix is not None:
        np.save(prefix + ".npy", op.matrix)
        header["payload"] = "dense"
        written.append(prefix + ".npy")
    else:
        sp.save_npz(prefix + ".npz", op.sparse.tocoo())
        header["payload"] = "sparse"
        written.append(prefix + ".npz")
    with open(prefix + ".json", "w") as fh:
        json.dump(header, fh, indent=2)
    written.append(prefix + ".json")
    return written


def load_operator(prefix: str) -> TruncatedOperator:
    with open(prefix + ".json") as fh:
        header = json.load(fh)
    op = TruncatedOperator(N=header["N"], kind=header["kind"],
                           hermitian=header["hermitian"], meta=header["meta"])
    if header["payload"] == "diag":
        op.diag = np.load(prefix + ".npy")
    elif header["payload"] == "dense":
        op.matrix = np.load(prefix + ".npy")
    else:
        op.sparse = sp.load_npz(prefix + ".npz").tocsc()
    return op
