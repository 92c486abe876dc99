"""Forced viscous evolution: propagation, contour semigroup, decomposition.

The forced solution with zero initial data is, by Duhamel,
u(t) = A^{-1}(e^{-itA} - 1)f with A = P - i nu Q (frequency shifts fold into
the forcing).  Backend A evaluates this by eigendecomposition within the
dense budget; backend B by operator splitting between the exactly
exponentiable diagonal part and the spatial multiplier.  The semigroup also
has a contour representation over a path hugging the real axis and two rays
descending into the lower half plane; integrating its central window in time
yields the slowly decaying remainder of the three-term decomposition
u = u_inf + b + e, while the ray pieces and the off-window real piece make up
the uniformly bounded part b.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .errors import (BackendDisagreement, ContourTooShort, CutoffMismatch,
                     TooLargeForDense)
from .quantize import (DENSE_BUDGET, SpectralField, TruncatedOperator,
                       cutoff_profiles, field_from_flat, sobolev_norm,
                       viscous_operator)
from .resolvent import Resolvent, limiting_resolvent

TWO_PI = 2.0 * np.pi

DEFAULT_CONTOUR = {"delta": 0.1, "beta": np.pi / 4, "r_max": None, "n_quad": 32}


def duhamel_profile(w, t):
    """(exp(-i w t) - 1) / w, stable through w = 0."""
    w = np.asarray(w, dtype=complex)
    z = -1j * w * t
    small = np.abs(z) < 1e-6
    zs = np.where(small, z, 1.0)
    series = (-1j * t) * (1.0 + zs / 2.0 + zs ** 2 / 6.0 + zs ** 3 / 24.0)
    wsafe = np.where(small, 1.0, w)
    return np.where(small, series, (np.exp(-1j * w * t) - 1.0) / wsafe)


class _EigPropagator:
    """Cached eigendecomposition of a truncated generator."""

    def __init__(self, A: TruncatedOperator, budget: int = DENSE_BUDGET):
        self.N = A.N
        if A.diag is not None:
            self.w = np.asarray(A.diag, dtype=complex)
            self._V = None
        else:
            if A.dim > budget:
                raise TooLargeForDense(
                    f"dimension {A.dim} exceeds the dense budget {budget}")
            M = A.to_dense(budget)
            if A.hermitian:
                w, V = np.linalg.eigh(M)
                self.w = w.astype(complex)
                self._V = V
                self._unitary = True
            else:
                w, V = sla.eig(M)
                self.w = w
                self._V = V
                self._unitary = False
                self._lu = sla.lu_factor(V)

    def coeffs(self, vec: np.ndarray) -> np.ndarray:
        if self._V is None:
            return np.asarray(vec, dtype=complex)
        if self._unitary:
            return self._V.conj().T @ vec
        return sla.lu_solve(self._lu, vec)

    def combine(self, c: np.ndarray) -> np.ndarray:
        return c if self._V is None else self._V @ c

    def semigroup(self, t: float, vec: np.ndarray) -> np.ndarray:
        return self.combine(np.exp(-1j * self.w * t) * self.coeffs(vec))

    def duhamel(self, t: float, vec: np.ndarray) -> np.ndarray:
        return self.combine(duhamel_profile(self.w, t) * self.coeffs(vec))

    def inverse(self, vec: np.ndarray) -> np.ndarray:
        return self.combine(self.coeffs(vec) / self.w)


# ---------------------------------------------------------------------------
# Backend B: split-step propagation for separable symbols
# ---------------------------------------------------------------------------

class _SplitPropagator:
    """Strang splitting between the diagonal generator and the mode coupling.

    The diagonal half carries the direction multiplier, the frequency shift,
    and the full viscous decay (all exactly exponentiated).  The other half
    is the truncated off-diagonal coupling, whose norm is the small
    perturbation amplitude; its exponential is summed as a Taylor series on
    the sparse matrix to machine accuracy, so the only splitting error is
    the Strang commutator term and step-halved Richardson extrapolation is
    clean second-to-fourth order.
    """

    def __init__(self, diag_generator: np.ndarray, off):
        self.diag_gen = diag_generator
        self.off = off

    def _coupling_exp(self, v, dt):
        term = v
        out = v.copy()
        for j in range(1, 24):
            term = (-1j * dt / j) * (self.off @ term)
            out = out + term
            if np.linalg.norm(term) <= 1e-17 * np.linalg.norm(out):
                break
        return out

    def _strang(self, v, dt):
        half = np.exp(0.5 * dt * self.diag_gen)
        return half * self._coupling_exp(half * v, dt)

    def run(self, v0: np.ndarray, t: float, n_steps: int) -> np.ndarray:
        v = v0.copy()
        dt = t / n_steps
        for _ in range(n_steps):
            v = self._strang(v, dt)
        return v

    def run_adaptive(self, v0: np.ndarray, t: float, target: float = 1e-8,
                     max_halvings: int = 12) -> np.ndarray:
        """Step-halved Strang with Richardson extrapolation to the target."""
        if t == 0.0:
            return v0.copy()
        n = max(4, int(np.ceil(t / 0.05)))
        coarse = self.run(v0, t, n)
        for _ in range(max_halvings):
            n *= 2
            fine = self.run(v0, t, n)
            err = np.linalg.norm(fine - coarse) / 3.0
            scale = max(np.linalg.norm(fine), 1e-300)
            if err <= target * scale:
                return fine + (fine - coarse) / 3.0
            coarse = fine
        raise BackendDisagreement(
            f"split-step failed to reach local tolerance {target:g} by "
            f"{n} steps over t={t}")


def _split_backend(P: TruncatedOperator, Q: TruncatedOperator, nu: float,
                   omega0: float, f: SpectralField, t: float,
                   target: float = 1e-8) -> np.ndarray:
    """Forced solution via the stationary profile and the split semigroup."""
    if not nu > 0:
        raise BackendDisagreement(
            "the split backend reduces through the stationary profile and "
            "needs nu > 0")
    import scipy.sparse as sp

    if P.diag is not None:
        diag_p = np.asarray(P.diag, dtype=complex)
        off = sp.csr_matrix((P.dim, P.dim), dtype=complex)
    elif P.sparse is not None:
        diag_p = P.sparse.diagonal().astype(complex)
        off = (P.sparse - sp.diags(P.sparse.diagonal())).tocsr()
    else:
        raise BackendDisagreement(
            "split-step backend needs a diagonal or sparse operator")
    u_inf = -Resolvent(P, Q, omega0, nu).solve(f.flat)
    diag_gen = -1j * (diag_p - omega0) - nu * np.asarray(Q.diag, dtype=float)
    prop = _SplitPropagator(diag_gen, off)
    return u_inf - prop.run_adaptive(u_inf, t, target=target)


def propagate(P: TruncatedOperator, Q: TruncatedOperator, nu: float,
              f: SpectralField, omega0: float = 0.0, t: float = 1.0,
              backend: str = "auto", budget: int = DENSE_BUDGET,
              check: bool = False, cross_tol: float = 1e-6) -> SpectralField:
    """The forced solution u(t) with u(0) = 0 and forcing f e^{-i omega0 t}.

    ``backend='eig'`` uses the dense eigendecomposition (hermitian calculus
    when nu = 0), ``'split'`` the operator splitting; ``'auto'`` picks by the
    dense budget.  With ``check=True`` both run and must agree to
    ``cross_tol`` (relative), else :class:`BackendDisagreement`.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if nu < 0:
        raise ValueError("nu must be >= 0")
    A = viscous_operator(P, Q, nu, omega0)
    can_dense = A.diag is not None or A.dim <= budget
    results = {}
    can_split = nu > 0 and (P.diag is not None or P.sparse is not None)
    if (backend in ("eig", "auto") and can_dense) or (check and can_dense):
        results["eig"] = _EigPropagator(A, budget).duhamel(t, f.flat)
    if backend == "split" or (check and can_split) or (backend == "auto" and not can_dense):
        results["split"] = _split_backend(P, Q, nu, omega0, f, t)
    if not results:
        raise TooLargeForDense(
            "no feasible backend: dense budget exceeded and no separable split")
    if check and len(results) == 2:
        a, b = results["eig"], results["split"]
        rel = np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300)
        if rel > cross_tol:
            raise BackendDisagreement(
                f"backends disagree at relative error {rel:.3e}")
    u = results.get("eig", results.get("split"))
    if omega0 != 0.0:
        u = np.exp(-1j * omega0 * t) * u
    return field_from_flat(P.N, u)


# ---------------------------------------------------------------------------
# Contour quadrature
# ---------------------------------------------------------------------------

def _gauss_panels(edges: np.ndarray, n_quad: int):
    x, w = np.polynomial.legendre.leggauss(n_quad)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _segment_width(t: float, res_scale: Optional[float], length: float) -> float:
    """Panel width resolving both the e^{-i lam t} oscillation and the
    boundary layer of the resolvent, whose spectrum sits ~res_scale below
    the axis (panel width ~8x the pole distance keeps Gauss panels exact)."""
    width = 4.0 * np.pi / max(t, 0.5)
    if res_scale is not None:
        width = min(width, max(8.0 * res_scale, length / 240.0))
    return width


def _segment_nodes(a: float, b: float, t: float, n_quad: int,
                   res_scale: Optional[float] = None):
    """Panels on [a, b] sized by :func:`_segment_width`."""
    length = b - a
    n_panels = max(2, int(np.ceil(length / _segment_width(t, res_scale, length))))
    return _gauss_panels(np.linspace(a, b, n_panels + 1), n_quad)


def _ray_nodes(t: float, beta: float, n_quad: int, r_max: Optional[float],
               f_scale: float, margin: float = 0.1):
    """Geometric panels along a descending ray; decay rate t sin(beta).

    Panel widths grow with the decay scale but are capped at a few
    oscillation periods of the transverse phase (rate t cos(beta)).
    """
    rate = t * np.sin(beta)
    r_need = 37.0 / rate
    if r_max is None:
        r_max = r_need
    elif r_max < r_need:
        tail = np.exp(-r_max * rate) / (max(r_max, 1e-300) * np.sin(beta) * rate)
        if tail * f_scale > 1e-12:
            raise ContourTooShort(
                f"ray truncated at r_max={r_max:g} leaves tail ~{tail:.2e}")
    osc = t * max(np.cos(beta), 1e-3)
    width_cap = 4.0 * np.pi / osc
    clearance = max(margin, 1e-3)  # distance from the corner to the spectrum
    edges = [0.0]
    step = min(1.0 / rate, width_cap, 8.0 * clearance)
    while edges[-1] < r_max:
        edges.append(min(edges[-1] + step, r_max))
        local = 8.0 * (clearance + edges[-1] * np.sin(beta))
        step = min(step * 2.0, width_cap, local)
    return _gauss_panels(np.asarray(edges), n_quad)


def _contour_apply(resolve: Callable, norm_P: float, t: float, contour: dict,
                   kernel: Callable, gamma0_weight: Optional[Callable] = None,
                   gamma0_edges: Optional[np.ndarray] = None,
                   res_scale: Optional[float] = None,
                   f_scale: float = 1.0) -> np.ndarray:
    """Quadrature of (2 pi i)^{-1} ∮ kernel(z) (A - z)^{-1} y dz, counterclockwise.

    The path is the segment [-E, E] on the real axis plus two rays descending
    at angles -+beta from its endpoints (E = ||P|| + delta).  ``resolve`` maps
    a complex node z to (A - z)^{-1} y.  ``gamma0_weight`` optionally weights
    the real segment; ``gamma0_edges`` overrides its panel layout (used to
    resolve cutoff transition layers).
    """
    delta = contour.get("delta", 0.1)
    beta = contour.get("beta", np.pi / 4)
    n_quad = contour.get("n_quad", 32)
    r_max = contour.get("r_max")
    E = norm_P + delta
    acc = None

    def add(zs, ws, factor):
        nonlocal acc
        for z, w in zip(zs, ws):
            if w == 0.0:
                continue
            term = (factor * w) * kernel(z) * resolve(z)
            acc = term if acc is None else acc + term

    r, wr = _ray_nodes(t, beta, n_quad, r_max, f_scale, margin=delta)
    add(E + r * np.exp(-1j * beta), wr, np.exp(-1j * beta))
    add(-E - r * np.exp(1j * beta), wr, np.exp(1j * beta))
    if gamma0_edges is not None:
        lam, wl = _gauss_panels(np.asarray(gamma0_edges, dtype=float), n_quad)
    else:
        lam, wl = _segment_nodes(-E, E, t, n_quad, res_scale=res_scale)
    if gamma0_weight is not None:
        wl = wl * gamma0_weight(lam)
    add(lam.astype(complex), wl, 1.0)
    return acc / (2j * np.pi)


def _offwindow_edges(E: float, a_delta: float, delta: float, t: float,
                     res_scale: Optional[float] = None) -> np.ndarray:
    """Panel edges on [-E, E] resolving the oscillation at frequency t, the
    resolvent boundary layer, and the cutoff transition [a delta, delta].
    The off-window weight vanishes identically on (-a delta, a delta)."""
    width = _segment_width(t, res_scale, E - delta)
    layer_w = min(width, (delta - a_delta) / 8.0)
    layer = np.linspace(a_delta, delta, int(np.ceil((delta - a_delta) / layer_w)) + 1)
    n_out = max(2, int(np.ceil((E - delta) / width)))
    outer = np.linspace(delta, E, n_out + 1)
    right = np.concatenate([layer, outer[1:]])
    return np.concatenate([-right[::-1], right])


def semigroup_contour(P: TruncatedOperator, Q: TruncatedOperator, nu: float,
                      t: float, f: SpectralField, contour: Optional[dict] = None,
                      budget: int = DENSE_BUDGET) -> SpectralField:
    """e^{-it(P - i nu Q)} f by resolvent quadrature along the spectral contour.

    Every node costs one factorized resolvent solve; doubling ``n_quad``
    is the self-consistency check (the panels are spectrally accurate).
    """
    if not t > 0:
        raise ValueError("the contour representation needs t > 0")
    params = dict(DEFAULT_CONTOUR)
    if contour:
        params.update(contour)
    norm_P = P.norm_upper_bound()
    cache = {}

    def resolve(z):
        if z not in cache:
            cache[z] = Resolvent(P, Q, z, nu, budget=budget).solve(f.flat)
        return cache[z]

    out = _contour_apply(resolve, norm_P, t, params,
                         kernel=lambda z: np.exp(-1j * z * t),
                         res_scale=nu, f_scale=f.l2_norm())
    return field_from_flat(P.N, out)


# ---------------------------------------------------------------------------
# Three-term decomposition
# ---------------------------------------------------------------------------

@dataclass
class DecompositionResult:
    """u(t) = u_inf + b(t) + e(t) with the norms of every part.

    u_inf is the stationary viscous profile -(P - i nu Q)^{-1} f; b collects
    the spectrally-off-window and ray contributions (uniformly bounded by the
    H^1 size of the forcing); e is the slowly decaying central-window part.
    """

    u_nu_t: SpectralField
    u_inf: SpectralField
    b: SpectralField
    e: SpectralField
    t: float
    nu: float
    norms: dict


class Decomposer:
    """Shared eigen- and cutoff caches for decomposing many times at one nu."""

    def __init__(self, P: TruncatedOperator, Q: TruncatedOperator, nu: float,
                 f: SpectralField, delta: float = 0.1,
                 inner_fraction: float = 0.5, contour: Optional[dict] = None,
                 budget: int = DENSE_BUDGET):
        if not nu > 0:
            raise ValueError("decomposition needs nu > 0")
        self.P, self.Q, self.nu = P, Q, nu
        self.N, self.f = P.N, f
        self.delta, self.inner = delta, inner_fraction
        self.contour = dict(DEFAULT_CONTOUR)
        if contour:
            self.contour.update(contour)
        self.budget = budget
        A = viscous_operator(P, Q, nu, 0.0)
        self.prop = _EigPropagator(A, budget)
        self.phi, self.chi = cutoff_profiles(delta, inner_fraction)
        if P.diag is not None:
            w = np.real(P.diag)
            phi_w = self.phi(w)
            self.phif = phi_w * f.flat
        else:
            w, U = np.linalg.eigh(P.to_dense(budget))
            phi_w = self.phi(w)
            self.phif = (U * phi_w) @ (U.conj().T @ f.flat)
        bad = (phi_w > 1e-13) & (self.chi(w) < 1.0 - 1e-12)
        if np.any(bad):
            raise CutoffMismatch(
                "inner cutoff support leaks outside the outer plateau")
        self.restf = f.flat - self.phif
        self.norm_P = P.norm_upper_bound()
        # eigen-space coefficient vectors reused across times
        self.c_phif = self.prop.coeffs(self.phif)
        self.c_rest_inv = self.prop.coeffs(self.restf) / self.prop.w
        self.c_f_inv = self.prop.coeffs(f.flat) / self.prop.w
        self.u_inf = field_from_flat(self.N, -self.prop.combine(
            self.prop.coeffs(f.flat) / self.prop.w))

    def _resolve_phif(self, z):
        return self.c_phif / (self.prop.w - z)

    def _b_tail(self, t: float) -> np.ndarray:
        """i * integral over (t, inf) of the ray and off-window pieces on phi(P) f.

        Time-integrating e^{-izs} over (t, inf) turns the semigroup kernel
        into e^{-izt}/z; the 1/z pole is harmless because the off-window
        weight 1 - chi vanishes near zero on the real segment and the rays
        stay away from the origin.
        """
        def kernel(z):
            return np.exp(-1j * z * t) / z

        E = self.norm_P + self.contour.get("delta", 0.1)
        edges = _offwindow_edges(E, self.inner * self.delta, self.delta, t,
                                 res_scale=self.nu)
        acc = _contour_apply(self._resolve_phif, self.norm_P, t, self.contour,
                             kernel=kernel,
                             gamma0_weight=lambda lam: 1.0 - self.chi(lam),
                             gamma0_edges=edges,
                             f_scale=float(np.linalg.norm(self.phif)))
        return self.prop.combine(acc)

    def at_time(self, t: float) -> DecompositionResult:
        decay = np.exp(-1j * self.prop.w * t)
        term1 = self.prop.combine(decay * self.c_rest_inv)
        b_flat = term1 + self._b_tail(t)
        semi_inv = self.prop.combine(decay * self.c_f_inv)
        e_flat = semi_inv - b_flat
        u_flat = self.u_inf.flat + b_flat + e_flat
        parts = {
            "u": field_from_flat(self.N, u_flat),
            "u_inf": self.u_inf,
            "b": field_from_flat(self.N, b_flat),
            "e": field_from_flat(self.N, e_flat),
        }
        norms = {name: {"L2": part.l2_norm(),
                        "H1": sobolev_norm(part, 1.0),
                        "Hm06": sobolev_norm(part, -0.6)}
                 for name, part in parts.items()}
        return DecompositionResult(u_nu_t=parts["u"], u_inf=self.u_inf,
                                   b=parts["b"], e=parts["e"], t=t,
                                   nu=self.nu, norms=norms)

    def remainder_direct(self, t: float, S: Optional[float] = None,
                         rel_tol: float = 1e-6, n_quad: int = 32,
                         max_doublings: int = 8) -> np.ndarray:
        """The central-window remainder by direct quadrature of its definition.

        The time integral over (t, S) is carried out exactly per frequency,
        giving the kernel (e^{-i lam t} - e^{-i lam S})/lam; S is doubled
        until the result settles (the dropped tail vanishes by oscillatory
        cancellation against the smooth compactly supported integrand).
        """
        if S is None:
            S = max(8.0 * t + 10.0, 50.0 / self.nu)

        def eval_at(S_val):
            def kern(lam):
                small = np.abs(lam * S_val) < 1e-8
                if small:
                    return (-1j * (t - S_val) - lam * (t ** 2 - S_val ** 2) / 2.0
                            + 1j * lam ** 2 * (t ** 3 - S_val ** 3) / 6.0)
                return (np.exp(-1j * lam * t) - np.exp(-1j * lam * S_val)) / lam

            # panels on the cutoff support resolving the fast e^{-i lam S} phase
            n_panels = max(4, int(np.ceil(2 * self.delta * S_val / (6.0 * np.pi))))
            edges = np.linspace(-self.delta, self.delta, n_panels + 1)
            lam, wl = _gauss_panels(edges, n_quad)
            acc = np.zeros_like(self.c_phif)
            for L, W in zip(lam, wl):
                acc = acc + (W * self.chi(L) * kern(L)) * self._resolve_phif(L)
            return self.prop.combine(acc) / (2j * np.pi)

        prev = eval_at(S)
        for _ in range(max_doublings):
            S *= 2.0
            cur = eval_at(S)
            diff = np.linalg.norm(cur - prev)
            if diff <= max(rel_tol * np.linalg.norm(cur), 1e-12):
                return cur
            prev = cur
        return prev


def decompose(P: TruncatedOperator, Q: TruncatedOperator, nu: float, t: float,
              f: SpectralField, delta: float = 0.1, inner_fraction: float = 0.5,
              contour: Optional[dict] = None,
              budget: int = DENSE_BUDGET) -> DecompositionResult:
    """Three-term decomposition at a single time (see :class:`Decomposer`)."""
    return Decomposer(P, Q, nu, f, delta=delta, inner_fraction=inner_fraction,
                      contour=contour, budget=budget).at_time(t)


# ---------------------------------------------------------------------------
# Scans
# ---------------------------------------------------------------------------

def contraction_check(P: TruncatedOperator, Q: TruncatedOperator, nu: float,
                      f: SpectralField, t_grid, slack: float = 1e-8,
                      budget: int = DENSE_BUDGET) -> dict:
    """Verify the semigroup contraction ||e^{-itA} f|| <= e^{-t nu} ||f||."""
    prop = _EigPropagator(viscous_operator(P, Q, nu, 0.0), budget)
    f0 = f.l2_norm()
    rows, ok = [], True
    worst = -np.inf
    for t in t_grid:
        val = float(np.linalg.norm(prop.semigroup(float(t), f.flat)))
        bound = np.exp(-float(t) * nu) * f0
        margin = val / bound - 1.0
        worst = max(worst, margin)
        good = margin <= slack
        ok = ok and good
        rows.append({"t": float(t), "norm": val, "bound": bound, "ok": good})
    return {"ok": ok, "max_margin": worst, "points": rows, "nu": nu}


def timescale_scan(P: TruncatedOperator, Q: TruncatedOperator, f: SpectralField,
                   delta1: float, nu_grid, s: float = -0.6, delta: float = 0.1,
                   inner_fraction: float = 0.5, filter_forcing: bool = False,
                   points_per_decade: int = 16, t_min: float = 0.5,
                   t_max: Optional[float] = None, budget: int = DENSE_BUDGET,
                   contour: Optional[dict] = None,
                   stationary_nu_seq=None) -> dict:
    """Norms of the decomposition along t through the dissipation-onset window.

    For each nu the time grid is logarithmic and reaches past the window
    t* = nu^(-1/3 - delta1).  Records carry the remainder and bounded-part
    norms plus the discrepancy of u(t) against two references: the inviscid
    solution u0(t) and the stationary small-absorption profile.  The fitted
    decay exponent of ||e(t*)||_s across the window is reported as delta2.
    """
    nu_grid = sorted(float(v) for v in nu_grid)
    phi, _ = cutoff_profiles(delta, inner_fraction)
    if P.diag is not None:
        w = np.real(P.diag)
        apply_phi = lambda v: phi(w) * v
    else:
        w, U = np.linalg.eigh(P.to_dense(budget))
        apply_phi = lambda v: (U * phi(w)) @ (U.conj().T @ v)
    if filter_forcing:
        f = field_from_flat(P.N, apply_phi(f.flat))

    inviscid = _EigPropagator(
        TruncatedOperator(N=P.N, kind=P.kind, hermitian=True,
                          matrix=None if P.diag is not None else P.to_dense(budget),
                          diag=P.diag), budget)
    stationary = None
    if stationary_nu_seq is None:
        stationary_nu_seq = [1e-3 * 2.0 ** -j for j in range(6)]
    try:
        stationary = -1.0 * limiting_resolvent(P, 0.0, f, stationary_nu_seq,
                                               s=s, budget=budget)
    except Exception:
        stationary = None

    records = []
    window_norm_e = {}
    for nu in sorted(nu_grid, reverse=True):
        dec = Decomposer(P, Q, nu, f, delta=delta,
                         inner_fraction=inner_fraction, contour=contour,
                         budget=budget)
        t_star = nu ** (-1.0 / 3.0 - delta1)
        t_top = max(t_max if t_max is not None else 0.0, 4.0 * t_star)
        n_pts = max(4, int(np.ceil(points_per_decade
                                   * np.log10(t_top / t_min))))
        t_grid = np.geomspace(t_min, t_top, n_pts)
        for t in t_grid:
            r = dec.at_time(float(t))
            u0 = inviscid.duhamel(float(t), f.flat)
            diff_u0 = sobolev_norm(r.u_nu_t - field_from_flat(P.N, u0), s)
            diff_stat = (sobolev_norm(r.u_nu_t - stationary, s)
                         if stationary is not None else np.nan)
            records.append({
                "nu": nu, "t": float(t),
                "norm_e_s": sobolev_norm(r.e, s),
                "norm_b_L2": r.norms["b"]["L2"],
                "norm_u_minus_u0_s": diff_u0,
                "norm_u_minus_stat_s": diff_stat,
                "in_window": bool(t >= t_star),
            })
        r_star = dec.at_time(t_star)
        window_norm_e[nu] = {
            "t_star": t_star,
            "norm_e_s": sobolev_norm(r_star.e, s),
        }

    f_h1 = sobolev_norm(f, 1.0)
    b_sup = max(r["norm_b_L2"] for r in records) / max(f_h1, 1e-300)
    delta2, per_nu_slopes = _window_decay_fit(records, nu_grid)
    window_sup, window_sup_stat = {}, {}
    for nu in nu_grid:
        in_win = [r for r in records if r["nu"] == nu and r["in_window"]]
        window_sup[nu] = max((r["norm_u_minus_u0_s"] for r in in_win),
                             default=np.nan)
        window_sup_stat[nu] = max((r["norm_u_minus_stat_s"] for r in in_win),
                                  default=np.nan)
    return {
        "records": records,
        "fits": {"delta2": delta2, "per_nu_decay": per_nu_slopes,
                 "b_sup_ratio": b_sup, "e_at_window": window_norm_e},
        "window_sup_u0": window_sup,
        "window_sup_stationary": window_sup_stat,
        "s": s, "delta1": delta1, "filtered": filter_forcing,
    }


def _window_decay_fit(records, nu_grid):
    """Common t-decay exponent of the remainder over the window.

    Least squares of log ||e|| against log t with one intercept per
    viscosity and a shared slope; returns (delta2, per-nu slopes) where
    delta2 is minus the shared slope.
    """
    win = [(r["nu"], r["t"], r["norm_e_s"]) for r in records
           if r["in_window"] and r["norm_e_s"] > 0]
    nus = sorted({w[0] for w in win})
    if len(win) < len(nus) + 2:
        return np.nan, {}
    A = np.zeros((len(win), len(nus) + 1))
    rhs = np.empty(len(win))
    for i, (nu, t, e) in enumerate(win):
        A[i, nus.index(nu)] = 1.0
        A[i, -1] = np.log(t)
        rhs[i] = np.log(e)
    coef, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    per_nu = {}
    for nu in nus:
        pts = [(np.log(t), np.log(e)) for m, t, e in win if m == nu]
        if len(pts) >= 2:
            x, y = zip(*pts)
            per_nu[nu] = -float(np.polyfit(x, y, 1)[0])
    return -float(coef[-1]), per_nu
