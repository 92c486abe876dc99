"""Classical dynamics on energy shells of a degree-zero symbol.

The rescaled Hamilton flow lives on (x, theta) with a decoupled radial rate
rho' = -(d_x p).theta.  Orbits on a shell {p = omega} are integrated in
batches; their forward/backward tails are clustered into candidate invariant
sets which are classified as attractors (radial rate up, certified
hyperbolicity beta > 0), repulsors (same for the reversed flow), or
degenerate.  An escape function is then built by flowing a seed bump forward
and subtracting the accumulated expected growth, and the simple-structure
hypothesis (every shell orbit falls forward into the attractor family and
backward into the repulsor family, with matching basins) is certified or
refuted empirically per symbol.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ._rk8 import integrate_batch, rk8_step
from .errors import LimitNotConverged, NotRegularValue, StepUnderflow
from .symbols import FlowPoint, HomogeneousSymbol, field_components, radial_rate, wrap_angle
from .util import plateau, plateau_deriv, torus_distances, wrapped_diff

TWO_PI = 2.0 * np.pi

DEFAULT_T = 200.0
DEFAULT_DT = 1e-2
T_CAP = 3200.0
CLUSTER_RADIUS = 0.05
ENERGY_TOL = 1e-6
BETA_PERCENTILE = 5.0
BETA_TOL = 1e-3


def _field_rhs(sym: HomogeneousSymbol, reverse: bool = False) -> Callable:
    """Batched right-hand side in (x1, x2, theta, rho) coordinates."""
    sign = -1.0 if reverse else 1.0

    def rhs(y):
        dx1, dx2, dth, drho = field_components(sym, y[:, 0], y[:, 1], y[:, 2])
        return sign * np.stack([dx1, dx2, dth, drho], axis=1)

    return rhs


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """An integrated orbit: rows of ``states`` are (x1, x2, theta, rho)."""

    times: np.ndarray
    states: np.ndarray
    energy: float

    @property
    def points(self) -> list[FlowPoint]:
        return [FlowPoint(x=s[:2], theta=s[2], rho=s[3]) for s in self.states]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x1", "x2", "theta", "rho"])
            for t, s in zip(self.times, self.states):
                w.writerow([f"{t:.12g}"] + [f"{v:.12g}" for v in s])


def integrate_flow(sym: HomogeneousSymbol, start: FlowPoint, T: float,
                   dt: float = DEFAULT_DT, energy_tol: float = ENERGY_TOL,
                   store_stride: int = 1) -> Trajectory:
    """Integrate the rescaled Hamilton flow from ``start`` for signed time T.

    The step is halved until the conserved energy p drifts by less than
    ``energy_tol`` at every stored point; a step below 1e-12 raises
    :class:`StepUnderflow`.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if T == 0.0:
        raise ValueError("T must be nonzero")
    y0 = start.as_array()[None, :]
    omega = float(sym(start.x[0], start.x[1], start.theta))
    rhs = _field_rhs(sym)
    step = dt
    while True:
        _, times, stored = integrate_batch(rhs, y0, T, step, store_stride=store_stride)
        states = stored[:, 0, :]
        drift = np.max(np.abs(np.asarray(sym(states[:, 0], states[:, 1], states[:, 2])) - omega))
        if drift <= energy_tol:
            break
        step *= 0.5
        if step < 1e-12:
            raise StepUnderflow(f"energy drift {drift:.3e} persists at dt={step:.3e}")
    states = states.copy()
    states[:, 0] = wrap_angle(states[:, 0])
    states[:, 1] = wrap_angle(states[:, 1])
    states[:, 2] = wrap_angle(states[:, 2])
    return Trajectory(times=times, states=states, energy=omega)


# ---------------------------------------------------------------------------
# Shell sampling
# ---------------------------------------------------------------------------

def sample_shell(sym: HomogeneousSymbol, omega, n_samples: int, rng,
                 min_grad: float = 1e-8, theta_scan: int = 256,
                 max_tries: int = 64) -> np.ndarray:
    """Sample the energy shell {p = omega}: uniform base points, theta solved per point.

    ``omega`` may be a scalar or an (n_samples,) array of per-sample energies.
    Returns (n, 3) rows (x1, x2, theta).  Raises :class:`NotRegularValue` when
    the full gradient of p is below ``min_grad`` at an accepted sample.
    """
    omega = np.broadcast_to(np.asarray(omega, dtype=float), (n_samples,)).copy()
    grid = np.linspace(0.0, TWO_PI, theta_scan, endpoint=False)
    out = np.full((n_samples, 3), np.nan)
    todo = np.arange(n_samples)
    for _ in range(max_tries):
        if todo.size == 0:
            break
        m = todo.size
        x = rng.uniform(0.0, TWO_PI, size=(m, 2))
        vals = np.asarray(sym(x[:, 0:1], x[:, 1:2], grid[None, :])) - omega[todo, None]
        nxt = np.roll(vals, -1, axis=1)
        bracket = (vals * nxt <= 0.0) & ~((vals == 0.0) & (nxt == 0.0))
        counts = bracket.sum(axis=1)
        ok = counts > 0
        if not np.any(ok):
            continue
        rows = np.where(ok)[0]
        # pick one bracket per sample at random
        pick = (rng.random(rows.size) * counts[rows]).astype(int)
        idx = np.array([np.where(bracket[r])[0][p] for r, p in zip(rows, pick)])
        lo = grid[idx]
        hi = lo + TWO_PI / theta_scan
        xs = x[rows]
        om = omega[todo[rows]]
        flo = np.asarray(sym(xs[:, 0], xs[:, 1], lo)) - om
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            fmid = np.asarray(sym(xs[:, 0], xs[:, 1], mid)) - om
            left = flo * fmid <= 0.0
            hi = np.where(left, mid, hi)
            lo = np.where(left, lo, mid)
            flo = np.where(left, flo, fmid)
        theta = 0.5 * (lo + hi)
        out[todo[rows], 0] = xs[:, 0]
        out[todo[rows], 1] = xs[:, 1]
        out[todo[rows], 2] = wrap_angle(theta)
        todo = todo[~ok]
    if todo.size:
        raise ValueError(f"could not place {todo.size} samples on the shell; "
                         "is the energy attained?")
    gx = np.abs(np.asarray(sym.dx1(out[:, 0], out[:, 1], out[:, 2])))
    gy = np.abs(np.asarray(sym.dx2(out[:, 0], out[:, 1], out[:, 2])))
    gt = np.abs(np.asarray(sym.dtheta(out[:, 0], out[:, 1], out[:, 2])))
    gnorm = np.sqrt(gx ** 2 + gy ** 2 + gt ** 2)
    if np.any(gnorm < min_grad):
        raise NotRegularValue(f"gradient of p below {min_grad:g} at a sample")
    return out


# ---------------------------------------------------------------------------
# Limit-set detection
# ---------------------------------------------------------------------------

@dataclass
class InvariantSet:
    """A detected limit set with its classification and hyperbolicity data.

    ``representatives`` rows are (x1, x2, theta) at rho = 0; ``radial_rate``
    is the mean of rho' over members for the forward flow, and ``beta`` the
    certified lower percentile of the escape rate (computed for the reversed
    flow in the repulsor case).  Degenerate sets carry beta = 0.
    """

    kind: str
    representatives: np.ndarray
    radial_rate: float
    beta: float
    energy: float
    n_members: int = 0

    @property
    def points(self) -> list[FlowPoint]:
        return [FlowPoint(x=r[:2], theta=r[2], rho=0.0) for r in self.representatives]


def _cluster_torus(points: np.ndarray, radius: float) -> np.ndarray:
    """Chain clustering on the 3-torus: points in adjacent radius-cells link up."""
    n_cells = int(np.ceil(TWO_PI / radius))
    cells = np.floor(points / radius).astype(np.int64) % n_cells
    code = (cells[:, 0] * n_cells + cells[:, 1]) * n_cells + cells[:, 2]
    occ, inverse = np.unique(code, return_inverse=True)
    u = occ.size
    rows, cols = [np.arange(u)], [np.arange(u)]
    decoded = np.stack([occ // (n_cells * n_cells),
                        (occ // n_cells) % n_cells,
                        occ % n_cells], axis=1)
    offsets = [(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)]
    offsets = [o for o in offsets if o > (0, 0, 0)]  # half of the 26-neighborhood
    for off in offsets:
        nb = (decoded + off) % n_cells
        nb_code = (nb[:, 0] * n_cells + nb[:, 1]) * n_cells + nb[:, 2]
        pos = np.searchsorted(occ, nb_code)
        pos = np.clip(pos, 0, u - 1)
        hit = occ[pos] == nb_code
        rows.append(np.where(hit)[0])
        cols.append(pos[hit])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    adj = sp.coo_matrix((np.ones(r.size), (r, c)), shape=(u, u))
    _, cell_labels = connected_components(adj, directed=False)
    return cell_labels[inverse]


def _integrate_tails(sym, starts, T, dt, reverse, settle_fraction, spacing,
                     n_jobs: int = 1):
    """Run the batch flow and return per-sample tail points (last quarter).

    Orbits are independent; ``n_jobs`` > 1 splits the batch across threads
    (numpy releases the GIL) and merges the chunks back in sample order.
    """
    rhs = _field_rhs(sym, reverse=reverse)
    y0 = np.column_stack([starts, np.zeros(len(starts))])
    v0 = rhs(y0)
    vmax = max(1e-6, float(np.max(np.abs(v0[:, :3]))) * 1.5)
    stride = max(1, int(spacing / (dt * vmax)))

    def chunk_run(chunk):
        _, _, stored = integrate_batch(
            rhs, chunk, T, dt, store_stride=stride,
            store_from=T * (1.0 - settle_fraction))
        return np.transpose(stored, (1, 0, 2))

    if n_jobs > 1 and len(y0) >= 2 * n_jobs:
        from concurrent.futures import ThreadPoolExecutor

        chunks = np.array_split(y0, n_jobs)
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(chunk_run, chunks))
        return np.concatenate(parts, axis=0)
    return chunk_run(y0)


def detect_invariant_sets(sym: HomogeneousSymbol, omega: float,
                          n_samples: int = 600, T: float = DEFAULT_T,
                          dt: float = DEFAULT_DT,
                          cluster_radius: float = CLUSTER_RADIUS,
                          beta_percentile: float = BETA_PERCENTILE,
                          beta_tol: float = BETA_TOL,
                          settle_fraction: float = 0.25,
                          majority: float = 0.95,
                          max_T: float = T_CAP,
                          max_representatives: int = 400,
                          seed: int = 0,
                          n_jobs: int = 1,
                          rng: Optional[np.random.Generator] = None,
                          samples: Optional[np.ndarray] = None):
    """Detect attractors and repulsors of the shell flow at energy omega.

    Samples the shell, integrates forward and backward, chains the tail
    points into clusters, and classifies each cluster from the sign and lower
    percentile of the radial rate over its members.  Returns
    ``(sets, coverage)`` where coverage reports the fraction of samples whose
    forward (resp. backward) orbit settles into an attractor (resp. repulsor),
    plus per-sample no-convergence counts.
    """
    rng = rng if rng is not None else np.random.default_rng(seed)
    if samples is None:
        samples = sample_shell(sym, omega, n_samples, rng)
    else:
        n_samples = len(samples)
    spacing = 0.8 * cluster_radius

    sets: list[InvariantSet] = []
    coverage = {"n_samples": int(n_samples), "omega": float(omega)}
    assigned = {}

    for direction, reverse in (("forward", False), ("backward", True)):
        tails = _integrate_tails(sym, samples, T, dt, reverse, settle_fraction,
                                 spacing, n_jobs=n_jobs)
        horizon = T
        pending = np.arange(n_samples)
        labels_per_sample = np.full(n_samples, -1, dtype=int)
        pool = tails.reshape(-1, 4)
        sample_of = np.repeat(np.arange(n_samples), tails.shape[1])
        pts = np.column_stack([wrap_angle(pool[:, 0]), wrap_angle(pool[:, 1]),
                               wrap_angle(pool[:, 2])])
        labels = _cluster_torus(pts, cluster_radius)
        n_clusters = labels.max() + 1

        # majority assignment per sample
        for i in range(n_samples):
            mask = sample_of == i
            li = labels[mask]
            counts = np.bincount(li, minlength=n_clusters)
            top = counts.argmax()
            if counts[top] >= majority * li.size:
                labels_per_sample[i] = top
        pending = np.where(labels_per_sample < 0)[0]

        # lengthen the horizon for stragglers, assigning them to existing clusters
        reps_by_label = {}
        for lab in range(n_clusters):
            member = pts[labels == lab]
            if len(member) > 2000:
                member = member[rng.choice(len(member), 2000, replace=False)]
            reps_by_label[lab] = member
        while pending.size and horizon < max_T:
            horizon *= 2.0
            extra = _integrate_tails(sym, samples[pending], horizon, dt, reverse,
                                     settle_fraction, spacing)
            for row, i in enumerate(pending.copy()):
                tail = extra[row]
                tp = np.column_stack([wrap_angle(tail[:, 0]), wrap_angle(tail[:, 1]),
                                      wrap_angle(tail[:, 2])])
                votes = np.full(len(tp), -1, dtype=int)
                for lab, member in reps_by_label.items():
                    d = torus_distances(tp, member).min(axis=1)
                    votes[(d <= cluster_radius) & (votes < 0)] = lab
                good = votes >= 0
                if good.sum() >= majority * len(tp):
                    counts = np.bincount(votes[good], minlength=n_clusters)
                    labels_per_sample[i] = counts.argmax()
            pending = np.where(labels_per_sample < 0)[0]

        # classify clusters
        kinds = {}
        for lab in range(n_clusters):
            member = pts[labels == lab]
            rr = np.asarray(radial_rate(sym, member[:, 0], member[:, 1], member[:, 2]))
            if reverse:
                rr_escape = -rr
            else:
                rr_escape = rr
            beta = float(np.percentile(rr_escape, beta_percentile))
            rate = float(np.mean(rr))
            if beta > beta_tol and (rate > 0) != reverse:
                kind = "attractor" if not reverse else "repulsor"
            else:
                kind, beta = "degenerate", 0.0
            kinds[lab] = kind
            reps = member
            if len(reps) > max_representatives:
                reps = reps[rng.choice(len(reps), max_representatives, replace=False)]
            sets.append(InvariantSet(kind=kind, representatives=reps,
                                     radial_rate=rate, beta=beta,
                                     energy=float(omega), n_members=int(len(member))))

        target = "attractor" if not reverse else "repulsor"
        hit = np.array([labels_per_sample[i] >= 0 and kinds[labels_per_sample[i]] == target
                        for i in range(n_samples)])
        assigned[direction] = hit
        coverage[f"{direction}_coverage"] = float(np.mean(hit))
        coverage[f"no_convergence_{direction}"] = int(np.sum(labels_per_sample < 0))

    both = assigned["forward"] & assigned["backward"]
    either = assigned["forward"] | assigned["backward"]
    coverage["union_coverage"] = float(np.mean(either))
    coverage["both_coverage"] = float(np.mean(both))
    fwd, bwd = assigned["forward"], assigned["backward"]
    coverage["matching_fraction"] = float(
        min(np.mean(bwd[fwd]) if fwd.any() else 0.0,
            np.mean(fwd[bwd]) if bwd.any() else 0.0))
    coverage["sample_forward_converged"] = fwd
    coverage["sample_backward_converged"] = bwd
    return sets, coverage


# ---------------------------------------------------------------------------
# Escape functions
# ---------------------------------------------------------------------------

@dataclass
class EscapeFunction:
    """Sampled degree-one escape function (values at rho = 0, k = e^rho * k0).

    ``flow_derivative`` holds the derivative of k along the flow at each
    sample, which equals the positive comparison rate used in the limit
    construction; it exceeds beta/2 on the certified basin.
    """

    points: np.ndarray
    values: np.ndarray
    flow_derivative: np.ndarray
    beta: float
    settle_times: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def samples(self) -> dict:
        return {FlowPoint(x=p[:2], theta=p[2], rho=0.0): float(v)
                for p, v in zip(self.points, self.values)}


def escape_limit_values(velocity: Callable, radial: Optional[Callable],
                        k1: Callable, integrand: Callable,
                        y0: np.ndarray, dt: float = 2e-2,
                        chunk: float = 5.0, T_max: float = 800.0,
                        tol: float = 1e-8):
    """Evaluate the flow-limit escape construction at a batch of points.

    Integrates y' = velocity(y) together with rho' = radial(y) and the
    accumulator  acc' = e^rho integrand(y),  where integrand = Xk1 - m for a
    seed k1 and a positive comparison rate m that equals Xk1 near the limit
    set; the limit value is  k1(y0) + acc(infinity),  reached in finite time
    once the orbit enters the region where the integrand vanishes.
    Convergence is declared when the accumulator moves by less than ``tol``
    over two consecutive chunks; samples that fail to converge by ``T_max``
    raise :class:`LimitNotConverged`.

    Returns (values, settle_times).
    """
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    n, d = y0.shape

    def rhs(z):
        y = z[:, :d]
        v = velocity(y)
        rho_dot = radial(y) if radial is not None else np.zeros(len(y))
        acc_dot = np.exp(z[:, d]) * np.asarray(integrand(y))
        return np.column_stack([v, rho_dot, acc_dot])

    state = np.column_stack([y0, np.zeros((n, 2))])
    values = np.asarray(k1(y0), dtype=float).copy()
    settle = np.full(n, np.nan)
    active = np.arange(n)
    last_acc = state[:, d + 1].copy()
    quiet = np.zeros(n, dtype=int)
    t = 0.0
    n_sub = max(1, int(round(chunk / dt)))
    while active.size and t < T_max:
        sub = state[active]
        for _ in range(n_sub):
            sub = rk8_step(rhs, sub, dt)
        state[active] = sub
        t += n_sub * dt
        acc = state[active, d + 1]
        moved = np.abs(acc - last_acc[active])
        scale = np.maximum(1.0, np.abs(values[active] + acc))
        settled = moved < tol * scale
        quiet[active] = np.where(settled, quiet[active] + 1, 0)
        last_acc[active] = acc
        done = quiet[active] >= 2
        if np.any(done):
            idx = active[done]
            settle[idx] = t
            values[idx] += state[idx, d + 1]
            active = active[~done]
    if active.size:
        raise LimitNotConverged(
            f"{active.size} of {n} samples did not converge by T={T_max}")
    return values, settle


def _thin_on_grid(points: np.ndarray, cell: float) -> np.ndarray:
    """Keep one point per occupied torus cell of the given size (deterministic)."""
    n_cells = int(np.ceil(TWO_PI / cell))
    cells = np.floor(np.mod(points, TWO_PI) / cell).astype(np.int64) % n_cells
    code = (cells[:, 0] * n_cells + cells[:, 1]) * n_cells + cells[:, 2]
    _, keep = np.unique(code, return_index=True)
    return points[np.sort(keep)]


class _EscapeKit:
    """Seed bump, comparison rate, and fused integrand for one attractor family."""

    def __init__(self, sym, reps, beta, bump_radius, patch_radius, sharpness,
                 knn=16):
        from scipy.spatial import cKDTree

        self.sym = sym
        self.refs = reps
        self.beta = float(beta)
        self.bump_radius = float(bump_radius)
        self.patch_radius = float(patch_radius)
        self.sharpness = float(sharpness)
        self.far = self.bump_radius + 0.12
        self.knn = min(knn, len(reps))
        boxed = np.mod(reps, TWO_PI)
        boxed[boxed >= TWO_PI] = 0.0
        self.tree = cKDTree(boxed, boxsize=TWO_PI)

    def _seed_parts(self, Y):
        # soft minimum over the k nearest reference points only; with the
        # sharpness used here farther points carry no weight at all
        _, idx = self.tree.query(np.mod(Y, TWO_PI), k=self.knn)
        idx = np.atleast_2d(idx)
        if idx.shape[0] != len(Y):
            idx = idx.reshape(len(Y), -1)
        diffs = wrapped_diff(Y[:, None, :], self.refs[idx])
        dists = np.maximum(np.sqrt(np.sum(diffs * diffs, axis=-1)), 1e-12)
        dmin = dists.min(axis=1, keepdims=True)
        w = np.exp(-self.sharpness * (dists - dmin))
        wsum = w.sum(axis=1)
        dist = dmin[:, 0] - np.log(wsum) / self.sharpness
        dgrad = np.einsum("nm,nmc->nc", w / wsum[:, None], diffs / dists[:, :, None])
        r_in, r_out = 0.5 * self.bump_radius, self.bump_radius
        val = plateau(dist, r_in, r_out)
        dval = plateau_deriv(dist, r_in, r_out)
        return dist, val, dval[:, None] * dgrad

    def velocity(self, Y):
        dx1, dx2, dth, _ = field_components(self.sym, Y[:, 0], Y[:, 1], Y[:, 2])
        return np.stack([dx1, dx2, dth], axis=1)

    def radial(self, Y):
        return np.asarray(radial_rate(self.sym, Y[:, 0], Y[:, 1], Y[:, 2]))

    def k1(self, Y):
        return self._seed_parts(Y)[1]

    def xk1(self, Y):
        _, val, grad = self._seed_parts(Y)
        return self.radial(Y) * val + np.einsum("nc,nc->n", self.velocity(Y), grad)

    def comparison(self, Y):
        """The positive rate m: equals Xk1 near the attractor, beta far away."""
        dist, val, grad = self._seed_parts(Y)
        xk1 = self.radial(Y) * val + np.einsum("nc,nc->n", self.velocity(Y), grad)
        chi = plateau(dist, self.patch_radius, 2.0 * self.patch_radius)
        return chi * xk1 + (1.0 - chi) * self.beta

    def integrand(self, Y):
        """Fused Xk1 - m; identically -beta far from the attractor."""
        out = np.full(len(Y), -self.beta)
        d1, _ = self.tree.query(np.mod(Y, TWO_PI))
        near = d1 < self.far
        if np.any(near):
            Yn = Y[near]
            dist, val, grad = self._seed_parts(Yn)
            xk1 = self.radial(Yn) * val + np.einsum("nc,nc->n", self.velocity(Yn), grad)
            chi = plateau(dist, self.patch_radius, 2.0 * self.patch_radius)
            out[near] = (1.0 - chi) * (xk1 - self.beta)
        return out


def _escape_kit_for(sym: HomogeneousSymbol, sets: list[InvariantSet],
                    samples: np.ndarray, bump_radius: float,
                    patch_radius: float, sharpness: float,
                    settle_T: float, dt: float) -> _EscapeKit:
    """Assemble the seed data for the attractor family over the whole band.

    The detected sets certify the attractor (and fix beta); the reference
    cloud itself is enriched by flowing the requested samples forward and
    keeping their settled tails, so that the limit circles of every energy
    shell in the band are covered.  Tail points whose radial rate falls below
    0.6 beta (stragglers still in transit) are discarded.
    """
    attractors = [s for s in sets if s.kind == "attractor" and s.beta > 0]
    if not attractors:
        raise ValueError("no attractor with beta > 0 among the detected sets")
    beta = min(s.beta for s in attractors)
    tails = _integrate_tails(sym, samples, settle_T, dt, False, 0.25,
                             0.8 * CLUSTER_RADIUS)
    pool = tails.reshape(-1, 4)[:, :3]
    pool = np.mod(pool, TWO_PI)
    rr = np.asarray(radial_rate(sym, pool[:, 0], pool[:, 1], pool[:, 2]))
    pool = pool[rr >= 0.6 * beta]
    refs = np.vstack([np.vstack([s.representatives for s in attractors]), pool])
    refs = _thin_on_grid(refs, 0.5 * patch_radius)
    kit = _EscapeKit(sym, refs, beta, bump_radius, patch_radius, sharpness)

    # sanity: the seed derivative must stay positive on the attractor family
    probe = kit.xk1(kit.refs)
    if np.min(probe) < 0.25 * beta:
        raise LimitNotConverged(
            "seed derivative drops below beta/4 on the attractor family; "
            "basin detection looks unreliable")
    return kit


def build_escape_function(sym: HomogeneousSymbol, sets: list[InvariantSet],
                          omega_band=(-0.1, 0.1), n_samples: int = 400,
                          bump_radius: float = 0.6, patch_radius: float = 0.15,
                          sharpness: float = 100.0, dt: float = 2e-2,
                          T_max: float = 800.0, tol: float = 1e-8,
                          settle_T: float = 200.0,
                          seed: int = 0, samples: Optional[np.ndarray] = None,
                          rng: Optional[np.random.Generator] = None) -> EscapeFunction:
    """Build an escape function adapted to the detected attractor family.

    The seed is a plateau bump equal to 1 near the attractor family of the
    whole frequency band; its flow derivative there is the radial rate, which
    is bounded below by the certified beta.  Away from the attractor the
    comparison rate is patched to the constant beta, so the returned function
    grows along the flow at rate >= ~beta/2 on the whole sampled basin.
    """
    rng = rng if rng is not None else np.random.default_rng(seed)
    if samples is None:
        omegas = rng.uniform(omega_band[0], omega_band[1], size=n_samples)
        samples = sample_shell(sym, omegas, n_samples, rng)
    kit = _escape_kit_for(sym, sets, samples, bump_radius, patch_radius,
                          sharpness, settle_T, dt)
    values, settle = escape_limit_values(kit.velocity, kit.radial, kit.k1,
                                         kit.integrand, samples,
                                         dt=dt, T_max=T_max, tol=tol)
    return EscapeFunction(points=samples, values=values,
                          flow_derivative=kit.comparison(samples), beta=kit.beta,
                          settle_times=settle)


def escape_derivative_fd(sym: HomogeneousSymbol, fn_builder: Callable,
                         points: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Honest two-sided flow derivative of a sampled escape function.

    ``fn_builder(Y) -> values`` must evaluate the degree-one function at
    sphere points (rho = 0).  The derivative along the rescaled flow of the
    degree-one extension at rho = 0 is  (e^{rho(h)} k(Y(h)) - e^{rho(-h)}
    k(Y(-h))) / 2h,  with rho integrated from 0.
    """
    rhs = _field_rhs(sym)
    y = np.column_stack([points, np.zeros(len(points))])
    fwd = rk8_step(rhs, y, h)
    bwd = rk8_step(rhs, y, -h)
    kf = fn_builder(fwd[:, :3])
    kb = fn_builder(bwd[:, :3])
    return (np.exp(fwd[:, 3]) * kf - np.exp(bwd[:, 3]) * kb) / (2.0 * h)


# ---------------------------------------------------------------------------
# Simple-structure certification
# ---------------------------------------------------------------------------

def verify_simple_structure(sym: HomogeneousSymbol, delta: float = 0.1,
                            n_samples: int = 600, omega_count: int = 5,
                            T: float = DEFAULT_T, dt: float = DEFAULT_DT,
                            coverage_threshold: float = 0.99,
                            seed: int = 0, n_jobs: int = 1,
                            **detect_kwargs) -> dict:
    """Empirically certify or refute the global simple-structure hypothesis.

    For each energy on a grid spanning [-delta, delta], orbits sampled on the
    shell must fall forward into a weakly hyperbolic attractor and backward
    into a repulsor, with the two basins matching off the limit sets.  The
    report carries a per-energy breakdown and an overall verdict.
    """
    report = {
        "symbol": sym.name,
        "params": dict(sym.params),
        "delta": float(delta),
        "n_samples": int(n_samples),
        "per_omega": [],
    }
    if n_samples <= 0:
        report["verdict"] = "insufficient-data"
        report["certified"] = False
        return report
    omegas = np.linspace(-delta, delta, omega_count)
    all_pass = True
    for j, omega in enumerate(omegas):
        rng = np.random.default_rng(seed + 1000 * j)
        sets, cov = detect_invariant_sets(sym, float(omega), n_samples=n_samples,
                                          T=T, dt=dt, rng=rng, n_jobs=n_jobs,
                                          **detect_kwargs)
        n_att = sum(1 for s in sets if s.kind == "attractor")
        n_rep = sum(1 for s in sets if s.kind == "repulsor")
        entry = {
            "omega": float(omega),
            "n_attractors": n_att,
            "n_repulsors": n_rep,
            "forward_coverage": cov["forward_coverage"],
            "backward_coverage": cov["backward_coverage"],
            "union_coverage": cov["union_coverage"],
            "matching_fraction": cov["matching_fraction"],
            "beta_min": min([s.beta for s in sets if s.kind in ("attractor", "repulsor")],
                            default=0.0),
        }
        ok = (n_att >= 1 and n_rep >= 1
              and cov["union_coverage"] >= coverage_threshold
              and cov["matching_fraction"] >= coverage_threshold)
        entry["verdict"] = "pass" if ok else "fail"
        report["per_omega"].append(entry)
        all_pass = all_pass and ok
    report["verdict"] = "pass" if all_pass else "fail"
    report["certified"] = all_pass
    report["coverage"] = float(np.mean([e["union_coverage"] for e in report["per_omega"]]))
    return report
