"""Small shared numerics: smooth cutoff profiles and torus geometry."""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def smoothstep(u):
    """C-infinity step of exponential type: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        a = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
        b = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
    return a / (a + b)


def smoothstep_deriv(u):
    """Derivative of :func:`smoothstep`."""
    u = np.asarray(u, dtype=float)
    inside = (u > 0.0) & (u < 1.0)
    us = np.where(inside, u, 0.5)
    a = np.exp(-1.0 / us)
    b = np.exp(-1.0 / (1.0 - us))
    d = a * b * (1.0 / us ** 2 + 1.0 / (1.0 - us) ** 2) / (a + b) ** 2
    return np.where(inside, d, 0.0)


def plateau(d, r_in, r_out):
    """Smooth profile of a distance-like variable: 1 for d <= r_in, 0 for d >= r_out."""
    if not r_out > r_in:
        raise ValueError("plateau needs r_out > r_in")
    return smoothstep((r_out - np.asarray(d, dtype=float)) / (r_out - r_in))


def plateau_deriv(d, r_in, r_out):
    """d/dd of :func:`plateau`."""
    if not r_out > r_in:
        raise ValueError("plateau needs r_out > r_in")
    return -smoothstep_deriv((r_out - np.asarray(d, dtype=float)) / (r_out - r_in)) / (r_out - r_in)


def wrapped_diff(a, b):
    """Shortest signed angular difference a - b, in (-pi, pi]."""
    return np.mod(np.asarray(a) - np.asarray(b) + np.pi, TWO_PI) - np.pi


def torus_distances(points, refs):
    """Pairwise distances on the 3-torus (x1, x2, theta).

    points: (n, 3), refs: (m, 3) -> (n, m) matrix of Euclidean distances of the
    per-coordinate wrapped differences.
    """
    d = wrapped_diff(points[:, None, :], refs[None, :, :])
    return np.sqrt(np.sum(d * d, axis=-1))


def soft_min_distance(points, refs, sharpness=100.0, grad=False):
    """Smooth lower envelope of distances from each point to a reference cloud.

    Uses -log-sum-exp averaging; the result is within log(m)/sharpness below
    the true minimum and is differentiable, which keeps directional
    derivatives of bump functions built on it well behaved.  With
    ``grad=True`` also returns the (n, 3) gradient.
    """
    diffs = wrapped_diff(points[:, None, :], refs[None, :, :])
    dists = np.sqrt(np.sum(diffs * diffs, axis=-1))
    dists = np.maximum(dists, 1e-12)
    dmin = dists.min(axis=1, keepdims=True)
    w = np.exp(-sharpness * (dists - dmin))
    wsum = w.sum(axis=1)
    value = (dmin[:, 0] - np.log(wsum) / sharpness)
    if not grad:
        return value
    grads = np.einsum("nm,nmc->nc", w / wsum[:, None], diffs / dists[:, :, None])
    return value, grads
