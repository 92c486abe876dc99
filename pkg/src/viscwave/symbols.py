"""Degree-zero homogeneous symbols on the 2-torus and their Hamilton dynamics.

A symbol here is a real function p(x, theta) of a base point x in [0, 2pi)^2
and a fiber direction theta in [0, 2pi); degree-zero homogeneity is structural
(the fiber radius |xi| never enters the interface).  The classical dynamics is
carried by the rescaled Hamilton field |xi| H_p written in the coordinates
(x, theta, rho) with rho = log|xi|; the rho component decouples, so the field
restricts to the sphere bundle and the radial rate is just a function of
(x, theta).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Reduce an angle (or array of angles) to [0, 2pi)."""
    return np.mod(a, TWO_PI)


@dataclass(frozen=True)
class HomogeneousSymbol:
    """A real, degree-zero homogeneous symbol p(x, theta) with first derivatives.

    ``func``, ``dx1``, ``dx2``, ``dtheta`` are vectorized callables of
    ``(x1, x2, theta)``.  When the symbol is additively separable,
    ``theta_profile`` holds the pure-theta part f and ``x_harmonics`` maps an
    integer mode m to the complex amplitude a_m of the pure-x part, so that
    p = f(theta) + sum_m a_m exp(i m.x); that structure is what allows exact
    sparse quantization and matrix-free application at large truncation.
    """

    name: str
    params: dict
    func: Callable
    dx1: Callable
    dx2: Callable
    dtheta: Callable
    theta_profile: Optional[Callable] = None
    x_harmonics: Optional[dict] = None

    def __call__(self, x1, x2, theta):
        return self.func(x1, x2, theta)

    def grad_x(self, x1, x2, theta):
        """Gradient in the base variables, stacked as a leading length-2 axis."""
        return np.stack(
            [np.asarray(self.dx1(x1, x2, theta), dtype=float),
             np.asarray(self.dx2(x1, x2, theta), dtype=float)]
        )

    def grad_theta(self, x1, x2, theta):
        return self.dtheta(x1, x2, theta)

    @property
    def is_separable(self) -> bool:
        """True when p = f(theta) + g(x) with g a finite trigonometric sum."""
        return self.theta_profile is not None and self.x_harmonics is not None


@dataclass(frozen=True)
class ViscositySymbol:
    """Second-order viscosity multiplier q(k) = 1 + |k|^2 (positive, >= 1)."""

    order: int = 2

    def multiplier(self, k1, k2):
        return 1.0 + np.asarray(k1, dtype=float) ** 2 + np.asarray(k2, dtype=float) ** 2


@dataclass(frozen=True)
class FlowPoint:
    """A point (x, theta, rho) of the homogenized phase space.

    Angles are reduced mod 2pi at construction; rho = log|xi| must be finite.
    """

    x: np.ndarray
    theta: float
    rho: float = 0.0

    def __post_init__(self):
        x = wrap_angle(np.asarray(self.x, dtype=float).reshape(2))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "theta", float(wrap_angle(self.theta)))
        rho = float(self.rho)
        if not np.isfinite(rho):
            raise ValueError("rho must be finite")
        object.__setattr__(self, "rho", rho)

    def as_array(self) -> np.ndarray:
        return np.array([self.x[0], self.x[1], self.theta, self.rho])


def eval_symbol(sym: HomogeneousSymbol, x, theta):
    """Evaluate p at a base point x = (x1, x2) and direction theta."""
    x = np.asarray(x, dtype=float)
    return sym(x[..., 0] if x.ndim > 1 else x[0],
               x[..., 1] if x.ndim > 1 else x[1],
               theta)


def field_components(sym: HomogeneousSymbol, x1, x2, theta):
    """Rescaled Hamilton field |xi| H_p in (x, theta, rho) coordinates.

    With the unit direction theta = (cos, sin) and its rotation
    theta_perp = (-sin, cos):

        dx      = (d_theta p) theta_perp
        dtheta  = -(d_x p) . theta_perp
        drho    = -(d_x p) . theta

    The drho component does not feed back into the others (the field commutes
    with fiber dilations).  Returns (dx1, dx2, dtheta, drho) as arrays.
    """
    ct, st = np.cos(theta), np.sin(theta)
    pth = np.asarray(sym.dtheta(x1, x2, theta), dtype=float)
    px1 = np.asarray(sym.dx1(x1, x2, theta), dtype=float)
    px2 = np.asarray(sym.dx2(x1, x2, theta), dtype=float)
    dx1 = -pth * st
    dx2 = pth * ct
    dtheta = px1 * st - px2 * ct
    drho = -(px1 * ct + px2 * st)
    return dx1, dx2, dtheta, drho


def rescaled_field(sym: HomogeneousSymbol, q: FlowPoint):
    """Rescaled Hamilton field at a single flow point.

    Returns ``(dx, dtheta, drho)`` with dx a length-2 vector.
    """
    dx1, dx2, dtheta, drho = field_components(sym, q.x[0], q.x[1], q.theta)
    return np.array([dx1, dx2]), float(dtheta), float(drho)


def radial_rate(sym: HomogeneousSymbol, x1, x2, theta):
    """The radial component drho/dt = -(d_x p) . theta of the rescaled field."""
    ct, st = np.cos(theta), np.sin(theta)
    px1 = np.asarray(sym.dx1(x1, x2, theta), dtype=float)
    px2 = np.asarray(sym.dx2(x1, x2, theta), dtype=float)
    return -(px1 * ct + px2 * st)


def hamilton_field_cotangent(sym: HomogeneousSymbol, x, xi):
    """Unrescaled Hamilton field in (x, xi) coordinates (for cross-checks).

    dx/dt = d_xi p = (d_theta p) theta_perp / |xi|,  dxi/dt = -d_x p.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    r = np.hypot(xi[0], xi[1])
    theta = np.arctan2(xi[1], xi[0])
    ct, st = np.cos(theta), np.sin(theta)
    pth = float(sym.dtheta(x[0], x[1], theta))
    px1 = float(sym.dx1(x[0], x[1], theta))
    px2 = float(sym.dx2(x[0], x[1], theta))
    dx = np.array([-pth * st, pth * ct]) / r
    dxi = np.array([-px1, -px2])
    return dx, dxi


def _zero(x1, x2, theta):
    return np.zeros(np.broadcast(x1, x2, theta).shape)


def make_free() -> HomogeneousSymbol:
    """p = sin(theta): the x-independent reference model."""
    return HomogeneousSymbol(
        name="free",
        params={},
        func=lambda x1, x2, th: np.sin(th) + np.zeros(np.broadcast(x1, x2, th).shape),
        dx1=_zero,
        dx2=_zero,
        dtheta=lambda x1, x2, th: np.cos(th) + np.zeros(np.broadcast(x1, x2, th).shape),
        theta_profile=np.sin,
        x_harmonics={},
    )


def make_shear(eps: float = 0.3) -> HomogeneousSymbol:
    """p = sin(theta) + eps cos(x1): one-parameter shear-like perturbation."""
    eps = float(eps)
    return HomogeneousSymbol(
        name="shear",
        params={"eps": eps},
        func=lambda x1, x2, th: np.sin(th) + eps * np.cos(x1),
        dx1=lambda x1, x2, th: -eps * np.sin(x1) + np.zeros(np.broadcast(x1, x2, th).shape),
        dx2=_zero,
        dtheta=lambda x1, x2, th: np.cos(th) + np.zeros(np.broadcast(x1, x2, th).shape),
        theta_profile=np.sin,
        x_harmonics={(1, 0): eps / 2.0, (-1, 0): eps / 2.0},
    )


def make_two_param(eps1: float = 0.3, eps2: float = 0.1, phi: float = 0.0) -> HomogeneousSymbol:
    """p = sin(theta) + eps1 cos(x1) + eps2 cos(x2 + phi)."""
    eps1, eps2, phi = float(eps1), float(eps2), float(phi)
    return HomogeneousSymbol(
        name="two-param",
        params={"eps1": eps1, "eps2": eps2, "phi": phi},
        func=lambda x1, x2, th: np.sin(th) + eps1 * np.cos(x1) + eps2 * np.cos(x2 + phi),
        dx1=lambda x1, x2, th: -eps1 * np.sin(x1) + np.zeros(np.broadcast(x1, x2, th).shape),
        dx2=lambda x1, x2, th: -eps2 * np.sin(x2 + phi) + np.zeros(np.broadcast(x1, x2, th).shape),
        dtheta=lambda x1, x2, th: np.cos(th) + np.zeros(np.broadcast(x1, x2, th).shape),
        theta_profile=np.sin,
        x_harmonics={
            (1, 0): eps1 / 2.0,
            (-1, 0): eps1 / 2.0,
            (0, 1): eps2 * np.exp(1j * phi) / 2.0,
            (0, -1): eps2 * np.exp(-1j * phi) / 2.0,
        },
    )


_CATALOG = {
    "free": make_free,
    "shear": make_shear,
    "two-param": make_two_param,
}


def builtin_library() -> list[HomogeneousSymbol]:
    """Catalog of model symbols with default parameters."""
    return [factory() for factory in _CATALOG.values()]


def get_symbol(name: str, **params) -> HomogeneousSymbol:
    """Look a symbol up by catalog name, overriding default parameters."""
    if name not in _CATALOG:
        raise KeyError(f"unknown symbol {name!r}; catalog: {sorted(_CATALOG)}")
    return _CATALOG[name](**params)


def catalog_names() -> list[str]:
    return list(_CATALOG)
