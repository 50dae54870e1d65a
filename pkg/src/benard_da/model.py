"""Model terms for 2D Benard convection in perturbation variables.

The conduction profile is already subtracted by the non-dimensionalization,
so the state (u, theta) measures departure from pure conduction and the zero
state is a fixed point.  Evolution equations, with A = -Laplacian per parity
and P the Leray projection:

    du/dt     = -nu A u - P[(u.grad)u] + P[theta e2]
    dtheta/dt = -kappa A theta - (u.grad)theta + u2

Quadratic products are formed pointwise on the collocation grid and
truncated to the dealiased band, which keeps the advection orthogonality
identities exact to round-off and the wall conditions structural.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .spectral import (
    COS,
    SIN,
    Grid,
    SpectralField,
    VectorField,
    analyze,
    dealias,
    derivative_x,
    derivative_y,
    leray_project,
    synthesize,
)

__all__ = [
    "PhysicalParams",
    "State",
    "Forcing",
    "advection_velocity",
    "advection_scalar",
    "buoyancy",
    "vertical_velocity",
    "explicit_rhs",
    "rhs_truth",
]


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensionless coefficients: viscosity, diffusivity, period, nudging, spacing."""

    nu: float
    kappa: float
    L: float
    mu: float = 0.0
    h: float = 0.25

    def __post_init__(self) -> None:
        if not (self.nu > 0 and self.kappa > 0 and self.L > 0):
            raise ValueError("nu, kappa and L must be positive")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")
        if not (self.h > 0):
            raise ValueError("h must be positive")


@dataclass(frozen=True)
class State:
    """Solenoidal velocity plus sine-parity temperature at one instant."""

    velocity: VectorField
    temperature: SpectralField
    time: float = 0.0

    def __post_init__(self) -> None:
        if self.temperature.parity != SIN:
            raise ValueError("temperature must carry sine parity")
        if self.temperature.grid != self.velocity.grid:
            raise ValueError("velocity and temperature grids differ")

    @property
    def grid(self) -> Grid:
        return self.velocity.grid

    @classmethod
    def zeros(cls, grid: Grid, time: float = 0.0) -> "State":
        return cls(VectorField.zeros(grid), SpectralField.zeros(grid, SIN), time)


# optional extra tendency, evaluated at the stage time; the vector part is
# applied under the Leray projection together with the other explicit terms
Forcing = Callable[[float], Tuple[VectorField, SpectralField]]


def _require_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise ValueError("fields live on different grids")


def advection_velocity(carrier: VectorField, advected: VectorField) -> VectorField:
    """Dealiased Galerkin truncation of (carrier . grad) advected."""
    _require_same_grid(carrier.grid, advected.grid)
    g = carrier.grid
    c1 = synthesize(carrier.u1)
    c2 = synthesize(carrier.u2)
    a1 = c1 * synthesize(derivative_x(advected.u1)) + c2 * synthesize(
        derivative_y(advected.u1)
    )
    a2 = c1 * synthesize(derivative_x(advected.u2)) + c2 * synthesize(
        derivative_y(advected.u2)
    )
    return VectorField(
        dealias(analyze(g, a1, COS)),
        dealias(analyze(g, a2, SIN)),
    )


def advection_scalar(carrier: VectorField, scalar: SpectralField) -> SpectralField:
    """Dealiased Galerkin truncation of (carrier . grad) scalar, sine parity."""
    _require_same_grid(carrier.grid, scalar.grid)
    g = carrier.grid
    vals = synthesize(carrier.u1) * synthesize(derivative_x(scalar)) + synthesize(
        carrier.u2
    ) * synthesize(derivative_y(scalar))
    return dealias(analyze(g, vals, SIN))


def buoyancy(theta: SpectralField) -> VectorField:
    """P[theta e2]: vertical buoyancy force, projected divergence-free."""
    return leray_project(
        VectorField(SpectralField.zeros(theta.grid, COS), theta)
    )


def vertical_velocity(u: VectorField) -> SpectralField:
    """u . e2 as a sine-parity scalar (the temperature source term)."""
    return u.u2


def explicit_rhs(
    s: State, p: PhysicalParams, forcing: Optional[Forcing] = None
) -> Tuple[VectorField, SpectralField]:
    """All tendency terms handled explicitly by the steppers (no diffusion).

    Velocity part: P[-(u.grad)u + theta e2 (+ forcing)]; one projection call
    covers the whole bundle.  Scalar part: -(u.grad)theta + u2 (+ forcing).
    """
    u, th = s.velocity, s.temperature
    adv = advection_velocity(u, u)
    b1 = -adv.u1.coeffs
    b2 = -adv.u2.coeffs + th.coeffs
    sc = -advection_scalar(u, th).coeffs + u.u2.coeffs
    if forcing is not None:
        fu, ft = forcing(s.time)
        _require_same_grid(fu.grid, s.grid)
        b1 = b1 + fu.u1.coeffs
        b2 = b2 + fu.u2.coeffs
        sc = sc + ft.coeffs
    g = s.grid
    vec = leray_project(
        VectorField(SpectralField(g, COS, b1), SpectralField(g, SIN, b2))
    )
    return vec, SpectralField(g, SIN, sc)


def rhs_truth(
    s: State, p: PhysicalParams, forcing: Optional[Forcing] = None
) -> Tuple[VectorField, SpectralField]:
    """Full tendency of the reference system at the state's instant."""
    vec, sc = explicit_rhs(s, p, forcing)
    g = s.grid
    lam = g.lam
    return (
        VectorField(
            SpectralField(g, COS, vec.u1.coeffs - p.nu * lam * s.velocity.u1.coeffs),
            SpectralField(g, SIN, vec.u2.coeffs - p.nu * lam * s.velocity.u2.coeffs),
        ),
        SpectralField(g, SIN, sc.coeffs - p.kappa * lam * s.temperature.coeffs),
    )
