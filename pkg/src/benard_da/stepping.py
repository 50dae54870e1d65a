"""IMEX time stepping: implicit per-mode diffusion, explicit advection.

Default scheme is CNAB2 (Crank-Nicolson diffusion, Adams-Bashforth-2 for the
explicit terms) with an IMEX-Euler startup step when no history is supplied;
"imex-euler" selects first-order stepping throughout.  The explicit-tendency
history travels alongside the state so that a resumed integration reproduces
an uninterrupted one bit for bit.

Nudging enters in one of two prepared forms (built by the assimilation
layer): a diagonal damping on observed modes folded into the implicit solve
together with its data term (projection-type observations, no dt limit), or
a fully explicit force (volume/nodal observations, dt <= 1/(2 mu) enforced
here).  Temperature is never nudged; the scalar update has no such hook.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from .model import Forcing, PhysicalParams, State, advection_scalar, explicit_rhs
from .spectral import SIN, SpectralField, VectorField, hermitian_part, synthesize

__all__ = [
    "StepperConfig",
    "History",
    "ScalarHistory",
    "NudgingStep",
    "BlowUpError",
    "step",
    "step_scalar",
    "integrate",
]

SCHEMES = ("imex-cnab2", "imex-euler")
BLOWUP_THRESHOLD = 1e12


@dataclass(frozen=True)
class StepperConfig:
    """Step size, scheme selection, optional advective CFL bound."""

    dt: float
    scheme: str = "imex-cnab2"
    cfl_target: Optional[float] = None

    def __post_init__(self) -> None:
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.cfl_target is not None and not (self.cfl_target > 0):
            raise ValueError("cfl_target must be positive when given")


@dataclass(frozen=True)
class History:
    """Explicit tendencies of the previous step (for AB2 extrapolation)."""

    e_u1: np.ndarray
    e_u2: np.ndarray
    e_th: np.ndarray
    dt: float


@dataclass(frozen=True)
class ScalarHistory:
    e_th: np.ndarray
    dt: float


@dataclass(frozen=True)
class NudgingStep:
    """One step's worth of prepared nudging input.

    Exactly one of the two forms is populated.  Implicit form: observed_mask
    marks the damped modes and data1/data2 hold the observed truth velocity
    coefficients at the step's end time (already masked).  Explicit form:
    force is -mu P[I_h(v) - I_h(u)] evaluated at the step's start.
    """

    mu: float
    observed_mask: Optional[np.ndarray] = None
    data1: Optional[np.ndarray] = None
    data2: Optional[np.ndarray] = None
    force: Optional[VectorField] = None

    def __post_init__(self) -> None:
        if self.mu < 0:
            raise ValueError("mu must be non-negative")
        implicit = self.observed_mask is not None
        if implicit == (self.force is not None):
            raise ValueError("provide either the implicit form or the explicit force")
        if implicit and (self.data1 is None or self.data2 is None):
            raise ValueError("implicit nudging requires data1 and data2")


class BlowUpError(RuntimeError):
    """A coefficient left the finite range; carries the failing time."""

    def __init__(self, time: float, label: Optional[str] = None):
        self.time = time
        self.label = label
        where = f" in {label}" if label else ""
        super().__init__(f"solution blew up{where} at t = {time:.6g}")


def _check_finite(time: float, label: Optional[str], *arrays: np.ndarray) -> None:
    for a in arrays:
        m = np.abs(a).max() if a.size else 0.0
        if not np.isfinite(m) or m > BLOWUP_THRESHOLD:
            raise BlowUpError(time, label)


def step(
    s: State,
    p: PhysicalParams,
    cfg: StepperConfig,
    nudging: Optional[NudgingStep] = None,
    forcing: Optional[Forcing] = None,
    history: Optional[History] = None,
    dt: Optional[float] = None,
    label: Optional[str] = None,
) -> Tuple[State, History]:
    """Advance one step; returns the new state and the new AB2 history."""
    g = s.grid
    if dt is None:
        dt = cfg.dt
    vec, sc = explicit_rhs(s, p, forcing)
    e1, e2, eth = vec.u1.coeffs, vec.u2.coeffs, sc.coeffs

    crank = cfg.scheme == "imex-cnab2" and history is not None
    if crank:
        r = dt / history.dt
        w1, w2 = 1.0 + 0.5 * r, -0.5 * r
        x1 = w1 * e1 + w2 * history.e_u1
        x2 = w1 * e2 + w2 * history.e_u2
        xth = w1 * eth + w2 * history.e_th
        half = 0.5 * dt * g.lam
        num_u = 1.0 - p.nu * half
        den_u = 1.0 + p.nu * half
        num_t = 1.0 - p.kappa * half
        den_t = 1.0 + p.kappa * half
    else:
        x1, x2, xth = e1, e2, eth
        num_u = num_t = 1.0
        den_u = 1.0 + p.nu * dt * g.lam
        den_t = 1.0 + p.kappa * dt * g.lam

    n1 = s.velocity.u1.coeffs * num_u + dt * x1
    n2 = s.velocity.u2.coeffs * num_u + dt * x2
    nth = s.temperature.coeffs * num_t + dt * xth

    if nudging is not None and nudging.mu > 0:
        if nudging.force is not None:
            if dt > 0.5 / nudging.mu:
                raise ValueError(
                    f"explicit nudging requires dt <= 1/(2 mu): dt={dt}, mu={nudging.mu}"
                )
            n1 = n1 + dt * nudging.force.u1.coeffs
            n2 = n2 + dt * nudging.force.u2.coeffs
        else:
            damp = dt * nudging.mu * nudging.observed_mask
            den_u = den_u + damp
            n1 = n1 + dt * nudging.mu * nudging.data1
            n2 = n2 + dt * nudging.mu * nudging.data2

    # Project out conjugate-asymmetric transform dust every step: it carries
    # no real-field content, but the conduction instability is unsaturated in
    # that sector (its advection vanishes on synthesis) and would amplify it
    # from round-off to blow-up on supercritical runs.
    c1 = hermitian_part(n1 / den_u)
    c2 = hermitian_part(n2 / den_u)
    cth = hermitian_part(nth / den_t)
    t_new = s.time + dt
    _check_finite(t_new, label, c1, c2, cth)
    new = State(
        VectorField(SpectralField(g, "cos", c1), SpectralField(g, SIN, c2)),
        SpectralField(g, SIN, cth),
        t_new,
    )
    return new, History(e1, e2, eth, dt)


def step_scalar(
    theta: SpectralField,
    carrier: VectorField,
    p: PhysicalParams,
    cfg: StepperConfig,
    history: Optional[ScalarHistory] = None,
    dt: Optional[float] = None,
    time: float = 0.0,
    label: Optional[str] = None,
) -> Tuple[SpectralField, ScalarHistory]:
    """Advance a passive temperature carried by a frozen start-of-step velocity.

    Uses the same discretization as the scalar half of step(), so two scalars
    sharing one carrier difference exactly like a single advected scalar.
    """
    g = theta.grid
    if dt is None:
        dt = cfg.dt
    eth = -advection_scalar(carrier, theta).coeffs + carrier.u2.coeffs
    crank = cfg.scheme == "imex-cnab2" and history is not None
    if crank:
        r = dt / history.dt
        xth = (1.0 + 0.5 * r) * eth - 0.5 * r * history.e_th
        half = 0.5 * dt * g.lam
        num = 1.0 - p.kappa * half
        den = 1.0 + p.kappa * half
    else:
        xth = eth
        num = 1.0
        den = 1.0 + p.kappa * dt * g.lam
    c = hermitian_part((theta.coeffs * num + dt * xth) / den)
    _check_finite(time + dt, label, c)
    return SpectralField(g, SIN, c), ScalarHistory(eth, dt)


def _cfl_limit(s: State, cfg: StepperConfig) -> float:
    g = s.grid
    vx = float(np.abs(synthesize(s.velocity.u1)).max())
    vy = float(np.abs(synthesize(s.velocity.u2)).max())
    rate = vx * g.nx / g.L + vy * g.ny
    if rate <= 0.0:
        return cfg.dt
    return min(cfg.dt, cfg.cfl_target / rate)


def integrate(
    s0: State,
    p: PhysicalParams,
    cfg: StepperConfig,
    t_end: float,
    observers: Iterable[Tuple[int, object]] = (),
    forcing: Optional[Forcing] = None,
    history: Optional[History] = None,
    label: Optional[str] = None,
) -> Tuple[State, Optional[History]]:
    """Repeated step until t_end; observers are (every_n_steps, callback) pairs.

    Passing the returned history into a follow-up call makes two half-length
    integrations compose to one full-length integration bit-exactly.
    """
    if t_end < s0.time - 1e-9 * cfg.dt:
        raise ValueError(f"t_end={t_end} precedes state time {s0.time}")
    state, hist = s0, history
    observers = tuple(observers)
    k = 0
    while t_end - state.time > 1e-9 * cfg.dt:
        remaining = t_end - state.time
        # Keep the nominal dt bit pattern when t_end sits on the step grid;
        # a rounding-sized clamp would spoil bit-exact composition.
        dt = cfg.dt if remaining >= cfg.dt * (1.0 - 1e-9) else remaining
        if cfg.cfl_target is not None:
            dt = min(dt, _cfl_limit(state, cfg))
        state, hist = step(
            state, p, cfg, forcing=forcing, history=hist, dt=dt, label=label
        )
        k += 1
        for every, fn in observers:
            if k % every == 0:
                fn(state)
    return state, hist
