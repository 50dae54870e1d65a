"""Twin experiments: a truth run generating coarse velocity observations
and an assimilated copy nudged toward them in lock-step.

The assimilated pair (v, eta) obeys the same dynamics as the truth with one
extra velocity term, -mu P[I_h(v) - I_h(u)]; the temperature equation never
sees an observation (the observation operator itself rejects scalars).  For
the modal operator the nudging is folded into the implicit solve with
end-of-step observation data, which keeps an already-synchronized pair
synchronized to round-off and removes any dt restriction from large mu; for
volume/nodal operators the force is explicit with start-of-step data and
the stepper enforces dt <= 1/(2 mu).

Both trajectories share one dt.  Error and truth-diagnostic series are
sampled on a fixed step cadence; coarse observations can be recorded to a
file and an assimilation replayed against the recording, reproducing the
live assimilated trajectory bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .model import PhysicalParams, State
from .observations import (
    MODAL,
    InterpolantSpec,
    modal_projection_mask,
    observe,
)
from .spectral import (
    COS,
    SIN,
    Grid,
    SpectralField,
    VectorField,
    leray_project,
    norm_h,
    norm_laplacian,
    norm_v,
    random_scalar,
    random_solenoidal,
)
from .stepping import (
    History,
    NudgingStep,
    ScalarHistory,
    StepperConfig,
    step,
    step_scalar,
)

__all__ = [
    "ZERO",
    "PERTURBED_TRUTH",
    "CUSTOM",
    "TwinConfig",
    "ErrorSeries",
    "TruthDiagnostics",
    "TwinResult",
    "nudging_force",
    "spin_up",
    "run_twin",
    "FitResult",
    "fit_decay_rate",
    "SlavingSeries",
    "run_temperature_slaving",
    "slaving_contract_margin",
    "ObservationRecord",
    "run_from_record",
]

ZERO = "zero"
PERTURBED_TRUTH = "perturbed-truth"
CUSTOM = "custom"
_POLICIES = (ZERO, PERTURBED_TRUTH, CUSTOM)


@dataclass(frozen=True)
class TwinConfig:
    """Parameters of one twin experiment.

    sample_cadence counts steps between recorded samples.  epsilon scales
    the perturbed-truth initial policies.  params.h and spec.h must agree;
    the spec is what actually observes.
    """

    params: PhysicalParams
    spec: InterpolantSpec
    stepper: StepperConfig
    run_time: float
    spinup_time: float = 100.0
    v0_policy: str = ZERO
    eta0_policy: str = ZERO
    epsilon: float = 0.0
    sample_cadence: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.spinup_time < 0:
            raise ValueError("spinup_time must be nonnegative")
        if not (self.run_time > 0):
            raise ValueError("run_time must be positive")
        if self.v0_policy not in _POLICIES or self.eta0_policy not in _POLICIES:
            raise ValueError(f"initial policies must be one of {_POLICIES}")
        if self.sample_cadence < 1:
            raise ValueError("sample_cadence must be at least 1")
        if self.params.h != self.spec.h:
            raise ValueError(
                f"params.h={self.params.h} and spec.h={self.spec.h} disagree"
            )
        if self.params.L != self.spec.grid.L:
            raise ValueError("params.L and the grid's L disagree")


@dataclass(frozen=True)
class ErrorSeries:
    """Synchronization errors: velocity (w) and temperature (xi) differences
    in both the L2 (H) and gradient (V) norms."""

    times: np.ndarray
    w_h: np.ndarray
    w_v: np.ndarray
    xi_h: np.ndarray
    xi_v: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.times)
        for name in ("w_h", "w_v", "xi_h", "xi_v"):
            arr = getattr(self, name)
            if len(arr) != n:
                raise ValueError("series columns must share one length")
            if np.any(arr < 0):
                raise ValueError(f"{name} must be nonnegative")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def energy(self) -> np.ndarray:
        """Squared combined error w_h^2 + xi_h^2, the decaying quantity."""
        return self.w_h**2 + self.xi_h**2


@dataclass(frozen=True)
class TruthDiagnostics:
    """Reference-trajectory norms sampled alongside the errors."""

    times: np.ndarray
    u_h: np.ndarray
    u_v: np.ndarray
    theta_h: np.ndarray
    theta_v: np.ndarray
    a0u_sq: np.ndarray

    @property
    def k3(self) -> float:
        """Running max of |A u|^2, the two-term-threshold trajectory bound."""
        return float(np.max(self.a0u_sq)) if len(self.a0u_sq) else 0.0


@dataclass(frozen=True)
class TwinResult:
    errors: ErrorSeries
    truth_diagnostics: TruthDiagnostics
    truth_final: State
    assimilated_final: State


def nudging_force(
    v: VectorField, u_obs: VectorField, spec: InterpolantSpec, mu: float
) -> VectorField:
    """Feedback force -mu P[I_h(v) - u_obs]; u_obs must come from spec."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if v.grid != spec.grid or u_obs.grid != spec.grid:
        raise ValueError("velocity, observations, and spec must share one grid")
    if mu == 0.0:
        return VectorField.zeros(v.grid)
    ov = observe(v, spec)
    g = v.grid
    diff = VectorField(
        SpectralField(g, COS, ov.u1.coeffs - u_obs.u1.coeffs),
        SpectralField(g, SIN, ov.u2.coeffs - u_obs.u2.coeffs),
    )
    proj = leray_project(diff)
    return VectorField(
        SpectralField(g, COS, -mu * proj.u1.coeffs),
        SpectralField(g, SIN, -mu * proj.u2.coeffs),
    )


def spin_up(
    params: PhysicalParams,
    grid: Grid,
    stepper: StepperConfig,
    spinup_time: float,
    seed: int = 0,
    observers=(),
) -> Tuple[State, Optional[History]]:
    """Integrate the truth from a small seeded random perturbation.

    Long enough runs land on (or near) the attractor: supercritical
    parameters settle into convection, subcritical ones decay toward the
    conduction fixed point.
    """
    from .stepping import integrate

    rng = np.random.default_rng(seed)
    s0 = State(
        random_solenoidal(grid, rng, norm=0.01),
        random_scalar(grid, rng, SIN, norm=0.01),
    )
    if spinup_time == 0.0:
        return s0, None
    return integrate(s0, params, stepper, spinup_time, observers=observers, label="truth")


def _initial_state(
    cfg: TwinConfig,
    truth: State,
    v0: Optional[VectorField],
    eta0: Optional[SpectralField],
) -> State:
    g = truth.grid
    rng = np.random.default_rng(cfg.seed + 1)
    if cfg.v0_policy == ZERO:
        vel = VectorField.zeros(g)
    elif cfg.v0_policy == PERTURBED_TRUTH:
        noise = random_solenoidal(g, rng, norm=cfg.epsilon)
        vel = VectorField(
            SpectralField(g, COS, truth.velocity.u1.coeffs + noise.u1.coeffs),
            SpectralField(g, SIN, truth.velocity.u2.coeffs + noise.u2.coeffs),
        )
    else:
        if v0 is None:
            raise ValueError("v0_policy='custom' requires an explicit v0")
        vel = v0
    if cfg.eta0_policy == ZERO:
        tem = SpectralField.zeros(g, SIN)
    elif cfg.eta0_policy == PERTURBED_TRUTH:
        noise = random_scalar(g, rng, SIN, norm=cfg.epsilon)
        tem = SpectralField(g, SIN, truth.temperature.coeffs + noise.coeffs)
    else:
        if eta0 is None:
            raise ValueError("eta0_policy='custom' requires an explicit eta0")
        tem = eta0
    return State(vel, tem, truth.time)


class _SeriesAccumulator:
    def __init__(self) -> None:
        self.rows: List[Tuple[float, ...]] = []

    def sample(self, truth: State, assim: State) -> None:
        g = truth.grid
        w = VectorField(
            SpectralField(g, COS, truth.velocity.u1.coeffs - assim.velocity.u1.coeffs),
            SpectralField(g, SIN, truth.velocity.u2.coeffs - assim.velocity.u2.coeffs),
        )
        xi = SpectralField(g, SIN, truth.temperature.coeffs - assim.temperature.coeffs)
        self.rows.append(
            (
                truth.time,
                norm_h(w),
                norm_v(w),
                norm_h(xi),
                norm_v(xi),
                norm_h(truth.velocity),
                norm_v(truth.velocity),
                norm_h(truth.temperature),
                norm_v(truth.temperature),
                norm_laplacian(truth.velocity) ** 2,
            )
        )

    def build(self) -> Tuple[ErrorSeries, TruthDiagnostics]:
        cols = np.array(self.rows, dtype=float).T
        errors = ErrorSeries(cols[0], cols[1], cols[2], cols[3], cols[4])
        diag = TruthDiagnostics(cols[0], cols[5], cols[6], cols[7], cols[8], cols[9])
        return errors, diag


@dataclass
class _Recorder:
    spec: InterpolantSpec
    times: List[float] = field(default_factory=list)
    payload1: List[np.ndarray] = field(default_factory=list)
    payload2: List[np.ndarray] = field(default_factory=list)

    def add_modal(self, t: float, d1: np.ndarray, d2: np.ndarray, idx) -> None:
        self.times.append(t)
        self.payload1.append(d1[idx])
        self.payload2.append(d2[idx])

    def add_coarse(self, t: float, truth_velocity: VectorField) -> None:
        # Store the cell values of the truth itself; re-expanding them is
        # exactly what observe() does, so replay reproduces the live force.
        from .observations import _coarse_values

        self.times.append(t)
        self.payload1.append(_coarse_values(truth_velocity.u1, self.spec).real)
        self.payload2.append(_coarse_values(truth_velocity.u2, self.spec).real)


@dataclass(frozen=True)
class ObservationRecord:
    """Per-step coarse velocity observations from a truth run.

    Modal records store the complex coefficients of the observed modes at
    step-end times; volume/nodal records store cell averages/samples at
    step-start times.  Replaying against the same configuration reproduces
    the live assimilated trajectory exactly.
    """

    kind: str
    h: float
    L: float
    nx: int
    ny: int
    dt: float
    times: np.ndarray
    payload1: np.ndarray
    payload2: np.ndarray

    def save(self, path) -> None:
        np.savez_compressed(
            path,
            kind=self.kind,
            h=self.h,
            L=self.L,
            nx=self.nx,
            ny=self.ny,
            dt=self.dt,
            times=self.times,
            payload1=self.payload1,
            payload2=self.payload2,
        )

    @staticmethod
    def load(path) -> "ObservationRecord":
        with np.load(path) as z:
            return ObservationRecord(
                kind=str(z["kind"]),
                h=float(z["h"]),
                L=float(z["L"]),
                nx=int(z["nx"]),
                ny=int(z["ny"]),
                dt=float(z["dt"]),
                times=z["times"].copy(),
                payload1=z["payload1"].copy(),
                payload2=z["payload2"].copy(),
            )

    def matches(self, spec: InterpolantSpec, stepper: StepperConfig) -> bool:
        g = spec.grid
        return (
            self.kind == spec.kind
            and self.h == spec.h
            and self.L == g.L
            and self.nx == g.nx
            and self.ny == g.ny
            and self.dt == stepper.dt
        )


def _nudging_for_step(
    cfg: TwinConfig,
    spec: InterpolantSpec,
    mask: Optional[np.ndarray],
    truth_now: State,
    truth_next: Optional[State],
    assim: State,
    recorder: Optional[_Recorder],
) -> Optional[NudgingStep]:
    mu = cfg.params.mu
    if mu <= 0.0:
        return None
    if mask is not None:
        d1 = mask * truth_next.velocity.u1.coeffs
        d2 = mask * truth_next.velocity.u2.coeffs
        if recorder is not None:
            recorder.add_modal(truth_next.time, d1, d2, mask > 0)
        return NudgingStep(mu=mu, observed_mask=mask, data1=d1, data2=d2)
    u_obs = observe(truth_now.velocity, spec)
    if recorder is not None:
        recorder.add_coarse(truth_now.time, truth_now.velocity)
    force = nudging_force(assim.velocity, u_obs, spec, mu)
    return NudgingStep(mu=mu, force=force)


def run_twin(
    cfg: TwinConfig,
    truth0: Optional[State] = None,
    v0: Optional[VectorField] = None,
    eta0: Optional[SpectralField] = None,
    record_to=None,
) -> TwinResult:
    """Run one twin experiment in lock-step.

    truth0 skips the spin-up (a reloaded checkpoint, typically).  The
    returned series sample the state every cfg.sample_cadence steps,
    starting with the initial pair.  record_to, if given, is a path that
    receives the coarse observation stream.
    """
    spec = cfg.spec
    g = spec.grid
    if truth0 is None:
        truth, t_hist = spin_up(
            cfg.params, g, cfg.stepper, cfg.spinup_time, seed=cfg.seed
        )
    else:
        if truth0.grid != g:
            raise ValueError("truth0 grid does not match the observation spec")
        truth, t_hist = truth0, None

    assim = _initial_state(cfg, truth, v0, eta0)
    a_hist: Optional[History] = None
    mask = None
    if spec.kind == MODAL and cfg.params.mu > 0:
        mask = modal_projection_mask(spec).astype(float)
    recorder = _Recorder(spec) if record_to is not None else None

    acc = _SeriesAccumulator()
    acc.sample(truth, assim)
    n_steps = int(round(cfg.run_time / cfg.stepper.dt))
    for k in range(1, n_steps + 1):
        truth_next, t_hist = step(
            truth, cfg.params, cfg.stepper, history=t_hist, label="truth"
        )
        nd = _nudging_for_step(cfg, spec, mask, truth, truth_next, assim, recorder)
        assim, a_hist = step(
            assim,
            cfg.params,
            cfg.stepper,
            nudging=nd,
            history=a_hist,
            label="assimilated",
        )
        truth = truth_next
        if k % cfg.sample_cadence == 0:
            acc.sample(truth, assim)

    if recorder is not None:
        rec = ObservationRecord(
            kind=spec.kind,
            h=spec.h,
            L=g.L,
            nx=g.nx,
            ny=g.ny,
            dt=cfg.stepper.dt,
            times=np.array(recorder.times),
            payload1=np.array(recorder.payload1),
            payload2=np.array(recorder.payload2),
        )
        rec.save(record_to)

    errors, diag = acc.build()
    return TwinResult(errors, diag, truth, assim)


def run_from_record(
    record: ObservationRecord,
    params: PhysicalParams,
    spec: InterpolantSpec,
    stepper: StepperConfig,
    v0: Optional[VectorField] = None,
    eta0: Optional[SpectralField] = None,
) -> Tuple[State, np.ndarray, np.ndarray]:
    """Assimilate against a pre-recorded observation stream.

    Returns the final assimilated state, the sample times, and the
    observed-space residual |I_h(v) - I_h(u)|_H at each step (the only
    error measurable without the truth trajectory).
    """
    if not record.matches(spec, stepper):
        raise ValueError("record does not match the observation spec and stepper")
    g = spec.grid
    assim = State(
        v0 if v0 is not None else VectorField.zeros(g),
        eta0 if eta0 is not None else SpectralField.zeros(g, SIN),
    )
    hist: Optional[History] = None
    mu = params.mu
    residuals = []
    if spec.kind == MODAL:
        mask = modal_projection_mask(spec)
        maskf = mask.astype(float)
        idx = mask > 0
        for i in range(len(record.times)):
            d1 = np.zeros(g.shape, dtype=complex)
            d2 = np.zeros(g.shape, dtype=complex)
            d1[idx] = record.payload1[i]
            d2[idx] = record.payload2[i]
            nd = NudgingStep(mu=mu, observed_mask=maskf, data1=d1, data2=d2)
            assim, hist = step(
                assim, params, stepper, nudging=nd, history=hist,
                label="assimilated",
            )
            ov = observe(assim.velocity, spec)
            diff = VectorField(
                SpectralField(g, COS, ov.u1.coeffs - d1),
                SpectralField(g, SIN, ov.u2.coeffs - d2),
            )
            residuals.append(norm_h(diff))
    else:
        from .observations import _reexpand

        for i in range(len(record.times)):
            u_obs = VectorField(
                _reexpand(record.payload1[i], COS, spec),
                _reexpand(record.payload2[i], SIN, spec),
            )
            ov = observe(assim.velocity, spec)
            diff = VectorField(
                SpectralField(g, COS, ov.u1.coeffs - u_obs.u1.coeffs),
                SpectralField(g, SIN, ov.u2.coeffs - u_obs.u2.coeffs),
            )
            residuals.append(norm_h(diff))
            force = nudging_force(assim.velocity, u_obs, spec, mu)
            nd = NudgingStep(mu=mu, force=force) if mu > 0 else None
            assim, hist = step(
                assim, params, stepper, nudging=nd, history=hist,
                label="assimilated",
            )
    return assim, record.times.copy(), np.array(residuals)


@dataclass(frozen=True)
class FitResult:
    rate: Optional[float]
    r_squared: Optional[float]
    saturated: bool
    sample_count: int


def fit_decay_rate(series: ErrorSeries, window: Tuple[float, float]) -> FitResult:
    """Least-squares exponential rate of the combined squared error.

    Fits log(w_h^2 + xi_h^2) over the window; a positive rate means decay.
    Windows containing exactly-zero energies report saturation (already
    converged) instead of a rate.
    """
    t0, t1 = window
    if not (t1 > t0):
        raise ValueError("window must have positive length")
    sel = (series.times >= t0) & (series.times <= t1)
    t = series.times[sel]
    y = series.energy()[sel]
    if len(t) < 10:
        raise ValueError(f"window holds {len(t)} samples, need at least 10")
    if np.any(y <= 0.0):
        return FitResult(rate=None, r_squared=None, saturated=True, sample_count=len(t))
    logy = np.log(y)
    slope, intercept = np.polyfit(t, logy, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((logy - fitted) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return FitResult(rate=float(-slope), r_squared=r2, saturated=False, sample_count=len(t))


@dataclass(frozen=True)
class SlavingSeries:
    """Squared H-norm of the difference of two temperatures carried by one
    velocity trajectory."""

    times: np.ndarray
    diff_sq: np.ndarray


def run_temperature_slaving(
    truth0: State,
    params: PhysicalParams,
    stepper: StepperConfig,
    theta_a: SpectralField,
    theta_b: SpectralField,
    run_time: float,
    sample_cadence: int = 1,
) -> SlavingSeries:
    """Advect two temperatures with one velocity and track their gap.

    The difference obeys a pure advection-diffusion equation, so its
    squared norm contracts at least as fast as thermal conduction on the
    gravest mode, whatever the carrier does.  Both passengers use exactly
    the temperature half of the full stepper with the frozen start-of-step
    carrier.

    The passengers are primed with their initial tendencies so the
    diffusion half is trapezoidal from the first step.  A plain startup
    step treats diffusion explicitly and overshoots the conduction
    envelope by (kappa lambda1 dt)^2/2 relative, which is visible when
    checking the contract to round-off; the trapezoidal factor always
    sits below the exact exponential.
    """
    if theta_a.grid != truth0.grid or theta_b.grid != truth0.grid:
        raise ValueError("temperatures must live on the truth grid")
    from .model import advection_scalar

    truth = truth0
    t_hist: Optional[History] = None
    ha: Optional[ScalarHistory] = None
    hb: Optional[ScalarHistory] = None
    g = truth0.grid
    if stepper.scheme == "imex-cnab2":
        c0 = truth0.velocity

        def tendency(th: SpectralField) -> np.ndarray:
            return -advection_scalar(c0, th).coeffs + c0.u2.coeffs

        ha = ScalarHistory(tendency(theta_a), stepper.dt)
        hb = ScalarHistory(tendency(theta_b), stepper.dt)

    def gap() -> float:
        return norm_h(SpectralField(g, SIN, theta_a.coeffs - theta_b.coeffs)) ** 2

    times = [truth.time]
    vals = [gap()]
    n_steps = int(round(run_time / stepper.dt))
    for k in range(1, n_steps + 1):
        carrier = truth.velocity
        theta_a, ha = step_scalar(
            theta_a, carrier, params, stepper, history=ha, time=truth.time
        )
        theta_b, hb = step_scalar(
            theta_b, carrier, params, stepper, history=hb, time=truth.time
        )
        truth, t_hist = step(truth, params, stepper, history=t_hist, label="truth")
        if k % sample_cadence == 0:
            times.append(truth.time)
            vals.append(gap())
    return SlavingSeries(np.array(times), np.array(vals))


def slaving_contract_margin(
    series: SlavingSeries, kappa: float, lambda1: float
) -> float:
    """Worst ratio of measured gap to the conduction-decay envelope.

    For every sample pair s <= t the contract is
    gap(t) <= exp(-2 kappa lambda1 (t - s)) gap(s); the returned value is
    the max of gap(t) / envelope over all pairs (<= 1 means satisfied).
    Pairs whose reference gap is zero are skipped (identically zero gap
    stays zero by linearity).
    """
    t = series.times
    y = series.diff_sq
    env = y[:, None] * np.exp(-2.0 * kappa * lambda1 * (t[None, :] - t[:, None]))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = y[None, :] / env
    iu = np.triu_indices(len(t), k=0)
    vals = ratio[iu]
    vals = vals[np.isfinite(vals)]
    return float(np.max(vals)) if len(vals) else 0.0
