"""Twin-experiment engine tests.

The cheap configurations here run on a 32x16 grid.  Supercritical cases use
nu = kappa = 0.03, halfway past the stress-free instability threshold, so
the truth settles into convection rolls; subcritical cases use 0.05 where
everything relaxes to conduction.
"""

import numpy as np
import pytest

from benard_da.assimilation import (
    CUSTOM,
    ErrorSeries,
    ObservationRecord,
    TwinConfig,
    fit_decay_rate,
    nudging_force,
    run_from_record,
    run_temperature_slaving,
    run_twin,
    slaving_contract_margin,
    spin_up,
)
from benard_da.model import PhysicalParams, State
from benard_da.observations import (
    MODAL,
    NODAL,
    VOLUME,
    InterpolantSpec,
    modal_projection_mask,
    observe,
)
from benard_da.spectral import (
    COS,
    SIN,
    Grid,
    SpectralField,
    VectorField,
    norm_h,
    random_scalar,
    random_solenoidal,
    real_mode,
)
from benard_da.stepping import BlowUpError, StepperConfig

GRID = Grid(2.0, 32, 16)
SUPER = PhysicalParams(nu=0.03, kappa=0.03, L=2.0, mu=40.0, h=0.2)
STEP = StepperConfig(dt=2e-3)


def single_mode_solenoidal(grid: Grid, n: int, m: int) -> VectorField:
    """Divergence-free velocity occupying one conjugate mode pair."""
    c1 = np.zeros(grid.shape, dtype=complex)
    c2 = np.zeros(grid.shape, dtype=complex)
    ky = grid.ky[m]
    for idx in (n, (-n) % grid.nx):
        kx = grid.kx[idx]
        c1[idx, m] = 1j * ky
        c2[idx, m] = kx
    f = VectorField(SpectralField(grid, COS, c1), SpectralField(grid, SIN, c2))
    assert norm_h(f) > 0
    return f


def twin_config(**overrides) -> TwinConfig:
    kw = dict(
        params=SUPER,
        spec=InterpolantSpec(MODAL, 0.2, GRID),
        stepper=STEP,
        run_time=0.5,
        spinup_time=2.0,
        seed=3,
    )
    kw.update(overrides)
    return TwinConfig(**kw)


class TestConfigValidation:
    def test_policy_names_checked(self):
        with pytest.raises(ValueError, match="policies"):
            twin_config(v0_policy="random")

    def test_cadence_positive(self):
        with pytest.raises(ValueError, match="cadence"):
            twin_config(sample_cadence=0)

    def test_run_time_positive(self):
        with pytest.raises(ValueError, match="run_time"):
            twin_config(run_time=0.0)

    def test_spinup_nonnegative(self):
        with pytest.raises(ValueError, match="spinup"):
            twin_config(spinup_time=-1.0)

    def test_h_mismatch_rejected(self):
        with pytest.raises(ValueError, match="disagree"):
            twin_config(spec=InterpolantSpec(MODAL, 0.25, GRID))

    def test_length_mismatch_rejected(self):
        bad = PhysicalParams(nu=0.03, kappa=0.03, L=1.0, mu=40.0, h=0.2)
        with pytest.raises(ValueError, match="L"):
            twin_config(params=bad)

    def test_custom_policy_needs_state(self):
        cfg = twin_config(v0_policy=CUSTOM, spinup_time=0.0)
        with pytest.raises(ValueError, match="custom"):
            run_twin(cfg)

    def test_series_times_must_increase(self):
        t = np.array([0.0, 1.0, 1.0])
        z = np.zeros(3)
        with pytest.raises(ValueError, match="increasing"):
            ErrorSeries(t, z, z, z, z)

    def test_series_rejects_negative_norms(self):
        t = np.array([0.0, 1.0, 2.0])
        z = np.zeros(3)
        with pytest.raises(ValueError, match="nonnegative"):
            ErrorSeries(t, z, z - 1.0, z, z)


class TestNudgingForce:
    def test_zero_mu_gives_zero_force(self):
        rng = np.random.default_rng(0)
        v = random_solenoidal(GRID, rng)
        u = random_solenoidal(GRID, rng)
        spec = InterpolantSpec(VOLUME, 0.25, GRID)
        f = nudging_force(v, observe(u, spec), spec, mu=0.0)
        assert norm_h(f) == 0.0

    def test_single_observed_mode_pulled_exactly(self):
        # In-band mode, zero observations: the force is -mu times the field.
        spec = InterpolantSpec(MODAL, 0.2, GRID)
        v = single_mode_solenoidal(GRID, 1, 1)
        zero = VectorField.zeros(GRID)
        mu = 7.0
        f = nudging_force(v, zero, spec, mu)
        assert np.allclose(f.u1.coeffs, -mu * v.u1.coeffs, rtol=0, atol=1e-14)
        assert np.allclose(f.u2.coeffs, -mu * v.u2.coeffs, rtol=0, atol=1e-14)

    def test_out_of_band_mode_ignored(self):
        spec = InterpolantSpec(MODAL, 0.2, GRID)
        mask = modal_projection_mask(spec)
        assert not mask[8, 3]
        v = single_mode_solenoidal(GRID, 8, 3)
        f = nudging_force(v, VectorField.zeros(GRID), spec, mu=7.0)
        assert norm_h(f) == 0.0

    def test_force_is_solenoidal(self):
        from benard_da.spectral import solenoidality_defect

        rng = np.random.default_rng(5)
        spec = InterpolantSpec(NODAL, 0.25, GRID)
        v = random_solenoidal(GRID, rng)
        u = random_solenoidal(GRID, rng)
        f = nudging_force(v, observe(u, spec), spec, mu=12.0)
        assert solenoidality_defect(f) < 1e-12 * norm_h(f)

    def test_grid_mismatch_rejected(self):
        other = Grid(2.0, 16, 8)
        spec = InterpolantSpec(MODAL, 0.2, GRID)
        v = VectorField.zeros(other)
        with pytest.raises(ValueError, match="grid"):
            nudging_force(v, VectorField.zeros(GRID), spec, mu=1.0)


@pytest.fixture(scope="module")
def attractor_state():
    """One settled supercritical truth state shared by the slow twin tests."""
    state, _ = spin_up(SUPER, GRID, STEP, 30.0, seed=3)
    return state


class TestRunTwin:
    def test_synchronized_start_stays_synchronized(self):
        truth0, _ = spin_up(SUPER, GRID, STEP, 2.0, seed=3)
        cfg = twin_config(
            v0_policy=CUSTOM, eta0_policy=CUSTOM, run_time=0.1, spinup_time=0.0
        )
        res = run_twin(
            cfg,
            truth0=truth0,
            v0=truth0.velocity,
            eta0=truth0.temperature,
        )
        assert np.all(res.errors.w_h < 1e-10)
        assert np.all(res.errors.xi_h < 1e-10)

    def test_control_run_keeps_error(self, attractor_state):
        # mu = 0 from a zero initial guess: the error IS the truth, which
        # lives on the attractor and does not decay.
        params = PhysicalParams(nu=0.03, kappa=0.03, L=2.0, mu=0.0, h=0.2)
        cfg = twin_config(params=params, run_time=1.0)
        res = run_twin(cfg, truth0=attractor_state)
        assert res.errors.w_h[-1] > 0.3 * res.errors.w_h[0]

    def test_errors_decay_with_velocity_only_nudging(self, attractor_state):
        # Qualitative check; the sharp decay thresholds live in the
        # acceptance suite at full resolution.  The temperature trails the
        # velocity since it is never observed.
        cfg = twin_config(run_time=6.0)
        res = run_twin(cfg, truth0=attractor_state)
        assert res.errors.w_h[-1] < 1e-3 * res.errors.w_h[0]
        assert res.errors.xi_h[-1] < 5e-2 * res.errors.xi_h[0]

    def test_sample_cadence_and_diagnostics(self):
        cfg = twin_config(run_time=0.1, spinup_time=0.5, sample_cadence=5)
        res = run_twin(cfg)
        n_steps = int(round(0.1 / STEP.dt))
        assert len(res.errors.times) == n_steps // 5 + 1
        assert np.all(np.diff(res.errors.times) > 0)
        d = res.truth_diagnostics
        assert np.array_equal(d.times, res.errors.times)
        assert d.k3 == np.max(d.a0u_sq)
        assert d.k3 > 0

    def test_blow_up_labels_trajectory(self):
        rng = np.random.default_rng(1)
        big = State(
            random_solenoidal(GRID, rng, norm=1e8),
            random_scalar(GRID, rng, SIN, norm=1e8),
        )
        cfg = twin_config(run_time=10.0, spinup_time=0.0, stepper=StepperConfig(dt=1.0))
        with pytest.raises(BlowUpError) as err:
            run_twin(cfg, truth0=big)
        assert err.value.label == "truth"

    def test_explicit_kind_converges_too(self, attractor_state):
        params = PhysicalParams(nu=0.03, kappa=0.03, L=2.0, mu=20.0, h=0.2)
        cfg = twin_config(
            params=params,
            spec=InterpolantSpec(VOLUME, 0.2, GRID),
            run_time=2.0,
        )
        res = run_twin(cfg, truth0=attractor_state)
        assert res.errors.w_h[-1] < 0.1 * res.errors.w_h[0]


class TestObservationReplay:
    @pytest.mark.parametrize("kind,mu", [(MODAL, 40.0), (VOLUME, 20.0), (NODAL, 20.0)])
    def test_replay_reproduces_live_run_exactly(self, tmp_path, kind, mu):
        params = PhysicalParams(nu=0.03, kappa=0.03, L=2.0, mu=mu, h=0.2)
        spec = InterpolantSpec(kind, 0.2, GRID)
        cfg = twin_config(params=params, spec=spec, run_time=0.2, spinup_time=1.0)
        path = tmp_path / "obs.npz"
        live = run_twin(cfg, record_to=path)
        rec = ObservationRecord.load(path)
        final, times, residuals = run_from_record(rec, params, spec, STEP)
        assert np.array_equal(
            final.velocity.u1.coeffs, live.assimilated_final.velocity.u1.coeffs
        )
        assert np.array_equal(
            final.velocity.u2.coeffs, live.assimilated_final.velocity.u2.coeffs
        )
        assert np.array_equal(
            final.temperature.coeffs, live.assimilated_final.temperature.coeffs
        )
        assert len(times) == len(residuals) == int(round(0.2 / STEP.dt))

    def test_mismatched_record_rejected(self, tmp_path):
        spec = InterpolantSpec(MODAL, 0.2, GRID)
        cfg = twin_config(run_time=0.02, spinup_time=0.0)
        path = tmp_path / "obs.npz"
        run_twin(cfg, record_to=path)
        rec = ObservationRecord.load(path)
        other = StepperConfig(dt=1e-3)
        with pytest.raises(ValueError, match="match"):
            run_from_record(rec, SUPER, spec, other)


class TestFitDecayRate:
    def make_series(self, t, energy):
        w = np.sqrt(energy)
        z = np.zeros_like(t)
        return ErrorSeries(t, w, w, z, z)

    def test_synthetic_exponential_recovered(self):
        t = np.linspace(0.0, 5.0, 101)
        s = self.make_series(t, np.exp(-2.0 * t))
        fit = fit_decay_rate(s, (0.0, 5.0))
        assert not fit.saturated
        assert abs(fit.rate - 2.0) < 1e-6
        assert fit.r_squared > 0.999999

    def test_constant_series_reports_zero_rate(self):
        t = np.linspace(0.0, 5.0, 50)
        s = self.make_series(t, np.full_like(t, 3.7))
        fit = fit_decay_rate(s, (0.0, 5.0))
        assert abs(fit.rate) < 1e-12

    def test_exact_zero_energy_means_saturation(self):
        t = np.linspace(0.0, 5.0, 50)
        e = np.exp(-2.0 * t)
        e[30:] = 0.0
        s = self.make_series(t, e)
        fit = fit_decay_rate(s, (0.0, 5.0))
        assert fit.saturated
        assert fit.rate is None

    def test_window_restricts_samples(self):
        t = np.linspace(0.0, 10.0, 201)
        e = np.where(t < 5.0, np.exp(-1.0 * t), np.exp(-5.0) * np.exp(-3.0 * (t - 5.0)))
        s = self.make_series(t, e)
        early = fit_decay_rate(s, (0.0, 4.9))
        late = fit_decay_rate(s, (5.1, 10.0))
        assert abs(early.rate - 1.0) < 1e-6
        assert abs(late.rate - 3.0) < 1e-6

    def test_too_few_samples_rejected(self):
        t = np.linspace(0.0, 5.0, 101)
        s = self.make_series(t, np.exp(-t))
        with pytest.raises(ValueError, match="at least 10"):
            fit_decay_rate(s, (0.0, 0.3))

    def test_empty_window_rejected(self):
        t = np.linspace(0.0, 5.0, 101)
        s = self.make_series(t, np.exp(-t))
        with pytest.raises(ValueError, match="positive length"):
            fit_decay_rate(s, (2.0, 2.0))


class TestTemperatureSlaving:
    def test_identical_inits_stay_identical(self):
        rng = np.random.default_rng(11)
        truth = State(
            random_solenoidal(GRID, rng, norm=0.5),
            random_scalar(GRID, rng, SIN, norm=0.5),
        )
        th = random_scalar(GRID, rng, SIN, norm=1.0)
        series = run_temperature_slaving(
            truth, SUPER, STEP, th, th, run_time=0.1
        )
        assert np.all(series.diff_sq == 0.0)

    def test_resting_carrier_decays_at_conduction_rate(self):
        # Gravest-mode gap with u = 0: the contract is an equality, and the
        # fitted rate must match 2 kappa pi^2 to the scheme's accuracy.
        params = PhysicalParams(nu=0.05, kappa=0.05, L=2.0, mu=0.0, h=0.25)
        ta = real_mode(GRID, SIN, 0, 1, amplitude=1.0)
        tb = SpectralField.zeros(GRID, SIN)
        series = run_temperature_slaving(
            State.zeros(GRID), params, STEP, ta, tb, run_time=0.5
        )
        target = 2.0 * params.kappa * np.pi**2
        slope = np.polyfit(series.times, np.log(series.diff_sq), 1)[0]
        assert abs(-slope / target - 1.0) < 1e-6
        margin = slaving_contract_margin(series, params.kappa, np.pi**2)
        assert margin <= 1.0 + 1e-12

    def test_turbulent_carrier_satisfies_contract(self):
        rng = np.random.default_rng(7)
        truth = State(
            random_solenoidal(GRID, rng, norm=0.5),
            random_scalar(GRID, rng, SIN, norm=0.5),
        )
        ta = random_scalar(GRID, rng, SIN, norm=1.0)
        tb = random_scalar(GRID, rng, SIN, norm=1.0)
        series = run_temperature_slaving(truth, SUPER, STEP, ta, tb, run_time=1.0)
        margin = slaving_contract_margin(series, SUPER.kappa, np.pi**2)
        assert margin <= 1.0 + 1e-10

    def test_grid_mismatch_rejected(self):
        other = Grid(2.0, 16, 8)
        ta = SpectralField.zeros(other, SIN)
        with pytest.raises(ValueError, match="grid"):
            run_temperature_slaving(State.zeros(GRID), SUPER, STEP, ta, ta, 0.1)
