//! Fixed-step closed-loop simulation.
//!
//! The controller is sampled once per integration step and held over it
//! (zero-order hold); the plant is advanced with classical RK4.

use alloc::vec;
use alloc::vec::Vec;

use crate::control::{
    smc1_control, smc2_control, smmc_control, ControllerConfig, ControllerMode, Smc2State,
};
use crate::error::{Error, Result};
use crate::multimodel::{channel_surfaces, BankSpec, InverseDistance, SubModel, ValidityRule, ValidityVector};
use crate::plant::{
    electromagnetic_torque, plant_derivative, reference_state, MachineParams, Plant, PlantInput, PlantState,
    SignConvention,
};
use crate::stability::{descent_report, nonquadratic_v, reaching_monitor, DescentReport, ReachingReport};

/// One classical RK4 step of `ẋ = f(t, x)`.
pub fn rk4<const N: usize, F>(mut f: F, t: f64, x: &[f64; N], dt: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let add = |x: &[f64; N], k: &[f64; N], h: f64| -> [f64; N] { core::array::from_fn(|i| x[i] + h * k[i]) };
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * dt, &add(x, &k1, 0.5 * dt))?;
    let k3 = f(t + 0.5 * dt, &add(x, &k2, 0.5 * dt))?;
    let k4 = f(t + dt, &add(x, &k3, dt))?;
    let next: [f64; N] = core::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::NonFiniteState)
    }
}

/// Advances the plant by `dt` with `input` held constant.
pub fn rk4_step(state: &PlantState, input: &PlantInput, plant: &Plant, dt: f64) -> Result<PlantState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Invalid("dt > 0"));
    }
    let next = rk4(
        |_, x| plant_derivative(&PlantState::from_array(*x), input, plant).map(|d| d.to_array()),
        0.0,
        &state.to_array(),
        dt,
    )?;
    Ok(PlantState::from_array(next))
}

/// Scalar time signal.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Constant(f64),
    /// `from` before `t`, `to` from `t` on.
    Step { t: f64, from: f64, to: f64 },
    /// Piecewise-constant table of `(time, value)`, sorted by time; holds
    /// the first value before the first breakpoint.
    Table(Vec<(f64, f64)>),
}

impl Signal {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Signal::Constant(v) => *v,
            Signal::Step { t: ts, from, to } => {
                if t < *ts {
                    *from
                } else {
                    *to
                }
            }
            Signal::Table(points) => {
                let mut v = points.first().map_or(0.0, |p| p.1);
                for &(tp, vp) in points {
                    if tp <= t {
                        v = vp;
                    } else {
                        break;
                    }
                }
                v
            }
        }
    }

    /// Largest magnitude the signal takes.
    pub fn max_abs(&self) -> f64 {
        match self {
            Signal::Constant(v) => v.abs(),
            Signal::Step { from, to, .. } => from.abs().max(to.abs()),
            Signal::Table(points) => points.iter().fold(0.0, |m, p| m.max(p.1.abs())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Signal::Constant(v) if !v.is_finite() => Err(Error::Invalid("signal values must be finite")),
            Signal::Step { t, from, to } if !(t.is_finite() && from.is_finite() && to.is_finite()) => {
                Err(Error::Invalid("signal values must be finite"))
            }
            Signal::Table(points) => {
                if points.is_empty() {
                    return Err(Error::Invalid("signal table must not be empty"));
                }
                if points.iter().any(|(t, v)| !(t.is_finite() && v.is_finite())) {
                    return Err(Error::Invalid("signal values must be finite"));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::Invalid("signal table times must be strictly increasing"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: MachineParams,
    pub convention: SignConvention,
    /// Seconds.
    pub horizon: f64,
    pub dt: f64,
    pub record_stride: usize,
    pub torque_ref: Signal,
    /// Rotor flux reference (Wb).
    pub flux_ref: f64,
    pub load_torque: Signal,
    /// Operating speed of the single model used by SMC1/SMC2, and the centre
    /// of the default bank (rad/s).
    pub nominal_speed: f64,
    pub initial_state: PlantState,
    pub controller: ControllerConfig,
    pub bank: BankSpec,
}

impl Scenario {
    /// Repository default: a step from 0 to -5 N·m at t = 1 s against a
    /// constant -5 N·m load torque, with 0.5 Wb of rotor flux. At that flux
    /// the field-oriented steady state for -5 N·m sits at 9 rad/s.
    pub fn default_with(controller: ControllerConfig) -> Self {
        let nominal_speed = 9.0;
        Self {
            params: MachineParams::default(),
            convention: SignConvention::Canonical,
            horizon: 100.0,
            dt: 1e-4,
            record_stride: 10,
            torque_ref: Signal::Step { t: 1.0, from: 0.0, to: -5.0 },
            flux_ref: 0.5,
            // the turbine torque arrives together with the demand; a load
            // present before the step would spin the unloaded rotor away
            load_torque: Signal::Step { t: 1.0, from: 0.0, to: -5.0 },
            nominal_speed,
            initial_state: PlantState::default(),
            bank: BankSpec::around(nominal_speed, controller.k),
            controller,
        }
    }

    /// Reference magnitude used for relative tolerances.
    pub fn rated_torque(&self) -> f64 {
        self.torque_ref.max_abs()
    }

    pub fn steps(&self) -> usize {
        libm::round(self.horizon / self.dt) as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Invalid("dt > 0"));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(Error::Invalid("horizon >= dt"));
        }
        if self.record_stride == 0 {
            return Err(Error::Invalid("record_stride >= 1"));
        }
        if !(self.flux_ref.is_finite() && self.flux_ref > 0.0) {
            return Err(Error::Invalid("flux_ref > 0"));
        }
        if !self.nominal_speed.is_finite() {
            return Err(Error::Invalid("nominal_speed must be finite"));
        }
        if !self.initial_state.is_finite() {
            return Err(Error::Invalid("initial state must be finite"));
        }
        self.torque_ref.validate()?;
        self.load_torque.validate()?;
        self.controller.validate()?;
        self.bank.validate()
    }

    /// The bank actually used: the configured one for SMMC, otherwise a
    /// single model at the nominal speed with gain `k`.
    pub fn build_bank(&self, plant: &Plant) -> Result<Vec<SubModel>> {
        match self.controller.mode {
            ControllerMode::Smmc => self.bank.build(plant),
            _ => {
                let s = channel_surfaces(self.bank.flux_weight, self.bank.current_weight)?;
                Ok(vec![SubModel::linearize(plant, 0, self.nominal_speed, &s, self.controller.k)?])
            }
        }
    }
}

/// One recorded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: PlantState,
    pub te: f64,
    pub te_ref: f64,
    pub u: [f64; 2],
    /// Per-channel surface (validity-fused for SMMC).
    pub s: [f64; 2],
    /// Sum of the channel surfaces.
    pub s_fused: f64,
    /// `V = Σ P_i·s_i²` over models and channels.
    pub v_lyap: f64,
    pub validities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub samples: Vec<Sample>,
    /// Per-model controls `u_i` at each sample (empty unless SMMC). Not part
    /// of the CSV form.
    pub partial_controls: Vec<Vec<[f64; 2]>>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_models(&self) -> usize {
        self.samples.first().map_or(0, |s| s.validities.len())
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn column(&self, f: impl Fn(&Sample) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }

    /// Indices where the torque reference changes value: the surfaces jump
    /// there, so derivative estimates must not straddle them.
    pub fn reference_breaks(&self) -> Vec<usize> {
        self.samples
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].te_ref != w[0].te_ref)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Reaching condition on both channel surfaces, outside `|s| < layer`.
    pub fn reaching_report(&self, eta: f64, layer: f64) -> Result<ReachingReport> {
        let t = self.times();
        let breaks = self.reference_breaks();
        let mut report = ReachingReport::default();
        for ch in 0..2 {
            let s = self.column(|x| x.s[ch]);
            report.merge(reaching_monitor(&t, &s, &breaks, eta, layer)?);
        }
        Ok(report)
    }

    /// Finite-difference descent of `V` on samples where some channel
    /// surface is outside the boundary layer.
    pub fn descent_report(&self, layer: f64) -> Result<DescentReport> {
        let t = self.times();
        let v = self.column(|x| x.v_lyap);
        let eligible: Vec<bool> = self.samples.iter().map(|x| x.s.iter().any(|s| s.abs() >= layer)).collect();
        descent_report(&t, &v, &eligible, &self.reference_breaks())
    }
}

struct ControlOutput {
    u: [f64; 2],
    s: [f64; 2],
    v_lyap: f64,
    validities: Vec<f64>,
    partials: Vec<[f64; 2]>,
}

struct Controller<'a> {
    scenario: &'a Scenario,
    bank: Vec<SubModel>,
    rule: InverseDistance,
    smc2: [Smc2State; 2],
}

impl Controller<'_> {
    /// Control at `(t, state)`. Commits the SMC2 integral when `advance`.
    fn evaluate(&mut self, t: f64, state: &PlantState, advance: bool) -> Result<ControlOutput> {
        let sc = self.scenario;
        let cfg = &sc.controller;
        let xd = reference_state(sc.torque_ref.value(t), sc.flux_ref, state.omega, &sc.params)?.0;
        let x = state.em();
        let xd = xd.em();
        let x_tilde: [f64; 4] = core::array::from_fn(|i| x[i] - xd[i]);
        let pair = |v: &[f64]| [v[0], v[1]];

        match cfg.mode {
            ControllerMode::Smc1 | ControllerMode::Open | ControllerMode::Smc2 => {
                let model = &self.bank[0];
                let s = pair(&model.surfaces(&x_tilde)?);
                let u = match cfg.mode {
                    ControllerMode::Smc1 => pair(&smc1_control(model, &x, &x_tilde, cfg)?),
                    ControllerMode::Smc2 => {
                        let mut u = if cfg.equivalent_control {
                            pair(&model.equivalent_gain().mul_vec(&x)?)
                        } else {
                            [0.0; 2]
                        };
                        let gains = cfg.super_twisting_gains();
                        for ch in 0..2 {
                            let (uc, next) = smc2_control(s[ch], self.smc2[ch], gains, sc.dt);
                            u[ch] += uc;
                            if advance {
                                self.smc2[ch] = next;
                            }
                        }
                        u
                    }
                    _ => [0.0; 2],
                };
                Ok(ControlOutput {
                    u,
                    s,
                    v_lyap: nonquadratic_v(&[1.0, 1.0], &s)?,
                    validities: vec![1.0],
                    partials: Vec::new(),
                })
            }
            ControllerMode::Smmc => {
                let v: ValidityVector = self.rule.validities(state.omega, &self.bank)?;
                let out = smmc_control(&self.bank, &v, &x, &x_tilde, cfg)?;
                let mut weights = Vec::with_capacity(2 * self.bank.len());
                let mut surf = Vec::with_capacity(2 * self.bank.len());
                for (rec, p) in out.per_model.iter().zip(&sc.bank.lyapunov_weights) {
                    for s in &rec.s {
                        weights.push(*p);
                        surf.push(*s);
                    }
                }
                Ok(ControlOutput {
                    u: pair(&out.u),
                    s: pair(&out.surfaces),
                    v_lyap: nonquadratic_v(&weights, &surf)?,
                    validities: v.values().to_vec(),
                    partials: out.per_model.iter().map(|r| pair(&r.u)).collect(),
                })
            }
        }
    }
}

/// Runs the scenario. Identical scenarios give bit-identical traces.
pub fn run_scenario(scenario: &Scenario) -> Result<SimTrace> {
    scenario.validate()?;
    let plant = Plant::new(scenario.params, scenario.convention)?;
    let mut ctl = Controller {
        scenario,
        bank: scenario.build_bank(&plant)?,
        rule: InverseDistance { delta: scenario.bank.delta },
        smc2: [Smc2State::default(); 2],
    };
    let n = scenario.steps();
    let stride = scenario.record_stride;
    let mut trace = SimTrace {
        samples: Vec::with_capacity(n / stride + 2),
        partial_controls: Vec::new(),
    };
    let record_partials = scenario.controller.mode == ControllerMode::Smmc;
    let mut state = scenario.initial_state;

    for k in 0..=n {
        let t = k as f64 * scenario.dt;
        let last = k == n;
        let out = ctl.evaluate(t, &state, !last).map_err(|e| e.at(t))?;
        if k % stride == 0 || last {
            trace.samples.push(Sample {
                t,
                state,
                te: electromagnetic_torque(&state, &scenario.params),
                te_ref: scenario.torque_ref.value(t),
                u: out.u,
                s: out.s,
                s_fused: out.s[0] + out.s[1],
                v_lyap: out.v_lyap,
                validities: out.validities,
            });
            if record_partials {
                trace.partial_controls.push(out.partials);
            }
        }
        if last {
            break;
        }
        let input = PlantInput { v_ds: out.u[0], v_qs: out.u[1], c_l: scenario.load_torque.value(t) };
        state = rk4_step(&state, &input, &plant, scenario.dt).map_err(|e| e.at(t))?;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_exponential() {
        let x = rk4(|_, x: &[f64; 1]| Ok([-x[0]]), 0.0, &[1.0], 0.1).unwrap();
        assert!((x[0] - libm::exp(-0.1)).abs() < 1e-7);
    }

    #[test]
    fn rk4_polynomial_forcing_is_exact() {
        let mut x = [0.0];
        let dt = 0.25;
        for k in 0..8 {
            x = rk4(|t, _: &[f64; 1]| Ok([t]), k as f64 * dt, &x, dt).unwrap();
        }
        assert!((x[0] - 2.0 * 2.0 / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rk4_zero_field() {
        let x0 = PlantState { phi_dr: 0.0, ..Default::default() };
        let plant = Plant::canonical(MachineParams::default()).unwrap();
        assert_eq!(rk4_step(&x0, &PlantInput::default(), &plant, 1e-3).unwrap(), x0);
        assert!(rk4_step(&x0, &PlantInput::default(), &plant, 0.0).is_err());
    }

    #[test]
    fn signals() {
        let s = Signal::Step { t: 1.0, from: 0.0, to: -5.0 };
        assert_eq!((s.value(0.999), s.value(1.0)), (0.0, -5.0));
        let tab = Signal::Table(vec![(0.5, 1.0), (2.0, 3.0)]);
        assert_eq!((tab.value(0.0), tab.value(0.5), tab.value(1.9), tab.value(5.0)), (1.0, 1.0, 1.0, 3.0));
        assert_eq!(tab.max_abs(), 3.0);
        assert!(Signal::Table(vec![(1.0, 0.0), (1.0, 2.0)]).validate().is_err());
    }

    #[test]
    fn horizon_of_one_step_gives_two_samples() {
        let mut sc = Scenario::default_with(ControllerConfig::new(ControllerMode::Smmc));
        sc.horizon = sc.dt;
        let tr = run_scenario(&sc).unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr.samples[1].t, sc.dt);
    }

    #[test]
    fn open_loop_at_origin_stays_put() {
        let mut sc = Scenario::default_with(ControllerConfig::new(ControllerMode::Open));
        sc.horizon = 0.05;
        sc.torque_ref = Signal::Constant(0.0);
        sc.load_torque = Signal::Constant(0.0);
        let tr = run_scenario(&sc).unwrap();
        assert!(tr.samples.iter().all(|s| s.state == PlantState::default() && s.u == [0.0, 0.0]));
    }

    #[test]
    fn invalid_scenario_is_rejected() {
        let mut sc = Scenario::default_with(ControllerConfig::new(ControllerMode::Smc1));
        sc.dt = 0.0;
        assert_eq!(run_scenario(&sc), Err(Error::Invalid("dt > 0")));
        let mut sc = Scenario::default_with(ControllerConfig::new(ControllerMode::Smc1));
        sc.horizon = 1e-5;
        assert_eq!(run_scenario(&sc), Err(Error::Invalid("horizon >= dt")));
    }

    #[test]
    fn failures_carry_a_timestamp() {
        let mut sc = Scenario::default_with(ControllerConfig::new(ControllerMode::Open));
        sc.dt = 5e-2;
        sc.horizon = 10.0;
        // explicit RK4 at this step is far outside its stability region
        sc.initial_state.i_ds = 1.0;
        let err = run_scenario(&sc).unwrap_err();
        assert!(matches!(err, Error::AtTime { .. }));
        assert_eq!(err.root(), &Error::NonFiniteState);
    }
}
