//! TOML scenario configuration.
//!
//! Only `[machine]` is required. Everything else falls back to the
//! repository defaults, and [`parse_config`] writes the resolved values back
//! so a serialized config reproduces the run on its own.

use serde::{Deserialize, Serialize};
use smmc_core::control::SuperTwistingGains;
use smmc_core::{
    BankSpec, ControllerConfig, ControllerMode, MachineParams, PlantState, Scenario, SignConvention, Signal, SwitchFn,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    /// The message names the violated invariant, e.g. `dt > 0`.
    #[error("invalid config: {0}")]
    Validation(String),
}

impl ConfigError {
    fn from_core(e: smmc_core::Error) -> Self {
        match e {
            smmc_core::Error::Invalid(what) => ConfigError::Validation(what.to_string()),
            other => ConfigError::Validation(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub machine: MachineSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub bank: BankSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSection {
    pub rs: f64,
    pub rr: f64,
    pub ls: f64,
    pub lr: f64,
    pub lm: f64,
    pub j: f64,
    pub p: u32,
    pub fv: f64,
}

impl From<MachineParams> for MachineSection {
    fn from(m: MachineParams) -> Self {
        Self { rs: m.rs, rr: m.rr, ls: m.ls, lr: m.lr, lm: m.lm, j: m.j, p: m.p, fv: m.fv }
    }
}

impl From<MachineSection> for MachineParams {
    fn from(m: MachineSection) -> Self {
        Self { rs: m.rs, rr: m.rr, ls: m.ls, lr: m.lr, lm: m.lm, j: m.j, p: m.p, fv: m.fv }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    Canonical,
    /// The printed-equation signs, kept for comparison.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalConfig {
    Constant { value: f64 },
    Step { t: f64, from: f64, to: f64 },
    /// Piecewise constant, `[time, value]` pairs.
    Table { points: Vec<[f64; 2]> },
}

impl From<&Signal> for SignalConfig {
    fn from(s: &Signal) -> Self {
        match s {
            Signal::Constant(value) => SignalConfig::Constant { value: *value },
            Signal::Step { t, from, to } => SignalConfig::Step { t: *t, from: *from, to: *to },
            Signal::Table(points) => SignalConfig::Table { points: points.iter().map(|&(t, v)| [t, v]).collect() },
        }
    }
}

impl From<&SignalConfig> for Signal {
    fn from(s: &SignalConfig) -> Self {
        match s {
            SignalConfig::Constant { value } => Signal::Constant(*value),
            SignalConfig::Step { t, from, to } => Signal::Step { t: *t, from: *from, to: *to },
            SignalConfig::Table { points } => Signal::Table(points.iter().map(|p| (p[0], p[1])).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct InitialState {
    pub phi_dr: f64,
    pub phi_qr: f64,
    pub i_ds: f64,
    pub i_qs: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub horizon: f64,
    pub dt: f64,
    pub record_stride: usize,
    pub flux_ref: f64,
    pub nominal_speed: f64,
    pub convention: Convention,
    pub torque_ref: SignalConfig,
    pub load_torque: SignalConfig,
    pub initial_state: InitialState,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let d = Scenario::default_with(ControllerConfig::new(ControllerMode::Smmc));
        let x = d.initial_state;
        Self {
            horizon: d.horizon,
            dt: d.dt,
            record_stride: d.record_stride,
            flux_ref: d.flux_ref,
            nominal_speed: d.nominal_speed,
            convention: Convention::Canonical,
            torque_ref: (&d.torque_ref).into(),
            load_torque: (&d.load_torque).into(),
            initial_state: InitialState { phi_dr: x.phi_dr, phi_qr: x.phi_qr, i_ds: x.i_ds, i_qs: x.i_qs, omega: x.omega },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Smc1,
    Smc2,
    Smmc,
    Open,
}

impl Mode {
    pub fn core(self) -> ControllerMode {
        match self {
            Mode::Smc1 => ControllerMode::Smc1,
            Mode::Smc2 => ControllerMode::Smc2,
            Mode::Smmc => ControllerMode::Smmc,
            Mode::Open => ControllerMode::Open,
        }
    }

    pub fn name(self) -> &'static str {
        self.core().name()
    }
}

impl std::str::FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "smc1" => Ok(Mode::Smc1),
            "smc2" => Ok(Mode::Smc2),
            "smmc" => Ok(Mode::Smmc),
            "open" => Ok(Mode::Open),
            other => Err(ConfigError::Validation(format!("unknown controller `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchName {
    Sign,
    Saturation,
    Proportional,
}

impl SwitchName {
    fn core(self) -> SwitchFn {
        match self {
            SwitchName::Sign => SwitchFn::Sign,
            SwitchName::Saturation => SwitchFn::Saturation,
            SwitchName::Proportional => SwitchFn::Proportional,
        }
    }
}

impl From<SwitchFn> for SwitchName {
    fn from(s: SwitchFn) -> Self {
        match s {
            SwitchFn::Sign => SwitchName::Sign,
            SwitchFn::Saturation => SwitchName::Saturation,
            SwitchFn::Proportional => SwitchName::Proportional,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperTwistingSection {
    pub lambda2: f64,
    pub w: f64,
}

/// Gains shared by every controller. `switch_fn` and `equivalent_control`
/// left out mean "the mode's own default" (saturation with equivalent
/// control for SMMC, sign for SMC1, bare super-twisting for SMC2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub mode: Mode,
    pub k: f64,
    pub lambda: f64,
    pub omega_layer: f64,
    pub epsilon: f64,
    pub m_bound: f64,
    pub eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_fn: Option<SwitchName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalent_control: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub super_twisting: Option<SuperTwistingSection>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let c = ControllerConfig::new(ControllerMode::Smmc);
        Self {
            mode: Mode::Smmc,
            k: c.k,
            lambda: c.lambda,
            omega_layer: c.omega_layer,
            epsilon: c.epsilon,
            m_bound: c.m_bound,
            eta: c.eta,
            switch_fn: None,
            equivalent_control: None,
            super_twisting: None,
        }
    }
}

impl ControllerSection {
    /// Effective settings for `mode`.
    pub fn for_mode(&self, mode: Mode) -> ControllerConfig {
        let mut c = ControllerConfig::new(mode.core());
        c.k = self.k;
        c.lambda = self.lambda;
        c.omega_layer = self.omega_layer;
        c.epsilon = self.epsilon;
        c.m_bound = self.m_bound;
        c.eta = self.eta;
        if let Some(s) = self.switch_fn {
            c.switch_fn = s.core();
        }
        if let Some(e) = self.equivalent_control {
            c.equivalent_control = e;
        }
        c.super_twisting = self.super_twisting.map(|g| SuperTwistingGains { lambda2: g.lambda2, w: g.w });
        c
    }
}

/// Sub-model bank for SMMC. Absent lists are filled in by [`parse_config`]:
/// speeds at 0.5, 1 and 1.5 times the nominal speed, every gain equal to
/// `controller.k`, unit Lyapunov weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BankSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speeds: Option<Vec<f64>>,
    pub flux_weight: f64,
    pub current_weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov_weights: Option<Vec<f64>>,
}

impl Default for BankSection {
    fn default() -> Self {
        let b = BankSpec::around(1.0, 1.0);
        Self {
            speeds: None,
            flux_weight: b.flux_weight,
            current_weight: b.current_weight,
            gains: None,
            delta: b.delta,
            lyapunov_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub controllers: Vec<Mode>,
    /// Required factor between neighbours in the chattering ordering.
    pub chattering_ratio: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self { controllers: vec![Mode::Smc1, Mode::Smc2, Mode::Smmc], chattering_ratio: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

impl RunConfig {
    /// Repository defaults around the given machine.
    pub fn with_machine(machine: MachineParams) -> Self {
        let mut c = Self {
            machine: machine.into(),
            scenario: ScenarioSection::default(),
            controller: ControllerSection::default(),
            bank: BankSection::default(),
            compare: CompareSection::default(),
            output: OutputSection::default(),
        };
        c.resolve();
        c
    }

    fn resolve(&mut self) {
        let n = self.bank.speeds.as_ref().map_or(3, Vec::len);
        if self.bank.speeds.is_none() {
            self.bank.speeds = Some(BankSpec::around(self.scenario.nominal_speed, self.controller.k).speeds);
        }
        if self.bank.gains.is_none() {
            self.bank.gains = Some(vec![self.controller.k; n]);
        }
        if self.bank.lyapunov_weights.is_none() {
            self.bank.lyapunov_weights = Some(vec![1.0; n]);
        }
    }

    /// The scenario for one controller mode.
    pub fn scenario(&self, mode: Mode) -> Scenario {
        let s = &self.scenario;
        let x = s.initial_state;
        let k = self.controller.k;
        Scenario {
            params: self.machine.into(),
            convention: match s.convention {
                Convention::Canonical => SignConvention::Canonical,
                Convention::Literal => SignConvention::Literal,
            },
            horizon: s.horizon,
            dt: s.dt,
            record_stride: s.record_stride,
            torque_ref: (&s.torque_ref).into(),
            flux_ref: s.flux_ref,
            load_torque: (&s.load_torque).into(),
            nominal_speed: s.nominal_speed,
            initial_state: PlantState { phi_dr: x.phi_dr, phi_qr: x.phi_qr, i_ds: x.i_ds, i_qs: x.i_qs, omega: x.omega },
            controller: self.controller.for_mode(mode),
            bank: BankSpec {
                speeds: self.bank.speeds.clone().unwrap_or_default(),
                flux_weight: self.bank.flux_weight,
                current_weight: self.bank.current_weight,
                gains: self.bank.gains.clone().unwrap_or_else(|| vec![k; 3]),
                delta: self.bank.delta,
                lyapunov_weights: self.bank.lyapunov_weights.clone().unwrap_or_else(|| vec![1.0; 3]),
            },
        }
    }

    /// Checks every invariant the simulation relies on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut modes = vec![self.controller.mode];
        modes.extend(&self.compare.controllers);
        for mode in modes {
            self.scenario(mode).validate().map_err(ConfigError::from_core)?;
        }
        if !(self.compare.chattering_ratio.is_finite() && self.compare.chattering_ratio >= 1.0) {
            return Err(ConfigError::Validation("chattering_ratio >= 1".into()));
        }
        if self.output.dir.is_empty() {
            return Err(ConfigError::Validation("output dir must not be empty".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

/// Parses, fills defaults and validates.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |span| line_col(text, span.start));
        ConfigError::Parse { line, column, message: e.message().to_string() }
    })?;
    cfg.resolve();
    cfg.validate()?;
    Ok(cfg)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |nl| before.len() - nl - 1) + 1;
    (line, column)
}
