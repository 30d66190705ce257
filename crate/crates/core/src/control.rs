//! Sliding surfaces, switching elements and the three control laws:
//! first-order SMC, super-twisting second-order SMC, and the fused
//! sliding-mode multimodel controller (SMMC).
//!
//! Surfaces are evaluated on the tracking error `x̃ = x - x_d`, so that
//! `ṡ = C·ẋ` for a piecewise-constant reference and `u = u_eq - k·sign(s)`
//! attracts whenever `C·B·k > 0`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::multimodel::{fuse_controls, SubModel, ValidityVector, CB_SINGULAR_TOL};

/// One surface row. Entries are non-negative and positive on the states the
/// row actually weighs.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    c: Vec<f64>,
}

impl SurfaceSpec {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || !c.iter().any(|x| *x > 0.0) {
            return Err(Error::Invalid("surface coefficients must be >= 0 with at least one > 0"));
        }
        Ok(Self { c })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// Stacks rows into an `m×n` matrix.
    pub fn stack(rows: &[SurfaceSpec], n: usize) -> Result<Matrix> {
        let mut data = Vec::with_capacity(rows.len() * n);
        for r in rows {
            if r.c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: r.c.len() });
            }
            data.extend_from_slice(&r.c);
        }
        Ok(Matrix::from_row_major(rows.len(), n, data))
    }
}

/// `s = C·x̃`.
pub fn sliding_surface(spec: &SurfaceSpec, x_tilde: &[f64]) -> Result<f64> {
    if spec.c.len() != x_tilde.len() {
        return Err(Error::DimensionMismatch { expected: spec.c.len(), found: x_tilde.len() });
    }
    Ok(spec.c.iter().zip(x_tilde).map(|(c, x)| c * x).sum())
}

/// `u_eq = -(C·B)⁻¹·C·A·x`: the control that holds `ṡ = 0` on the nominal
/// linear model.
pub fn equivalent_control(a: &Matrix, b: &Matrix, c: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    let cb = c.mul(b)?;
    if !cb.is_square() {
        return Err(Error::DimensionMismatch { expected: cb.rows(), found: cb.cols() });
    }
    let det = cb.det()?;
    if !(det.abs() >= CB_SINGULAR_TOL) {
        return Err(Error::SingularCB { det });
    }
    let cax = c.mul(a)?.mul_vec(x)?;
    let lu = cb.lu()?;
    Ok(lu.solve(&cax).into_iter().map(|v| -v).collect())
}

/// Sign with `sign(0) = 0`.
#[inline]
pub fn sign(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `-k·sign(s)`.
#[inline]
pub fn switching_control(s: f64, k: f64) -> f64 {
    -k * sign(s)
}

/// `λ·sat(s/Ω)`: linear inside the boundary layer `|s| < Ω`, `±λ` outside.
#[inline]
pub fn saturation_control(s: f64, lambda: f64, omega_layer: f64) -> f64 {
    if s.abs() >= omega_layer {
        lambda * sign(s)
    } else {
        lambda * s / omega_layer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    Smc1,
    Smc2,
    Smmc,
    /// Zero voltage; open-loop baseline.
    Open,
}

impl ControllerMode {
    pub fn name(self) -> &'static str {
        match self {
            ControllerMode::Smc1 => "smc1",
            ControllerMode::Smc2 => "smc2",
            ControllerMode::Smmc => "smmc",
            ControllerMode::Open => "open",
        }
    }
}

/// Shape of the switching element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchFn {
    /// `-k·λ·sign(s)`.
    Sign,
    /// `-k·λ·sat(s/Ω)`.
    Saturation,
    /// `-k·s`.
    Proportional,
}

/// Super-twisting gains: `u = -λ₂·|s|^½·sign(s) + w`, `ẇ = -W·sign(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperTwistingGains {
    pub lambda2: f64,
    pub w: f64,
}

impl SuperTwistingGains {
    /// `λ₂ = 1.5·√k`, `W = 1.1·k`.
    pub fn from_k(k: f64) -> Self {
        Self { lambda2: 1.5 * libm::sqrt(k), w: 1.1 * k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub mode: ControllerMode,
    /// Switching gain.
    pub k: f64,
    /// Saturation amplitude.
    pub lambda: f64,
    /// Boundary-layer half-width Ω.
    pub omega_layer: f64,
    /// Margin required on top of the minimal certified gain.
    pub epsilon: f64,
    /// Bound `M` on the unmodelled part, `‖φ(x,u)‖ < M·‖x‖`.
    pub m_bound: f64,
    /// Reaching-rate constant of `s·ṡ ≤ -η·|s|`.
    pub eta: f64,
    pub switch_fn: SwitchFn,
    /// Add the equivalent control; `false` leaves only the switching term.
    pub equivalent_control: bool,
    /// Overrides the gains derived from `k` for SMC2.
    pub super_twisting: Option<SuperTwistingGains>,
}

impl ControllerConfig {
    pub fn new(mode: ControllerMode) -> Self {
        Self {
            mode,
            k: 50.0,
            lambda: 1.0,
            omega_layer: 2.0,
            epsilon: 0.5,
            m_bound: 1000.0,
            eta: 1.0,
            switch_fn: match mode {
                ControllerMode::Smmc => SwitchFn::Saturation,
                _ => SwitchFn::Sign,
            },
            // the super-twisting law carries its own integral action
            equivalent_control: mode != ControllerMode::Smc2,
            super_twisting: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.k) {
            return Err(Error::Invalid("k > 0"));
        }
        if !positive(self.lambda) {
            return Err(Error::Invalid("lambda > 0"));
        }
        if !positive(self.omega_layer) {
            return Err(Error::Invalid("omega_layer > 0"));
        }
        if !positive(self.epsilon) {
            return Err(Error::Invalid("epsilon > 0"));
        }
        if !(self.m_bound.is_finite() && self.m_bound >= 0.0) {
            return Err(Error::Invalid("m_bound >= 0"));
        }
        if !positive(self.eta) {
            return Err(Error::Invalid("eta > 0"));
        }
        if let Some(g) = self.super_twisting {
            if !positive(g.lambda2) || !positive(g.w) {
                return Err(Error::Invalid("super-twisting gains > 0"));
            }
        }
        Ok(())
    }

    pub fn super_twisting_gains(&self) -> SuperTwistingGains {
        self.super_twisting.unwrap_or_else(|| SuperTwistingGains::from_k(self.k))
    }

    /// Switching term for surface value `s` and gain `k`.
    pub fn switching_term(&self, s: f64, k: f64) -> f64 {
        match self.switch_fn {
            SwitchFn::Sign => switching_control(s, k * self.lambda),
            SwitchFn::Saturation => -k * saturation_control(s, self.lambda, self.omega_layer),
            SwitchFn::Proportional => -k * s,
        }
    }
}

/// First-order SMC: `u = u_eq + u_s` on the sub-model's surfaces.
pub fn smc1_control(model: &SubModel, x: &[f64], x_tilde: &[f64], cfg: &ControllerConfig) -> Result<Vec<f64>> {
    let s = model.surfaces(x_tilde)?;
    let mut u = if cfg.equivalent_control {
        model.equivalent_gain().mul_vec(x)?
    } else {
        alloc::vec![0.0; s.len()]
    };
    for (ui, si) in u.iter_mut().zip(&s) {
        *ui += cfg.switching_term(*si, cfg.k);
    }
    Ok(u)
}

/// Integral state of the super-twisting law.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Smc2State {
    pub w: f64,
}

/// One super-twisting step on a scalar surface.
///
/// Returns the control for this sample and the integral state for the next
/// one (explicit Euler over `dt`).
pub fn smc2_control(s: f64, state: Smc2State, gains: SuperTwistingGains, dt: f64) -> (f64, Smc2State) {
    let u = -gains.lambda2 * libm::sqrt(s.abs()) * sign(s) + state.w;
    let w = state.w - gains.w * sign(s) * dt;
    (u, Smc2State { w })
}

/// Per-sub-model quantities of one SMMC evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub s: Vec<f64>,
    pub u_eq: Vec<f64>,
    pub u_s: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmmcOutput {
    /// Fused control `Σ v_i·u_i`.
    pub u: Vec<f64>,
    /// Fused surfaces `Σ v_i·s_i`, per channel.
    pub surfaces: Vec<f64>,
    pub per_model: Vec<ModelRecord>,
}

/// Sliding-mode multimodel control.
///
/// Each sub-model contributes `u_i = u_eq,i + u_s,i` on its own surfaces;
/// the applied control is the validity-weighted sum.
pub fn smmc_control(
    bank: &[SubModel],
    validities: &ValidityVector,
    x: &[f64],
    x_tilde: &[f64],
    cfg: &ControllerConfig,
) -> Result<SmmcOutput> {
    if bank.is_empty() {
        return Err(Error::EmptyBank);
    }
    if bank.len() != validities.len() {
        return Err(Error::LengthMismatch { expected: bank.len(), found: validities.len() });
    }
    let m = bank[0].input_dim();
    let mut per_model = Vec::with_capacity(bank.len());
    for model in bank {
        if model.input_dim() != m {
            return Err(Error::DimensionMismatch { expected: m, found: model.input_dim() });
        }
        let s = model.surfaces(x_tilde)?;
        let u_eq = if cfg.equivalent_control {
            model.equivalent_gain().mul_vec(x)?
        } else {
            alloc::vec![0.0; m]
        };
        let u_s: Vec<f64> = s.iter().map(|&si| cfg.switching_term(si, model.k_gain)).collect();
        let u = u_eq.iter().zip(&u_s).map(|(a, b)| a + b).collect();
        per_model.push(ModelRecord { s, u_eq, u_s, u });
    }
    let u = fuse_controls(validities, &per_model.iter().map(|r| r.u.as_slice()).collect::<Vec<_>>())?;
    let surfaces = fuse_controls(validities, &per_model.iter().map(|r| r.s.as_slice()).collect::<Vec<_>>())?;
    Ok(SmmcOutput { u, surfaces, per_model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy_model(index: usize, a: Matrix, c: &[f64], k: f64) -> SubModel {
        let b = Matrix::column(&[0.0, 1.0]);
        SubModel::from_matrices(index, 0.0, a, b, &[SurfaceSpec::new(c.to_vec()).unwrap()], k).unwrap()
    }

    #[test]
    fn surface_examples() {
        let c = SurfaceSpec::new(vec![1.0, 2.0, 0.5]).unwrap();
        assert_eq!(sliding_surface(&c, &[0.0; 3]).unwrap(), 0.0);
        assert_eq!(sliding_surface(&c, &[2.0, 1.0, 4.0]).unwrap(), 6.0);
        let c = SurfaceSpec::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(sliding_surface(&c, &[1.0, -1.0]).unwrap(), 0.0);
        assert!(matches!(sliding_surface(&c, &[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(SurfaceSpec::new(vec![1.0, -1.0]).is_err());
        assert!(SurfaceSpec::new(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn equivalent_control_examples() {
        let b = Matrix::column(&[0.0, 1.0]);
        let c = Matrix::row_vector(&[1.0, 1.0]);
        let u = equivalent_control(&Matrix::zeros(2, 2), &b, &c, &[3.0, -4.0]).unwrap();
        assert_eq!(u, vec![0.0]);

        let a = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let u = equivalent_control(&a, &b, &c, &[0.7, -2.5]).unwrap();
        assert_eq!(u, vec![2.5]);

        let flux_only = Matrix::row_vector(&[1.0, 0.0]);
        assert!(matches!(equivalent_control(&a, &b, &flux_only, &[1.0, 1.0]), Err(Error::SingularCB { .. })));
    }

    #[test]
    fn switching_examples() {
        assert_eq!(switching_control(1.0, 2.0), -2.0);
        assert_eq!(switching_control(-0.5, 3.0), 3.0);
        assert_eq!(switching_control(0.0, 3.0), 0.0);
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(saturation_control(5.0, 1.0, 2.0), 1.0);
        assert_eq!(saturation_control(1.0, 1.0, 2.0), 0.5);
        assert_eq!(saturation_control(0.0, 1.0, 2.0), 0.0);
        let below = saturation_control(2.0 - 1e-12, 1.0, 2.0);
        assert!((below - saturation_control(2.0, 1.0, 2.0)).abs() < 1e-11);
        assert_eq!(saturation_control(-7.0, 3.0, 2.0), -3.0);
    }

    #[test]
    fn smc1_examples() {
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let model = toy_model(0, a, &[1.0, 1.0], 2.0);
        let mut cfg = ControllerConfig::new(ControllerMode::Smc1);
        cfg.k = 2.0;
        cfg.lambda = 1.0;
        cfg.switch_fn = SwitchFn::Sign;

        assert_eq!(smc1_control(&model, &[0.0, 0.0], &[0.0, 0.0], &cfg).unwrap(), vec![0.0]);

        // on the surface only the equivalent control remains
        let x = [0.3, 1.7];
        let u = smc1_control(&model, &x, &[1.0, -1.0], &cfg).unwrap();
        assert_eq!(u, vec![-1.7]);

        // s = 1 → u = -x₂ - 2
        let u = smc1_control(&model, &x, &[0.25, 0.75], &cfg).unwrap();
        assert_eq!(u, vec![-1.7 - 2.0]);

        cfg.equivalent_control = false;
        let u = smc1_control(&model, &x, &[0.25, 0.75], &cfg).unwrap();
        assert_eq!(u, vec![-2.0]);
    }

    #[test]
    fn smc2_examples() {
        let g = SuperTwistingGains::from_k(1.0);
        assert_eq!(g.lambda2, 1.5);
        let (u, st) = smc2_control(0.0, Smc2State::default(), g, 1e-3);
        assert_eq!((u, st.w), (0.0, 0.0));
        let (u, _) = smc2_control(4.0, Smc2State::default(), g, 1e-3);
        assert_eq!(u, -3.0);
        let (u1, s1) = smc2_control(2.5, Smc2State { w: 0.4 }, g, 1e-3);
        let (u2, s2) = smc2_control(-2.5, Smc2State { w: -0.4 }, g, 1e-3);
        assert_eq!(u1, -u2);
        assert_eq!(s1.w, -s2.w);
        // sliding fixed point
        let (u, st) = smc2_control(0.0, Smc2State { w: 0.8 }, g, 1e-3);
        assert_eq!((u, st.w), (0.8, 0.8));
    }

    #[test]
    fn switching_term_variants() {
        let mut cfg = ControllerConfig::new(ControllerMode::Smmc);
        cfg.lambda = 1.0;
        cfg.omega_layer = 2.0;
        cfg.switch_fn = SwitchFn::Saturation;
        assert_eq!(cfg.switching_term(1.0, 4.0), -2.0);
        assert_eq!(cfg.switching_term(-5.0, 4.0), 4.0);
        cfg.switch_fn = SwitchFn::Sign;
        assert_eq!(cfg.switching_term(0.1, 4.0), -4.0);
        cfg.switch_fn = SwitchFn::Proportional;
        assert_eq!(cfg.switching_term(0.5, 4.0), -2.0);
    }

    #[test]
    fn smmc_single_model_reduces_to_smc1() {
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[-2.0, -3.0]]);
        let model = toy_model(0, a, &[2.0, 1.0], 3.0);
        let mut cfg = ControllerConfig::new(ControllerMode::Smmc);
        cfg.k = 3.0;
        let v = ValidityVector::new(vec![1.0]).unwrap();
        let x = [0.4, -1.2];
        let xt = [0.1, 0.9];
        let out = smmc_control(core::slice::from_ref(&model), &v, &x, &xt, &cfg).unwrap();
        let smc = smc1_control(&model, &x, &xt, &cfg).unwrap();
        assert_eq!(out.u, smc);
    }

    #[test]
    fn smmc_zero_error_is_pure_equivalent_fusion() {
        let m1 = toy_model(0, Matrix::from_rows(&[&[0.0, 1.0], &[-2.0, -3.0]]), &[1.0, 1.0], 1.0);
        let m2 = toy_model(1, Matrix::from_rows(&[&[0.0, 1.0], &[-4.0, -1.0]]), &[2.0, 1.0], 5.0);
        let cfg = ControllerConfig::new(ControllerMode::Smmc);
        let v = ValidityVector::new(vec![0.25, 0.75]).unwrap();
        let x = [1.0, 2.0];
        let out = smmc_control(&[m1.clone(), m2.clone()], &v, &x, &[0.0, 0.0], &cfg).unwrap();
        assert!(out.per_model.iter().all(|r| r.s == vec![0.0] && r.u_s == vec![0.0]));
        let ue1 = m1.equivalent_gain().mul_vec(&x).unwrap()[0];
        let ue2 = m2.equivalent_gain().mul_vec(&x).unwrap()[0];
        assert!((out.u[0] - (0.25 * ue1 + 0.75 * ue2)).abs() < 1e-14);
    }

    #[test]
    fn smmc_checks_lengths() {
        let m1 = toy_model(0, Matrix::zeros(2, 2), &[1.0, 1.0], 1.0);
        let cfg = ControllerConfig::new(ControllerMode::Smmc);
        let v = ValidityVector::new(vec![0.5, 0.5]).unwrap();
        let r = smmc_control(&[m1], &v, &[0.0, 0.0], &[0.0, 0.0], &cfg);
        assert!(matches!(r, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ControllerConfig::new(ControllerMode::Smc1);
        assert!(cfg.validate().is_ok());
        cfg.omega_layer = 0.0;
        assert_eq!(cfg.validate(), Err(Error::Invalid("omega_layer > 0")));
        let mut cfg = ControllerConfig::new(ControllerMode::Smc2);
        cfg.m_bound = -1.0;
        assert!(cfg.validate().is_err());
    }
}
