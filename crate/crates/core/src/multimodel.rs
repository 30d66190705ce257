//! Bank of linear sub-models frozen at operating speeds, online validities,
//! and validity-weighted fusion of surfaces and controls.

use alloc::vec;
use alloc::vec::Vec;

use crate::control::SurfaceSpec;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::plant::{MachineParams, Plant};

/// `|det(C·B)|` below this means the surface is not actuated.
pub const CB_SINGULAR_TOL: f64 = 1e-12;

/// One linear model of the bank.
#[derive(Debug, Clone, PartialEq)]
pub struct SubModel {
    pub index: usize,
    pub omega_op: f64,
    /// State matrix, `n×n`.
    pub a: Matrix,
    /// Input matrix, `n×m`.
    pub b: Matrix,
    /// Output matrix; the full state is measured.
    pub c_out: Matrix,
    /// Surface rows, `m×n`, one per input channel.
    pub alpha: Matrix,
    pub k_gain: f64,
    /// Cached `-(α·B)⁻¹·α·A`, so the equivalent control is one product.
    eq_gain: Matrix,
}

impl SubModel {
    /// Wraps explicit matrices. Fails if `α·B` is singular or the gain is
    /// not positive.
    pub fn from_matrices(
        index: usize,
        omega_op: f64,
        a: Matrix,
        b: Matrix,
        surfaces: &[SurfaceSpec],
        k_gain: f64,
    ) -> Result<Self> {
        if !(k_gain.is_finite() && k_gain > 0.0) {
            return Err(Error::Invalid("k_gain > 0"));
        }
        let n = a.rows();
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: n, found: a.cols() });
        }
        if b.rows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.rows() });
        }
        if surfaces.len() != b.cols() {
            return Err(Error::DimensionMismatch { expected: b.cols(), found: surfaces.len() });
        }
        let alpha = SurfaceSpec::stack(surfaces, n)?;
        let cb = alpha.mul(&b)?;
        let det = cb.det()?;
        if !(det.abs() >= CB_SINGULAR_TOL) {
            return Err(Error::SingularCB { det });
        }
        let eq_gain = cb.inverse()?.mul(&alpha.mul(&a)?)?.scale(-1.0);
        Ok(Self { index, omega_op, c_out: Matrix::identity(n), a, b, alpha, k_gain, eq_gain })
    }

    /// Electromagnetic sub-model of `plant` with speed frozen at `omega_op`.
    pub fn linearize(plant: &Plant, index: usize, omega_op: f64, surfaces: &[SurfaceSpec], k_gain: f64) -> Result<Self> {
        let (a, b) = plant.em_matrices(omega_op);
        Self::from_matrices(index, omega_op, a, b, surfaces, k_gain)
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    /// `-(α·B)⁻¹·α·A`.
    pub fn equivalent_gain(&self) -> &Matrix {
        &self.eq_gain
    }

    /// Surface values `α·x̃`, one per channel.
    pub fn surfaces(&self, x_tilde: &[f64]) -> Result<Vec<f64>> {
        self.alpha.mul_vec(x_tilde)
    }
}

/// Canonical-model sub-model at `omega_op`.
pub fn linearize_submodel(params: &MachineParams, omega_op: f64, surfaces: &[SurfaceSpec], k_gain: f64) -> Result<SubModel> {
    let plant = Plant::canonical(*params)?;
    SubModel::linearize(&plant, 0, omega_op, surfaces, k_gain)
}

/// Per-channel surface rows for the electromagnetic state: the d-channel
/// weighs `(φ_dr, i_ds)`, the q-channel `(φ_qr, i_qs)`.
pub fn channel_surfaces(flux_weight: f64, current_weight: f64) -> Result<[SurfaceSpec; 2]> {
    Ok([
        SurfaceSpec::new(vec![flux_weight, 0.0, current_weight, 0.0])?,
        SurfaceSpec::new(vec![0.0, flux_weight, 0.0, current_weight])?,
    ])
}

/// Validity weights: non-negative, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityVector(Vec<f64>);

impl ValidityVector {
    /// Tolerance on `Σ v_i = 1`.
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyBank);
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Invalid("validities must lie in [0, 1]"));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::Invalid("validities must sum to 1"));
        }
        Ok(Self(values))
    }

    /// Normalizes non-negative raw weights.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if raw.is_empty() {
            return Err(Error::EmptyBank);
        }
        if !(total.is_finite() && total > 0.0) || raw.iter().any(|w| *w < 0.0) {
            return Err(Error::Invalid("validity weights must be non-negative with a positive sum"));
        }
        Self::new(raw.into_iter().map(|w| w / total).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Rule producing validities for the current operating point.
pub trait ValidityRule {
    fn validities(&self, omega: f64, bank: &[SubModel]) -> Result<ValidityVector>;
}

/// `v_i ∝ 1 / (|ω - ω_op,i| + δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseDistance {
    pub delta: f64,
}

impl ValidityRule for InverseDistance {
    fn validities(&self, omega: f64, bank: &[SubModel]) -> Result<ValidityVector> {
        compute_validities(omega, bank, self.delta)
    }
}

pub fn compute_validities(current_omega: f64, bank: &[SubModel], delta: f64) -> Result<ValidityVector> {
    let speeds: Vec<f64> = bank.iter().map(|m| m.omega_op).collect();
    validities_for_speeds(current_omega, &speeds, delta)
}

/// [`compute_validities`] on bare operating speeds.
pub fn validities_for_speeds(current_omega: f64, speeds: &[f64], delta: f64) -> Result<ValidityVector> {
    if speeds.is_empty() {
        return Err(Error::EmptyBank);
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Invalid("delta > 0"));
    }
    let raw = speeds.iter().map(|w| 1.0 / ((current_omega - w).abs() + delta)).collect();
    ValidityVector::normalized(raw)
}

/// `S = Σ v_i·s_i`.
pub fn fuse_surfaces(validities: &ValidityVector, surface_values: &[f64]) -> Result<f64> {
    let v = validities.values();
    if v.len() != surface_values.len() {
        return Err(Error::LengthMismatch { expected: v.len(), found: surface_values.len() });
    }
    Ok(v.iter().zip(surface_values).map(|(w, s)| w * s).sum())
}

/// `u_g = Σ v_i·u_i`, componentwise.
pub fn fuse_controls<U: AsRef<[f64]>>(validities: &ValidityVector, partial_controls: &[U]) -> Result<Vec<f64>> {
    let v = validities.values();
    if v.len() != partial_controls.len() {
        return Err(Error::LengthMismatch { expected: v.len(), found: partial_controls.len() });
    }
    let m = partial_controls[0].as_ref().len();
    let mut out = vec![0.0; m];
    for (w, u) in v.iter().zip(partial_controls) {
        let u = u.as_ref();
        if u.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: u.len() });
        }
        for (o, x) in out.iter_mut().zip(u) {
            *o += w * x;
        }
    }
    Ok(out)
}

/// Bank layout: operating speeds, surface weights, and gains.
#[derive(Debug, Clone, PartialEq)]
pub struct BankSpec {
    pub speeds: Vec<f64>,
    pub flux_weight: f64,
    pub current_weight: f64,
    /// One switching gain per sub-model.
    pub gains: Vec<f64>,
    /// Validity softening (rad/s).
    pub delta: f64,
    /// Weights `P_i` of the surface function `V = Σ P_i·s_i²`.
    pub lyapunov_weights: Vec<f64>,
}

impl BankSpec {
    /// Three models at 0.5, 1.0, 1.5 × `nominal_speed`, unit surface weights.
    pub fn around(nominal_speed: f64, k_gain: f64) -> Self {
        Self {
            speeds: [0.5, 1.0, 1.5].iter().map(|f| f * nominal_speed).collect(),
            flux_weight: 20.0,
            current_weight: 1.0,
            gains: vec![k_gain; 3],
            delta: 0.1,
            lyapunov_weights: vec![1.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.speeds.is_empty() {
            return Err(Error::EmptyBank);
        }
        if self.gains.len() != self.speeds.len() {
            return Err(Error::LengthMismatch { expected: self.speeds.len(), found: self.gains.len() });
        }
        if self.lyapunov_weights.len() != self.speeds.len() {
            return Err(Error::LengthMismatch { expected: self.speeds.len(), found: self.lyapunov_weights.len() });
        }
        if self.speeds.iter().any(|w| !w.is_finite()) {
            return Err(Error::Invalid("bank speeds must be finite"));
        }
        if self.gains.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::Invalid("bank gains > 0"));
        }
        if let Some(index) = self.lyapunov_weights.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::NonPositiveWeight { index });
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Invalid("delta > 0"));
        }
        channel_surfaces(self.flux_weight, self.current_weight).map(|_| ())
    }

    pub fn build(&self, plant: &Plant) -> Result<Vec<SubModel>> {
        self.validate()?;
        let surfaces = channel_surfaces(self.flux_weight, self.current_weight)?;
        self.speeds
            .iter()
            .zip(&self.gains)
            .enumerate()
            .map(|(i, (&w, &k))| SubModel::linearize(plant, i, w, &surfaces, k))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> MachineParams {
        MachineParams { rs: 1.0, rr: 1.0, ls: 1.0, lr: 1.0, lm: 0.5, j: 1.0, p: 2, fv: 1.0 }
    }

    fn bank(speeds: &[f64]) -> Vec<SubModel> {
        let plant = Plant::canonical(MachineParams::default()).unwrap();
        let s = channel_surfaces(1.0, 1.0).unwrap();
        speeds.iter().enumerate().map(|(i, &w)| SubModel::linearize(&plant, i, w, &s, 1.0).unwrap()).collect()
    }

    #[test]
    fn standstill_blocks_are_diagonal() {
        let p = MachineParams::default();
        let c = crate::plant::derive_coefficients(&p).unwrap();
        let m = linearize_submodel(&p, 0.0, &channel_surfaces(1.0, 1.0).unwrap(), 1.0).unwrap();
        let af = m.a.block(0, 0, 2, 2);
        let bc = m.a.block(2, 0, 2, 2);
        assert_eq!(af, Matrix::from_rows(&[&[-c.b, 0.0], &[0.0, -c.b]]));
        assert_eq!(bc, Matrix::from_rows(&[&[-c.gamma2, 0.0], &[0.0, -c.gamma2]]));
        assert_eq!(m.b.block(0, 0, 2, 2), Matrix::zeros(2, 2));
        assert_eq!(m.b.block(2, 0, 2, 2), Matrix::identity(2).scale(c.gamma4));
    }

    #[test]
    fn speed_enters_oddly() {
        let s = channel_surfaces(1.0, 1.0).unwrap();
        let p = MachineParams::default();
        let plus = linearize_submodel(&p, 12.0, &s, 1.0).unwrap();
        let minus = linearize_submodel(&p, -12.0, &s, 1.0).unwrap();
        let zero = linearize_submodel(&p, 0.0, &s, 1.0).unwrap();
        let odd_plus = plus.a.sub(&zero.a).unwrap();
        let odd_minus = minus.a.sub(&zero.a).unwrap();
        assert_eq!(odd_plus, odd_minus.scale(-1.0));
        assert!(odd_plus.max_abs() > 0.0);
    }

    #[test]
    fn hand_assembled_flux_block() {
        let m = linearize_submodel(&unit_params(), 10.0, &channel_surfaces(1.0, 1.0).unwrap(), 1.0).unwrap();
        assert_eq!(m.a.block(0, 0, 2, 2), Matrix::from_rows(&[&[-1.0, -20.0], &[20.0, -1.0]]));
    }

    #[test]
    fn unactuated_surface_is_rejected() {
        let flux_only = [
            SurfaceSpec::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap(),
            SurfaceSpec::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap(),
        ];
        let r = linearize_submodel(&MachineParams::default(), 0.0, &flux_only, 1.0);
        assert!(matches!(r, Err(Error::SingularCB { .. })));
    }

    #[test]
    fn validity_examples() {
        let v = compute_validities(3.0, &bank(&[7.0]), 0.1).unwrap();
        assert_eq!(v.values(), &[1.0]);
        let v = compute_validities(5.0, &bank(&[0.0, 10.0]), 0.1).unwrap();
        assert!((v.values()[0] - 0.5).abs() < 1e-15 && (v.values()[1] - 0.5).abs() < 1e-15);
        let v = compute_validities(10.0, &bank(&[0.0, 10.0, 20.0]), 0.1).unwrap();
        let expected = (1.0 / 0.1) / (1.0 / 10.1 + 1.0 / 0.1 + 1.0 / 10.1);
        assert!((v.values()[1] - expected).abs() < 1e-14);
        assert!((v.values()[1] - 0.980).abs() < 1e-3);
        assert_eq!(compute_validities(0.0, &[], 0.1), Err(Error::EmptyBank));
    }

    #[test]
    fn fusion_examples() {
        let v = ValidityVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(fuse_surfaces(&v, &[2.5, 99.0]).unwrap(), 2.5);
        assert_eq!(fuse_controls(&v, &[[1.0, 2.0], [9.0, 9.0]]).unwrap(), vec![1.0, 2.0]);
        let half = ValidityVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(fuse_surfaces(&half, &[1.0, -1.0]).unwrap(), 0.0);
        assert_eq!(fuse_controls(&half, &[[2.0, 0.0], [0.0, 2.0]]).unwrap(), vec![1.0, 1.0]);
        let v = ValidityVector::new(vec![0.3, 0.7]).unwrap();
        assert!((fuse_surfaces(&v, &[2.0, 1.0]).unwrap() - 1.3).abs() < 1e-15);
        assert!(matches!(fuse_surfaces(&v, &[1.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(fuse_controls(&v, &[[1.0]]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn validity_vector_invariants() {
        assert!(ValidityVector::new(vec![0.6, 0.6]).is_err());
        assert!(ValidityVector::new(vec![-0.1, 1.1]).is_err());
        assert!(ValidityVector::new(vec![]).is_err());
    }

    #[test]
    fn default_bank_builds() {
        let plant = Plant::canonical(MachineParams::default()).unwrap();
        let bank = BankSpec::around(9.0, 50.0).build(&plant).unwrap();
        assert_eq!(bank.len(), 3);
        assert_eq!(bank[2].omega_op, 13.5);
        let mut bad = BankSpec::around(9.0, 50.0);
        bad.lyapunov_weights[1] = 0.0;
        assert_eq!(bad.validate(), Err(Error::NonPositiveWeight { index: 1 }));
    }
}
