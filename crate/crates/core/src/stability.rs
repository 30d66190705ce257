//! Checkable stability certificates for the fused controller: a minimal
//! switching gain per sub-model, Lyapunov-matrix conditions on the sliding
//! dynamics and on the full closed loop, the surface function
//! `V = Σ P_i·s_i²`, and a runtime monitor of the reaching condition
//! `s·ṡ ≤ -η·|s|`.
//!
//! Naming follows the usual convention: *reaching* is the off-surface
//! phase, *sliding* is motion inside the boundary layer.

use alloc::vec;
use alloc::vec::Vec;

use crate::control::ControllerConfig;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::multimodel::{SubModel, CB_SINGULAR_TOL};

/// Absolute bound on `‖(A-BL)ᵀP + P(A-BL) + I‖_F` for a certificate to hold.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-8;

/// Added to the reaching inequality to absorb finite-difference noise.
pub const REACHING_TOL: f64 = 1e-9;

/// Minimal admissible switching gain `(‖A‖₂ + M) / σ_min(α·B)`.
///
/// `‖A‖₂ + M` bounds `‖A + M·I‖₂` from above and, unlike it, is monotone in
/// `M`; the quotient is a sufficient gain for `s·ṡ < 0` on the sub-model
/// with nonlinearity `‖φ‖ < M·‖x‖`.
pub fn gain_bound(model: &SubModel, m_bound: f64) -> Result<f64> {
    if !(m_bound.is_finite() && m_bound >= 0.0) {
        return Err(Error::Invalid("m_bound >= 0"));
    }
    let ab = model.alpha.mul(&model.b)?;
    let smin = ab.min_singular_value()?;
    if smin < CB_SINGULAR_TOL {
        return Err(Error::SingularCB { det: ab.det().unwrap_or(0.0) });
    }
    Ok((model.a.spectral_norm()? + m_bound) / smin)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovResult {
    /// Symmetric solution of `A_clᵀP + P·A_cl = -I`.
    pub p: Matrix,
    pub min_eig: f64,
    /// Frobenius norm of the equation residual.
    pub residual: f64,
}

impl LyapunovResult {
    pub fn holds(&self) -> bool {
        self.min_eig > 0.0 && self.residual <= LYAPUNOV_RESIDUAL_TOL
    }
}

/// Solves `A_clᵀP + P·A_cl = -I` for `A_cl = A - B·L` by vectorization:
/// `(I ⊗ A_clᵀ + A_clᵀ ⊗ I)·vec(P) = -vec(I)`.
pub fn lyapunov_check(a: &Matrix, b: &Matrix, l: &Matrix) -> Result<LyapunovResult> {
    let acl = a.sub(&b.mul(l)?)?;
    lyapunov_solve(&acl)
}

pub fn lyapunov_solve(acl: &Matrix) -> Result<LyapunovResult> {
    if !acl.is_square() {
        return Err(Error::DimensionMismatch { expected: acl.rows(), found: acl.cols() });
    }
    let n = acl.rows();
    let at = acl.transpose();
    let id = Matrix::identity(n);
    let op = id.kron(&at).add(&at.kron(&id))?;
    let lu = op.lu()?;
    if lu.is_singular() || lu.min_relative_pivot(op.max_abs()) < 1e-13 {
        return Err(Error::SingularLyapunov);
    }
    let mut rhs = vec![0.0; n * n];
    for i in 0..n {
        rhs[i * n + i] = -1.0;
    }
    let sol = lu.solve(&rhs);
    // column-stacked vec(P)
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = 0.5 * (sol[j * n + i] + sol[i * n + j]);
        }
    }
    if !p.is_finite() {
        return Err(Error::SingularLyapunov);
    }
    let resid = at.mul(&p)?.add(&p.mul(acl)?)?.add(&id)?;
    let eig = p.symmetric_eigenvalues()?;
    Ok(LyapunovResult { min_eig: eig[0], residual: resid.frobenius_norm(), p })
}

/// Sliding dynamics of order `n - m`, as `(A₁₁, A₁₂, L)` with
/// `ẋ₁ = (A₁₁ - A₁₂·L)·x₁` on `s = 0`.
///
/// Requires the regular form `B = [0; B₂]`; the surface constraint
/// `α₁·x₁ + α₂·x₂ = 0` is solved for the actuated block, `L = α₂⁻¹·α₁`.
pub fn reduced_sliding_pair(model: &SubModel) -> Result<(Matrix, Matrix, Matrix)> {
    let n = model.state_dim();
    let m = model.input_dim();
    let r = n - m;
    if model.b.block(0, 0, r, m).max_abs() != 0.0 {
        return Err(Error::Invalid("input matrix is not in regular form [0; B2]"));
    }
    let alpha1 = model.alpha.block(0, 0, m, r);
    let alpha2 = model.alpha.block(0, r, m, m);
    let det = alpha2.det()?;
    if det.abs() < CB_SINGULAR_TOL {
        return Err(Error::SingularCB { det });
    }
    let l = alpha2.inverse()?.mul(&alpha1)?;
    Ok((model.a.block(0, 0, r, r), model.a.block(0, r, r, m), l))
}

/// Full-order feedback `L = (α·B)⁻¹·α·A + k·α`: equivalent control plus a
/// proportional switching term `-k·s`.
pub fn full_order_feedback(model: &SubModel) -> Result<Matrix> {
    model.equivalent_gain().scale(-1.0).add(&model.alpha.scale(model.k_gain))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCertificate {
    pub index: usize,
    pub omega_op: f64,
    pub k: f64,
    pub k_min: f64,
    /// `k > k_min + ε`.
    pub gain_ok: bool,
    pub reduced: LyapunovResult,
    pub full: LyapunovResult,
}

impl ModelCertificate {
    pub fn ok(&self) -> bool {
        self.gain_ok && self.reduced.holds() && self.full.holds()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub models: Vec<ModelCertificate>,
    /// Filled in once a trace has been monitored.
    pub reaching_violation_fraction: Option<f64>,
}

impl StabilityCertificate {
    pub fn ok(&self) -> bool {
        self.models.iter().all(ModelCertificate::ok)
    }
}

pub fn certify_model(model: &SubModel, cfg: &ControllerConfig) -> Result<ModelCertificate> {
    let k_min = gain_bound(model, cfg.m_bound)?;
    let (a11, a12, l) = reduced_sliding_pair(model)?;
    let reduced = lyapunov_check(&a11, &a12, &l)?;
    let full = lyapunov_check(&model.a, &model.b, &full_order_feedback(model)?)?;
    Ok(ModelCertificate {
        index: model.index,
        omega_op: model.omega_op,
        k: model.k_gain,
        k_min,
        gain_ok: model.k_gain > k_min + cfg.epsilon,
        reduced,
        full,
    })
}

pub fn certify(bank: &[SubModel], cfg: &ControllerConfig) -> Result<StabilityCertificate> {
    if bank.is_empty() {
        return Err(Error::EmptyBank);
    }
    let models = bank.iter().map(|m| certify_model(m, cfg)).collect::<Result<_>>()?;
    Ok(StabilityCertificate { models, reaching_violation_fraction: None })
}

/// `V = Σ P_i·s_i²`.
pub fn nonquadratic_v(p_weights: &[f64], surface_values: &[f64]) -> Result<f64> {
    if p_weights.len() != surface_values.len() {
        return Err(Error::LengthMismatch { expected: p_weights.len(), found: surface_values.len() });
    }
    if let Some(index) = p_weights.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::NonPositiveWeight { index });
    }
    Ok(p_weights.iter().zip(surface_values).map(|(p, s)| p * s * s).sum())
}

/// Derivative estimate per sample: central differences inside each segment,
/// one-sided at segment ends, `None` for single-sample segments.
///
/// `segment_starts` lists the first index of every segment after the first
/// (for example the samples where a reference steps).
pub fn finite_difference(t: &[f64], y: &[f64], segment_starts: &[usize]) -> Vec<Option<f64>> {
    let n = t.len().min(y.len());
    let mut out = vec![None; n];
    let mut bounds: Vec<usize> = Vec::with_capacity(segment_starts.len() + 2);
    bounds.push(0);
    bounds.extend(segment_starts.iter().copied().filter(|&i| i > 0 && i < n));
    bounds.push(n);
    bounds.dedup();
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo < 2 {
            continue;
        }
        for i in lo..hi {
            let (a, b) = if i == lo {
                (i, i + 1)
            } else if i == hi - 1 {
                (i - 1, i)
            } else {
                (i - 1, i + 1)
            };
            out[i] = Some((y[b] - y[a]) / (t[b] - t[a]));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReachingReport {
    /// Samples outside the boundary layer with a derivative estimate.
    pub eligible: usize,
    /// Times where `s·ṡ > -η·|s|`.
    pub violation_times: Vec<f64>,
}

impl ReachingReport {
    pub fn violations(&self) -> usize {
        self.violation_times.len()
    }

    pub fn fraction(&self) -> f64 {
        if self.eligible == 0 {
            0.0
        } else {
            self.violation_times.len() as f64 / self.eligible as f64
        }
    }

    pub fn merge(&mut self, other: ReachingReport) {
        self.eligible += other.eligible;
        self.violation_times.extend(other.violation_times);
        self.violation_times.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    }
}

/// Checks `s·ṡ ≤ -η·|s|` on samples with `|s| ≥ layer`.
pub fn reaching_monitor(t: &[f64], s: &[f64], segment_starts: &[usize], eta: f64, layer: f64) -> Result<ReachingReport> {
    if t.len() != s.len() {
        return Err(Error::LengthMismatch { expected: t.len(), found: s.len() });
    }
    if t.len() < 2 {
        return Err(Error::TooShortTrace { len: t.len() });
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Invalid("eta > 0"));
    }
    let ds = finite_difference(t, s, segment_starts);
    let mut report = ReachingReport::default();
    for i in 0..t.len() {
        let Some(d) = ds[i] else { continue };
        if s[i].abs() < layer {
            continue;
        }
        report.eligible += 1;
        if s[i] * d > -eta * s[i].abs() + REACHING_TOL {
            report.violation_times.push(t[i]);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DescentReport {
    pub eligible: usize,
    pub decreasing: usize,
}

impl DescentReport {
    /// Fraction of eligible samples with `V̇ < 0`; 1 when nothing is eligible.
    pub fn fraction(&self) -> f64 {
        if self.eligible == 0 {
            1.0
        } else {
            self.decreasing as f64 / self.eligible as f64
        }
    }
}

/// Counts samples flagged `eligible` at which the finite-difference `V̇` is negative.
pub fn descent_report(t: &[f64], v: &[f64], eligible: &[bool], segment_starts: &[usize]) -> Result<DescentReport> {
    if t.len() != v.len() || t.len() != eligible.len() {
        return Err(Error::LengthMismatch { expected: t.len(), found: v.len().min(eligible.len()) });
    }
    if t.len() < 2 {
        return Err(Error::TooShortTrace { len: t.len() });
    }
    let dv = finite_difference(t, v, segment_starts);
    let mut r = DescentReport::default();
    for (d, &e) in dv.iter().zip(eligible) {
        if let (Some(d), true) = (d, e) {
            r.eligible += 1;
            if *d < 0.0 {
                r.decreasing += 1;
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::SurfaceSpec;

    fn scalar_model(a: f64, b: f64, k: f64) -> SubModel {
        SubModel::from_matrices(0, 0.0, Matrix::scalar(a), Matrix::scalar(b), &[SurfaceSpec::new(vec![1.0]).unwrap()], k)
            .unwrap()
    }

    #[test]
    fn scalar_gain_bound() {
        let m = scalar_model(-3.0, 2.0, 1.0);
        assert!((gain_bound(&m, 0.0).unwrap() - 1.5).abs() < 1e-14);
        let m2 = scalar_model(-3.0, 4.0, 1.0);
        assert!((gain_bound(&m2, 0.0).unwrap() - 0.75).abs() < 1e-14);
        let lo = gain_bound(&m, 1.0).unwrap();
        let hi = gain_bound(&m, 2.0).unwrap();
        assert!(hi >= lo && lo >= gain_bound(&m, 0.0).unwrap());
    }

    #[test]
    fn gain_bound_unactuated() {
        // α·B = 0 can't be built as a SubModel, so check the raw bound path
        let m = scalar_model(1.0, 1.0, 1.0);
        let mut broken = m.clone();
        broken.b = Matrix::scalar(0.0);
        assert!(matches!(gain_bound(&broken, 0.0), Err(Error::SingularCB { .. })));
    }

    #[test]
    fn lyapunov_identity_case() {
        let r = lyapunov_solve(&Matrix::identity(2).scale(-1.0)).unwrap();
        assert!(r.p.sub(&Matrix::identity(2).scale(0.5)).unwrap().max_abs() < 1e-15);
        assert!((r.min_eig - 0.5).abs() < 1e-15);
        assert!(r.holds());
    }

    #[test]
    fn lyapunov_unstable_scalar() {
        let r = lyapunov_check(&Matrix::scalar(3.0), &Matrix::scalar(1.0), &Matrix::scalar(2.0)).unwrap();
        assert!((r.p[(0, 0)] + 0.5).abs() < 1e-15);
        assert!(r.min_eig < 0.0 && !r.holds());
    }

    #[test]
    fn lyapunov_companion_hand_solution() {
        // A = [[0,1],[-2,-3]], P = [[p11,p12],[p12,p22]]:
        //   -4 p12          = -1
        //   p11 - 3p12 - 2p22 = 0
        //   2p12 - 6p22     = -1
        // → p12 = 1/4, p22 = 1/4, p11 = 5/4
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[-2.0, -3.0]]);
        let r = lyapunov_solve(&a).unwrap();
        let hand = Matrix::from_rows(&[&[1.25, 0.25], &[0.25, 0.25]]);
        assert!(r.p.sub(&hand).unwrap().max_abs() < 1e-14);
        assert!(r.min_eig > 0.0);
        assert!(r.residual < 1e-14);
    }

    #[test]
    fn lyapunov_marginal_is_singular() {
        let rot = Matrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert_eq!(lyapunov_solve(&rot), Err(Error::SingularLyapunov));
    }

    #[test]
    fn v_examples() {
        assert_eq!(nonquadratic_v(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(nonquadratic_v(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), 5.0);
        assert_eq!(nonquadratic_v(&[1.0, 0.0], &[1.0, 2.0]), Err(Error::NonPositiveWeight { index: 1 }));
    }

    #[test]
    fn reaching_linear_decay() {
        let t: Vec<f64> = (0..=90).map(|i| i as f64 * 0.01).collect();
        let s: Vec<f64> = t.iter().map(|t| 1.0 - t).collect();
        let r = reaching_monitor(&t, &s, &[], 0.5, 0.05).unwrap();
        assert!(r.eligible > 80);
        assert_eq!(r.violations(), 0);
    }

    #[test]
    fn reaching_growth_is_flagged() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).collect();
        let s: Vec<f64> = t.iter().map(|t| -(0.5 + t)).collect();
        let r = reaching_monitor(&t, &s, &[], 0.1, 0.1).unwrap();
        assert_eq!(r.eligible, 50);
        assert_eq!(r.violations(), 50);
        assert_eq!(r.fraction(), 1.0);
    }

    #[test]
    fn reaching_sliding_phase_excluded() {
        let t = [0.0, 0.1, 0.2];
        let r = reaching_monitor(&t, &[0.0; 3], &[], 1.0, 0.5).unwrap();
        assert_eq!((r.eligible, r.violations()), (0, 0));
        assert_eq!(reaching_monitor(&[0.0], &[1.0], &[], 1.0, 0.5), Err(Error::TooShortTrace { len: 1 }));
    }

    #[test]
    fn segments_isolate_jumps() {
        // s decays, jumps at index 3, decays again
        let t = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let s = [3.0, 2.0, 1.0, 6.0, 5.0, 4.0];
        let d = finite_difference(&t, &s, &[3]);
        assert!(d.iter().all(|x| *x == Some(-1.0)));
        let single = finite_difference(&t, &s, &[3, 4]);
        assert_eq!(single[3], None);
    }
}
