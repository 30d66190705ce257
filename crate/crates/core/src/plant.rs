//! Doubly-fed induction generator in the rotating d-q frame.
//!
//! Electromagnetic state `x = (φ_dr, φ_qr, i_ds, i_qs)` split into the flux
//! pair `x_f` and the current pair `x_c`, plus the mechanical speed `ω`:
//!
//! ```text
//! ẋ_f = a·x_c + A_f(ω)·x_f          A_f(ω) = [[-b, -pω], [pω, -b]]
//! ẋ_c = -γ1·x_c + B_c(ω)·x_f + γ4·u  B_c(ω) = [[-γ2, γ3ω], [-γ3ω, -γ2]]
//! J·ω̇ = T_e - C_l - f_v·ω            T_e = p·(Lm/Lr)·(i_qs·φ_dr - i_ds·φ_qr)
//! ```
//!
//! The speed coupling in both blocks is a scaled rotation, so the model
//! commutes with rotations of the d-q plane. [`SignConvention::Literal`]
//! switches to the sign pattern of the componentwise equations as they are
//! usually printed (`-pω·φ_dr` in the q-flux row, `-γ4·u` on the input),
//! which breaks that symmetry; it exists for side-by-side comparison only.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineParams {
    /// Stator resistance (Ω).
    pub rs: f64,
    /// Rotor resistance (Ω).
    pub rr: f64,
    /// Stator inductance (H).
    pub ls: f64,
    /// Rotor inductance (H).
    pub lr: f64,
    /// Mutual inductance (H).
    pub lm: f64,
    /// Rotor inertia (kg·m²).
    pub j: f64,
    /// Pole pairs.
    pub p: u32,
    /// Viscous friction (N·m·s/rad).
    pub fv: f64,
}

impl Default for MachineParams {
    /// A small generic DFIG. These are repository defaults, not measured
    /// data for any particular machine.
    fn default() -> Self {
        Self { rs: 1.2, rr: 1.8, ls: 0.155, lr: 0.156, lm: 0.15, j: 0.07, p: 2, fv: 0.001 }
    }
}

impl MachineParams {
    /// Checks positivity of every field and `Lm² < Ls·Lr`.
    ///
    /// `Lm = 0` is admitted: it is the decoupled limit where the flux
    /// subsystem ignores the currents.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rs", self.rs),
            ("rr", self.rr),
            ("ls", self.ls),
            ("lr", self.lr),
            ("j", self.j),
            ("fv", self.fv),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(name));
            }
        }
        if !(self.lm.is_finite() && self.lm >= 0.0) {
            return Err(Error::InvalidParameter("lm"));
        }
        if self.p == 0 {
            return Err(Error::InvalidParameter("p"));
        }
        derive_coefficients(self).map(|_| ())
    }
}

/// Coefficients of the electromagnetic equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCoeffs {
    pub sigma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    pub a: f64,
    pub b: f64,
}

pub fn derive_coefficients(params: &MachineParams) -> Result<DerivedCoeffs> {
    let MachineParams { rs, rr, ls, lr, lm, p, .. } = *params;
    let sigma = 1.0 - lm * lm / (ls * lr);
    if !(sigma > 0.0 && sigma <= 1.0) || !sigma.is_finite() {
        return Err(Error::SingularLeakage { sigma });
    }
    let sls = sigma * ls;
    Ok(DerivedCoeffs {
        sigma,
        gamma1: rs / sls + rr * lm * lm / (sls * lr * lr),
        gamma2: rr * lm / (sls * lr * lr),
        gamma3: lm / (sls * lr) * f64::from(p),
        gamma4: 1.0 / sls,
        a: rr / lr * lm,
        b: rr / lr,
    })
}

/// Physical state of the generator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub phi_dr: f64,
    pub phi_qr: f64,
    pub i_ds: f64,
    pub i_qs: f64,
    pub omega: f64,
}

impl PlantState {
    /// The electromagnetic part `(φ_dr, φ_qr, i_ds, i_qs)`.
    pub fn em(&self) -> [f64; 4] {
        [self.phi_dr, self.phi_qr, self.i_ds, self.i_qs]
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.phi_dr, self.phi_qr, self.i_ds, self.i_qs, self.omega]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self { phi_dr: v[0], phi_qr: v[1], i_ds: v[2], i_qs: v[3], omega: v[4] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// `self + k·other`, componentwise.
    pub fn axpy(&self, k: f64, other: &PlantState) -> PlantState {
        let (a, b) = (self.to_array(), other.to_array());
        PlantState::from_array(core::array::from_fn(|i| a[i] + k * b[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantInput {
    pub v_ds: f64,
    pub v_qs: f64,
    /// Load torque (N·m).
    pub c_l: f64,
}

/// Desired state: field-oriented steady state for a torque/flux pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferenceState(pub PlantState);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignConvention {
    /// Rotation-symmetric matrix form (the model used everywhere by default).
    #[default]
    Canonical,
    /// Componentwise sign pattern with `-pω·φ_dr` and `-γ4·u`.
    Literal,
}

/// Machine parameters bundled with their derived coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub params: MachineParams,
    pub coeffs: DerivedCoeffs,
    pub convention: SignConvention,
}

impl Plant {
    pub fn new(params: MachineParams, convention: SignConvention) -> Result<Self> {
        params.validate()?;
        let coeffs = derive_coefficients(&params)?;
        Ok(Self { params, coeffs, convention })
    }

    pub fn canonical(params: MachineParams) -> Result<Self> {
        Self::new(params, SignConvention::Canonical)
    }

    /// Electromagnetic `(A, B)` with the speed frozen at `omega`: 4×4 and 4×2.
    pub fn em_matrices(&self, omega: f64) -> (Matrix, Matrix) {
        let DerivedCoeffs { gamma1, gamma2, gamma3, gamma4, a, b, .. } = self.coeffs;
        let pw = f64::from(self.params.p) * omega;
        let g3w = gamma3 * omega;
        let (q_flux_sign, input_sign) = match self.convention {
            SignConvention::Canonical => (1.0, 1.0),
            SignConvention::Literal => (-1.0, -1.0),
        };
        let am = Matrix::from_rows(&[
            &[-b, -pw, a, 0.0],
            &[q_flux_sign * pw, -b, 0.0, a],
            &[-gamma2, g3w, -gamma1, 0.0],
            &[-g3w, -gamma2, 0.0, -gamma1],
        ]);
        let g = input_sign * gamma4;
        let bm = Matrix::from_rows(&[&[0.0, 0.0], &[0.0, 0.0], &[g, 0.0], &[0.0, g]]);
        (am, bm)
    }
}

pub fn electromagnetic_torque(state: &PlantState, params: &MachineParams) -> f64 {
    f64::from(params.p) * (params.lm / params.lr) * (state.i_qs * state.phi_dr - state.i_ds * state.phi_qr)
}

/// Time derivative of the full state under the given input.
pub fn plant_derivative(state: &PlantState, input: &PlantInput, plant: &Plant) -> Result<PlantState> {
    let DerivedCoeffs { gamma1, gamma2, gamma3, gamma4, a, b, .. } = plant.coeffs;
    let MachineParams { j, p, fv, .. } = plant.params;
    let p = f64::from(p);
    let PlantState { phi_dr, phi_qr, i_ds, i_qs, omega } = *state;
    let (q_flux_sign, input_sign) = match plant.convention {
        SignConvention::Canonical => (1.0, 1.0),
        SignConvention::Literal => (-1.0, -1.0),
    };

    let d = PlantState {
        phi_dr: -b * phi_dr - p * omega * phi_qr + a * i_ds,
        phi_qr: q_flux_sign * p * omega * phi_dr - b * phi_qr + a * i_qs,
        i_ds: -gamma1 * i_ds - gamma2 * phi_dr + gamma3 * omega * phi_qr + input_sign * gamma4 * input.v_ds,
        i_qs: -gamma1 * i_qs - gamma3 * omega * phi_dr - gamma2 * phi_qr + input_sign * gamma4 * input.v_qs,
        omega: (electromagnetic_torque(state, &plant.params) - input.c_l - fv * omega) / j,
    };
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFiniteState)
    }
}

/// Field-oriented desired state for a torque and rotor-flux reference.
///
/// `omega` is carried through unchanged; the controllers regulate torque and
/// flux, not speed.
pub fn reference_state(torque_ref: f64, flux_ref: f64, omega: f64, params: &MachineParams) -> Result<ReferenceState> {
    if flux_ref == 0.0 {
        return Err(Error::ZeroFlux);
    }
    if !(flux_ref.is_finite() && flux_ref > 0.0) {
        return Err(Error::Invalid("flux_ref > 0"));
    }
    if params.lm <= 0.0 {
        return Err(Error::InvalidParameter("lm"));
    }
    Ok(ReferenceState(PlantState {
        phi_dr: flux_ref,
        phi_qr: 0.0,
        i_ds: flux_ref / params.lm,
        i_qs: torque_ref * params.lr / (f64::from(params.p) * params.lm * flux_ref),
        omega,
    }))
}
