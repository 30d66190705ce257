//! Chattering and tracking metrics over a recorded trace.

use crate::error::{Error, Result};
use crate::sim::SimTrace;

/// Fraction of the horizon, at its end, averaged for the steady-state error.
pub const STEADY_WINDOW: f64 = 0.2;
/// Settling band, relative to the largest reference magnitude.
pub const SETTLING_BAND: f64 = 0.02;
/// Control increments smaller than this (relative to `max |u|`, floored at 1)
/// are treated as no motion when counting direction changes.
pub const SWITCH_DEADBAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    /// `Σ |Δu|` per channel.
    pub chattering_tv: [f64; 2],
    /// Direction changes of `u` per channel, counting the first departure
    /// from rest as one.
    pub switch_count: [usize; 2],
    /// Mean `|T_e - T_e_ref|` over the final 20 % of the horizon.
    pub sse: f64,
    /// First time after which `|T_e - T_e_ref|` stays within the 2 % band;
    /// the final time if the band is never entered for good.
    pub settling_time: f64,
    /// `∫ (T_e - T_e_ref)² dt`, trapezoidal.
    pub ise: f64,
}

impl Metrics {
    pub fn total_tv(&self) -> f64 {
        self.chattering_tv[0] + self.chattering_tv[1]
    }

    pub fn total_switches(&self) -> usize {
        self.switch_count[0] + self.switch_count[1]
    }
}

/// Total variation of `u` over samples.
pub fn total_variation(u: &[f64]) -> f64 {
    u.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Number of direction changes of a sampled signal, with the initial
/// direction taken as "at rest".
pub fn direction_changes(u: &[f64]) -> usize {
    let scale = u.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = SWITCH_DEADBAND * scale;
    let mut dir = 0i8;
    let mut count = 0;
    for w in u.windows(2) {
        let d = w[1] - w[0];
        if d.abs() <= tol {
            continue;
        }
        let nd = if d > 0.0 { 1 } else { -1 };
        if nd != dir {
            count += 1;
            dir = nd;
        }
    }
    count
}

pub fn compute_metrics(trace: &SimTrace) -> Result<Metrics> {
    let samples = &trace.samples;
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut m = Metrics::default();
    for ch in 0..2 {
        let u = trace.column(|s| s.u[ch]);
        m.chattering_tv[ch] = total_variation(&u);
        m.switch_count[ch] = direction_changes(&u);
    }

    let t0 = samples[0].t;
    let t_end = samples[samples.len() - 1].t;
    let err = |i: usize| samples[i].te - samples[i].te_ref;

    let window_start = t_end - STEADY_WINDOW * (t_end - t0);
    let (sum, count) = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.t >= window_start)
        .fold((0.0, 0usize), |(a, c), (i, _)| (a + err(i).abs(), c + 1));
    m.sse = sum / count as f64;

    let band = SETTLING_BAND * samples.iter().fold(0.0f64, |a, s| a.max(s.te_ref.abs()));
    m.settling_time = match (0..samples.len()).rev().find(|&i| err(i).abs() > band) {
        None => t0,
        Some(i) if i + 1 < samples.len() => samples[i + 1].t,
        Some(_) => t_end,
    };

    m.ise = samples
        .windows(2)
        .enumerate()
        .map(|(i, w)| 0.5 * (err(i) * err(i) + err(i + 1) * err(i + 1)) * (w[1].t - w[0].t))
        .sum();
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::PlantState;
    use crate::sim::Sample;
    use alloc::vec;
    use alloc::vec::Vec;

    fn trace(u: &[f64], te: &[f64], te_ref: &[f64]) -> SimTrace {
        let samples = u
            .iter()
            .zip(te)
            .zip(te_ref)
            .enumerate()
            .map(|(i, ((u, te), r))| Sample {
                t: i as f64 * 0.1,
                state: PlantState::default(),
                te: *te,
                te_ref: *r,
                u: [*u, 0.0],
                s: [0.0; 2],
                s_fused: 0.0,
                v_lyap: 0.0,
                validities: vec![1.0],
            })
            .collect();
        SimTrace { samples, partial_controls: Vec::new() }
    }

    #[test]
    fn constant_control_has_no_chattering() {
        let m = compute_metrics(&trace(&[2.0; 5], &[1.0; 5], &[1.0; 5])).unwrap();
        assert_eq!(m.chattering_tv, [0.0, 0.0]);
        assert_eq!(m.switch_count, [0, 0]);
        assert_eq!(m.sse, 0.0);
        assert_eq!(m.settling_time, 0.0);
        assert_eq!(m.ise, 0.0);
    }

    #[test]
    fn square_wave() {
        let u: Vec<f64> = (0..11).map(|i| if i % 2 == 0 { -3.0 } else { 3.0 }).collect();
        let m = compute_metrics(&trace(&u, &[0.0; 11], &[0.0; 11])).unwrap();
        assert_eq!(m.chattering_tv[0], 60.0);
        assert_eq!(m.switch_count[0], 10);
    }

    #[test]
    fn settling_and_sse() {
        // reference 10, error 5 for the first half then 0.1
        let te: Vec<f64> = (0..10).map(|i| if i < 5 { 5.0 } else { 9.9 }).collect();
        let m = compute_metrics(&trace(&[0.0; 10], &te, &[10.0; 10])).unwrap();
        assert!((m.settling_time - 0.5).abs() < 1e-12);
        assert!((m.sse - 0.1).abs() < 1e-12);
        let never = compute_metrics(&trace(&[0.0; 4], &[0.0; 4], &[1.0; 4])).unwrap();
        assert!((never.settling_time - 0.3).abs() < 1e-12);
    }

    #[test]
    fn ise_trapezoid() {
        let m = compute_metrics(&trace(&[0.0; 3], &[1.0, 1.0, 1.0], &[0.0; 3])).unwrap();
        assert!((m.ise - 0.2).abs() < 1e-12);
    }

    #[test]
    fn empty_trace() {
        assert_eq!(compute_metrics(&SimTrace::default()), Err(Error::EmptyTrace));
    }
}
