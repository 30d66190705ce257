//! Static SVG figures of a trace: torque, control, currents.

use std::path::{Path, PathBuf};

use plotters::prelude::*;
use smmc_core::{Sample, SimTrace};

/// Samples kept per series; denser traces are reduced to per-bucket
/// extremes so chattering stays visible.
const MAX_POINTS: usize = 4000;

#[derive(Debug, thiserror::Error)]
#[error("plot {path}: {message}")]
pub struct PlotError {
    pub path: PathBuf,
    pub message: String,
}

struct Series<'a> {
    label: &'a str,
    value: fn(&Sample) -> f64,
    color: RGBColor,
}

fn decimate(t: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    if t.len() <= MAX_POINTS {
        return t.iter().copied().zip(y.iter().copied()).collect();
    }
    let per = t.len().div_ceil(MAX_POINTS / 2);
    let mut out = Vec::with_capacity(MAX_POINTS + 2);
    for start in (0..t.len()).step_by(per) {
        let end = (start + per).min(t.len());
        let (mut lo, mut hi) = (start, start);
        for i in start..end {
            if y[i] < y[lo] {
                lo = i;
            }
            if y[i] > y[hi] {
                hi = i;
            }
        }
        let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        out.push((t[a], y[a]));
        if b != a {
            out.push((t[b], y[b]));
        }
    }
    out
}

fn figure(trace: &SimTrace, path: &Path, title: &str, y_label: &str, series: &[Series]) -> Result<(), PlotError> {
    let err = |e: &dyn std::fmt::Display| PlotError { path: path.to_path_buf(), message: e.to_string() };
    let t = trace.times();
    let data: Vec<Vec<(f64, f64)>> = series.iter().map(|s| decimate(&t, &trace.column(s.value))).collect();
    let (t0, t1) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
    let (mut lo, mut hi) = data.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    if !(lo.is_finite() && hi.is_finite()) {
        (lo, hi) = (-1.0, 1.0);
    }
    let pad = 0.05 * (hi - lo).max(1e-9);

    let root = SVGBackend::new(path, (900, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(t0..t1.max(t0 + 1e-9), (lo - pad)..(hi + pad))
        .map_err(|e| err(&e))?;
    chart.configure_mesh().x_desc("t (s)").y_desc(y_label).draw().map_err(|e| err(&e))?;
    for (s, pts) in series.iter().zip(data) {
        let color = s.color;
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(1)))
            .map_err(|e| err(&e))?
            .label(s.label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

/// Writes `<stem>_torque.svg`, `<stem>_control.svg`, `<stem>_currents.svg`
/// into `dir` and returns their paths.
pub fn write_plots(trace: &SimTrace, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, PlotError> {
    let figs: [(&str, &str, &str, Vec<Series>); 3] = [
        ("torque", "Electromagnetic torque", "N·m", vec![
            Series { label: "te", value: |s| s.te, color: BLUE },
            Series { label: "te_ref", value: |s| s.te_ref, color: RED },
        ]),
        ("control", "Control voltages", "V", vec![
            Series { label: "u_d", value: |s| s.u[0], color: BLUE },
            Series { label: "u_q", value: |s| s.u[1], color: RED },
        ]),
        ("currents", "Stator currents", "A", vec![
            Series { label: "i_ds", value: |s| s.state.i_ds, color: BLUE },
            Series { label: "i_qs", value: |s| s.state.i_qs, color: RED },
        ]),
    ];
    let mut paths = Vec::new();
    for (name, title, unit, series) in figs {
        let path = dir.join(format!("{stem}_{name}.svg"));
        figure(trace, &path, &format!("{title} ({stem})"), unit, &series)?;
        paths.push(path);
    }
    Ok(paths)
}
