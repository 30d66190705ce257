//! Single runs, controller comparison and the JSON report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smmc_core::stability::{certify, ModelCertificate};
use smmc_core::{compute_metrics, run_scenario, Metrics, Plant, SimTrace};

use crate::config::{ConfigError, Mode, RunConfig, SwitchName};
use crate::plot::{write_plots, PlotError};
use crate::trace_csv::{write_trace_csv, CsvError};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{controller}: {source}")]
    Run { controller: String, source: smmc_core::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Effective controller parameters of one run, mode defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSettings {
    pub mode: Mode,
    pub k: f64,
    pub lambda: f64,
    pub omega_layer: f64,
    pub epsilon: f64,
    pub m_bound: f64,
    pub eta: f64,
    pub switch_fn: SwitchName,
    pub equivalent_control: bool,
    pub super_twisting_lambda2: f64,
    pub super_twisting_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub chattering_tv: [f64; 2],
    pub chattering_tv_total: f64,
    pub switch_count: [usize; 2],
    pub sse: f64,
    pub settling_time: f64,
    pub ise: f64,
}

impl From<&Metrics> for MetricsReport {
    fn from(m: &Metrics) -> Self {
        Self {
            chattering_tv: m.chattering_tv,
            chattering_tv_total: m.total_tv(),
            switch_count: m.switch_count,
            sse: m.sse,
            settling_time: m.settling_time,
            ise: m.ise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCertificateReport {
    pub index: usize,
    pub omega_op: f64,
    pub k: f64,
    pub k_min: f64,
    pub gain_ok: bool,
    pub reduced_min_eig: f64,
    pub reduced_residual: f64,
    pub reduced_p: Vec<Vec<f64>>,
    pub full_min_eig: f64,
    pub full_residual: f64,
    pub ok: bool,
}

impl From<&ModelCertificate> for ModelCertificateReport {
    fn from(c: &ModelCertificate) -> Self {
        let p = &c.reduced.p;
        Self {
            index: c.index,
            omega_op: c.omega_op,
            k: c.k,
            k_min: c.k_min,
            gain_ok: c.gain_ok,
            reduced_min_eig: c.reduced.min_eig,
            reduced_residual: c.reduced.residual,
            reduced_p: (0..p.rows()).map(|i| p.row(i).to_vec()).collect(),
            full_min_eig: c.full.min_eig,
            full_residual: c.full.residual,
            ok: c.ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub models: Vec<ModelCertificateReport>,
    /// Present once a trace has been monitored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reaching_violation_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reaching_eligible: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub descent_fraction: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub trace_csv: PathBuf,
    pub plots: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Unique within a report: the mode name, suffixed when repeated.
    pub label: String,
    pub settings: ControllerSettings,
    pub metrics: MetricsReport,
    pub certificate: CertificateReport,
    pub artifacts: Artifacts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    /// Every compared pair was the same controller with equal metrics.
    Tie,
    /// Fewer than two runs the ordering speaks about.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    /// The claimed ordering, best first.
    pub expected: String,
    pub required_ratio: f64,
    pub status: VerdictStatus,
    pub pairs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: RunConfig,
    pub runs: Vec<RunReport>,
    pub verdicts: Vec<Verdict>,
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.status != VerdictStatus::Fail)
    }
}

fn settings(cfg: &RunConfig, mode: Mode) -> ControllerSettings {
    let c = cfg.controller.for_mode(mode);
    let st = c.super_twisting_gains();
    ControllerSettings {
        mode,
        k: c.k,
        lambda: c.lambda,
        omega_layer: c.omega_layer,
        epsilon: c.epsilon,
        m_bound: c.m_bound,
        eta: c.eta,
        switch_fn: SwitchName::from(c.switch_fn),
        equivalent_control: c.equivalent_control,
        super_twisting_lambda2: st.lambda2,
        super_twisting_w: st.w,
    }
}

/// Certificates of the bank a mode actually uses; no trace needed.
pub fn certificate(cfg: &RunConfig, mode: Mode) -> Result<CertificateReport, ReportError> {
    let wrap = |source| ReportError::Run { controller: mode.name().into(), source };
    let sc = cfg.scenario(mode);
    let plant = Plant::new(sc.params, sc.convention).map_err(wrap)?;
    let bank = sc.build_bank(&plant).map_err(wrap)?;
    let cert = certify(&bank, &sc.controller).map_err(wrap)?;
    Ok(CertificateReport {
        models: cert.models.iter().map(ModelCertificateReport::from).collect(),
        reaching_violation_fraction: None,
        reaching_eligible: None,
        descent_fraction: None,
        ok: cert.ok(),
    })
}

/// Simulates one controller and computes its metrics and certificate.
pub fn simulate(cfg: &RunConfig, mode: Mode) -> Result<(SimTrace, Metrics, CertificateReport), ReportError> {
    let wrap = |source| ReportError::Run { controller: mode.name().into(), source };
    let sc = cfg.scenario(mode);
    let trace = run_scenario(&sc).map_err(wrap)?;
    let metrics = compute_metrics(&trace).map_err(wrap)?;
    let mut cert = certificate(cfg, mode)?;
    let layer = sc.controller.omega_layer;
    let reaching = trace.reaching_report(sc.controller.eta, layer).map_err(wrap)?;
    cert.reaching_violation_fraction = Some(reaching.fraction());
    cert.reaching_eligible = Some(reaching.eligible);
    cert.descent_fraction = Some(trace.descent_report(layer).map_err(wrap)?.fraction());
    Ok((trace, metrics, cert))
}

fn emit(cfg: &RunConfig, mode: Mode, label: &str, out: &Path) -> Result<RunReport, ReportError> {
    let (trace, metrics, certificate) = simulate(cfg, mode)?;
    let trace_csv = out.join(format!("{label}_trace.csv"));
    write_trace_csv(&trace, &trace_csv)?;
    let plots = write_plots(&trace, out, label)?;
    Ok(RunReport {
        label: label.to_string(),
        settings: settings(cfg, mode),
        metrics: (&metrics).into(),
        certificate,
        artifacts: Artifacts { trace_csv, plots },
    })
}

/// Runs the configured controller and writes its trace, plots and
/// `<mode>_report.json` into `out`.
pub fn run_single(cfg: &RunConfig, out: &Path) -> Result<RunReport, ReportError> {
    fs::create_dir_all(out)?;
    let mode = cfg.controller.mode;
    let run = emit(cfg, mode, mode.name(), out)?;
    #[derive(Serialize)]
    struct SingleReport<'a> {
        config: &'a RunConfig,
        run: &'a RunReport,
    }
    let json = serde_json::to_string_pretty(&SingleReport { config: cfg, run: &run })?;
    fs::write(out.join(format!("{}_report.json", mode.name())), json)?;
    Ok(run)
}

fn labels(modes: &[Mode]) -> Vec<String> {
    modes
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let nth = modes[..i].iter().filter(|x| *x == m).count();
            if nth == 0 {
                m.name().to_string()
            } else {
                format!("{}_{}", m.name(), nth + 1)
            }
        })
        .collect()
}

/// Runs every controller of `modes` on the same scenario, concurrently, and
/// writes `report.json` next to the per-run artifacts.
pub fn compare_controllers(cfg: &RunConfig, modes: &[Mode], out: &Path) -> Result<ComparisonReport, ReportError> {
    if modes.len() < 2 {
        return Err(ConfigError::Validation("comparison needs at least 2 controllers".into()).into());
    }
    let mut cfg = cfg.clone();
    cfg.compare.controllers = modes.to_vec();
    cfg.validate()?;
    fs::create_dir_all(out)?;

    let labels = labels(modes);
    let runs: Vec<Result<RunReport, ReportError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = modes
            .iter()
            .zip(&labels)
            .map(|(&mode, label)| {
                let cfg = &cfg;
                scope.spawn(move || emit(cfg, mode, label, out))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let verdicts = vec![
        ordering_verdict(
            "chattering",
            &runs,
            &[Mode::Smmc, Mode::Smc2, Mode::Smc1],
            cfg.compare.chattering_ratio,
            |m| m.chattering_tv_total,
        ),
        ordering_verdict("sse", &runs, &[Mode::Smmc, Mode::Smc1], 1.0, |m| m.sse),
    ];
    let report = ComparisonReport { config: cfg, runs, verdicts };
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// Checks `metric` increases along `order` (best first) by at least
/// `ratio` between neighbouring controllers. Runs of modes outside `order`
/// are ignored; repeated runs of one mode must agree exactly.
pub fn ordering_verdict(
    name: &str,
    runs: &[RunReport],
    order: &[Mode],
    ratio: f64,
    metric: impl Fn(&MetricsReport) -> f64,
) -> Verdict {
    let rank = |m: Mode| order.iter().position(|&o| o == m);
    let mut ranked: Vec<&RunReport> = runs.iter().filter(|r| rank(r.settings.mode).is_some()).collect();
    ranked.sort_by_key(|r| rank(r.settings.mode));

    let mut pairs = Vec::new();
    let (mut fail, mut all_tie) = (false, true);
    for w in ranked.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ma, mb) = (metric(&a.metrics), metric(&b.metrics));
        if a.settings.mode == b.settings.mode {
            let same = a.metrics == b.metrics;
            fail |= !same;
            pairs.push(format!("{} = {} ({ma:e} vs {mb:e}): {}", a.label, b.label, if same { "tie" } else { "fail" }));
        } else {
            all_tie = false;
            let ok = ma < mb && mb >= ratio * ma;
            fail |= !ok;
            pairs.push(format!(
                "{} < {} by {ratio}x ({ma:e} vs {mb:e}, ratio {:.3}): {}",
                a.label,
                b.label,
                mb / ma,
                if ok { "pass" } else { "fail" }
            ));
        }
    }
    let status = if ranked.len() < 2 {
        VerdictStatus::NotApplicable
    } else if fail {
        VerdictStatus::Fail
    } else if all_tie {
        VerdictStatus::Tie
    } else {
        VerdictStatus::Pass
    };
    Verdict {
        name: name.to_string(),
        expected: order.iter().map(|m| m.name()).collect::<Vec<_>>().join(" < "),
        required_ratio: ratio,
        status,
        pairs,
    }
}
