//! Trace CSV: one row per recorded sample, 17 significant digits so every
//! value reads back bit for bit.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use smmc_core::{PlantState, Sample, SimTrace};

/// Columns before the per-model validities.
pub const FIXED_COLUMNS: [&str; 14] = [
    "t", "phi_dr", "phi_qr", "i_ds", "i_qs", "omega", "te", "te_ref", "u_d", "u_q", "s_d", "s_q", "s_fused", "v_lyap",
];

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("bad trace file: {0}")]
    Format(String),
}

pub fn header(n_models: usize) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|c| c.to_string())
        .chain((1..=n_models).map(|i| format!("v_{i}")))
        .collect()
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trace<W: Write>(trace: &SimTrace, out: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(trace.n_models()))?;
    for s in &trace.samples {
        let x = &s.state;
        let fixed = [
            s.t, x.phi_dr, x.phi_qr, x.i_ds, x.i_qs, x.omega, s.te, s.te_ref, s.u[0], s.u[1], s.s[0], s.s[1], s.s_fused,
            s.v_lyap,
        ];
        w.write_record(fixed.iter().chain(&s.validities).map(|&v| fmt(v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(trace: &SimTrace, path: &Path) -> Result<(), CsvError> {
    write_trace(trace, BufWriter::new(File::create(path)?))
}

pub fn read_trace<R: io::Read>(input: R) -> Result<SimTrace, CsvError> {
    let mut r = csv::Reader::from_reader(input);
    let head = r.headers()?.clone();
    if head.len() < FIXED_COLUMNS.len() || head.iter().zip(FIXED_COLUMNS).any(|(a, b)| a != b) {
        return Err(CsvError::Format("unexpected header".into()));
    }
    let n_models = head.len() - FIXED_COLUMNS.len();
    let mut samples = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CsvError::Format(format!("row {}: {e}", row + 2)))?;
        samples.push(Sample {
            t: v[0],
            state: PlantState { phi_dr: v[1], phi_qr: v[2], i_ds: v[3], i_qs: v[4], omega: v[5] },
            te: v[6],
            te_ref: v[7],
            u: [v[8], v[9]],
            s: [v[10], v[11]],
            s_fused: v[12],
            v_lyap: v[13],
            validities: v[14..14 + n_models].to_vec(),
        });
    }
    Ok(SimTrace { samples, partial_controls: Vec::new() })
}

pub fn read_trace_csv(path: &Path) -> Result<SimTrace, CsvError> {
    read_trace(File::open(path)?)
}
