//! Run CSV: one row per attempted step.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evolution::StepRecord;

pub const RUN_COLUMNS: [&str; 20] = [
    "step",
    "t",
    "dt",
    "E_total",
    "E_willmore",
    "E_GL",
    "mean_phi",
    "mean_S",
    "mean_mu",
    "norm_phi_L2",
    "norm_lap_phi_L2",
    "norm_grad_mu_L2",
    "norm_v_L2",
    "flow_iters",
    "flow_residual",
    "accepted",
    "diss_mu",
    "diss_v",
    "flow_mode",
    "alpha",
];

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn record_fields(r: &StepRecord) -> [String; 20] {
    [
        r.step.to_string(),
        fmt_f64(r.t),
        fmt_f64(r.dt),
        fmt_f64(r.e_total),
        fmt_f64(r.e_willmore),
        fmt_f64(r.e_gl),
        fmt_f64(r.mean_phi),
        fmt_f64(r.mean_s),
        fmt_f64(r.mean_mu),
        fmt_f64(r.norm_phi),
        fmt_f64(r.norm_lap_phi),
        fmt_f64(r.norm_grad_mu),
        fmt_f64(r.norm_v),
        r.flow_iters.to_string(),
        fmt_f64(r.flow_residual),
        (r.accepted as u8).to_string(),
        fmt_f64(r.diss_mu),
        fmt_f64(r.diss_v),
        r.flow_mode.name().to_string(),
        fmt_f64(r.alpha),
    ]
}

/// Streaming writer of run rows.
pub struct RunCsv<W: Write> {
    inner: csv::Writer<W>,
    path: std::path::PathBuf,
}

impl RunCsv<File> {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        RunCsv::new(file, path)
    }
}

impl<W: Write> RunCsv<W> {
    pub fn new(sink: W, path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(sink);
        inner
            .write_record(RUN_COLUMNS)
            .map_err(|e| Error::format(path, e.to_string()))?;
        Ok(RunCsv {
            inner,
            path: path.to_path_buf(),
        })
    }

    pub fn write(&mut self, r: &StepRecord) -> Result<()> {
        self.inner
            .write_record(record_fields(r))
            .map_err(|e| Error::format(&self.path, e.to_string()))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner
            .flush()
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// Reads a run CSV back as a header and string rows.
pub fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = rdr
        .records()
        .map(|r| {
            r.map(|r| r.iter().map(str::to_string).collect())
                .map_err(|e| Error::format(path, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_roundtrip_through_text() {
        for x in [0.1, 1e-300, -2.5e17, 1.0 / 3.0, 0.0, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
