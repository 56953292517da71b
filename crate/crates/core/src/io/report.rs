//! Experiment reports.
//!
//! A report is plain text made of `key: value` header lines followed by
//! delimited blocks:
//!
//! ```text
//! experiment: darcy_limit
//! @begin environment
//! seed: 42
//! @end
//! @begin parameters
//! <config file text>
//! @end
//! @begin scalars
//! K2_estimate: 1.5e0
//! @end
//! @begin verdicts
//! name,pass,measured,threshold,relation
//! ...
//! @end
//! @begin series <name>
//! <csv with header>
//! @end
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::csv::fmt_f64;

/// How a measured value is compared with its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `measured < threshold`.
    Below,
    /// `measured ≤ threshold`.
    AtMost,
    /// `measured ≥ threshold`.
    AtLeast,
    /// `measured > threshold`.
    Above,
    /// Boolean property; measured is 1 for true.
    Holds,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Below => "<",
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
            Relation::Holds => "holds",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "<" => Relation::Below,
            "<=" => Relation::AtMost,
            ">=" => Relation::AtLeast,
            ">" => Relation::Above,
            "holds" => Relation::Holds,
            _ => return None,
        })
    }

    pub fn check(self, measured: f64, threshold: f64) -> bool {
        match self {
            Relation::Below => measured < threshold,
            Relation::AtMost => measured <= threshold,
            Relation::AtLeast => measured >= threshold,
            Relation::Above => measured > threshold,
            Relation::Holds => measured == 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    pub relation: Relation,
}

impl Verdict {
    pub fn new(name: impl Into<String>, measured: f64, relation: Relation, threshold: f64) -> Self {
        Verdict {
            name: name.into(),
            pass: relation.check(measured, threshold),
            measured,
            threshold,
            relation,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Verdict::new(name, if ok { 1.0 } else { 0.0 }, Relation::Holds, 1.0)
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}: measured {} {} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            fmt_f64(self.measured),
            self.relation.symbol(),
            fmt_f64(self.threshold)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Series {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ExperimentReport {
    pub experiment: String,
    pub environment: Vec<(String, String)>,
    /// Configuration text that re-parses to the run configuration.
    pub parameters: String,
    pub scalars: Vec<(String, f64)>,
    pub verdicts: Vec<Verdict>,
    pub series: Vec<Series>,
}

impl ExperimentReport {
    pub fn new(experiment: &str) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            ..Default::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn scalar(&self, key: &str) -> Option<f64> {
        self.scalars.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "experiment: {}", self.experiment).unwrap();
        out.push_str("@begin environment\n");
        for (k, v) in &self.environment {
            writeln!(out, "{k}: {v}").unwrap();
        }
        out.push_str("@end\n@begin parameters\n");
        out.push_str(&self.parameters);
        if !self.parameters.is_empty() && !self.parameters.ends_with('\n') {
            out.push('\n');
        }
        out.push_str("@end\n@begin scalars\n");
        for (k, v) in &self.scalars {
            writeln!(out, "{k}: {}", fmt_f64(*v)).unwrap();
        }
        out.push_str("@end\n@begin verdicts\nname,pass,measured,threshold,relation\n");
        for v in &self.verdicts {
            writeln!(
                out,
                "{},{},{},{},{}",
                v.name,
                v.pass as u8,
                fmt_f64(v.measured),
                fmt_f64(v.threshold),
                v.relation.symbol()
            )
            .unwrap();
        }
        out.push_str("@end\n");
        for s in &self.series {
            writeln!(out, "@begin series {}", s.name).unwrap();
            out.push_str(&s.columns.join(","));
            out.push('\n');
            for r in &s.rows {
                out.push_str(&r.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","));
                out.push('\n');
            }
            out.push_str("@end\n");
        }
        out
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let bad = |msg: String| Error::format(path, msg);
        let mut lines = text.lines();
        let first = lines.next().ok_or_else(|| bad("empty report".into()))?;
        let experiment = first
            .strip_prefix("experiment: ")
            .ok_or_else(|| bad("first line must name the experiment".into()))?
            .to_string();
        let mut report = ExperimentReport::new(&experiment);
        while let Some(line) = lines.next() {
            let header = line
                .strip_prefix("@begin ")
                .ok_or_else(|| bad(format!("expected a block, found '{line}'")))?;
            let mut body = Vec::new();
            loop {
                let l = lines
                    .next()
                    .ok_or_else(|| bad(format!("unterminated block '{header}'")))?;
                if l == "@end" {
                    break;
                }
                body.push(l);
            }
            let kv = |l: &str| -> Result<(String, String)> {
                let (k, v) = l
                    .split_once(": ")
                    .ok_or_else(|| bad(format!("expected 'key: value', found '{l}'")))?;
                Ok((k.to_string(), v.to_string()))
            };
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("'{s}' is not a number")))
            };
            match header {
                "environment" => {
                    report.environment = body.iter().map(|l| kv(l)).collect::<Result<_>>()?;
                }
                "parameters" => {
                    report.parameters = body.iter().map(|l| format!("{l}\n")).collect();
                }
                "scalars" => {
                    for l in body {
                        let (k, v) = kv(l)?;
                        report.scalars.push((k, num(&v)?));
                    }
                }
                "verdicts" => {
                    for l in body.iter().skip(1) {
                        let f: Vec<&str> = l.split(',').collect();
                        if f.len() != 5 {
                            return Err(bad(format!("bad verdict row '{l}'")));
                        }
                        report.verdicts.push(Verdict {
                            name: f[0].to_string(),
                            pass: f[1] == "1",
                            measured: num(f[2])?,
                            threshold: num(f[3])?,
                            relation: Relation::parse(f[4])
                                .ok_or_else(|| bad(format!("unknown relation '{}'", f[4])))?,
                        });
                    }
                }
                h => {
                    let name = h
                        .strip_prefix("series ")
                        .ok_or_else(|| bad(format!("unknown block '{h}'")))?;
                    let columns: Vec<String> = body
                        .first()
                        .map(|l| l.split(',').map(str::to_string).collect())
                        .unwrap_or_default();
                    let rows = body
                        .iter()
                        .skip(1)
                        .map(|l| l.split(',').map(num).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()?;
                    report.series.push(Series {
                        name: name.to_string(),
                        columns,
                        rows,
                    });
                }
            }
        }
        Ok(report)
    }

    /// Writes `<dir>/<experiment>-<timestamp>-<seed>.report`.
    pub fn write_to_dir(&self, dir: &Path, seed: u64) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        let path = dir.join(format!("{}-{stamp}-{seed}.report", self.experiment));
        std::fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let mut r = ExperimentReport::new("demo");
        r.environment.push(("seed".into(), "7".into()));
        r.parameters = "seed = 7\n\n[grid]\nn = 8\n".into();
        r.scalars.push(("k2".into(), 0.1 + 0.2));
        r.verdicts.push(Verdict::new("decreasing", 3.0e-9, Relation::Below, 1e-8));
        r.verdicts.push(Verdict::holds("monotone", false));
        let mut s = Series::new("levels", &["n", "err"]);
        s.push(vec![0.0, 1.0 / 3.0]);
        s.push(vec![1.0, 1e-300]);
        r.series.push(s);
        let back = ExperimentReport::parse(Path::new("mem"), &r.to_text()).unwrap();
        assert_eq!(back, r);
        assert!(!back.passed());
    }
}
