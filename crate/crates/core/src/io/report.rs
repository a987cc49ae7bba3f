//! Metric reports: a tagged JSON document plus a CSV view and a short
//! human-readable summary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_tagged, read_file, to_pretty_json, write_atomic};
use crate::error::Result;
use crate::evaluation::{DiffCurve, DivergenceReport, LyapunovEstimate, WassersteinRow};

pub(crate) const FORMAT_BASE: &str = "dyntok-report";
const FORMAT: &str = "dyntok-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReportBody {
    Wasserstein { rows: Vec<WassersteinRow> },
    Lyapunov(LyapunovEstimate),
    Divergence(DivergenceReport),
    DiffCurve(DiffCurve),
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    format: String,
    report: ReportBody,
}

impl ReportBody {
    pub fn to_csv(&self) -> String {
        match self {
            ReportBody::Wasserstein { rows } => {
                let mut out = String::from("grid_size,w_model_true,w_true_true\n");
                for r in rows {
                    let tt = r.w_true_true.map(|w| w.to_string()).unwrap_or_default();
                    out.push_str(&format!("{},{},{tt}\n", r.grid_size, r.w_model_true));
                }
                out
            }
            ReportBody::Lyapunov(e) => e.series.to_csv(),
            ReportBody::Divergence(d) => {
                let mut out = String::from("sample,match_time\n");
                for (i, t) in d.match_times.iter().enumerate() {
                    out.push_str(&format!("{i},{t}\n"));
                }
                out
            }
            ReportBody::DiffCurve(c) => c.to_csv(),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            ReportBody::Wasserstein { rows } => {
                let mut out = format!("{:>6}  {:>14}  {:>14}\n", "N", "W(model,true)", "W(true,true)");
                for r in rows {
                    let tt = r.w_true_true.map(|w| format!("{w:.6}")).unwrap_or_else(|| "-".into());
                    out.push_str(&format!("{:>6}  {:>14.6}  {tt:>14}\n", r.grid_size, r.w_model_true));
                }
                out
            }
            ReportBody::Lyapunov(e) => format!(
                "lambda = {:.6}  (c1 = {:.6}, c2 = {:.6}; fit over n = {}..{})\n",
                e.lambda, e.c1, e.c2, e.fit_n_min, e.fit_n_max
            ),
            ReportBody::Divergence(d) => format!(
                "divergence time = {:.6}  (k = {}, tau = {}, delta_x0 = {:.6e}, accepted {}/{} = {:.4})\n",
                d.divergence_time, d.k, d.tau, d.delta_x0, d.accepted, d.drawn, d.acceptance_rate
            ),
            ReportBody::DiffCurve(c) => {
                let last = c.times.len().saturating_sub(1);
                format!(
                    "{} pairs ({} skipped); at t = {}: model {:.6}, true {:.6}\n",
                    c.used,
                    c.skipped,
                    c.times.get(last).copied().unwrap_or(0.0),
                    c.model_vs_true.get(last).copied().unwrap_or(0.0),
                    c.true_vs_true.get(last).copied().unwrap_or(0.0)
                )
            }
        }
    }
}

pub fn encode(report: &ReportBody) -> Vec<u8> {
    to_pretty_json(&ReportFile {
        format: FORMAT.into(),
        report: report.clone(),
    })
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<ReportBody> {
    let f: ReportFile = parse_tagged(bytes, path, FORMAT)?;
    Ok(f.report)
}

/// Writes `path` (JSON) and `path` with a `.csv` extension.
pub fn save(path: &Path, report: &ReportBody) -> Result<()> {
    write_atomic(path, &encode(report))?;
    write_atomic(&path.with_extension("csv"), report.to_csv().as_bytes())
}

pub fn load(path: &Path) -> Result<ReportBody> {
    decode(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::LyapunovSeries;

    #[test]
    fn roundtrip_all_kinds() {
        let series = LyapunovSeries {
            values: vec![0.1 / 3.0, 0.7, 1e-300],
            windows: vec![9, 8, 7],
        };
        let bodies = vec![
            ReportBody::Wasserstein {
                rows: vec![WassersteinRow {
                    grid_size: 50,
                    w_model_true: 0.004_99,
                    w_true_true: Some(1.0 / 7.0),
                }],
            },
            ReportBody::Lyapunov(LyapunovEstimate {
                series,
                lambda: 0.419_2,
                c1: -0.1,
                c2: 2.0 / 3.0,
                fit_n_min: 1,
                fit_n_max: 3,
            }),
            ReportBody::Divergence(DivergenceReport {
                k: 100,
                tau: 0.03,
                lambda: 0.9056,
                cell_radius: 0.35,
                delta_x0: 0.023_36,
                horizon: 400,
                drawn: 10,
                accepted: 2,
                acceptance_rate: 0.2,
                match_times: vec![0.09, 0.3],
                divergence_time: 0.3,
            }),
            ReportBody::DiffCurve(DiffCurve {
                times: vec![0.0, 0.1],
                model_vs_true: vec![0.01, 0.2],
                true_vs_true: vec![0.0, 0.1],
                used: 1,
                skipped: 0,
            }),
        ];
        for b in bodies {
            let back = decode(&encode(&b), Path::new("r")).unwrap();
            assert_eq!(back, b);
            assert!(!b.to_csv().is_empty() && !b.to_text().is_empty());
        }
    }
}
