use std::fmt::Write as _;
use std::path::Path;

use cpa_core::evaluation::{aggregate_trials, DensityReport, PrfResult};
use serde::Serialize;

use crate::config::{Algorithm, Experiment, ExperimentConfig};
use crate::BenchError;

pub const RESULTS_HEADER: &str = "experiment,algo,k,novel_std,lambda,seed,precision,recall,f,threshold";
pub const DENSITY_HEADER: &str =
    "experiment,algo,condition,k,amp_std,seed,support_fraction,peak_score,l1_l2_ratio";

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// One scored detection.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: Experiment,
    pub algo: Algorithm,
    pub k: usize,
    /// 0 when no novel atom was injected.
    pub novel_std: f64,
    /// Regularization constant, absent for M-BMP.
    pub lambda: Option<f64>,
    pub seed: u64,
    pub prf: PrfResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Known,
    Novel,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Known => "known",
            Condition::Novel => "novel",
        }
    }
}

/// Density of one algorithm's scores on one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub experiment: Experiment,
    pub algo: Algorithm,
    pub condition: Condition,
    /// Number of dictionary atoms in the signal (0 for a novel-only signal).
    pub k: usize,
    pub amp_std: f64,
    pub seed: u64,
    pub report: DensityReport,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    Detection(Vec<ResultRow>),
    Density(Vec<DensityRow>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub records: Records,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionSummary {
    pub algo: Algorithm,
    pub k: usize,
    pub novel_std: f64,
    pub lambda: Option<f64>,
    pub f: Stat,
    pub precision: Stat,
    pub recall: Stat,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySummary {
    pub algo: Algorithm,
    pub condition: Condition,
    pub k: usize,
    pub amp_std: f64,
    pub support_fraction: Stat,
    pub peak_score: Stat,
    pub l1_l2_ratio: Stat,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Conditions {
    Detection(Vec<DetectionSummary>),
    Density(Vec<DensitySummary>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: Experiment,
    pub dictionary_policy: &'static str,
    pub seed_rule: &'static str,
    pub config: ExperimentConfig,
    pub conditions: Conditions,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn stat(values: &[f64]) -> Stat {
    let s = aggregate_trials(values).expect("groups are non-empty");
    Stat {
        mean: s.mean,
        std: s.std,
    }
}

/// Splits rows into groups sharing a key, in order of first appearance.
fn group_by<T, K: PartialEq>(rows: &[T], key: impl Fn(&T) -> K) -> Vec<(K, Vec<&T>)> {
    let mut groups: Vec<(K, Vec<&T>)> = Vec::new();
    for row in rows {
        let k = key(row);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, members)) => members.push(row),
            None => groups.push((k, vec![row])),
        }
    }
    groups
}

impl ExperimentOutput {
    pub fn detection_rows(&self) -> &[ResultRow] {
        match &self.records {
            Records::Detection(rows) => rows,
            Records::Density(_) => &[],
        }
    }

    pub fn density_rows(&self) -> &[DensityRow] {
        match &self.records {
            Records::Density(rows) => rows,
            Records::Detection(_) => &[],
        }
    }

    pub fn csv(&self) -> String {
        let mut out = String::new();
        match &self.records {
            Records::Detection(rows) => {
                out.push_str(RESULTS_HEADER);
                out.push('\n');
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{}",
                        r.experiment.name(),
                        r.algo,
                        r.k,
                        r.novel_std,
                        opt(r.lambda),
                        r.seed,
                        r.prf.precision,
                        r.prf.recall,
                        r.prf.f_measure,
                        opt(r.prf.threshold)
                    );
                }
            }
            Records::Density(rows) => {
                out.push_str(DENSITY_HEADER);
                out.push('\n');
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{}",
                        r.experiment.name(),
                        r.algo,
                        r.condition.name(),
                        r.k,
                        r.amp_std,
                        r.seed,
                        r.report.support_fraction,
                        r.report.peak_score,
                        r.report.l1_l2_ratio
                    );
                }
            }
        }
        out
    }

    pub fn summary(&self) -> Summary {
        let conditions = match &self.records {
            Records::Detection(rows) => Conditions::Detection(
                group_by(rows, |r| {
                    (r.algo, r.k, r.novel_std.to_bits(), r.lambda.map(f64::to_bits))
                })
                .into_iter()
                .map(|(_, g)| DetectionSummary {
                    algo: g[0].algo,
                    k: g[0].k,
                    novel_std: g[0].novel_std,
                    lambda: g[0].lambda,
                    f: stat(&g.iter().map(|r| r.prf.f_measure).collect::<Vec<_>>()),
                    precision: stat(&g.iter().map(|r| r.prf.precision).collect::<Vec<_>>()),
                    recall: stat(&g.iter().map(|r| r.prf.recall).collect::<Vec<_>>()),
                    n: g.len(),
                })
                .collect(),
            ),
            Records::Density(rows) => Conditions::Density(
                group_by(rows, |r| (r.algo, r.condition, r.k, r.amp_std.to_bits()))
                    .into_iter()
                    .map(|(_, g)| DensitySummary {
                        algo: g[0].algo,
                        condition: g[0].condition,
                        k: g[0].k,
                        amp_std: g[0].amp_std,
                        support_fraction: stat(
                            &g.iter().map(|r| r.report.support_fraction).collect::<Vec<_>>(),
                        ),
                        peak_score: stat(&g.iter().map(|r| r.report.peak_score).collect::<Vec<_>>()),
                        l1_l2_ratio: stat(
                            &g.iter().map(|r| r.report.l1_l2_ratio).collect::<Vec<_>>(),
                        ),
                        n: g.len(),
                    })
                    .collect(),
            ),
        };
        Summary {
            experiment: self.experiment,
            dictionary_policy: "fresh dictionary per trial",
            seed_rule: "trial t uses seed base_seed + t",
            config: self.config.clone(),
            conditions,
        }
    }

    /// Mean F over the rows matching a predicate, `None` if none match.
    pub fn mean_f(&self, filter: impl Fn(&ResultRow) -> bool) -> Option<f64> {
        let values: Vec<f64> = self
            .detection_rows()
            .iter()
            .filter(|r| filter(r))
            .map(|r| r.prf.f_measure)
            .collect();
        aggregate_trials(&values).ok().map(|s| s.mean)
    }

    /// Writes `results.csv` and `summary.json` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
        let csv_path = dir.join(RESULTS_FILE);
        std::fs::write(&csv_path, self.csv()).map_err(BenchError::io(&csv_path))?;
        let summary_path = dir.join(SUMMARY_FILE);
        let mut json = serde_json::to_string_pretty(&self.summary()).expect("summary serializes");
        json.push('\n');
        std::fs::write(&summary_path, json).map_err(BenchError::io(&summary_path))?;
        Ok(())
    }
}
