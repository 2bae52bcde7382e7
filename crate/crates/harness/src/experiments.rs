//! The four benchmark experiments.
//!
//! Every trial `t` draws its dictionary, active set, amplitudes, noise and
//! novel atom from seed `base_seed + t`, so results are a pure function of the
//! configuration. Trials run on a rayon pool whose size `SP_THREADS` may cap;
//! rows come back in job order regardless of scheduling.

use cpa_core::baselines::{atom_scores, solve_mbmp, solve_mfocuss, MfocussParams};
use cpa_core::cpa::solve_cpa_regularized;
use cpa_core::evaluation::{best_threshold_f, density_report};
use cpa_core::signal::{
    add_noise, inject_novel_atom, synthesize, ActiveSet, NovelAtomSpec, ObservationSet,
};
use cpa_core::{icpa, Dictionary};
use rayon::prelude::*;

use crate::config::{Algorithm, Experiment, ExperimentConfig};
use crate::results::{Condition, DensityRow, ExperimentOutput, Records, ResultRow};
use crate::BenchError;

pub const THREADS_ENV: &str = "SP_THREADS";

/// M-FOCUSS regularization constants tried by the λ sweep.
pub const LAMBDA_SWEEP: [f64; 7] = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1];

pub fn trial_seed(config: &ExperimentConfig, trial: usize) -> u64 {
    config.base_seed.wrapping_add(trial as u64)
}

/// One synthetic problem instance.
#[derive(Debug, Clone)]
pub struct TrialSignal {
    pub dict: Dictionary,
    pub active: ActiveSet,
    pub obs: ObservationSet,
}

/// Known-atom signal plus noise, then the novel atom if `novel_std > 0`.
pub fn trial_signal(
    config: &ExperimentConfig,
    k: usize,
    novel_std: f64,
    seed: u64,
) -> Result<TrialSignal, BenchError> {
    let dict = Dictionary::generate(config.n_dims, config.n_atoms, seed)?;
    let active = ActiveSet::random(config.n_atoms, k, seed)?;
    let (clean, _) = synthesize(&dict, &active, config.n_steps, seed, 1.0)?;
    let mut obs = add_noise(&clean, config.noise_ratio, seed)?;
    if novel_std > 0.0 {
        obs = with_novel_atom(&obs, novel_std, seed)?;
    }
    Ok(TrialSignal { dict, active, obs })
}

fn with_novel_atom(
    obs: &ObservationSet,
    novel_std: f64,
    seed: u64,
) -> Result<ObservationSet, BenchError> {
    let spec = NovelAtomSpec::generate(obs.n_dims(), novel_std, seed)?;
    Ok(inject_novel_atom(obs, &spec, seed)?)
}

/// Per-atom detection scores: `Θ` for the CPA variants, coefficient row norms
/// for the baselines.
pub fn algorithm_scores(
    algo: Algorithm,
    dict: &Dictionary,
    obs: &ObservationSet,
    config: &ExperimentConfig,
    mfocuss: &MfocussParams,
) -> Result<Vec<f64>, BenchError> {
    let scores = match algo {
        Algorithm::Cpa => solve_cpa_regularized(dict, obs, config.cpa_lambda)?.into_inner(),
        Algorithm::Icpa => icpa::run(dict, obs, config.cpa_lambda)?.into_inner(),
        Algorithm::Mbmp => atom_scores(&solve_mbmp(dict, obs, config.mbmp_max_iters)?),
        Algorithm::Mfocuss => atom_scores(&solve_mfocuss(dict, obs, mfocuss)?.coefficients),
    };
    Ok(scores.iter().copied().collect())
}

fn algorithm_lambda(algo: Algorithm, config: &ExperimentConfig, mfocuss: &MfocussParams) -> Option<f64> {
    match algo {
        Algorithm::Cpa | Algorithm::Icpa => Some(config.cpa_lambda),
        Algorithm::Mfocuss => Some(mfocuss.lambda),
        Algorithm::Mbmp => None,
    }
}

fn worker_pool() -> Result<rayon::ThreadPool, BenchError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| BenchError::Config(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start worker pool: {e}")))
}

/// Runs `job` over `inputs` in parallel and concatenates the outputs in input order.
fn par_flat_map<I, R, F>(inputs: Vec<I>, job: F) -> Result<Vec<R>, BenchError>
where
    I: Send,
    R: Send,
    F: Fn(I) -> Result<Vec<R>, BenchError> + Sync + Send,
{
    let pool = worker_pool()?;
    let chunks: Vec<Vec<R>> = pool.install(|| {
        inputs
            .into_par_iter()
            .map(&job)
            .collect::<Result<Vec<_>, BenchError>>()
    })?;
    Ok(chunks.into_iter().flatten().collect())
}

fn k_trial_jobs(config: &ExperimentConfig) -> Vec<(usize, u64)> {
    config
        .k_values
        .iter()
        .flat_map(|&k| (0..config.n_trials).map(move |t| (k, t)))
        .map(|(k, t)| (k, trial_seed(config, t)))
        .collect()
}

fn detection_rows(
    experiment: Experiment,
    config: &ExperimentConfig,
    signal: &TrialSignal,
    k: usize,
    novel_std: f64,
    seed: u64,
) -> Result<Vec<ResultRow>, BenchError> {
    let mfocuss = config.mfocuss();
    config
        .algorithms
        .iter()
        .map(|&algo| {
            let scores = algorithm_scores(algo, &signal.dict, &signal.obs, config, &mfocuss)?;
            Ok(ResultRow {
                experiment,
                algo,
                k,
                novel_std,
                lambda: algorithm_lambda(algo, config, &mfocuss),
                seed,
                prf: best_threshold_f(&scores, &signal.active)?,
            })
        })
        .collect()
}

fn required_novel_std(config: &ExperimentConfig, experiment: Experiment) -> Result<f64, BenchError> {
    match config.novel_std {
        Some(s) if s > 0.0 => Ok(s),
        _ => Err(BenchError::Config(format!(
            "the {} experiment needs a positive novel_std",
            experiment.name()
        ))),
    }
}

/// Detection F for every k, trial and algorithm.
/// Rows: `|k_values| × n_trials × |algorithms|`.
pub fn run_complexity_sweep(config: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    config.validate()?;
    let rows = par_flat_map(k_trial_jobs(config), |(k, seed)| {
        let signal = trial_signal(config, k, 0.0, seed)?;
        detection_rows(Experiment::Complexity, config, &signal, k, 0.0, seed)
    })?;
    Ok(ExperimentOutput {
        experiment: Experiment::Complexity,
        config: config.clone(),
        records: Records::Detection(rows),
    })
}

/// Detection of the dictionary atoms without and with a strong novel atom.
/// The no-novel-atom rows reproduce the complexity sweep on the same seeds.
pub fn run_masking_robustness(config: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    config.validate()?;
    let novel_std = required_novel_std(config, Experiment::Masking)?;
    let rows = par_flat_map(k_trial_jobs(config), |(k, seed)| {
        let clean = trial_signal(config, k, 0.0, seed)?;
        let mut rows = detection_rows(Experiment::Masking, config, &clean, k, 0.0, seed)?;
        let masked = TrialSignal {
            obs: with_novel_atom(&clean.obs, novel_std, seed)?,
            ..clean
        };
        rows.extend(detection_rows(Experiment::Masking, config, &masked, k, novel_std, seed)?);
        Ok(rows)
    })?;
    Ok(ExperimentOutput {
        experiment: Experiment::Masking,
        config: config.clone(),
        records: Records::Detection(rows),
    })
}

/// M-FOCUSS over [`LAMBDA_SWEEP`] without and with the novel atom; the
/// configured algorithm list is not used.
/// Rows: `7 × 2 × n_trials` per k value.
pub fn run_lambda_sweep(config: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    config.validate()?;
    let novel_std = required_novel_std(config, Experiment::LambdaSweep)?;
    let rows = par_flat_map(k_trial_jobs(config), |(k, seed)| {
        let clean = trial_signal(config, k, 0.0, seed)?;
        let masked = TrialSignal {
            obs: with_novel_atom(&clean.obs, novel_std, seed)?,
            ..clean.clone()
        };
        let mut rows = Vec::with_capacity(2 * LAMBDA_SWEEP.len());
        for (signal, std) in [(&clean, 0.0), (&masked, novel_std)] {
            for &lambda in &LAMBDA_SWEEP {
                let params = MfocussParams {
                    lambda,
                    ..config.mfocuss()
                };
                let scores =
                    algorithm_scores(Algorithm::Mfocuss, &signal.dict, &signal.obs, config, &params)?;
                rows.push(ResultRow {
                    experiment: Experiment::LambdaSweep,
                    algo: Algorithm::Mfocuss,
                    k,
                    novel_std: std,
                    lambda: Some(lambda),
                    seed,
                    prf: best_threshold_f(&scores, &signal.active)?,
                });
            }
        }
        Ok(rows)
    })?;
    Ok(ExperimentOutput {
        experiment: Experiment::LambdaSweep,
        config: config.clone(),
        records: Records::Detection(rows),
    })
}

/// Density of each algorithm's scores for a known-atom signal (amplitude std
/// 1, one condition per k value) and for a novel-atom-only signal at amplitude
/// stds 1 and `novel_std`. Both signals carry noise at the configured ratio.
pub fn run_novel_representation(config: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    config.validate()?;
    let novel_std = required_novel_std(config, Experiment::Novel)?;
    let mut novel_stds = vec![1.0];
    if novel_std != 1.0 {
        novel_stds.push(novel_std);
    }
    let jobs: Vec<u64> = (0..config.n_trials).map(|t| trial_seed(config, t)).collect();
    let mfocuss = config.mfocuss();
    let rows = par_flat_map(jobs, |seed| {
        let mut signals = Vec::new();
        for &k in &config.k_values {
            let s = trial_signal(config, k, 0.0, seed)?;
            signals.push((Condition::Known, k, 1.0, s.dict, s.obs));
        }
        let dict = Dictionary::generate(config.n_dims, config.n_atoms, seed)?;
        let silent = ObservationSet::zeros(config.n_dims, config.n_steps)?;
        for &std in &novel_stds {
            let obs = add_noise(&with_novel_atom(&silent, std, seed)?, config.noise_ratio, seed)?;
            signals.push((Condition::Novel, 0, std, dict.clone(), obs));
        }
        let mut rows = Vec::new();
        for (condition, k, amp_std, dict, obs) in &signals {
            for &algo in &config.algorithms {
                let scores = algorithm_scores(algo, dict, obs, config, &mfocuss)?;
                rows.push(DensityRow {
                    experiment: Experiment::Novel,
                    algo,
                    condition: *condition,
                    k: *k,
                    amp_std: *amp_std,
                    seed,
                    report: density_report(&scores)?,
                });
            }
        }
        Ok(rows)
    })?;
    Ok(ExperimentOutput {
        experiment: Experiment::Novel,
        config: config.clone(),
        records: Records::Density(rows),
    })
}

pub fn run_experiment(
    experiment: Experiment,
    config: &ExperimentConfig,
) -> Result<ExperimentOutput, BenchError> {
    match experiment {
        Experiment::Complexity => run_complexity_sweep(config),
        Experiment::Novel => run_novel_representation(config),
        Experiment::Masking => run_masking_robustness(config),
        Experiment::LambdaSweep => run_lambda_sweep(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            n_dims: 20,
            n_atoms: 60,
            n_steps: 4,
            k_values: vec![1, 3],
            n_trials: 2,
            base_seed: 5,
            algorithms: vec![Algorithm::Cpa, Algorithm::Icpa, Algorithm::Mbmp, Algorithm::Mfocuss],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn complexity_row_count_and_order() {
        let c = tiny();
        let out = run_complexity_sweep(&c).unwrap();
        let rows = out.detection_rows();
        assert_eq!(rows.len(), 2 * 2 * 4);
        assert_eq!((rows[0].k, rows[0].seed, rows[0].algo), (1, 5, Algorithm::Cpa));
        assert_eq!((rows[4].k, rows[4].seed), (1, 6));
        assert_eq!(rows[8].k, 3);
        assert_eq!(rows[2].lambda, None);
        assert_eq!(rows[3].lambda, Some(1e-3));
    }

    #[test]
    fn cpa_and_icpa_agree_in_the_sweep() {
        let out = run_complexity_sweep(&tiny()).unwrap();
        for pair in out.detection_rows().chunks(4) {
            assert_eq!(pair[0].prf.f_measure, pair[1].prf.f_measure);
        }
    }

    #[test]
    fn masking_without_novel_atom_matches_complexity() {
        let c = tiny();
        let sweep = run_complexity_sweep(&c).unwrap();
        let masking = run_masking_robustness(&c).unwrap();
        let clean: Vec<_> = masking
            .detection_rows()
            .iter()
            .filter(|r| r.novel_std == 0.0)
            .collect();
        assert_eq!(clean.len(), sweep.detection_rows().len());
        for (a, b) in clean.iter().zip(sweep.detection_rows()) {
            assert_eq!((a.algo, a.k, a.seed, a.prf), (b.algo, b.k, b.seed, b.prf));
        }
        assert_eq!(masking.detection_rows().len(), 2 * clean.len());
    }

    #[test]
    fn lambda_sweep_row_count() {
        let c = ExperimentConfig {
            k_values: vec![2],
            ..tiny()
        };
        let out = run_lambda_sweep(&c).unwrap();
        assert_eq!(out.detection_rows().len(), 7 * 2 * 2);
        assert!(out.detection_rows().iter().all(|r| r.algo == Algorithm::Mfocuss));
    }

    #[test]
    fn novel_experiment_conditions() {
        let c = ExperimentConfig {
            k_values: vec![1],
            algorithms: vec![Algorithm::Cpa, Algorithm::Mbmp],
            ..tiny()
        };
        let out = run_novel_representation(&c).unwrap();
        // Per trial: known, novel at std 1, novel at std 10; two algorithms each.
        assert_eq!(out.density_rows().len(), 2 * 3 * 2);
        let mbmp_peaks: Vec<f64> = out
            .density_rows()
            .iter()
            .filter(|r| r.algo == Algorithm::Mbmp && r.condition == Condition::Novel && r.seed == 5)
            .map(|r| r.report.peak_score)
            .collect();
        assert!((mbmp_peaks[1] / mbmp_peaks[0] - 10.0).abs() < 1e-6);
    }

    #[test]
    fn missing_novel_std_is_a_config_error() {
        let c = ExperimentConfig {
            novel_std: None,
            ..tiny()
        };
        assert!(matches!(run_masking_robustness(&c), Err(BenchError::Config(_))));
        assert!(matches!(run_novel_representation(&c), Err(BenchError::Config(_))));
    }
}
