mod common;

use common::ortho_fixture;
use cpa_core::baselines::{atom_scores, solve_mbmp};
use cpa_core::cpa::{solve_cpa_regularized, solve_ridge_amplitudes};
use cpa_core::evaluation::{best_threshold_f, density_report};
use cpa_core::signal::{inject_novel_atom, synthesize, ActiveSet, NovelAtomSpec, ObservationSet};
use cpa_core::Dictionary;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn coherence_of_large_random_dictionaries() {
    let mut values = Vec::new();
    for seed in 0..5 {
        let d = Dictionary::generate(500, 10_000, seed).unwrap();
        values.push(d.mutual_coherence().unwrap().coherence);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    println!("coherence per seed {values:?}, mean {mean:.4}");
    assert!((0.2..=0.35).contains(&mean), "mean coherence {mean}");
}

#[test]
fn active_set_separation() {
    let (n, m, k) = (220, 2000, 2);
    assert!(n as f64 > cpa_core::dictionary::cpa_dimension_bound(k, m as f64).unwrap());
    let mut separated = 0;
    for seed in 0..20 {
        let f = ortho_fixture(n, m, k, 1, seed);
        let theta = solve_cpa_regularized(&f.dict, &f.obs, 0.4).unwrap();
        let abs: Vec<f64> = theta.as_slice().iter().map(|x| x.abs()).collect();
        let active_mean = f.active.indices().iter().map(|&i| abs[i]).sum::<f64>() / k as f64;
        let inactive_max = (0..m)
            .filter(|&i| !f.active.contains(i))
            .map(|i| abs[i])
            .fold(0.0, f64::max);
        separated += usize::from(active_mean > inactive_max);
    }
    assert!(separated >= 19, "{separated}/20 seeds separated");
}

#[test]
fn ridge_amplitudes_are_dense_where_presence_is_sparse() {
    let d = Dictionary::generate(100, 1000, 11).unwrap();
    let active = ActiveSet::new(vec![123], 1000).unwrap();
    let (obs, _) = synthesize(&d, &active, 1, 11, 1.0).unwrap();
    let ridge = solve_ridge_amplitudes(&d, &obs, 0.4).unwrap();
    let row = ridge.row(0);
    let peak = row.amax();
    let above = row.iter().filter(|x| x.abs() > 0.01 * peak).count();
    assert!(above * 2 > 1000, "{above} of 1000 ridge entries above 1% of max");

    let theta = solve_cpa_regularized(&d, &obs, 0.4).unwrap();
    let report = density_report(theta.as_slice()).unwrap();
    assert!(report.support_fraction < 0.05, "{report:?}");
}

#[test]
fn mbmp_represents_novel_atoms_sparsely_and_proportionally() {
    let d = Dictionary::generate(100, 1000, 4).unwrap();
    let zero = ObservationSet::zeros(100, 10).unwrap();
    let mut peaks = Vec::new();
    for std in [1.0, 10.0] {
        let spec = NovelAtomSpec::generate(100, std, 4).unwrap();
        let obs = inject_novel_atom(&zero, &spec, 4).unwrap();
        let scores = atom_scores(&solve_mbmp(&d, &obs, 200).unwrap());
        let mut sorted: Vec<f64> = scores.iter().map(|s| s * s).collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = sorted.iter().sum();
        let top: f64 = sorted[..20].iter().sum();
        assert!(top > 0.5 * total, "top-20 energy share {}", top / total);
        peaks.push(scores.max());
    }
    let growth = peaks[1] / peaks[0];
    assert!((growth - 10.0).abs() < 1e-6, "peak growth {growth}");
}

#[test]
fn random_scores_score_poorly() {
    let mut best = Vec::new();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let truth = ActiveSet::random(1000, 2, seed + 100).unwrap();
        best.push(best_threshold_f(&scores, &truth).unwrap().f_measure);
    }
    let worst = best.iter().cloned().fold(0.0, f64::max);
    assert!(worst < 0.5, "best F per seed {best:?}");
}
