#![allow(dead_code)]

use cpa_core::signal::{synthesize, ActiveSet, ObservationSet};
use cpa_core::Dictionary;
use nalgebra::{DMatrix, DVector};

/// Random dictionary with a random active set orthonormalized, plus a
/// noiseless signal drawn from it.
pub struct OrthoFixture {
    pub dict: Dictionary,
    pub active: ActiveSet,
    pub obs: ObservationSet,
}

pub fn ortho_fixture(n: usize, m: usize, k: usize, t: usize, seed: u64) -> OrthoFixture {
    let active = ActiveSet::random(m, k, seed).unwrap();
    let dict = Dictionary::generate(n, m, seed)
        .unwrap()
        .orthogonalize_subset(active.indices())
        .unwrap();
    let (obs, _) = synthesize(&dict, &active, t, seed, 1.0).unwrap();
    OrthoFixture { dict, active, obs }
}

pub fn indicator(active: &ActiveSet, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |i, _| if active.contains(i) { 1.0 } else { 0.0 })
}

/// Stacked projection matrix built entry by entry from the definition.
pub fn explicit_stack(dict: &Dictionary, obs: &ObservationSet) -> DMatrix<f64> {
    let (n, m, t) = (dict.n_dims(), dict.n_atoms(), obs.n_steps());
    let b = dict.atoms();
    let mut phi = DMatrix::zeros(t * n, m);
    for s in 0..t {
        let y = obs.observation(s);
        for i in 0..m {
            let a = b.column(i).dot(&y);
            for r in 0..n {
                phi[(s * n + r, i)] = b[(r, i)] * a;
            }
        }
    }
    phi
}

pub fn stacked(obs: &ObservationSet) -> DVector<f64> {
    DVector::from_column_slice(obs.matrix().as_slice())
}

pub fn rel_dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
