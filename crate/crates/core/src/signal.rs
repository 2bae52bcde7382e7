//! Synthetic multiple-measurement signals.
//!
//! Observations are produced as `y(t) = Σ_l A_l(t) B_{j(l)}` from an active set
//! of dictionary atoms. Measurement noise is scaled to the realized signal: its
//! standard deviation is `ratio` times the empirical standard deviation of all
//! `T·N` clean components of the record (one global value per record).

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dictionary::{Dictionary, UNIT_NORM_TOL};
use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

/// Noise-to-signal ratio used throughout the reference experiments.
pub const DEFAULT_NOISE_RATIO: f64 = 0.1;

/// Indices of the atoms generating a signal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    indices: Vec<usize>,
}

impl ActiveSet {
    pub fn new(indices: Vec<usize>, n_atoms: usize) -> Result<Self> {
        for (pos, &i) in indices.iter().enumerate() {
            if i >= n_atoms {
                return Err(Error::arg(format!("active index {i} >= {n_atoms} atoms")));
            }
            if indices[..pos].contains(&i) {
                return Err(Error::arg(format!("duplicate active index {i}")));
            }
        }
        Ok(ActiveSet { indices })
    }

    pub fn empty() -> Self {
        ActiveSet { indices: Vec::new() }
    }

    /// `k` distinct atoms drawn uniformly from the active-set substream, sorted.
    pub fn random(n_atoms: usize, k: usize, seed: u64) -> Result<Self> {
        if k > n_atoms {
            return Err(Error::arg(format!("cannot pick {k} of {n_atoms} atoms")));
        }
        let mut rng = stream_rng(seed, Stream::ActiveSet);
        let mut indices = index::sample(&mut rng, n_atoms, k).into_vec();
        indices.sort_unstable();
        Ok(ActiveSet { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }
}

/// Amplitudes of the active atoms: row `t`, column `l` is `A_{j(l)}(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSeries {
    values: DMatrix<f64>,
}

impl AmplitudeSeries {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::arg("amplitudes must be finite"));
        }
        Ok(AmplitudeSeries { values })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_steps(&self) -> usize {
        self.values.nrows()
    }

    pub fn k(&self) -> usize {
        self.values.ncols()
    }
}

/// `T` observation vectors of dimension `N`, held as the columns of an `N × T`
/// matrix, so the column-major storage is exactly the stacked vector `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    data: DMatrix<f64>,
}

impl ObservationSet {
    /// Columns of `data` are the observations.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::arg("observations need at least one dimension"));
        }
        Ok(ObservationSet { data })
    }

    pub fn from_vectors(n_dims: usize, vectors: &[DVector<f64>]) -> Result<Self> {
        if n_dims == 0 {
            return Err(Error::arg("observations need at least one dimension"));
        }
        let mut data = DMatrix::zeros(n_dims, vectors.len());
        for (t, v) in vectors.iter().enumerate() {
            if v.len() != n_dims {
                return Err(Error::arg(format!(
                    "observation {t} has dimension {}, expected {n_dims}",
                    v.len()
                )));
            }
            data.set_column(t, v);
        }
        Ok(ObservationSet { data })
    }

    pub fn zeros(n_dims: usize, n_steps: usize) -> Result<Self> {
        Self::from_matrix(DMatrix::zeros(n_dims, n_steps))
    }

    pub fn n_dims(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn observation(&self, t: usize) -> DVectorView<'_, f64> {
        self.data.column(t)
    }

    /// The `N × T` matrix of observations.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Reorders observations; `order[t]` is the source step of new step `t`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n_steps()];
        if order.len() != self.n_steps() {
            return Err(Error::arg("permutation length must equal the step count"));
        }
        for &t in order {
            if t >= seen.len() || std::mem::replace(&mut seen[t], true) {
                return Err(Error::arg("not a permutation of the steps"));
            }
        }
        let data = DMatrix::from_fn(self.n_dims(), order.len(), |r, c| self.data[(r, order[c])]);
        Ok(ObservationSet { data })
    }
}

/// Atom outside the dictionary, mixed into a signal with Gaussian amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct NovelAtomSpec {
    atom: DVector<f64>,
    amplitude_std: f64,
}

impl NovelAtomSpec {
    pub fn new(atom: DVector<f64>, amplitude_std: f64) -> Result<Self> {
        let norm = atom.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::arg(format!("novel atom has norm {norm}, expected 1")));
        }
        if !(amplitude_std > 0.0 && amplitude_std.is_finite()) {
            return Err(Error::arg(format!(
                "novel amplitude std must be positive, got {amplitude_std}"
            )));
        }
        Ok(NovelAtomSpec {
            atom,
            amplitude_std,
        })
    }

    /// Draws the atom the same way dictionary atoms are drawn, but from the
    /// novel-atom substream of `seed`.
    pub fn generate(n_dims: usize, amplitude_std: f64, seed: u64) -> Result<Self> {
        if n_dims == 0 {
            return Err(Error::arg("novel atom needs at least one dimension"));
        }
        let mut rng = stream_rng(seed, Stream::NovelAtom);
        let atom = loop {
            let v = DVector::from_fn(n_dims, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = v.norm();
            if norm > 0.0 {
                break v / norm;
            }
        };
        Self::new(atom, amplitude_std)
    }

    pub fn atom(&self) -> &DVector<f64> {
        &self.atom
    }

    pub fn amplitude_std(&self) -> f64 {
        self.amplitude_std
    }
}

/// Draws i.i.d. `N(0, amp_std²)` amplitudes for every active atom (t-major,
/// then atom, from the amplitude substream) and mixes the atoms.
pub fn synthesize(
    dict: &Dictionary,
    active: &ActiveSet,
    n_steps: usize,
    seed: u64,
    amp_std: f64,
) -> Result<(ObservationSet, AmplitudeSeries)> {
    if n_steps == 0 {
        return Err(Error::arg("n_steps must be at least 1"));
    }
    if !(amp_std >= 0.0 && amp_std.is_finite()) {
        return Err(Error::arg(format!("amplitude std must be >= 0, got {amp_std}")));
    }
    let k = active.k();
    let mut rng = stream_rng(seed, Stream::Amplitudes);
    let mut values = DMatrix::zeros(n_steps, k);
    for t in 0..n_steps {
        for l in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            values[(t, l)] = amp_std * z;
        }
    }
    let amplitudes = AmplitudeSeries::new(values)?;
    let obs = synthesize_with_amplitudes(dict, active, &amplitudes)?;
    Ok((obs, amplitudes))
}

/// Mixes the active atoms with caller-supplied amplitudes.
pub fn synthesize_with_amplitudes(
    dict: &Dictionary,
    active: &ActiveSet,
    amplitudes: &AmplitudeSeries,
) -> Result<ObservationSet> {
    if let Some(&bad) = active.indices().iter().find(|&&i| i >= dict.n_atoms()) {
        return Err(Error::arg(format!(
            "active index {bad} >= {} atoms",
            dict.n_atoms()
        )));
    }
    if amplitudes.k() != active.k() {
        return Err(Error::arg(format!(
            "{} amplitude columns for {} active atoms",
            amplitudes.k(),
            active.k()
        )));
    }
    let n = dict.n_dims();
    let mut data = DMatrix::zeros(n, amplitudes.n_steps());
    for (l, &i) in active.indices().iter().enumerate() {
        let atom = dict.atom(i);
        for t in 0..amplitudes.n_steps() {
            let a = amplitudes.values()[(t, l)];
            data.column_mut(t).axpy(a, &atom, 1.0);
        }
    }
    ObservationSet::from_matrix(data)
}

/// Population standard deviation over all `T·N` components.
pub fn signal_std(obs: &ObservationSet) -> f64 {
    let n = obs.matrix().len();
    if n == 0 {
        return 0.0;
    }
    let mean = obs.matrix().sum() / n as f64;
    let var = obs.matrix().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    var.sqrt()
}

/// Adds i.i.d. Gaussian noise with std `ratio × signal_std(obs)`, drawn from the
/// noise substream (t-major, then component).
pub fn add_noise(obs: &ObservationSet, ratio: f64, seed: u64) -> Result<ObservationSet> {
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(Error::arg(format!("noise ratio must be >= 0, got {ratio}")));
    }
    if ratio == 0.0 {
        return Ok(obs.clone());
    }
    let sigma = signal_std(obs);
    if sigma == 0.0 {
        return Err(Error::Degenerate(
            "noise scale is undefined for a constant signal".into(),
        ));
    }
    let std = ratio * sigma;
    let mut rng = stream_rng(seed, Stream::Noise);
    let mut data = obs.matrix().clone();
    for x in data.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x += std * z;
    }
    ObservationSet::from_matrix(data)
}

/// `y(t) ← y(t) + a(t)·atom` with `a(t) ~ N(0, amplitude_std²)` from the
/// novel-amplitude substream.
pub fn inject_novel_atom(
    obs: &ObservationSet,
    spec: &NovelAtomSpec,
    seed: u64,
) -> Result<ObservationSet> {
    if spec.atom().len() != obs.n_dims() {
        return Err(Error::arg(format!(
            "novel atom dimension {} does not match observation dimension {}",
            spec.atom().len(),
            obs.n_dims()
        )));
    }
    let mut rng = stream_rng(seed, Stream::NovelAmplitudes);
    let mut data = obs.matrix().clone();
    for mut column in data.column_iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        column.axpy(spec.amplitude_std() * z, spec.atom(), 1.0);
    }
    ObservationSet::from_matrix(data)
}

/// `Y = (y(1); y(2); …; y(T))`.
pub fn stack_observations(obs: &ObservationSet) -> Result<DVector<f64>> {
    if obs.is_empty() {
        return Err(Error::arg("cannot stack an empty observation set"));
    }
    Ok(DVector::from_column_slice(obs.matrix().as_slice()))
}

/// Inverse of [`stack_observations`].
pub fn unstack_observations(stacked: &DVector<f64>, n_dims: usize) -> Result<ObservationSet> {
    if n_dims == 0 || !stacked.len().is_multiple_of(n_dims) {
        return Err(Error::arg(format!(
            "stacked length {} is not a multiple of {n_dims}",
            stacked.len()
        )));
    }
    ObservationSet::from_matrix(DMatrix::from_column_slice(
        n_dims,
        stacked.len() / n_dims,
        stacked.as_slice(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict() -> Dictionary {
        Dictionary::generate(12, 30, 21).unwrap()
    }

    #[test]
    fn active_set_validation() {
        assert!(ActiveSet::new(vec![0, 3], 4).is_ok());
        assert!(ActiveSet::new(vec![4], 4).is_err());
        assert!(ActiveSet::new(vec![1, 1], 4).is_err());
        let r = ActiveSet::random(100, 7, 3).unwrap();
        assert_eq!(r.k(), 7);
        assert!(r.indices().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(r, ActiveSet::random(100, 7, 3).unwrap());
        assert!(ActiveSet::random(3, 4, 0).is_err());
    }

    #[test]
    fn empty_active_set_gives_zero_signal() {
        let (obs, amps) = synthesize(&dict(), &ActiveSet::empty(), 5, 1, 1.0).unwrap();
        assert_eq!(obs.n_steps(), 5);
        assert!(obs.matrix().iter().all(|&x| x == 0.0));
        assert_eq!(amps.k(), 0);
    }

    #[test]
    fn unit_amplitude_single_atom_reproduces_atom() {
        let d = dict();
        let active = ActiveSet::new(vec![9], d.n_atoms()).unwrap();
        let amps = AmplitudeSeries::new(DMatrix::from_element(3, 1, 1.0)).unwrap();
        let obs = synthesize_with_amplitudes(&d, &active, &amps).unwrap();
        for t in 0..3 {
            assert_eq!(obs.observation(t), d.atom(9));
        }
    }

    #[test]
    fn orthonormal_pair_energy_is_pythagorean() {
        let d = Dictionary::identity(6).unwrap();
        let active = ActiveSet::new(vec![1, 4], 6).unwrap();
        let (obs, amps) = synthesize(&d, &active, 4, 77, 1.0).unwrap();
        for t in 0..4 {
            let a = amps.values().row(t);
            let expected = a[0] * a[0] + a[1] * a[1];
            assert!((obs.observation(t).norm_squared() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesize_rejects_bad_input() {
        let d = dict();
        let active = ActiveSet::new(vec![40], 50).unwrap();
        assert!(synthesize(&d, &active, 2, 0, 1.0).is_err());
        assert!(synthesize(&d, &ActiveSet::empty(), 0, 0, 1.0).is_err());
    }

    #[test]
    fn zero_ratio_noise_is_identity() {
        let d = dict();
        let active = ActiveSet::random(d.n_atoms(), 3, 4).unwrap();
        let (obs, _) = synthesize(&d, &active, 4, 4, 1.0).unwrap();
        assert_eq!(add_noise(&obs, 0.0, 1).unwrap(), obs);
    }

    #[test]
    fn noise_level_tracks_signal_std() {
        let d = Dictionary::generate(100, 300, 2).unwrap();
        let active = ActiveSet::random(d.n_atoms(), 5, 2).unwrap();
        let (obs, _) = synthesize(&d, &active, 30, 2, 1.0).unwrap();
        let sigma = signal_std(&obs);
        let noisy = add_noise(&obs, 0.1, 2).unwrap();
        let diff = ObservationSet::from_matrix(noisy.matrix() - obs.matrix()).unwrap();
        let measured = signal_std(&diff);
        assert!((measured / (0.1 * sigma) - 1.0).abs() < 0.1, "{measured} vs {sigma}");
    }

    #[test]
    fn noise_on_zero_signal_is_degenerate() {
        let obs = ObservationSet::zeros(4, 3).unwrap();
        assert!(matches!(add_noise(&obs, 0.1, 0), Err(Error::Degenerate(_))));
        assert!(add_noise(&obs, -1.0, 0).is_err());
    }

    #[test]
    fn novel_injection_limits() {
        let obs = ObservationSet::from_matrix(DMatrix::from_element(5, 3, 0.5)).unwrap();
        let tiny = NovelAtomSpec::generate(5, 1e-15, 3).unwrap();
        let out = inject_novel_atom(&obs, &tiny, 3).unwrap();
        assert!((out.matrix() - obs.matrix()).amax() < 1e-12);

        let empty = ObservationSet::zeros(5, 0).unwrap();
        assert_eq!(inject_novel_atom(&empty, &tiny, 3).unwrap(), empty);

        let wrong = NovelAtomSpec::generate(4, 1.0, 3).unwrap();
        assert!(inject_novel_atom(&obs, &wrong, 3).is_err());
    }

    #[test]
    fn novel_atom_dominates_energy() {
        // Expected novel share with k unit-variance atoms and a std-10 novel
        // atom is 100 / (100 + k).
        let d = Dictionary::generate(200, 400, 13).unwrap();
        let k = 2;
        let mut share = 0.0;
        let trials = 10;
        for seed in 0..trials {
            let active = ActiveSet::random(d.n_atoms(), k, seed).unwrap();
            let (clean, _) = synthesize(&d, &active, 200, seed, 1.0).unwrap();
            let spec = NovelAtomSpec::generate(200, 10.0, seed).unwrap();
            let mixed = inject_novel_atom(&clean, &spec, seed).unwrap();
            let novel_energy = (mixed.matrix() - clean.matrix()).norm_squared();
            share += novel_energy / (novel_energy + clean.matrix().norm_squared());
        }
        share /= trials as f64;
        let expected = 100.0 / (100.0 + k as f64);
        assert!((share - expected).abs() < 0.01, "{share} vs {expected}");
    }

    #[test]
    fn novel_spec_validation() {
        assert!(NovelAtomSpec::new(DVector::from_element(2, 1.0), 1.0).is_err());
        assert!(NovelAtomSpec::new(DVector::from_vec(vec![1.0, 0.0]), 0.0).is_err());
        let s = NovelAtomSpec::generate(9, 10.0, 1).unwrap();
        assert!((s.atom().norm() - 1.0).abs() < 1e-12);
        // independent of the dictionary drawn from the same seed
        let d = Dictionary::generate(9, 1, 1).unwrap();
        assert!((d.atom(0) - s.atom()).amax() > 1e-3);
    }

    #[test]
    fn stacking() {
        let one = ObservationSet::from_vectors(2, &[DVector::from_vec(vec![1.0, 2.0])]).unwrap();
        assert_eq!(stack_observations(&one).unwrap().as_slice(), &[1.0, 2.0]);
        let two = ObservationSet::from_vectors(
            2,
            &[DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![3.0, 4.0])],
        )
        .unwrap();
        let y = stack_observations(&two).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(unstack_observations(&y, 2).unwrap(), two);
        assert!(stack_observations(&ObservationSet::zeros(2, 0).unwrap()).is_err());
        assert!(unstack_observations(&y, 3).is_err());
    }

    #[test]
    fn permutation_checks() {
        let d = dict();
        let (obs, _) = synthesize(&d, &ActiveSet::random(30, 2, 1).unwrap(), 3, 1, 1.0).unwrap();
        let p = obs.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.observation(0), obs.observation(2));
        assert!(obs.permuted(&[0, 0, 1]).is_err());
        assert!(obs.permuted(&[0, 1]).is_err());
    }
}
