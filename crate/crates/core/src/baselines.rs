//! Multiple-measurement-vector baselines: basic matching pursuit (M-BMP) and
//! regularized M-FOCUSS.

use nalgebra::{DMatrix, DVector};

use crate::dictionary::Dictionary;
use crate::linalg::{add_to_diagonal, SpdFactor};
use crate::signal::ObservationSet;
use crate::{Error, Result};

pub const DEFAULT_MBMP_MAX_ITERS: usize = 200;

/// M-BMP stops once the residual falls below this fraction of the signal norm.
pub const MBMP_RESIDUAL_TOL: f64 = 1e-12;

/// Estimated contributions, `M` rows (atoms) by `T` columns (steps).
#[derive(Debug, Clone, PartialEq)]
pub struct MmvCoefficients {
    values: DMatrix<f64>,
}

impl MmvCoefficients {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("coefficients are not finite".into()));
        }
        Ok(MmvCoefficients { values })
    }

    pub fn zeros(n_atoms: usize, n_steps: usize) -> Self {
        MmvCoefficients {
            values: DMatrix::zeros(n_atoms, n_steps),
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_atoms(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.values.ncols()
    }

    /// Atoms with at least one nonzero coefficient.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n_atoms())
            .filter(|&i| self.values.row(i).iter().any(|&x| x != 0.0))
            .collect()
    }
}

/// Per-atom detection score: the L2 norm of the atom's row over time.
pub fn atom_scores(coeffs: &MmvCoefficients) -> DVector<f64> {
    DVector::from_iterator(
        coeffs.n_atoms(),
        coeffs.values().row_iter().map(|row| row.norm()),
    )
}

fn check_dims(dict: &Dictionary, obs: &ObservationSet) -> Result<()> {
    if dict.n_dims() != obs.n_dims() {
        return Err(Error::arg(format!(
            "observation dimension {} does not match dictionary dimension {}",
            obs.n_dims(),
            dict.n_dims()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbmpOutcome {
    pub coefficients: MmvCoefficients,
    pub iterations: usize,
    /// Frobenius norm of the residual after each iteration, preceded by the
    /// signal norm.
    pub residual_norms: Vec<f64>,
}

/// Basic MMV matching pursuit. See [`solve_mbmp_traced`].
pub fn solve_mbmp(
    dict: &Dictionary,
    obs: &ObservationSet,
    max_iters: usize,
) -> Result<MmvCoefficients> {
    Ok(solve_mbmp_traced(dict, obs, max_iters)?.coefficients)
}

/// Each iteration picks the atom whose correlations with the residual matrix
/// have the largest L2 norm over time (lowest index on ties), adds those
/// correlations to its coefficients and removes its contribution from the
/// residual. Atoms may be picked again; no orthogonalization is done.
pub fn solve_mbmp_traced(
    dict: &Dictionary,
    obs: &ObservationSet,
    max_iters: usize,
) -> Result<MbmpOutcome> {
    check_dims(dict, obs)?;
    if max_iters == 0 {
        return Err(Error::arg("max_iters must be at least 1"));
    }
    let b = dict.atoms();
    let mut residual = obs.matrix().clone();
    let mut coeffs = DMatrix::zeros(dict.n_atoms(), obs.n_steps());
    let signal_norm = residual.norm();
    let mut residual_norms = vec![signal_norm];
    let mut iterations = 0;
    if signal_norm > 0.0 {
        while iterations < max_iters {
            let corr = b.tr_mul(&residual);
            let mut best = (0, f64::NEG_INFINITY);
            for (i, row) in corr.row_iter().enumerate() {
                let s = row.norm_squared();
                if s > best.1 {
                    best = (i, s);
                }
            }
            let i = best.0;
            let c = corr.row(i).clone_owned();
            let mut row = coeffs.row_mut(i);
            row += &c;
            residual.ger(-1.0, &b.column(i), &c.transpose(), 1.0);
            iterations += 1;
            let norm = residual.norm();
            residual_norms.push(norm);
            if norm <= MBMP_RESIDUAL_TOL * signal_norm {
                break;
            }
        }
    }
    Ok(MbmpOutcome {
        coefficients: MmvCoefficients::new(coeffs)?,
        iterations,
        residual_norms,
    })
}

/// Regularized M-FOCUSS hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfocussParams {
    pub lambda: f64,
    pub p_norm: f64,
    /// Stop once the relative Frobenius change of the coefficients is below this.
    pub epsilon: f64,
    /// Atoms whose weight drops below this are removed for the rest of the solve.
    pub prune_gamma: f64,
    pub max_iters: usize,
}

impl Default for MfocussParams {
    fn default() -> Self {
        MfocussParams {
            lambda: 1e-3,
            p_norm: 0.8,
            epsilon: 1e-8,
            prune_gamma: 1e-4,
            max_iters: 500,
        }
    }
}

impl MfocussParams {
    pub fn with_lambda(lambda: f64) -> Self {
        MfocussParams {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda > 0.0
            && self.lambda.is_finite()
            && self.p_norm > 0.0
            && self.p_norm <= 1.0
            && self.epsilon > 0.0
            && self.prune_gamma > 0.0
            && self.max_iters > 0;
        if !ok {
            return Err(Error::arg(format!("invalid M-FOCUSS parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfocussOutcome {
    pub coefficients: MmvCoefficients,
    pub iterations: usize,
    /// False when `max_iters` was reached before the change criterion.
    pub converged: bool,
    /// [`mfocuss_objective`] after each iteration.
    pub objective_trace: Vec<f64>,
    /// Number of atoms still in play when each iteration's solve ran.
    pub support_trace: Vec<usize>,
}

/// `‖Y − B X‖²_F + (2λ/p) Σ_i ‖X_i‖₂^p`.
///
/// Each reweighted solve minimizes a quadratic majorizer of exactly this
/// function, so it does not increase from one iteration to the next (pruning
/// aside).
pub fn mfocuss_objective(
    dict: &Dictionary,
    obs: &ObservationSet,
    coeffs: &MmvCoefficients,
    params: &MfocussParams,
) -> f64 {
    let fit = (obs.matrix() - dict.atoms() * coeffs.values()).norm_squared();
    let penalty: f64 = atom_scores(coeffs).iter().map(|c| c.powf(params.p_norm)).sum();
    fit + 2.0 * params.lambda / params.p_norm * penalty
}

/// Iteratively reweighted least squares. Starting from unit weights, every
/// iteration solves
///
/// ```text
/// X = W (BW)ᵀ (BW(BW)ᵀ + λI)⁻¹ Y,   W = diag(w)
/// ```
///
/// over the atoms still in play, then sets `w_i = ‖X_i‖₂^(1 − p/2)` and drops
/// atoms with `w_i < prune_gamma` for good. When fewer atoms than dimensions
/// remain the equivalent `m × m` system `W ((BW)ᵀBW + λI)⁻¹ (BW)ᵀ Y` is used.
pub fn solve_mfocuss(
    dict: &Dictionary,
    obs: &ObservationSet,
    params: &MfocussParams,
) -> Result<MfocussOutcome> {
    params.validate()?;
    check_dims(dict, obs)?;
    let (n, m_total, t) = (dict.n_dims(), dict.n_atoms(), obs.n_steps());
    let b = dict.atoms();
    let y = obs.matrix();

    let mut keep: Vec<usize> = (0..m_total).collect();
    let mut weights = DVector::from_element(m_total, 1.0);
    let mut current = DMatrix::<f64>::zeros(m_total, t);
    let mut has_iterate = false;
    let mut objective_trace = Vec::new();
    let mut support_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iters {
        let m = keep.len();
        support_trace.push(m);
        let mut bw = DMatrix::zeros(n, m);
        for (col, &i) in keep.iter().enumerate() {
            bw.set_column(col, &(b.column(i) * weights[col]));
        }
        let not_pd = || Error::Numerical("M-FOCUSS system is not positive definite".into());
        let solved = if m < n {
            let mut normal = bw.tr_mul(&bw);
            add_to_diagonal(&mut normal, params.lambda);
            SpdFactor::new(normal)
                .ok_or_else(not_pd)?
                .solve_mat(&bw.tr_mul(y))
        } else {
            let mut outer = &bw * bw.transpose();
            add_to_diagonal(&mut outer, params.lambda);
            let z = SpdFactor::new(outer).ok_or_else(not_pd)?.solve_mat(y);
            bw.tr_mul(&z)
        };
        let mut next = DMatrix::zeros(m_total, t);
        for (col, &i) in keep.iter().enumerate() {
            next.set_row(i, &(solved.row(col) * weights[col]));
        }
        iterations += 1;

        let prev_norm = current.norm();
        let change = (&next - &current).norm();
        let relative = if prev_norm > 0.0 {
            change / prev_norm
        } else if change == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let coeffs = MmvCoefficients::new(next)?;
        objective_trace.push(mfocuss_objective(dict, obs, &coeffs, params));
        current = coeffs.values;

        if has_iterate && relative < params.epsilon {
            converged = true;
            break;
        }
        has_iterate = true;

        let exponent = 1.0 - params.p_norm / 2.0;
        let mut kept = Vec::with_capacity(keep.len());
        let mut kept_weights = Vec::with_capacity(keep.len());
        for &i in &keep {
            let w = current.row(i).norm().powf(exponent);
            if w >= params.prune_gamma {
                kept.push(i);
                kept_weights.push(w);
            } else {
                current.row_mut(i).fill(0.0);
            }
        }
        keep = kept;
        weights = DVector::from_vec(kept_weights);
        if keep.is_empty() {
            converged = true;
            break;
        }
    }

    Ok(MfocussOutcome {
        coefficients: MmvCoefficients::new(current)?,
        iterations,
        converged,
        objective_trace,
        support_trace,
    })
}
