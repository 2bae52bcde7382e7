//! Batch Corrected Projections Algorithm.
//!
//! Each atom is weighted by its rough contribution estimate `a_i(t) = B_i · y(t)`,
//! giving the projection matrix `φ(t) = B · diag(a(t))`. Stacking all steps,
//! the presence parameters solve the least-squares problem `Y ≈ Φ Θ`, with an
//! optional penalty `λ ‖Θ‖²`:
//!
//! ```text
//! Θ = (ΦᵀΦ + λI)⁻¹ ΦᵀY
//! ```
//!
//! The `T·N × M` stack is never formed for the primal solve. Because
//! `φ(t)ᵀφ(t) = diag(a(t)) · BᵀB · diag(a(t))`, the `M × M` normal matrix is the
//! elementwise product of the dictionary Gram with `Σ_t a(t) a(t)ᵀ`, and the
//! right-hand side is `ΦᵀY = Σ_t a(t) ∘ a(t)`. When `T·N < M` the regularized
//! solve switches to the equivalent `T·N × T·N` dual system
//! `Θ = Φᵀ (ΦΦᵀ + λI)⁻¹ Y`.

use nalgebra::{DMatrix, DVector};

use crate::dictionary::Dictionary;
use crate::linalg::{add_to_diagonal, SpdFactor};
use crate::signal::{stack_observations, ObservationSet};
use crate::{Error, Result};

/// Regularization constant used by the reference experiments (1 / 2.5).
pub const DEFAULT_LAMBDA: f64 = 0.4;

/// Default reciprocal-condition threshold below which the unregularized normal
/// equations are treated as singular.
pub const DEFAULT_MIN_RCOND: f64 = 1e-12;

/// `φ(t)`: column `i` is atom `i` scaled by its rough estimate `B_i · y(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    matrix: DMatrix<f64>,
    rough_estimates: DVector<f64>,
}

impl ProjectionMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `Â_i(t) = B_i · y(t)` for every atom.
    pub fn rough_estimates(&self) -> &DVector<f64> {
        &self.rough_estimates
    }
}

/// Presence parameters `Θ`, one per dictionary atom.
#[derive(Debug, Clone, PartialEq)]
pub struct PresenceVector {
    theta: DVector<f64>,
}

impl PresenceVector {
    pub fn new(theta: DVector<f64>) -> Result<Self> {
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("presence parameters are not finite".into()));
        }
        Ok(PresenceVector { theta })
    }

    pub fn zeros(n_atoms: usize) -> Self {
        PresenceVector {
            theta: DVector::zeros(n_atoms),
        }
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.theta.as_slice()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.theta
    }
}

/// Which normal-equation form the regularized solver factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalForm {
    /// Dual when `T·N < M`, primal otherwise.
    #[default]
    Auto,
    /// `(ΦᵀΦ + λI) Θ = ΦᵀY`, an `M × M` system.
    Primal,
    /// `Θ = Φᵀ (ΦΦᵀ + λI)⁻¹ Y`, a `T·N × T·N` system.
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchOptions {
    /// Minimum accepted reciprocal condition estimate of `ΦᵀΦ`.
    pub min_rcond: f64,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            min_rcond: DEFAULT_MIN_RCOND,
        }
    }
}

fn check_dims(dict: &Dictionary, n_dims: usize) -> Result<()> {
    if dict.n_dims() != n_dims {
        return Err(Error::arg(format!(
            "observation dimension {n_dims} does not match dictionary dimension {}",
            dict.n_dims()
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::arg(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

pub fn projection_matrix(dict: &Dictionary, y_t: &DVector<f64>) -> Result<ProjectionMatrix> {
    check_dims(dict, y_t.len())?;
    let rough_estimates = dict.correlate(y_t);
    let mut matrix = dict.atoms().clone();
    for (i, mut column) in matrix.column_iter_mut().enumerate() {
        column *= rough_estimates[i];
    }
    Ok(ProjectionMatrix {
        matrix,
        rough_estimates,
    })
}

/// The `T·N × M` matrix `Φ = (φ(1); …; φ(T))`.
pub fn stack_projections(dict: &Dictionary, obs: &ObservationSet) -> Result<DMatrix<f64>> {
    check_dims(dict, obs.n_dims())?;
    if obs.is_empty() {
        return Err(Error::arg("cannot stack projections of an empty observation set"));
    }
    let (n, m) = (dict.n_dims(), dict.n_atoms());
    let rough = rough_estimates(dict, obs);
    let mut stacked = DMatrix::zeros(n * obs.n_steps(), m);
    for t in 0..obs.n_steps() {
        let mut block = stacked.rows_mut(t * n, n);
        block.copy_from(dict.atoms());
        for (i, mut column) in block.column_iter_mut().enumerate() {
            column *= rough[(i, t)];
        }
    }
    Ok(stacked)
}

/// `M × T` matrix of rough estimates; column `t` is `Bᵀ y(t)`.
pub fn rough_estimates(dict: &Dictionary, obs: &ObservationSet) -> DMatrix<f64> {
    dict.atoms().tr_mul(obs.matrix())
}

/// `ΦᵀΦ = Σ_t φ(t)ᵀ φ(t)`, computed as `BᵀB ∘ (A Aᵀ)`.
pub fn presence_gram(dict: &Dictionary, obs: &ObservationSet) -> Result<DMatrix<f64>> {
    check_dims(dict, obs.n_dims())?;
    let rough = rough_estimates(dict, obs);
    Ok(presence_gram_from(dict, &rough))
}

fn presence_gram_from(dict: &Dictionary, rough: &DMatrix<f64>) -> DMatrix<f64> {
    let mut gram = dict.gram();
    let outer = rough * rough.transpose();
    gram.component_mul_assign(&outer);
    gram
}

/// `ΦᵀY = Σ_t a(t) ∘ a(t)`.
fn presence_rhs(rough: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        rough.nrows(),
        rough.row_iter().map(|row| row.norm_squared()),
    )
}

/// Unregularized CPA, `Θ = (ΦᵀΦ)⁻¹ ΦᵀY`.
pub fn solve_cpa_batch(dict: &Dictionary, obs: &ObservationSet) -> Result<PresenceVector> {
    solve_cpa_batch_with(dict, obs, &BatchOptions::default())
}

pub fn solve_cpa_batch_with(
    dict: &Dictionary,
    obs: &ObservationSet,
    options: &BatchOptions,
) -> Result<PresenceVector> {
    check_dims(dict, obs.n_dims())?;
    if obs.is_empty() {
        return Err(Error::arg("batch CPA needs at least one observation"));
    }
    let rows = obs.n_steps() * obs.n_dims();
    if rows < dict.n_atoms() {
        return Err(Error::Underdetermined {
            rows,
            atoms: dict.n_atoms(),
        });
    }
    let rough = rough_estimates(dict, obs);
    let gram = presence_gram_from(dict, &rough);
    let singular = |rcond| Error::Singular {
        rcond,
        threshold: options.min_rcond,
    };
    let factor = SpdFactor::new(gram).ok_or_else(|| singular(0.0))?;
    if factor.rcond() < options.min_rcond {
        return Err(singular(factor.rcond()));
    }
    PresenceVector::new(factor.solve_vec(&presence_rhs(&rough)))
}

/// Tikhonov-regularized CPA, `Θ = (ΦᵀΦ + λI)⁻¹ ΦᵀY`. An empty record gives `Θ = 0`.
pub fn solve_cpa_regularized(
    dict: &Dictionary,
    obs: &ObservationSet,
    lambda: f64,
) -> Result<PresenceVector> {
    solve_cpa_regularized_via(dict, obs, lambda, NormalForm::Auto)
}

pub fn solve_cpa_regularized_via(
    dict: &Dictionary,
    obs: &ObservationSet,
    lambda: f64,
    form: NormalForm,
) -> Result<PresenceVector> {
    check_lambda(lambda)?;
    check_dims(dict, obs.n_dims())?;
    if obs.is_empty() {
        return Ok(PresenceVector::zeros(dict.n_atoms()));
    }
    let rows = obs.n_steps() * obs.n_dims();
    let use_dual = match form {
        NormalForm::Auto => rows < dict.n_atoms(),
        NormalForm::Primal => false,
        NormalForm::Dual => true,
    };
    let not_pd = || Error::Numerical("regularized normal matrix is not positive definite".into());
    if use_dual {
        let phi = stack_projections(dict, obs)?;
        let mut kernel = &phi * phi.transpose();
        add_to_diagonal(&mut kernel, lambda);
        let factor = SpdFactor::new(kernel).ok_or_else(not_pd)?;
        let z = factor.solve_vec(&stack_observations(obs)?);
        PresenceVector::new(phi.tr_mul(&z))
    } else {
        let rough = rough_estimates(dict, obs);
        let mut normal = presence_gram_from(dict, &rough);
        add_to_diagonal(&mut normal, lambda);
        let factor = SpdFactor::new(normal).ok_or_else(not_pd)?;
        PresenceVector::new(factor.solve_vec(&presence_rhs(&rough)))
    }
}

/// Ridge regression on the amplitudes themselves, one step at a time:
/// `Â(t) = (BᵀB + λI)⁻¹ Bᵀ y(t)`. Returns a `T × M` matrix. Unlike CPA this
/// spreads energy over many atoms.
pub fn solve_ridge_amplitudes(
    dict: &Dictionary,
    obs: &ObservationSet,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    check_dims(dict, obs.n_dims())?;
    let b = dict.atoms();
    let not_pd = || Error::Numerical("ridge normal matrix is not positive definite".into());
    let amplitudes = if dict.n_dims() < dict.n_atoms() {
        // Bᵀ (BBᵀ + λI)⁻¹ Y
        let mut outer = b * b.transpose();
        add_to_diagonal(&mut outer, lambda);
        let factor = SpdFactor::new(outer).ok_or_else(not_pd)?;
        b.tr_mul(&factor.solve_mat(obs.matrix()))
    } else {
        let mut gram = dict.gram();
        add_to_diagonal(&mut gram, lambda);
        let factor = SpdFactor::new(gram).ok_or_else(not_pd)?;
        factor.solve_mat(&b.tr_mul(obs.matrix()))
    };
    Ok(amplitudes.transpose())
}
