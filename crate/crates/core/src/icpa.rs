//! Recursive (streaming) regularized CPA.
//!
//! Observations are folded in one at a time. With `φ = φ(T)` built from the new
//! observation and `ŷ = φ Θ(T−1)`:
//!
//! ```text
//! P(T) = P(T−1) − P(T−1) φᵀ (I_N + φ P(T−1) φᵀ)⁻¹ φ P(T−1)
//! Θ(T) = Θ(T−1) + P(T) φᵀ (y(T) − ŷ)
//! ```
//!
//! Starting from `Θ(0) = 0` and `P(0) = I_M / λ`, the gain equals
//! `(λI + Σ_t φ(t)ᵀφ(t))⁻¹` after every step and `Θ(T)` equals the batch
//! regularized solution over the first `T` observations. Each step factors only
//! an `N × N` matrix; the cost is `O(M² N)` per observation and the state holds
//! a dense `M × M` gain.

use nalgebra::{DMatrix, DVector};

use crate::cpa::PresenceVector;
use crate::dictionary::Dictionary;
use crate::linalg::{add_to_diagonal, symmetrize, SpdFactor};
use crate::signal::ObservationSet;
use crate::{Error, Result};

/// Largest `M` for which `step` re-checks positive definiteness of the gain
/// when debug assertions are on.
const DEBUG_PD_CHECK_MAX_ATOMS: usize = 64;

/// The symmetric `M × M` gain `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    matrix: DMatrix<f64>,
}

impl GainMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_atoms(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest `|P_ij − P_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.matrix.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (&self.matrix - self.matrix.transpose()).amax() / scale
    }
}

/// State of one observation stream.
#[derive(Debug, Clone, PartialEq)]
pub struct IcpaState {
    theta: DVector<f64>,
    gain: GainMatrix,
    steps_processed: u64,
}

impl IcpaState {
    /// `Θ = 0`, `P = I / λ`, no steps processed.
    pub fn new(n_atoms: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::arg(format!("lambda must be positive, got {lambda}")));
        }
        if n_atoms == 0 {
            return Err(Error::arg("need at least one atom"));
        }
        Ok(IcpaState {
            theta: DVector::zeros(n_atoms),
            gain: GainMatrix {
                matrix: DMatrix::from_diagonal_element(n_atoms, n_atoms, 1.0 / lambda),
            },
            steps_processed: 0,
        })
    }

    /// Rebuilds a state from a checkpoint. The gain must be square, match `theta`
    /// and be symmetric within `1e-10` relative.
    pub fn from_parts(theta: DVector<f64>, gain: DMatrix<f64>, steps_processed: u64) -> Result<Self> {
        if gain.nrows() != gain.ncols() || gain.nrows() != theta.len() || theta.is_empty() {
            return Err(Error::arg(format!(
                "gain {}x{} does not match {} presence parameters",
                gain.nrows(),
                gain.ncols(),
                theta.len()
            )));
        }
        let gain = GainMatrix { matrix: gain };
        if gain.asymmetry() > 1e-10 {
            return Err(Error::arg("gain matrix is not symmetric"));
        }
        Ok(IcpaState {
            theta,
            gain,
            steps_processed,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// Snapshot of `Θ(T)` after the steps processed so far.
    pub fn presence(&self) -> Result<PresenceVector> {
        PresenceVector::new(self.theta.clone())
    }

    pub fn gain(&self) -> &GainMatrix {
        &self.gain
    }

    pub fn steps_processed(&self) -> u64 {
        self.steps_processed
    }

    /// Folds in one observation. On error the state is left unchanged.
    pub fn step(&mut self, dict: &Dictionary, y_t: &DVector<f64>) -> Result<()> {
        if dict.n_atoms() != self.n_atoms() {
            return Err(Error::arg(format!(
                "state has {} atoms, dictionary has {}",
                self.n_atoms(),
                dict.n_atoms()
            )));
        }
        if y_t.len() != dict.n_dims() {
            return Err(Error::arg(format!(
                "observation dimension {} does not match dictionary dimension {}",
                y_t.len(),
                dict.n_dims()
            )));
        }
        let b = dict.atoms();
        let rough = dict.correlate(y_t);

        // φᵀ = diag(a) Bᵀ, M × N
        let mut phi_t = b.transpose();
        for (i, mut row) in phi_t.row_iter_mut().enumerate() {
            row *= rough[i];
        }
        let p = &self.gain.matrix;
        let p_phi_t = p * &phi_t;

        let mut innovation = phi_t.tr_mul(&p_phi_t);
        add_to_diagonal(&mut innovation, 1.0);
        symmetrize(&mut innovation);
        let factor = SpdFactor::new(innovation).ok_or_else(|| {
            Error::Numerical("innovation matrix I + φPφᵀ is not positive definite".into())
        })?;
        let gain_t = factor.solve_mat(&p_phi_t.transpose());
        let mut p_new = p - &p_phi_t * gain_t;
        symmetrize(&mut p_new);

        // ŷ = φ Θ(T−1) = B (a ∘ Θ)
        let predicted = b * rough.component_mul(&self.theta);
        let error = y_t - predicted;
        let drive = rough.component_mul(&b.tr_mul(&error));
        let theta_new = &self.theta + &p_new * drive;

        if theta_new.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("presence update is not finite".into()));
        }
        debug_assert!(
            p_new.nrows() > DEBUG_PD_CHECK_MAX_ATOMS || p_new.clone().cholesky().is_some(),
            "gain lost positive definiteness"
        );

        self.theta = theta_new;
        self.gain.matrix = p_new;
        self.steps_processed += 1;
        Ok(())
    }
}

pub fn init_state(n_atoms: usize, lambda: f64) -> Result<IcpaState> {
    IcpaState::new(n_atoms, lambda)
}

/// Functional form of [`IcpaState::step`].
pub fn step(mut state: IcpaState, dict: &Dictionary, y_t: &DVector<f64>) -> Result<IcpaState> {
    state.step(dict, y_t)?;
    Ok(state)
}

/// Runs the recursion over every observation and reports `Θ(T)`.
pub fn run(dict: &Dictionary, obs: &ObservationSet, lambda: f64) -> Result<PresenceVector> {
    let mut state = IcpaState::new(dict.n_atoms(), lambda)?;
    if obs.n_dims() != dict.n_dims() {
        return Err(Error::arg(format!(
            "observation dimension {} does not match dictionary dimension {}",
            obs.n_dims(),
            dict.n_dims()
        )));
    }
    for t in 0..obs.n_steps() {
        state.step(dict, &obs.observation(t).clone_owned())?;
    }
    state.presence()
}
