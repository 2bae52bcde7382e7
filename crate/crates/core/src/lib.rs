//! Sparse recovery of multiple-measurement-vector signals with the Corrected
//! Projections Algorithm (CPA).
//!
//! CPA does not estimate atom amplitudes directly. Every atom is weighted by its
//! rough per-step contribution estimate `B_i · y(t)` and a single time-invariant
//! presence parameter `θ_i` per atom is fitted by least squares. With a Tikhonov
//! penalty on `θ` the problem has a closed form, and the same solution can be
//! reached one observation at a time with a recursive gain update.
//!
//! Modules:
//! - [`dictionary`]: random unit-norm dictionaries, coherence, dimension bounds.
//! - [`signal`]: synthetic observations, measurement noise, novel atoms.
//! - [`cpa`]: batch and regularized CPA, plus the ridge-on-amplitudes contrast.
//! - [`icpa`]: the recursive (streaming) regularized CPA.
//! - [`baselines`]: M-BMP and regularized M-FOCUSS.
//! - [`evaluation`]: F-measure scoring and representation-density metrics.
//! - [`io`]: binary and CSV persistence formats.

pub mod baselines;
pub mod cpa;
pub mod dictionary;
mod error;
pub mod evaluation;
pub mod icpa;
pub mod io;
pub(crate) mod linalg;
pub mod rng;
pub mod signal;

pub use baselines::{MfocussOutcome, MfocussParams, MmvCoefficients};
pub use cpa::{PresenceVector, ProjectionMatrix};
pub use dictionary::{CoherenceReport, Dictionary};
pub use error::{Error, Result};
pub use evaluation::{DensityReport, PrfResult, TrialSummary};
pub use icpa::{GainMatrix, IcpaState};
pub use signal::{ActiveSet, AmplitudeSeries, NovelAtomSpec, ObservationSet};
