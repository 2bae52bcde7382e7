//! Random overcomplete dictionaries of unit-norm atoms.

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

/// Column-norm tolerance accepted for a dictionary atom.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Selections whose residual norm drops below this during orthonormalization
/// are treated as linearly dependent.
pub const DEPENDENCE_TOL: f64 = 1e-10;

/// Columns processed per Gram block when scanning for mutual coherence.
const GRAM_BLOCK: usize = 256;

/// An `N × M` matrix whose columns (atoms) all have unit L2 norm.
///
/// Immutable once built; share it by reference across solvers and threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
}

/// Largest absolute inner product between two distinct atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceReport {
    pub coherence: f64,
    /// `(i, j)` with `i < j` where the maximum is attained (first in scan order).
    pub argmax_pair: (usize, usize),
}

impl Dictionary {
    /// Draws every entry i.i.d. standard normal (atom by atom, component by
    /// component) from the dictionary substream of `seed`, then scales each
    /// column to unit norm. A column that comes out exactly zero is redrawn.
    pub fn generate(n_dims: usize, n_atoms: usize, seed: u64) -> Result<Self> {
        if n_dims == 0 || n_atoms == 0 {
            return Err(Error::arg(format!(
                "dictionary dimensions must be positive, got {n_dims}x{n_atoms}"
            )));
        }
        let mut rng = stream_rng(seed, Stream::Dictionary);
        let mut atoms = DMatrix::zeros(n_dims, n_atoms);
        for mut column in atoms.column_iter_mut() {
            loop {
                for x in column.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
                let norm = column.norm();
                if norm > 0.0 {
                    column /= norm;
                    break;
                }
            }
        }
        Ok(Dictionary { atoms })
    }

    /// Wraps a matrix whose columns are already unit norm.
    pub fn from_matrix(atoms: DMatrix<f64>) -> Result<Self> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(Error::arg("dictionary must have at least one row and one atom"));
        }
        for (i, column) in atoms.column_iter().enumerate() {
            let norm = column.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::arg(format!(
                    "atom {i} has norm {norm}, expected 1 within {UNIT_NORM_TOL:e}"
                )));
            }
        }
        Ok(Dictionary { atoms })
    }

    /// Scales every column of `matrix` to unit norm.
    pub fn normalized(mut matrix: DMatrix<f64>) -> Result<Self> {
        for (i, mut column) in matrix.column_iter_mut().enumerate() {
            let norm = column.norm();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::Degenerate(format!("atom {i} has norm {norm}")));
            }
            column /= norm;
        }
        Self::from_matrix(matrix)
    }

    /// The `n × n` identity, an orthonormal dictionary.
    pub fn identity(n: usize) -> Result<Self> {
        Self::from_matrix(DMatrix::identity(n, n))
    }

    pub fn n_dims(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.atoms
    }

    /// Atom `i` (panics when out of range).
    pub fn atom(&self, i: usize) -> DVectorView<'_, f64> {
        self.atoms.column(i)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n_atoms() {
            return Err(Error::arg(format!(
                "atom index {i} out of range for {} atoms",
                self.n_atoms()
            )));
        }
        Ok(())
    }

    /// `c_{i,j} = B_i · B_j`.
    pub fn atom_inner(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.atoms.column(i).dot(&self.atoms.column(j)))
    }

    /// Rough contribution estimates `B_i · y` for every atom.
    pub fn correlate(&self, y: &DVector<f64>) -> DVector<f64> {
        self.atoms.tr_mul(y)
    }

    /// Full `M × M` Gram matrix. Callers decide whether `M` is small enough.
    pub fn gram(&self) -> DMatrix<f64> {
        self.atoms.tr_mul(&self.atoms)
    }

    /// Scans the Gram matrix in column blocks, so memory stays `O(M · block)`.
    pub fn mutual_coherence(&self) -> Result<CoherenceReport> {
        let m = self.n_atoms();
        if m < 2 {
            return Err(Error::arg("mutual coherence needs at least two atoms"));
        }
        let mut best = CoherenceReport {
            coherence: -1.0,
            argmax_pair: (0, 1),
        };
        let mut start = 0;
        while start < m {
            let end = (start + GRAM_BLOCK).min(m);
            let block = self.atoms.columns(start, end - start);
            let upper = self.atoms.columns(0, end);
            let inner = upper.tr_mul(&block);
            for (jj, column) in inner.column_iter().enumerate() {
                let j = start + jj;
                for i in 0..j {
                    let c = column[i].abs();
                    if c > best.coherence {
                        best = CoherenceReport {
                            coherence: c,
                            argmax_pair: (i, j),
                        };
                    }
                }
            }
            start = end;
        }
        Ok(best)
    }

    /// Copy with the selected atoms replaced by an orthonormal basis of their
    /// span (Gram-Schmidt in the given order, each projection applied twice).
    pub fn orthogonalize_subset(&self, indices: &[usize]) -> Result<Dictionary> {
        for (pos, &i) in indices.iter().enumerate() {
            self.check_index(i)?;
            if indices[..pos].contains(&i) {
                return Err(Error::arg(format!("duplicate atom index {i}")));
            }
        }
        if indices.len() > self.n_dims() {
            return Err(Error::arg(format!(
                "cannot orthonormalize {} atoms in {} dimensions",
                indices.len(),
                self.n_dims()
            )));
        }
        let mut atoms = self.atoms.clone();
        for (pos, &i) in indices.iter().enumerate() {
            let mut v = self.atoms.column(i).clone_owned();
            let original = v.norm();
            for _ in 0..2 {
                for &q in &indices[..pos] {
                    let basis = atoms.column(q);
                    let proj = basis.dot(&v);
                    v.axpy(-proj, &basis, 1.0);
                }
            }
            let norm = v.norm();
            if norm <= DEPENDENCE_TOL * original {
                return Err(Error::Degenerate(format!(
                    "atom {i} is linearly dependent on the preceding selection"
                )));
            }
            atoms.set_column(i, &(v / norm));
        }
        Ok(Dictionary { atoms })
    }
}

/// Dimension above which regularized CPA separates an orthogonal active set of
/// `k` atoms from the rest: `4 k² ln M`.
pub fn cpa_dimension_bound(k: usize, n_atoms: f64) -> Result<f64> {
    if k == 0 || n_atoms.is_nan() || n_atoms < 2.0 {
        return Err(Error::arg(format!(
            "need k >= 1 and at least two atoms, got k={k}, M={n_atoms}"
        )));
    }
    Ok(4.0 * (k * k) as f64 * n_atoms.ln())
}

/// Restricted-isometry dimension requirement `k ln(M / k)`.
pub fn rip_dimension_bound(k: usize, n_atoms: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    if n_atoms < k as f64 {
        return Err(Error::arg(format!("k={k} exceeds the {n_atoms} atoms")));
    }
    Ok(k as f64 * (n_atoms / k as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_1_SQRT_2};

    fn column_norm_error(d: &Dictionary) -> f64 {
        d.atoms()
            .column_iter()
            .map(|c| (c.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn generated_columns_are_unit_norm() {
        let d = Dictionary::generate(50, 300, 3).unwrap();
        assert_eq!((d.n_dims(), d.n_atoms()), (50, 300));
        assert!(column_norm_error(&d) < 1e-12);
    }

    #[test]
    fn single_atom() {
        let d = Dictionary::generate(4, 1, 11).unwrap();
        assert_eq!(d.atoms().shape(), (4, 1));
        assert!((d.atom(0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = Dictionary::generate(8, 16, 1).unwrap();
        let b = Dictionary::generate(8, 16, 1).unwrap();
        let bits = |d: &Dictionary| d.atoms().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(a, Dictionary::generate(8, 16, 2).unwrap());
    }

    #[test]
    fn rejects_empty_dimensions() {
        assert!(matches!(
            Dictionary::generate(0, 3, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(Dictionary::generate(3, 0, 0).is_err());
    }

    #[test]
    fn from_matrix_checks_norms() {
        let bad = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(Dictionary::from_matrix(bad.clone()).is_err());
        let d = Dictionary::normalized(bad).unwrap();
        assert!((d.atom(0)[0] - FRAC_1_SQRT_2).abs() < 1e-15);
        let zero = DMatrix::zeros(2, 1);
        assert!(matches!(Dictionary::normalized(zero), Err(Error::Degenerate(_))));
    }

    #[test]
    fn atom_inner_cases() {
        let d = Dictionary::generate(6, 5, 9).unwrap();
        assert!((d.atom_inner(2, 2).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(d.atom_inner(1, 3).unwrap(), d.atom_inner(3, 1).unwrap());
        assert!(d.atom_inner(0, 5).is_err());

        let e = Dictionary::identity(3).unwrap();
        assert_eq!(e.atom_inner(0, 1).unwrap(), 0.0);

        // B2 = (B1 + B⊥) / √2
        let m = DMatrix::from_column_slice(
            3,
            2,
            &[1.0, 0.0, 0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0],
        );
        let d = Dictionary::from_matrix(m).unwrap();
        assert!((d.atom_inner(0, 1).unwrap() - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn coherence_of_identity_is_zero() {
        let r = Dictionary::identity(5).unwrap().mutual_coherence().unwrap();
        assert_eq!(r.coherence, 0.0);
    }

    #[test]
    fn coherence_of_sixty_degree_pair() {
        let (s, c) = (60f64.to_radians().sin(), 60f64.to_radians().cos());
        let m = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, c, s]);
        let r = Dictionary::from_matrix(m).unwrap().mutual_coherence().unwrap();
        assert!((r.coherence - 0.5).abs() < 1e-15);
        assert_eq!(r.argmax_pair, (0, 1));
    }

    #[test]
    fn coherence_matches_naive_scan_across_blocks() {
        let d = Dictionary::generate(10, 600, 4).unwrap();
        let r = d.mutual_coherence().unwrap();
        let mut best = 0.0f64;
        for j in 0..d.n_atoms() {
            for i in 0..j {
                best = best.max(d.atom_inner(i, j).unwrap().abs());
            }
        }
        assert_eq!(r.coherence, best);
        let (i, j) = r.argmax_pair;
        assert!(i < j);
        assert_eq!(d.atom_inner(i, j).unwrap().abs(), r.coherence);
    }

    #[test]
    fn coherence_needs_two_atoms() {
        let d = Dictionary::generate(3, 1, 0).unwrap();
        assert!(d.mutual_coherence().is_err());
    }

    #[test]
    fn cpa_bound_values() {
        assert!((cpa_dimension_bound(1, E).unwrap() - 4.0).abs() < 1e-12);
        let b = cpa_dimension_bound(20, 10000.0).unwrap();
        assert!((b - 1600.0 * 10000f64.ln()).abs() < 1e-9);
        assert!((b - 14736.5).abs() < 0.1);
        assert!((cpa_dimension_bound(2, 2000.0).unwrap() - 121.6).abs() < 0.05);
        assert!(cpa_dimension_bound(0, 10.0).is_err());
        assert!(cpa_dimension_bound(1, 1.0).is_err());
    }

    #[test]
    fn rip_bound_values() {
        assert!((rip_dimension_bound(1, E).unwrap() - 1.0).abs() < 1e-12);
        assert!((rip_dimension_bound(20, 10000.0).unwrap() - 124.29).abs() < 0.01);
        assert_eq!(rip_dimension_bound(7, 7.0).unwrap(), 0.0);
        assert!(rip_dimension_bound(8, 7.0).is_err());
    }

    #[test]
    fn orthogonalize_orthonormal_selection_is_identity() {
        let d = Dictionary::identity(4).unwrap();
        let o = d.orthogonalize_subset(&[0, 2, 3]).unwrap();
        assert!((o.atoms() - d.atoms()).amax() < 1e-12);
    }

    #[test]
    fn orthogonalize_correlated_pair() {
        let d = Dictionary::generate(6, 10, 5).unwrap();
        let o = d.orthogonalize_subset(&[4, 7]).unwrap();
        let g = o.atom_inner(4, 7).unwrap();
        assert!(g.abs() < 1e-10);
        assert!((o.atom_inner(4, 4).unwrap() - 1.0).abs() < 1e-10);
        assert!((o.atom_inner(7, 7).unwrap() - 1.0).abs() < 1e-10);
        // first selected atom keeps its direction, untouched atoms are unchanged
        assert!((o.atom(4) - d.atom(4)).amax() < 1e-15);
        assert_eq!(o.atom(0), d.atom(0));
        assert!(column_norm_error(&o) < 1e-12);
    }

    #[test]
    fn orthogonalize_full_basis() {
        let d = Dictionary::generate(5, 9, 8).unwrap();
        let sel = [8, 1, 3, 0, 6];
        let o = d.orthogonalize_subset(&sel).unwrap();
        for (a, &i) in sel.iter().enumerate() {
            for &j in &sel[a..] {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((o.atom_inner(i, j).unwrap() - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn orthogonalize_errors() {
        let m = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let d = Dictionary::from_matrix(m).unwrap();
        assert!(matches!(d.orthogonalize_subset(&[0, 1]), Err(Error::Degenerate(_))));
        assert!(d.orthogonalize_subset(&[0, 0]).is_err());
        assert!(d.orthogonalize_subset(&[0, 3]).is_err());
        assert!(d.orthogonalize_subset(&[0, 1, 2]).is_err());
    }
}
