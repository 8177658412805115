use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CsiMatrix;
use crate::error::{Error, Result};

/// Known sub-grid `A x B`: every selected antenna paired with every selected subcarrier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    antennas: Vec<usize>,
    subcarriers: Vec<usize>,
}

fn check_indices(indices: &[usize], bound: usize, what: &str) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::Validation(format!("{what} subset is empty")));
    }
    if indices.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation(format!(
            "{what} indices must be sorted and unique"
        )));
    }
    if let Some(&last) = indices.last() {
        if last >= bound {
            return Err(Error::Validation(format!(
                "{what} index {last} out of range (< {bound})"
            )));
        }
    }
    Ok(())
}

impl SubsetSpec {
    /// Indices are checked for ordering and uniqueness here; range is checked
    /// against a concrete matrix in [`extract_known`] or [`SubsetSpec::check_bounds`].
    pub fn new(antennas: Vec<usize>, subcarriers: Vec<usize>) -> Result<Self> {
        check_indices(&antennas, usize::MAX, "antenna")?;
        check_indices(&subcarriers, usize::MAX, "subcarrier")?;
        Ok(Self {
            antennas,
            subcarriers,
        })
    }

    /// Evenly spaced `n_t0 x n_c0` subset of an `n_t x n_c` grid.
    pub fn uniform(n_t: usize, n_t0: usize, n_c: usize, n_c0: usize) -> Result<Self> {
        Self::new(uniform_subset(n_t, n_t0)?, uniform_subset(n_c, n_c0)?)
    }

    pub fn check_bounds(&self, n_t: usize, n_c: usize) -> Result<()> {
        check_indices(&self.antennas, n_t, "antenna")?;
        check_indices(&self.subcarriers, n_c, "subcarrier")
    }

    pub fn antennas(&self) -> &[usize] {
        &self.antennas
    }

    pub fn subcarriers(&self) -> &[usize] {
        &self.subcarriers
    }
}

/// `{0, step, ..., (n0 - 1) * step}` with `step = floor(n / n0)`.
pub fn uniform_subset(n: usize, n0: usize) -> Result<Vec<usize>> {
    if n0 == 0 || n0 > n {
        return Err(Error::Validation(format!(
            "subset size {n0} must be in [1, {n}]"
        )));
    }
    let step = n / n0;
    Ok((0..n0).map(|i| i * step).collect())
}

/// Known sub-matrix `H[A, B]`, shape `|A| x |B|`.
pub fn extract_known(h: &CsiMatrix, subset: &SubsetSpec) -> Result<CsiMatrix> {
    subset.check_bounds(h.n_t(), h.n_c())?;
    let entries: Vec<Complex64> = subset
        .antennas
        .iter()
        .flat_map(|&a| subset.subcarriers.iter().map(move |&b| h.get(a, b)))
        .collect();
    CsiMatrix::from_entries(subset.antennas.len(), subset.subcarriers.len(), entries)
}
