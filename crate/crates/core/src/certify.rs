//! Fidelity, overlap tables, the fidelity-based dimensionality witness and
//! dense-coding mutual information.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bellbasis::{bell_state_minus, BellIndex};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, PureState};

/// `⟨ψ|ρ|ψ⟩` for a normalized target.
pub fn fidelity(rho: &DensityMatrix, target: &PureState) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: target.dim(),
        });
    }
    Ok(rho.expectation(target.as_vector()))
}

/// Rows are measured states, columns are reference basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    values: DMatrix<f64>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl OverlapMatrix {
    pub fn new(values: DMatrix<f64>, row_labels: Vec<String>, col_labels: Vec<String>) -> Result<Self> {
        if row_labels.len() != values.nrows() || col_labels.len() != values.ncols() {
            return Err(Error::DimensionMismatch {
                expected: values.nrows(),
                found: row_labels.len(),
            });
        }
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || **v < -1e-9 || **v > 1.0 + 1e-9)
        {
            return Err(Error::InvalidArgument(format!("overlap {v} outside [0, 1]")));
        }
        Ok(OverlapMatrix {
            values,
            row_labels,
            col_labels,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    /// Overlap of each row with the column carrying the same label, falling
    /// back to positional diagonal when labels do not match.
    pub fn diagonal(&self) -> Vec<f64> {
        self.row_labels
            .iter()
            .enumerate()
            .map(|(i, label)| {
                let j = self.col_labels.iter().position(|c| c == label).unwrap_or(i);
                self.values[(i, j)]
            })
            .collect()
    }

    pub fn mean_diagonal(&self) -> f64 {
        let d = self.diagonal();
        d.iter().sum::<f64>() / d.len() as f64
    }

    /// Sample standard deviation of the diagonal.
    pub fn std_diagonal(&self) -> f64 {
        let d = self.diagonal();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let n = d.len() as f64;
        (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
    }
}

/// Entry `(i, j)` is `fidelity(states[i], basis[j])`.
pub fn overlap_matrix(states: &[DensityMatrix], basis: &[PureState]) -> Result<DMatrix<f64>> {
    if states.is_empty() || basis.is_empty() {
        return Err(Error::InvalidArgument("empty overlap input".into()));
    }
    let mut out = DMatrix::zeros(states.len(), basis.len());
    for (i, rho) in states.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            out[(i, j)] = fidelity(rho, b)?;
        }
    }
    Ok(out)
}

/// `(k−1)/d`: the largest fidelity with a maximally entangled `d`-dimensional
/// target reachable by any state of Schmidt number below `k`. Exceeding it
/// certifies Schmidt number at least `k`.
pub fn witness_bound(k: usize, d: usize) -> Result<f64> {
    if k < 1 || k > d {
        return Err(Error::InvalidArgument(format!("witness level k={k} outside 1..={d}")));
    }
    Ok((k - 1) as f64 / d as f64)
}

/// Largest `k ∈ [1, d]` with `F > (k−1)/d`; 1 when no bound is exceeded.
pub fn entanglement_dimensionality(fidelity: f64, d: usize) -> usize {
    (1..=d)
        .rev()
        .find(|&k| fidelity > (k - 1) as f64 / d as f64)
        .unwrap_or(1)
}

/// Mutual information in bits of the channel whose rows are the (row-normalized)
/// `confusion` matrix, under a uniform input prior.
pub fn mutual_information(confusion: &DMatrix<f64>) -> Result<f64> {
    let (n, m) = confusion.shape();
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("empty confusion matrix".into()));
    }
    if confusion.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidArgument(
            "confusion entries must be finite and non-negative".into(),
        ));
    }
    let mut cond = confusion.clone();
    for (i, mut row) in cond.row_iter_mut().enumerate() {
        let s: f64 = row.sum();
        if s <= 0.0 {
            return Err(Error::InvalidArgument(format!("confusion row {i} sums to zero")));
        }
        row /= s;
    }
    let prior = 1.0 / n as f64;
    let marginal: Vec<f64> = (0..m).map(|j| prior * cond.column(j).sum()).collect();
    let mut info = 0.0;
    for i in 0..n {
        for j in 0..m {
            let p = cond[(i, j)];
            if p > 0.0 {
                info += prior * p * (p / marginal[j]).log2();
            }
        }
    }
    Ok(info.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub target: BellIndex,
    pub fidelity: f64,
    /// `(d−1)/d`, the ceiling for Schmidt number `d − 1`.
    pub witness_bound: f64,
    pub passes_witness: bool,
    pub d_ent: usize,
}

/// Fidelity to `|ψ_{m,n}⟩` (minus convention) and the full-dimension verdict.
pub fn certify(rho: &DensityMatrix, target: BellIndex) -> Result<CertificationReport> {
    let f = fidelity(rho, &bell_state_minus(target))?;
    Ok(certify_fidelity(f, target))
}

/// Verdict from an already-known fidelity.
pub fn certify_fidelity(fidelity: f64, target: BellIndex) -> CertificationReport {
    let d = target.d;
    let bound = (d - 1) as f64 / d as f64;
    CertificationReport {
        target,
        fidelity,
        witness_bound: bound,
        passes_witness: fidelity > bound,
        d_ent: entanglement_dimensionality(fidelity, d),
    }
}
