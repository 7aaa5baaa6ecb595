//! Density-matrix reconstruction by constrained χ² minimization.
//!
//! The objective is `χ²(ρ) = Σ_i (p_i^e − p_i^t(ρ))² / max(p_i^t(ρ), floor)` over
//! the set of unit-trace PSD matrices. Each outer round freezes the
//! denominators at the current iterate, which turns the objective into a convex
//! quadratic, and runs `inner_steps` accelerated projected gradient steps on it:
//!
//! ```text
//! ρ ← Π(y − ∇/L),  ∇ = −2 Σ_i w_i (p_i^e − p_i^t(y)) |v_i⟩⟨v_i|
//! ```
//!
//! where `Π` is the eigenvalue-simplex projection from [`crate::hilbert`] and
//! `y` the momentum point. `L` doubles until the quadratic upper bound holds and
//! momentum restarts when the frozen objective rises. Every iterate is
//! therefore a valid state.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{project_to_state_space, DensityMatrix, C64};
use crate::measurement::{CountRecord, MeasurementSetting};

/// Denominator floor used when the shot count is unknown; matches `1/(10·10⁴)`.
pub const DEFAULT_FLOOR: f64 = 1e-5;

/// Linear map `ρ ↦ (⟨v_i|ρ|v_i⟩)_i` for a fixed list of settings.
#[derive(Debug, Clone)]
pub struct MeasurementMap {
    d: usize,
    settings: Vec<MeasurementSetting>,
    /// Columns are the joint kets `v_i`.
    kets: DMatrix<C64>,
    rank: OnceLock<usize>,
}

impl MeasurementMap {
    pub fn new(d: usize, settings: Vec<MeasurementSetting>) -> Result<Self> {
        if settings.is_empty() {
            return Err(Error::InvalidArgument("no measurement settings".into()));
        }
        for s in &settings {
            s.validate(d)?;
        }
        let dim = d * d;
        let mut kets = DMatrix::zeros(dim, settings.len());
        for (i, s) in settings.iter().enumerate() {
            kets.set_column(i, &s.ket(d));
        }
        Ok(MeasurementMap {
            d,
            settings,
            kets,
            rank: OnceLock::new(),
        })
    }

    /// Single-arm dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Joint dimension `d²`.
    pub fn dim(&self) -> usize {
        self.d * self.d
    }

    pub fn settings(&self) -> &[MeasurementSetting] {
        &self.settings
    }

    pub fn len(&self) -> usize {
        self.settings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }

    /// Rank of the map on the real vector space of Hermitian matrices.
    pub fn rank(&self) -> usize {
        *self.rank.get_or_init(|| {
            let dim = self.dim();
            // row i: real coordinates of |v_i⟩⟨v_i| (diagonal, then Re/Im above it)
            let mut rows = DMatrix::<f64>::zeros(self.len(), dim * dim);
            for (i, v) in self.kets.column_iter().enumerate() {
                let mut c = 0;
                for a in 0..dim {
                    rows[(i, c)] = v[a].norm_sqr();
                    c += 1;
                    for b in a + 1..dim {
                        let z = v[a] * v[b].conj();
                        rows[(i, c)] = z.re;
                        rows[(i, c + 1)] = z.im;
                        c += 2;
                    }
                }
            }
            let gram = rows.transpose() * &rows;
            let eig = nalgebra::linalg::SymmetricEigen::new(gram);
            let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            eig.eigenvalues.iter().filter(|&&l| l > 1e-10 * max).count()
        })
    }

    pub fn check_complete(&self) -> Result<()> {
        let required = self.dim() * self.dim();
        let found = self.rank();
        if found < required {
            return Err(Error::InformationallyIncomplete { found, required });
        }
        Ok(())
    }

    fn forward_matrix(&self, rho: &DMatrix<C64>) -> Vec<f64> {
        let rv = rho * &self.kets;
        self.kets
            .column_iter()
            .zip(rv.column_iter())
            .map(|(v, w)| v.dotc(&w).re)
            .collect()
    }

    /// `Σ_i c_i |v_i⟩⟨v_i|`.
    fn adjoint(&self, coeffs: &[f64]) -> DMatrix<C64> {
        let mut scaled = self.kets.clone();
        for (mut col, &c) in scaled.column_iter_mut().zip(coeffs) {
            col *= C64::new(c, 0.0);
        }
        let g = scaled * self.kets.adjoint();
        (&g + g.adjoint()).scale(0.5)
    }

    /// Born probabilities of every setting.
    pub fn forward(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rho.dim(),
            });
        }
        Ok(self.forward_matrix(rho.matrix()))
    }
}

/// Element-wise Born probabilities of `rho` over `settings`.
pub fn forward_probabilities(rho: &DensityMatrix, settings: &[MeasurementSetting], d: usize) -> Result<Vec<f64>> {
    MeasurementMap::new(d, settings.to_vec())?.forward(rho)
}

#[derive(Debug, Clone)]
pub struct TomographyProblem {
    map: MeasurementMap,
    p_measured: Vec<f64>,
    shots: Option<u64>,
}

impl TomographyProblem {
    pub fn new(d: usize, settings: Vec<MeasurementSetting>, p_measured: Vec<f64>) -> Result<Self> {
        Self::with_map(MeasurementMap::new(d, settings)?, p_measured)
    }

    /// Reuses a prebuilt map, so the rank check runs once for many problems.
    pub fn with_map(map: MeasurementMap, p_measured: Vec<f64>) -> Result<Self> {
        if p_measured.len() != map.len() {
            return Err(Error::DimensionMismatch {
                expected: map.len(),
                found: p_measured.len(),
            });
        }
        if p_measured.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("measured probabilities"));
        }
        if let Some(p) = p_measured.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!(
                "measured probability {p} outside [0, 1]"
            )));
        }
        Ok(TomographyProblem {
            map,
            p_measured,
            shots: None,
        })
    }

    /// Frequencies `counts/shots`; frequencies above 1 are clipped. Records are
    /// used in the order given.
    pub fn from_counts(d: usize, records: &[CountRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("no count records".into()));
        }
        let settings = records.iter().map(|r| r.setting).collect();
        let p = records.iter().map(|r| r.frequency().min(1.0)).collect();
        let mut problem = Self::new(d, settings, p)?;
        let shots = records[0].shots;
        if records.iter().all(|r| r.shots == shots) {
            problem.shots = Some(shots);
        }
        Ok(problem)
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots = Some(shots);
        self
    }

    pub fn map(&self) -> &MeasurementMap {
        &self.map
    }

    pub fn p_measured(&self) -> &[f64] {
        &self.p_measured
    }

    pub fn shots(&self) -> Option<u64> {
        self.shots
    }

    /// `1/(10·shots)` when the shot count is known, else [`DEFAULT_FLOOR`].
    pub fn default_floor(&self) -> f64 {
        self.shots.map_or(DEFAULT_FLOOR, |s| 1.0 / (10.0 * s as f64))
    }
}

fn chi_square_of(p_e: &[f64], p_t: &[f64], floor: f64) -> f64 {
    p_e.iter().zip(p_t).map(|(e, t)| (e - t).powi(2) / t.max(floor)).sum()
}

/// `Σ (p_e − p_t)² / max(p_t, floor)`.
pub fn chi_square(rho: &DensityMatrix, problem: &TomographyProblem, floor: f64) -> Result<f64> {
    if floor.is_nan() || floor <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "χ² floor must be positive, got {floor}"
        )));
    }
    let p_t = problem.map.forward(rho)?;
    Ok(chi_square_of(&problem.p_measured, &p_t, floor))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Budget of projected-gradient steps across all weight refreshes.
    pub max_iters: usize,
    /// Stop once the relative χ² change across one refresh falls below this.
    pub tol: f64,
    /// Denominator floor; `None` picks [`TomographyProblem::default_floor`].
    pub floor: Option<f64>,
    /// Accelerated steps taken between refreshes of the χ² weights.
    pub inner_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 5000,
            tol: 1e-10,
            floor: None,
            inner_steps: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub chi_square: f64,
    pub initial_chi_square: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `‖p_e − p_t‖₂` at the returned state.
    pub residual_norm: f64,
    pub floor: f64,
    pub settings: usize,
}

#[derive(Debug, Clone)]
pub struct TomographyResult {
    pub rho: DensityMatrix,
    pub diagnostics: Diagnostics,
}

impl TomographyResult {
    pub fn chi_square(&self) -> f64 {
        self.diagnostics.chi_square
    }

    pub fn converged(&self) -> bool {
        self.diagnostics.converged
    }

    pub fn iterations(&self) -> usize {
        self.diagnostics.iterations
    }
}

fn frob_inner(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn weighted_sq(p_e: &[f64], p_t: &[f64], w: &[f64]) -> f64 {
    p_e.iter().zip(p_t).zip(w).map(|((e, t), w)| w * (e - t).powi(2)).sum()
}

/// Lipschitz estimate beyond which a step is declared stalled.
const MAX_LIPSCHITZ: f64 = 1e30;

/// Minimizes χ² over density matrices, starting from the maximally mixed state.
///
/// The denominators are frozen at the current iterate, the resulting weighted
/// least-squares surrogate is descended with accelerated projected gradient
/// (backtracking on the quadratic upper bound, restarting when the surrogate
/// rises), and the weights are refreshed. The iterate with the lowest true χ²
/// is returned; every iterate is a projection onto the state space.
pub fn reconstruct(problem: &TomographyProblem, opts: &SolverOptions) -> Result<TomographyResult> {
    reconstruct_observed(problem, opts, |_| {})
}

/// [`reconstruct`], calling `observe` with every accepted iterate.
pub fn reconstruct_observed(
    problem: &TomographyProblem,
    opts: &SolverOptions,
    mut observe: impl FnMut(&DMatrix<C64>),
) -> Result<TomographyResult> {
    problem.map.check_complete()?;
    let floor = opts.floor.unwrap_or_else(|| problem.default_floor());
    if floor.is_nan() || floor <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "χ² floor must be positive, got {floor}"
        )));
    }
    if opts.inner_steps == 0 {
        return Err(Error::InvalidArgument("inner_steps must be at least 1".into()));
    }
    let map = &problem.map;
    let p_e = &problem.p_measured;
    let dim = map.dim();

    let mut x = DensityMatrix::maximally_mixed(dim).into_matrix();
    let mut p_x = map.forward_matrix(&x);
    let mut chi = chi_square_of(p_e, &p_x, floor);
    let initial_chi = chi;
    let mut best = (x.clone(), p_x.clone(), chi);

    let mut lipschitz = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < opts.max_iters {
        let weights: Vec<f64> = p_x.iter().map(|t| 1.0 / t.max(floor)).collect();
        let gradient = |p: &[f64]| {
            let coeffs: Vec<f64> = p_e
                .iter()
                .zip(p)
                .zip(&weights)
                .map(|((e, t), w)| -2.0 * w * (e - t))
                .collect();
            map.adjoint(&coeffs)
        };
        let mut fx = weighted_sq(p_e, &p_x, &weights);
        let mut y = x.clone();
        let mut p_y = p_x.clone();
        let mut t = 1.0f64;
        let mut progressed = false;

        for _ in 0..opts.inner_steps {
            if iterations >= opts.max_iters {
                break;
            }
            iterations += 1;
            let fy = weighted_sq(p_e, &p_y, &weights);
            let g = gradient(&p_y);
            let (cand, p_c, fc) = loop {
                let c = project_to_state_space(&(&y - g.scale(1.0 / lipschitz)))?.into_matrix();
                let p_c = map.forward_matrix(&c);
                let fc = weighted_sq(p_e, &p_c, &weights);
                let delta = &c - &y;
                let bound = fy + frob_inner(&g, &delta) + 0.5 * lipschitz * frob_inner(&delta, &delta);
                if fc <= bound + 1e-15 * fy.max(1.0) {
                    break (c, p_c, fc);
                }
                lipschitz *= 2.0;
                if lipschitz > MAX_LIPSCHITZ {
                    converged = true;
                    break 'outer;
                }
            };
            if fc > fx {
                y = x.clone();
                p_y = p_x.clone();
                t = 1.0;
                continue;
            }
            progressed = true;
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let momentum = (t - 1.0) / t_next;
            y = &cand + (&cand - &x).scale(momentum);
            p_y = p_c.iter().zip(&p_x).map(|(c, o)| c + momentum * (c - o)).collect();
            x = cand;
            observe(&x);
            p_x = p_c;
            fx = fc;
            t = t_next;
            lipschitz *= 0.95;
        }

        let new_chi = chi_square_of(p_e, &p_x, floor);
        if new_chi < best.2 {
            best = (x.clone(), p_x.clone(), new_chi);
        }
        let change = (chi - new_chi).abs();
        chi = new_chi;
        if !progressed || chi <= f64::MIN_POSITIVE || change <= opts.tol * chi.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    let (rho, p_t, chi) = best;
    let residual_norm = p_e.iter().zip(&p_t).map(|(e, t)| (e - t).powi(2)).sum::<f64>().sqrt();
    Ok(TomographyResult {
        rho: DensityMatrix::from_matrix_unchecked(rho),
        diagnostics: Diagnostics {
            chi_square: chi,
            initial_chi_square: initial_chi,
            iterations,
            converged,
            residual_norm,
            floor,
            settings: map.len(),
        },
    })
}

/// Reconstructs several problems in parallel; results keep input order.
pub fn reconstruct_batch(problems: &[TomographyProblem], opts: &SolverOptions) -> Vec<Result<TomographyResult>> {
    use rayon::prelude::*;
    problems.par_iter().map(|p| reconstruct(p, opts)).collect()
}
