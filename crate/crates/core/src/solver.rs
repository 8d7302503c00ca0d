//! Variable-projection recovery of the temporal factor `Z` and the harmonic
//! coefficients `β(s)`.
//!
//! With `V = Θ̂ • Û` the model operator factors as `L1(Z) = V·(I ⊗ Z)`, so
//! the reduced objective `tr Ξ − tr(Bᵀ A⁻¹ B)` with `A = Eᵀ VᵀV E`,
//! `B = Eᵀ VᵀĜ`, `E = I ⊗ Z` only involves small precomputed Gram blocks.

use log::{debug, warn};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    orthonormal_columns, orthonormality_defect, polar_factor, random_stiefel, TruncatedSvd,
};
use crate::phantom::TimeSequentialSinogram;
use crate::psmodel::{
    double_rows, face_split, real_trig_stacked, HarmonicCoefficients, HarmonicOrder,
};

/// `Ξ = Σ_j ĝ(s_j)ĝ(s_j)ᵀ`, kept together with its factor `Ĝ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    xi: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl DataMatrix {
    /// Builds `Ξ` from the columns `ĝ(s_j)` of `g_hat`.
    pub fn from_columns(g_hat: DMatrix<f64>) -> Result<Self> {
        if g_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("data", "non-finite sample"));
        }
        let mut xi = &g_hat * g_hat.transpose();
        xi = (&xi + xi.transpose()) * 0.5;
        Ok(DataMatrix { xi, factor: g_hat })
    }

    pub fn xi(&self) -> &DMatrix<f64> {
        &self.xi
    }

    /// `Ĝ`, one column per detector bin.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn rows(&self) -> usize {
        self.xi.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.xi.trace()
    }

    /// The same data scaled so that `tr Ξ = 1` (unchanged when `Ξ = 0`).
    pub fn normalized(&self) -> DataMatrix {
        let tr = self.trace();
        if tr <= 0.0 {
            return self.clone();
        }
        DataMatrix {
            xi: &self.xi / tr,
            factor: &self.factor / tr.sqrt(),
        }
    }
}

/// Columns `ĝ(s_j) = [g(s_j, θ_·); g(−s_j, θ_·)]` with π-symmetry, or
/// `g(s_j, θ_·)` without.
pub fn stack_data(data: &TimeSequentialSinogram, symmetric: bool) -> Result<DMatrix<f64>> {
    let views = data.views();
    let bins = data.detector.bins;
    if symmetric && !data.detector.is_symmetric() {
        return Err(Error::AsymmetricDetector);
    }
    let rows = if symmetric { 2 * views } else { views };
    Ok(DMatrix::from_fn(rows, bins, |i, j| {
        if i < views {
            data.values[(j, i)]
        } else {
            data.values[(data.detector.mirror(j), i - views)]
        }
    }))
}

pub fn data_matrix(data: &TimeSequentialSinogram, symmetric: bool) -> Result<DataMatrix> {
    DataMatrix::from_columns(stack_data(data, symmetric)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub step_size: f64,
    pub penalty_weight: f64,
    pub tol_rel_objective: f64,
    /// Iterations between the two objective values compared by the
    /// stopping rule.
    pub stop_window: usize,
    pub restarts: usize,
    pub seed: u64,
    pub pinv_rank_rtol: f64,
    /// The step size is multiplied by `plateau_decay` whenever the best
    /// objective fails to improve by a relative `1e-3` within this many
    /// iterations.
    pub plateau_patience: usize,
    pub plateau_decay: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 5000,
            step_size: 0.2,
            penalty_weight: 1.0,
            tol_rel_objective: 1e-9,
            stop_window: 100,
            restarts: 5,
            seed: 0,
            pinv_rank_rtol: 1e-10,
            plateau_patience: 100,
            plateau_decay: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("solver.step_size", self.step_size),
            ("solver.penalty_weight", self.penalty_weight),
            ("solver.tol_rel_objective", self.tol_rel_objective),
            ("solver.pinv_rank_rtol", self.pinv_rank_rtol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::invalid(name, format!("{value} is not positive")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("solver.max_iters", "must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid(
                "solver.restarts",
                "need at least one restart",
            ));
        }
        if self.stop_window == 0 || self.plateau_patience == 0 {
            return Err(Error::invalid(
                "solver.stop_window",
                "windows must be positive",
            ));
        }
        if !(self.plateau_decay > 0.0 && self.plateau_decay <= 1.0) {
            return Err(Error::invalid("solver.plateau_decay", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub seed: u64,
    /// Best normalized objective reached, `NaN` when aborted.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    /// Normalized objective `f(Z)/tr Ξ` per iteration of the chosen restart.
    pub trace: Vec<f64>,
    pub chosen_restart: usize,
    pub iterations: usize,
    pub converged: bool,
    /// `‖ZᵀZ − I‖_F` after the final re-orthonormalization.
    pub orthonormality_defect: f64,
    /// Unnormalized objective at the returned `Z`.
    pub final_objective: f64,
    pub trace_xi: f64,
    pub restarts: Vec<RestartSummary>,
}

/// The VarPro objective for a fixed data matrix and model.
#[derive(Debug, Clone)]
pub struct VarProProblem {
    /// `V = Θ̂ • Û`, column `n·d + a`.
    v: DMatrix<f64>,
    gram: DMatrix<f64>,
    /// `VᵀĜ`.
    projected: DMatrix<f64>,
    factor: DMatrix<f64>,
    trace_xi: f64,
    harmonics: usize,
    dim: usize,
    functions: usize,
    rtol: f64,
}

impl VarProProblem {
    /// `theta_hat` is the (real) stacked harmonic matrix, `u_hat` the stacked
    /// interpolator; both have one row per entry of `ĝ(s)`.
    pub fn new(
        data: &DataMatrix,
        theta_hat: &DMatrix<f64>,
        u_hat: &DMatrix<f64>,
        functions: usize,
        rtol: f64,
    ) -> Result<Self> {
        if theta_hat.nrows() != data.rows() || u_hat.nrows() != data.rows() {
            return Err(Error::dims(format!(
                "data has {} rows, Θ̂ has {}, Û has {}",
                data.rows(),
                theta_hat.nrows(),
                u_hat.nrows()
            )));
        }
        if functions == 0 || functions > u_hat.ncols() {
            return Err(Error::invalid(
                "K",
                format!("need 1 ≤ K+1 ≤ d, got K+1 = {functions}"),
            ));
        }
        let v = face_split(theta_hat, u_hat)?;
        let gram = v.transpose() * &v;
        let projected = v.transpose() * data.factor();
        Ok(VarProProblem {
            v,
            gram,
            projected,
            factor: data.factor().clone(),
            trace_xi: data.trace(),
            harmonics: theta_hat.ncols(),
            dim: u_hat.ncols(),
            functions,
            rtol,
        })
    }

    /// Problem for a time-sequential sinogram in the real trigonometric
    /// parameterization.
    pub fn from_sinogram(
        data: &DataMatrix,
        angles: &[f64],
        order: &HarmonicOrder,
        u: &DMatrix<f64>,
        symmetric: bool,
        rtol: f64,
    ) -> Result<Self> {
        if u.nrows() != angles.len() || u.ncols() != order.subspace_dim {
            return Err(Error::dims(format!(
                "U is {}×{}, expected {}×{}",
                u.nrows(),
                u.ncols(),
                angles.len(),
                order.subspace_dim
            )));
        }
        let theta_hat = real_trig_stacked(angles, order.max_harmonic, symmetric);
        let u_hat = double_rows(u, symmetric);
        Self::new(data, &theta_hat, &u_hat, order.functions(), rtol)
    }

    pub fn trace_xi(&self) -> f64 {
        self.trace_xi
    }

    /// The problem with `tr Ξ` scaled to 1.
    pub fn normalized(&self) -> VarProProblem {
        if self.trace_xi <= 0.0 {
            return self.clone();
        }
        let scale = self.trace_xi.sqrt();
        VarProProblem {
            projected: &self.projected / scale,
            factor: &self.factor / scale,
            trace_xi: 1.0,
            ..self.clone()
        }
    }

    fn check_z(&self, z: &DMatrix<f64>) {
        assert_eq!(
            z.shape(),
            (self.dim, self.functions),
            "Z has the wrong shape"
        );
    }

    /// `L1(Z) = V·(I ⊗ Z)`.
    pub fn l1(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        self.check_z(z);
        let (d, f) = (self.dim, self.functions);
        let mut l1 = DMatrix::zeros(self.v.nrows(), self.harmonics * f);
        for n in 0..self.harmonics {
            l1.columns_mut(n * f, f)
                .copy_from(&(self.v.columns(n * d, d) * z));
        }
        l1
    }

    /// `tr Ξ − tr(QᵀΞQ)` with `Q` an orthonormal basis of `range(L1(Z))`,
    /// computed densely; clamped to `[0, tr Ξ]`.
    pub fn objective(&self, z: &DMatrix<f64>) -> f64 {
        let svd = TruncatedSvd::new(&self.l1(z), self.rtol);
        let captured = (svd.u.transpose() * &self.factor).norm_squared();
        (self.trace_xi - captured).clamp(0.0, self.trace_xi)
    }

    /// `β(s) = L1(Z)⁺ ĝ(s)` for every column of `g_hat`.
    pub fn inner_beta(&self, z: &DMatrix<f64>, g_hat: &DMatrix<f64>) -> DMatrix<f64> {
        TruncatedSvd::new(&self.l1(z), self.rtol).solve(g_hat)
    }

    /// `Σ_s ‖ĝ(s) − L1(Z)β*(s)‖²` evaluated directly.
    pub fn residual_sum(&self, z: &DMatrix<f64>) -> f64 {
        let beta = self.inner_beta(z, &self.factor);
        (&self.factor - self.l1(z) * beta).norm_squared()
    }

    pub fn data_factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `E S` where `S` is stacked in harmonic blocks of `K+1` rows.
    fn expand(&self, z: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
        let (d, f) = (self.dim, self.functions);
        let mut out = DMatrix::zeros(self.harmonics * d, s.ncols());
        for n in 0..self.harmonics {
            out.rows_mut(n * d, d).copy_from(&(z * s.rows(n * f, f)));
        }
        out
    }

    /// `Eᵀ X` for `X` stacked in harmonic blocks of `d` rows.
    fn contract(&self, z: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
        let (d, f) = (self.dim, self.functions);
        let zt = z.transpose();
        let mut out = DMatrix::zeros(self.harmonics * f, x.ncols());
        for n in 0..self.harmonics {
            out.rows_mut(n * f, f).copy_from(&(&zt * x.rows(n * d, d)));
        }
        out
    }

    /// Reduced-route objective and its gradient with respect to `Z`.
    pub fn objective_and_gradient(&self, z: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        self.check_z(z);
        let (d, f, m) = (self.dim, self.functions, self.harmonics);
        let zt = z.transpose();
        // A = Eᵀ D E, assembled blockwise.
        let mut dz = DMatrix::zeros(m * d, m * f);
        for a in 0..m {
            for b in 0..m {
                dz.view_mut((a * d, b * f), (d, f))
                    .copy_from(&(self.gram.view((a * d, b * d), (d, d)) * z));
            }
        }
        let mut gram_e = DMatrix::zeros(m * f, m * f);
        for a in 0..m {
            gram_e
                .rows_mut(a * f, f)
                .copy_from(&(&zt * dz.rows(a * d, d)));
        }
        gram_e = (&gram_e + gram_e.transpose()) * 0.5;
        let b = self.contract(z, &self.projected);
        let s = match Cholesky::new(gram_e.clone()) {
            Some(chol) => chol.solve(&b),
            None => TruncatedSvd::new(&gram_e, self.rtol).solve(&b),
        };
        let value = (self.trace_xi - b.dot(&s)).clamp(0.0, self.trace_xi);
        let residual = &self.gram * self.expand(z, &s) - &self.projected;
        let mut grad = DMatrix::zeros(d, f);
        for n in 0..m {
            grad += residual.rows(n * d, d) * s.rows(n * f, f).transpose();
        }
        (value, grad * 2.0)
    }

    pub fn gradient(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        self.objective_and_gradient(z).1
    }
}

/// `μ‖ZᵀZ − I‖_F²`.
pub fn orthonormality_penalty(z: &DMatrix<f64>, mu: f64) -> f64 {
    mu * orthonormality_defect(z).powi(2)
}

/// `4μ Z(ZᵀZ − I)`.
pub fn orthonormality_penalty_gradient(z: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    let gram = z.transpose() * z - DMatrix::identity(z.ncols(), z.ncols());
    z * gram * (4.0 * mu)
}

/// Objective plus penalty, and its gradient.
pub fn penalized(problem: &VarProProblem, z: &DMatrix<f64>, mu: f64) -> (f64, DMatrix<f64>) {
    let (value, grad) = problem.objective_and_gradient(z);
    (
        value + orthonormality_penalty(z, mu),
        grad + orthonormality_penalty_gradient(z, mu),
    )
}

struct Descent {
    z: DMatrix<f64>,
    trace: Vec<f64>,
    best: f64,
    converged: bool,
    aborted: Option<String>,
}

/// One Adam descent from `z0` on the normalized problem, returning the best
/// iterate seen.
fn descend(problem: &VarProProblem, z0: DMatrix<f64>, config: &SolverConfig) -> Descent {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let mut z = z0;
    let mut first = DMatrix::zeros(z.nrows(), z.ncols());
    let mut second = DMatrix::zeros(z.nrows(), z.ncols());
    let mut lr = config.step_size;
    let mut trace = Vec::with_capacity(config.max_iters);
    let mut best = (f64::INFINITY, z.clone());
    let mut plateau_ref = (f64::INFINITY, 0usize);
    for iter in 0..config.max_iters {
        let (value, grad) = problem.objective_and_gradient(&z);
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Descent {
                z: best.1,
                trace,
                best: f64::NAN,
                converged: false,
                aborted: Some(format!("non-finite objective at iteration {iter}")),
            };
        }
        trace.push(value);
        if value < best.0 {
            best = (value, z.clone());
        }
        if best.0 < plateau_ref.0 * (1.0 - 1e-3) {
            plateau_ref = (best.0, iter);
        } else if iter - plateau_ref.1 >= config.plateau_patience {
            lr *= config.plateau_decay;
            plateau_ref = (best.0, iter);
        }
        if iter >= config.stop_window {
            let old = trace[iter - config.stop_window];
            if (value - old).abs() <= config.tol_rel_objective * old + f64::EPSILON {
                return Descent {
                    z: best.1,
                    trace,
                    best: best.0,
                    converged: true,
                    aborted: None,
                };
            }
        }
        let step = grad + orthonormality_penalty_gradient(&z, config.penalty_weight);
        let t = (iter + 1) as i32;
        first = first * BETA1 + &step * (1.0 - BETA1);
        second = second * BETA2 + step.component_mul(&step) * (1.0 - BETA2);
        let correction1 = 1.0 - BETA1.powi(t);
        let correction2 = 1.0 - BETA2.powi(t);
        z.zip_zip_apply(&first, &second, |zi, m, v| {
            *zi -= lr * (m / correction1) / ((v / correction2).sqrt() + EPS);
        });
    }
    Descent {
        z: best.1,
        trace,
        best: best.0,
        converged: false,
        aborted: None,
    }
}

/// Result of [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutput {
    pub z: DMatrix<f64>,
    pub beta: HarmonicCoefficients,
    pub report: SolverReport,
}

/// Recovers `Z` and `β(s_j)` from time-sequential data.
pub fn solve(
    data: &TimeSequentialSinogram,
    order: &HarmonicOrder,
    u: &DMatrix<f64>,
    symmetric: bool,
    config: &SolverConfig,
) -> Result<SolverOutput> {
    config.validate()?;
    if !order.is_solvable(data.views(), symmetric) {
        warn!(
            "{} equations per bin for {} unknowns: β(s) is not identifiable",
            if symmetric {
                2 * data.views()
            } else {
                data.views()
            },
            order.coefficients()
        );
    }
    let xi = data_matrix(data, symmetric)?;
    let problem = VarProProblem::from_sinogram(
        &xi,
        &data.scheme.angles,
        order,
        u,
        symmetric,
        config.pinv_rank_rtol,
    )?;
    solve_problem(&problem, order, config)
}

/// Runs the restarts on an assembled problem and recovers `β`.
pub fn solve_problem(
    problem: &VarProProblem,
    order: &HarmonicOrder,
    config: &SolverConfig,
) -> Result<SolverOutput> {
    config.validate()?;
    let normalized = problem.normalized();
    let (d, f) = (order.subspace_dim, order.functions());
    let runs: Vec<(RestartSummary, Descent)> = if order.is_degenerate() {
        // Every invertible square Z gives the same range, so there is
        // nothing to optimize.
        let z = DMatrix::identity(d, f);
        let value = normalized.objective(&z);
        let summary = RestartSummary {
            index: 0,
            seed: config.seed,
            objective: value,
            iterations: 0,
            converged: true,
            aborted: None,
        };
        vec![(
            summary,
            Descent {
                z,
                trace: vec![value],
                best: value,
                converged: true,
                aborted: None,
            },
        )]
    } else {
        (0..config.restarts)
            .into_par_iter()
            .map(|index| {
                let seed = config.seed.wrapping_add(index as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let z0 = random_stiefel(d, f, &mut rng);
                let run = descend(&normalized, z0, config);
                debug!(
                    "restart {index}: objective {:.3e} after {} iterations",
                    run.best,
                    run.trace.len()
                );
                let summary = RestartSummary {
                    index,
                    seed,
                    objective: run.best,
                    iterations: run.trace.len(),
                    converged: run.converged,
                    aborted: run.aborted.clone(),
                };
                (summary, run)
            })
            .collect()
    };
    let chosen = runs
        .iter()
        .filter(|(s, _)| s.aborted.is_none())
        .min_by(|a, b| {
            a.0.objective
                .total_cmp(&b.0.objective)
                .then(a.0.index.cmp(&b.0.index))
        })
        .ok_or_else(|| {
            Error::RankDeficient("every restart produced a non-finite objective".into())
        })?;
    let z = polar_factor(&chosen.1.z);
    let z = if z.iter().all(|v| v.is_finite()) {
        z
    } else {
        orthonormal_columns(&chosen.1.z)?
    };
    let beta = problem.inner_beta(&z, problem.data_factor());
    let report = SolverReport {
        trace: chosen.1.trace.clone(),
        chosen_restart: chosen.0.index,
        iterations: chosen.0.iterations,
        converged: chosen.0.converged,
        orthonormality_defect: orthonormality_defect(&z),
        final_objective: problem.objective(&z),
        trace_xi: problem.trace_xi(),
        restarts: runs.iter().map(|(s, _)| s.clone()).collect(),
    };
    Ok(SolverOutput {
        beta: HarmonicCoefficients::new(beta, *order)?,
        z,
        report,
    })
}

/// Mean of `trace` over consecutive windows of `window` iterations.
pub fn smoothed(trace: &[f64], window: usize) -> Vec<f64> {
    trace
        .chunks(window.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Data `Ĝ = L1(Z)β` exactly in the model, used to build synthetic fixtures.
pub fn model_prediction(
    problem: &VarProProblem,
    z: &DMatrix<f64>,
    beta: &DMatrix<f64>,
) -> DMatrix<f64> {
    problem.l1(z) * beta
}

/// Single-column helper for [`VarProProblem::inner_beta`].
pub fn inner_beta(problem: &VarProProblem, z: &DMatrix<f64>, g_hat: &DVector<f64>) -> DVector<f64> {
    let g = DMatrix::from_column_slice(g_hat.len(), 1, g_hat.as_slice());
    DVector::from_column_slice(problem.inner_beta(z, &g).as_slice())
}
