//! Conditioning studies of the two linearized subproblems, rank checks,
//! the projection energy estimate and the motion truncation bounds.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{gaussian_matrix, random_stiefel, singular_values};
use crate::phantom::Movie;
use crate::psmodel::{build_l1, build_l2, build_theta, double_rows, legendre_basis};
use crate::radon::{radon_energy_check_with_radius, Frame};
use crate::sampling::{random_scheme, span_for, AngularScheme, SchemeKind};

/// Condition numbers above this are reported as `+∞`.
pub const SINGULAR_KAPPA: f64 = 1e15;

/// `σ₁/σ_min` over all `cols` columns; `+∞` for a column-rank-deficient
/// shape, a vanishing `σ_min`, or a ratio beyond [`SINGULAR_KAPPA`].
pub fn column_condition(sv: &[f64], cols: usize) -> f64 {
    if sv.len() < cols || sv.is_empty() {
        return f64::INFINITY;
    }
    let (hi, lo) = (sv[0], sv[sv.len() - 1]);
    if lo < 1e-300 || hi / lo > SINGULAR_KAPPA {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PsiSource {
    /// Orthonormalized Legendre polynomials.
    Legendre,
    /// Haar-distributed orthonormal columns.
    RandomStiefel { seed: u64 },
}

fn temporal_basis(source: PsiSource, views: usize, psm_order: usize) -> Result<DMatrix<f64>> {
    match source {
        PsiSource::Legendre => legendre_basis(views, psm_order),
        PsiSource::RandomStiefel { seed } => Ok(random_stiefel(
            views,
            psm_order + 1,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )),
    }
}

/// Complex `Θ̂ • Ψ̂` (or `Θ • Ψ` without symmetry).
pub fn l1_matrix(
    angles: &[f64],
    psi: &DMatrix<f64>,
    max_harmonic: usize,
    symmetric: bool,
) -> Result<DMatrix<Complex64>> {
    let theta = build_theta(angles, max_harmonic);
    build_l1(theta.stacked(symmetric), &double_rows(psi, symmetric))
}

/// `κ(L1)` for explicit angles and temporal basis.
pub fn cond_l1_with(
    angles: &[f64],
    psi: &DMatrix<f64>,
    max_harmonic: usize,
    symmetric: bool,
) -> Result<f64> {
    let l1 = l1_matrix(angles, psi, max_harmonic, symmetric)?;
    Ok(column_condition(&singular_values(&l1), l1.ncols()))
}

pub fn cond_l1(
    scheme: &AngularScheme,
    psm_order: usize,
    max_harmonic: usize,
    psi: PsiSource,
    symmetric: bool,
) -> Result<f64> {
    let basis = temporal_basis(psi, scheme.len(), psm_order)?;
    cond_l1_with(&scheme.angles, &basis, max_harmonic, symmetric)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum USource {
    Gaussian,
    Stiefel,
}

/// How `κ(L2)` is evaluated: an SVD of the assembled matrix, or the
/// eigenvalues of its structured Gram matrix `Σ_i H_i ⊗ Û_iᵀÛ_i`, which
/// avoids forming the `2PJ`-row operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L2Route {
    Dense,
    Gram,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Study {
    pub kappa_l2: f64,
    pub kappa_gamma: f64,
    /// `√κ(Γ)` when `Γ ≻ 0`.
    pub bound: Option<f64>,
    pub gamma_positive: bool,
}

impl L2Study {
    /// Whether `κ(L2) ≤ √κ(Γ)` up to a relative slack; vacuous when `Γ` is
    /// singular.
    pub fn bound_holds(&self, slack: f64) -> bool {
        self.bound
            .is_none_or(|b| self.kappa_l2 <= b * (1.0 + slack))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Setup {
    pub views: usize,
    pub psm_order: usize,
    pub max_harmonic: usize,
    pub subspace_dim: usize,
    pub bins: usize,
    pub symmetric: bool,
    pub u_source: USource,
    pub seed: u64,
}

/// Gaussian `β(s_j)` and `U` from `setup.seed`, then `κ(L2)` and `κ(Γ)`.
pub fn cond_l2(angles: &[f64], setup: &L2Setup, route: L2Route) -> Result<L2Study> {
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let coefficients = (2 * setup.max_harmonic + 1) * (setup.psm_order + 1);
    let beta = gaussian_matrix(coefficients, setup.bins, &mut rng);
    let u = match setup.u_source {
        USource::Gaussian => gaussian_matrix(angles.len(), setup.subspace_dim, &mut rng),
        USource::Stiefel => random_stiefel(angles.len(), setup.subspace_dim, &mut rng),
    };
    cond_l2_with(
        angles,
        &beta,
        &u,
        setup.max_harmonic,
        setup.symmetric,
        route,
    )
}

/// `κ(L2(β))` and `κ(Γ)` for explicit real `β` (one column per bin) and `U`.
pub fn cond_l2_with(
    angles: &[f64],
    beta: &DMatrix<f64>,
    u: &DMatrix<f64>,
    max_harmonic: usize,
    symmetric: bool,
    route: L2Route,
) -> Result<L2Study> {
    let theta = build_theta(angles, max_harmonic);
    let theta_hat = theta.stacked(symmetric);
    let u_hat = double_rows(u, symmetric);
    let cols = u.ncols() * beta.nrows() / theta_hat.ncols();
    let kappa_l2 = match route {
        L2Route::Dense => {
            let l2 = build_l2(&beta.map(Complex64::from), theta_hat, &u_hat)?;
            column_condition(&singular_values(&l2), cols)
        }
        L2Route::Gram => {
            let gram = l2_gram(beta, theta_hat, &u_hat);
            let eig = singular_values(&gram);
            let kappa = column_condition(&eig, cols);
            if kappa.is_finite() {
                kappa.sqrt()
            } else {
                kappa
            }
        }
    };
    let gamma = beta * beta.transpose();
    let gamma_sv = singular_values(&gamma);
    let kappa_gamma = column_condition(&gamma_sv, gamma.ncols());
    let gamma_positive =
        kappa_gamma.is_finite() && gamma_sv.last().is_some_and(|&lo| lo > 1e-12 * gamma_sv[0]);
    Ok(L2Study {
        kappa_l2,
        kappa_gamma,
        bound: gamma_positive.then(|| kappa_gamma.sqrt()),
        gamma_positive,
    })
}

/// `L2ᴴL2 = Σ_i H_i ⊗ Û_iᵀÛ_i` with `H_i = Σ_j c̄_ij c_ijᵀ`.
fn l2_gram(
    beta: &DMatrix<f64>,
    theta_hat: &DMatrix<Complex64>,
    u_hat: &DMatrix<f64>,
) -> DMatrix<Complex64> {
    let harmonics = theta_hat.ncols();
    let functions = beta.nrows() / harmonics;
    let bins = beta.ncols();
    let dim = u_hat.ncols();
    // Column k·J + j of the reshaped β holds β_{·,k}(s_j) over harmonics.
    let reshaped = DMatrix::from_fn(harmonics, functions * bins, |n, c| {
        Complex64::from(beta[(n * functions + c / bins, c % bins)])
    });
    let coeffs = theta_hat * reshaped;
    let size = functions * dim;
    let mut gram = DMatrix::<Complex64>::zeros(size, size);
    for i in 0..theta_hat.nrows() {
        let c_i = DMatrix::from_fn(bins, functions, |j, k| coeffs[(i, k * bins + j)]);
        let h_i = c_i.adjoint() * &c_i;
        let h_i = h_i.map(|z| z.conj());
        for k in 0..functions {
            for l in 0..functions {
                let h = h_i[(k, l)];
                for a in 0..dim {
                    for b in 0..dim {
                        gram[(k * dim + a, l * dim + b)] += h * u_hat[(i, a)] * u_hat[(i, b)];
                    }
                }
            }
        }
    }
    gram
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSweep {
    pub trials: usize,
    /// Instances with `Γ ≻ 0`.
    pub eligible: usize,
    pub satisfied: usize,
    pub studies: Vec<L2Study>,
}

/// Draws `trials` instances with random angles in `[0, π)`, each seeded by
/// `setup.seed + t`, and checks `κ(L2) ≤ √κ(Γ)` up to `slack`.
pub fn condition_bound_sweep(setup: &L2Setup, trials: usize, slack: f64) -> Result<BoundSweep> {
    let studies = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = setup.seed.wrapping_add(t as u64);
            let angles = random_scheme(setup.views, span_for(setup.symmetric), seed)?.angles;
            cond_l2(&angles, &L2Setup { seed, ..*setup }, L2Route::Gram)
        })
        .collect::<Result<Vec<_>>>()?;
    let eligible = studies.iter().filter(|s| s.gamma_positive).count();
    let satisfied = studies
        .iter()
        .filter(|s| s.gamma_positive && s.bound_holds(slack))
        .count();
    Ok(BoundSweep {
        trials,
        eligible,
        satisfied,
        studies,
    })
}

/// One row of the sampling-scheme conditioning study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub scheme: SchemeKind,
    pub symmetric: bool,
    pub psm_order: usize,
    pub max_harmonic: usize,
    pub views: usize,
    pub subspace_dim: usize,
    pub kappa_l1: f64,
    pub kappa_l2: f64,
    pub kappa_gamma: f64,
    pub bound_sqrt_kappa_gamma: Option<f64>,
    pub l1_full_rank: bool,
    pub gamma_positive: bool,
    /// Seed of the winning draw for the random scheme.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditioningConfig {
    pub views: usize,
    pub psm_order: usize,
    pub max_harmonic: usize,
    pub random_trials: usize,
    pub seed: u64,
    pub l2_bins: usize,
    pub l2_dim: usize,
}

impl Default for ConditioningConfig {
    fn default() -> Self {
        ConditioningConfig {
            views: 512,
            psm_order: 5,
            max_harmonic: 28,
            random_trials: 1000,
            seed: 2024,
            l2_bins: 128,
            l2_dim: 8,
        }
    }
}

/// Draw `trial` of the random scheme is seeded with `seed + trial`.
fn best_random_scheme(
    config: &ConditioningConfig,
    psi: &DMatrix<f64>,
    symmetric: bool,
) -> Result<(AngularScheme, f64)> {
    let span = span_for(symmetric);
    let draws = (0..config.random_trials.max(1))
        .into_par_iter()
        .map(|trial| {
            let scheme = random_scheme(config.views, span, config.seed.wrapping_add(trial as u64))?;
            let kappa = cond_l1_with(&scheme.angles, psi, config.max_harmonic, symmetric)?;
            Ok((trial, kappa, scheme))
        })
        .collect::<Result<Vec<_>>>()?;
    let (_, kappa, scheme) = draws
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("at least one draw");
    Ok((scheme, kappa))
}

/// Conditioning of `L1` and `L2` for the three schemes, with and without
/// π-symmetry. Random entries keep the best of `random_trials` draws;
/// `κ(L2)` is evaluated on the same angles with Gaussian `β` and `U`.
pub fn scheme_conditioning(config: &ConditioningConfig) -> Result<Vec<ConditionReport>> {
    let psi = legendre_basis(config.views, config.psm_order)?;
    let mut reports = Vec::new();
    for kind in [
        SchemeKind::Progressive,
        SchemeKind::Random,
        SchemeKind::BitReversed,
    ] {
        for symmetric in [false, true] {
            let (scheme, kappa_l1) = match kind {
                SchemeKind::Random => best_random_scheme(config, &psi, symmetric)?,
                _ => {
                    let scheme = AngularScheme::generate(
                        kind,
                        config.views,
                        span_for(symmetric),
                        config.seed,
                    )?;
                    let kappa = cond_l1_with(&scheme.angles, &psi, config.max_harmonic, symmetric)?;
                    (scheme, kappa)
                }
            };
            let setup = L2Setup {
                views: config.views,
                psm_order: config.psm_order,
                max_harmonic: config.max_harmonic,
                subspace_dim: config.l2_dim,
                bins: config.l2_bins,
                symmetric,
                u_source: USource::Gaussian,
                seed: config.seed,
            };
            let l2 = cond_l2(&scheme.angles, &setup, L2Route::Gram)?;
            reports.push(ConditionReport {
                scheme: kind,
                symmetric,
                psm_order: config.psm_order,
                max_harmonic: config.max_harmonic,
                views: config.views,
                subspace_dim: config.l2_dim,
                kappa_l1,
                kappa_l2: l2.kappa_l2,
                kappa_gamma: l2.kappa_gamma,
                bound_sqrt_kappa_gamma: l2.bound,
                l1_full_rank: kappa_l1.is_finite(),
                gamma_positive: l2.gamma_positive,
                seed: scheme.seed,
            });
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCheck {
    pub trials: usize,
    pub passes: usize,
    /// Whether `2P ≥ (2N+1)(K+1)`; the check still runs when it fails.
    pub dimension_ok: bool,
}

/// Counts trials in which `Θ̂ • Ψ̂` has full column rank
/// (`σ_min/σ₁ > 1e-12`) for distinct random angles in `[0, π)` and
/// Haar-random `Ψ`. Trial `t` uses seeds derived from `seed + t`.
pub fn rank_check_l1(
    views: usize,
    psm_order: usize,
    max_harmonic: usize,
    trials: usize,
    seed: u64,
) -> Result<RankCheck> {
    let cols = (2 * max_harmonic + 1) * (psm_order + 1);
    let passes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed.wrapping_add(t as u64);
            let angles = random_scheme(views, std::f64::consts::PI, trial_seed)?.angles;
            let psi = random_stiefel(
                views,
                psm_order + 1,
                &mut ChaCha8Rng::seed_from_u64(trial_seed ^ 0x9e37_79b9),
            );
            Ok(full_column_rank(&angles, &psi, max_harmonic)?)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&ok| ok)
        .count();
    Ok(RankCheck {
        trials,
        passes,
        dimension_ok: 2 * views >= cols,
    })
}

/// `σ_min/σ₁ > 1e-12` for the symmetric `L1` with the given angles.
pub fn full_column_rank(angles: &[f64], psi: &DMatrix<f64>, max_harmonic: usize) -> Result<bool> {
    let l1 = l1_matrix(angles, psi, max_harmonic, true)?;
    let sv = singular_values(&l1);
    Ok(sv.len() == l1.ncols() && sv[0] > 0.0 && sv[sv.len() - 1] / sv[0] > 1e-12)
}

/// Integrated projection energy against `‖γ‖²` for a residual frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionEnergyReport {
    /// `Σ_θ ∫|Rγ(s,θ)|² ds · Δθ`.
    pub lhs: f64,
    /// `2πL‖γ‖²`.
    pub rhs: f64,
    /// `4πL‖γ‖²`, the constant obtained by integrating over a full circle.
    pub rhs_full_circle: f64,
    /// `∫|Rγ|² ds / (2L‖γ‖²)` per angle.
    pub per_angle_ratio: Vec<f64>,
    pub radius: f64,
}

impl ProjectionEnergyReport {
    /// Whether every per-angle estimate holds within `slack`.
    pub fn per_angle_holds(&self, slack: f64) -> bool {
        self.per_angle_ratio.iter().all(|r| *r <= 1.0 + slack)
    }
}

/// The angle step is `π/A` when all angles lie in `[0, π)`, else `2π/A`.
pub fn projection_energy_check(residual: &Frame, angles: &[f64]) -> Result<ProjectionEnergyReport> {
    let radius = residual.diameter() / 2.0;
    let norm_sq = residual.energy();
    let mut lhs_sum = 0.0;
    let mut ratios = Vec::with_capacity(angles.len());
    for &theta in angles {
        let check = radon_energy_check_with_radius(residual, theta, radius)?;
        lhs_sum += check.lhs;
        ratios.push(if check.rhs > 0.0 {
            check.lhs / check.rhs
        } else {
            0.0
        });
    }
    let half = angles
        .iter()
        .all(|&t| (0.0..std::f64::consts::PI).contains(&t));
    let span = if half {
        std::f64::consts::PI
    } else {
        2.0 * std::f64::consts::PI
    };
    let step = if angles.is_empty() {
        0.0
    } else {
        span / angles.len() as f64
    };
    Ok(ProjectionEnergyReport {
        lhs: lhs_sum * step,
        rhs: 2.0 * std::f64::consts::PI * radius * norm_sq,
        rhs_full_circle: 4.0 * std::f64::consts::PI * radius * norm_sq,
        per_angle_ratio: ratios,
        radius,
    })
}

/// Parameters of the truncation bounds for smooth motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionBoundSpec {
    /// Spatial bandwidth `B` (rad per length unit).
    pub bandwidth: f64,
    pub c_max: f64,
    /// Support radius `L`.
    pub support_radius: f64,
    pub theta_max: f64,
    pub psm_order: usize,
}

/// `|x|^{K+1}/(K+1)!`, accumulated as a product to avoid overflow.
pub fn taylor_bound(x: f64, psm_order: usize) -> f64 {
    (1..=psm_order + 1).map(|i| x.abs() / i as f64).product()
}

/// `|B·c_max|^{K+1}/(K+1)!`.
pub fn translation_bound(spec: &MotionBoundSpec) -> f64 {
    taylor_bound(spec.bandwidth * spec.c_max, spec.psm_order)
}

/// `|B·L·θ_max|^{K+1}/(K+1)!`.
pub fn rotation_bound(spec: &MotionBoundSpec) -> f64 {
    taylor_bound(
        spec.bandwidth * spec.support_radius * spec.theta_max,
        spec.psm_order,
    )
}

/// `|e^{jx} − Σ_{k≤K} (jx)^k/k!|`, summed as the tail series so that tiny
/// remainders keep their relative accuracy.
pub fn taylor_remainder(x: f64, psm_order: usize) -> f64 {
    let step = Complex64::new(0.0, x);
    let mut term = Complex64::new(1.0, 0.0);
    for k in 1..=psm_order + 1 {
        term *= step / k as f64;
    }
    let mut tail = Complex64::new(0.0, 0.0);
    let mut k = psm_order + 1;
    loop {
        tail += term;
        k += 1;
        term *= step / k as f64;
        if term.norm() <= 1e-17 * tail.norm() && k as f64 > x.abs() || term.norm() == 0.0 {
            break;
        }
    }
    tail.norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub psm_order: usize,
    pub translation: f64,
    pub rotation: f64,
}

pub fn bound_table(
    spec: &MotionBoundSpec,
    orders: std::ops::RangeInclusive<usize>,
) -> Vec<BoundRow> {
    orders
        .map(|k| {
            let s = MotionBoundSpec {
                psm_order: k,
                ..*spec
            };
            BoundRow {
                psm_order: k,
                translation: translation_bound(&s),
                rotation: rotation_bound(&s),
            }
        })
        .collect()
}

/// Relative error `‖M − M_{K+1}‖_F/‖M‖_F` of the best rank-`(K+1)`
/// approximation of the pixels × time matrix of `movie`, for `K = 0..=max_order`.
pub fn psm_truncation_errors(movie: &Movie, max_order: usize) -> Vec<f64> {
    let pixels = movie.frames.first().map_or(0, |f| f.values().len());
    let space_time = DMatrix::from_fn(pixels, movie.len(), |i, p| movie.frames[p].values()[i]);
    let sv = singular_values(&space_time);
    let total: f64 = sv.iter().map(|s| s * s).sum();
    (0..=max_order)
        .map(|k| {
            if total == 0.0 {
                return 0.0;
            }
            let tail: f64 = sv.iter().skip(k + 1).map(|s| s * s).sum();
            (tail / total).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{bit_reversed, progressive};
    use std::f64::consts::PI;

    #[test]
    fn sentinel_rules() {
        assert_eq!(column_condition(&[2.0, 1.0], 2), 2.0);
        assert!(column_condition(&[2.0, 1.0], 3).is_infinite());
        assert!(column_condition(&[1.0, 1e-301], 2).is_infinite());
        assert!(column_condition(&[1.0, 1e-16], 2).is_infinite());
    }

    #[test]
    fn progressive_is_worse_than_bit_reversed() {
        let prog = progressive(64, 2.0 * PI).unwrap();
        let br = bit_reversed(64, 2.0 * PI).unwrap();
        let kp = cond_l1(&prog, 2, 5, PsiSource::Legendre, false).unwrap();
        let kb = cond_l1(&br, 2, 5, PsiSource::Legendre, false).unwrap();
        assert!(kb.is_finite());
        assert!(kp > 100.0 * kb);
    }

    #[test]
    fn gram_and_dense_routes_agree() {
        let angles = bit_reversed(16, PI).unwrap().angles;
        for (u_source, symmetric) in [(USource::Gaussian, true), (USource::Stiefel, false)] {
            let setup = L2Setup {
                views: 16,
                psm_order: 1,
                max_harmonic: 2,
                subspace_dim: 3,
                bins: 12,
                symmetric,
                u_source,
                seed: 9,
            };
            let dense = cond_l2(&angles, &setup, L2Route::Dense).unwrap();
            let gram = cond_l2(&angles, &setup, L2Route::Gram).unwrap();
            assert!((dense.kappa_l2 - gram.kappa_l2).abs() < 1e-8 * dense.kappa_l2);
            assert_eq!(dense.kappa_gamma, gram.kappa_gamma);
        }
    }

    #[test]
    fn orthonormal_u_satisfies_the_bound() {
        let setup = L2Setup {
            views: 24,
            psm_order: 1,
            max_harmonic: 3,
            subspace_dim: 3,
            bins: 20,
            symmetric: true,
            u_source: USource::Stiefel,
            seed: 5,
        };
        let sweep = condition_bound_sweep(&setup, 10, 1e-9).unwrap();
        assert_eq!(sweep.eligible, 10);
        assert_eq!(sweep.satisfied, 10);
    }

    #[test]
    fn single_bin_gamma_is_flagged() {
        let angles = bit_reversed(16, PI).unwrap().angles;
        let setup = L2Setup {
            views: 16,
            psm_order: 1,
            max_harmonic: 2,
            subspace_dim: 3,
            bins: 1,
            symmetric: true,
            u_source: USource::Stiefel,
            seed: 1,
        };
        let study = cond_l2(&angles, &setup, L2Route::Dense).unwrap();
        assert!(!study.gamma_positive);
        assert!(study.bound.is_none());
        assert!(study.kappa_l2.is_finite());
    }

    #[test]
    fn dimension_count_forces_rank_loss() {
        let check = rank_check_l1(8, 2, 3, 5, 1).unwrap();
        assert!(!check.dimension_ok);
        assert_eq!(check.passes, 0);
    }

    #[test]
    fn zero_residual_gives_zero_sides() {
        let frame = Frame::zeros(16, 1.0).unwrap();
        let report = projection_energy_check(&frame, &[0.0, 1.0]).unwrap();
        assert_eq!((report.lhs, report.rhs), (0.0, 0.0));
    }

    #[test]
    fn bound_calculators() {
        let spec = MotionBoundSpec {
            bandwidth: 1.0,
            c_max: 1.0,
            support_radius: 1.0,
            theta_max: 1.0,
            psm_order: 3,
        };
        assert!((translation_bound(&spec) - 1.0 / 24.0).abs() < 1e-15);
        assert!((rotation_bound(&spec) - 1.0 / 24.0).abs() < 1e-15);
        let still = MotionBoundSpec {
            theta_max: 0.0,
            ..spec
        };
        assert!((0..10).all(|k| rotation_bound(&MotionBoundSpec {
            psm_order: k,
            ..still
        }) == 0.0));
    }

    #[test]
    fn remainder_examples() {
        assert!((taylor_remainder(0.0, 3)).abs() < 1e-15);
        let x: f64 = 0.7;
        let direct = (Complex64::from_polar(1.0, x) - Complex64::new(1.0, 0.0)).norm();
        assert!((taylor_remainder(x, 0) - direct).abs() < 1e-15);
        let cubic =
            Complex64::from_polar(1.0, x) - Complex64::new(1.0 - x * x / 2.0, x - x.powi(3) / 6.0);
        assert!((taylor_remainder(x, 3) - cubic.norm()).abs() < 1e-14);
        // x⁴/24 dominates for small arguments.
        assert!((taylor_remainder(1e-3, 3) / (1e-12 / 24.0) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn truncation_error_of_static_movie() {
        let frame = Frame::from_fn(16, 1.0, |x, y| (x * 0.3).sin() + y * 0.01).unwrap();
        let movie = Movie::new(vec![frame; 6], crate::phantom::sample_times(6)).unwrap();
        let errs = psm_truncation_errors(&movie, 3);
        assert!(errs.iter().all(|e| *e < 1e-7));
    }
}
