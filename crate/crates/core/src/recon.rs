//! From a fitted model to a reconstructed movie, and image-quality metrics.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::orthonormality_defect;
use crate::phantom::{Movie, TimeSequentialSinogram};
use crate::psmodel::{
    real_trig_symmetry_signs, real_trig_theta, HarmonicCoefficients, HarmonicOrder,
};
use crate::radon::{fbp, pixel_inside_disk, uniform_half_circle, DetectorGrid, Frame, Sinogram};
use crate::sampling::AngularScheme;

/// Everything needed to evaluate the fitted projection model.
#[derive(Debug, Clone, PartialEq)]
pub struct ProSepSolution {
    pub z: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub beta: HarmonicCoefficients,
    pub order: HarmonicOrder,
    pub scheme: AngularScheme,
    pub detector: DetectorGrid,
}

impl ProSepSolution {
    pub fn new(
        z: DMatrix<f64>,
        u: DMatrix<f64>,
        beta: HarmonicCoefficients,
        scheme: AngularScheme,
        detector: DetectorGrid,
    ) -> Result<Self> {
        let order = beta.order;
        let expected = [
            (u.nrows(), scheme.len(), "U rows vs views"),
            (u.ncols(), order.subspace_dim, "U columns vs d"),
            (z.nrows(), order.subspace_dim, "Z rows vs d"),
            (z.ncols(), order.functions(), "Z columns vs K+1"),
            (beta.bins(), detector.bins, "β columns vs detector bins"),
        ];
        for (got, want, what) in expected {
            if got != want {
                return Err(Error::dims(format!("{what}: {got} ≠ {want}")));
            }
        }
        Ok(ProSepSolution {
            z,
            u,
            beta,
            order,
            scheme,
            detector,
        })
    }

    pub fn views(&self) -> usize {
        self.scheme.len()
    }

    /// `max(‖UᵀU − I‖_F, ‖ZᵀZ − I‖_F)`.
    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(&self.u).max(orthonormality_defect(&self.z))
    }

    /// Circular-harmonic coefficients `h_h(s_j, t_p)` of frame `p`, one row
    /// per real trigonometric column and one column per bin.
    pub fn harmonics_at(&self, frame: usize) -> Result<DMatrix<f64>> {
        if frame >= self.views() {
            return Err(Error::IndexOutOfRange {
                index: frame,
                len: self.views(),
            });
        }
        let psi_row = self.u.row(frame) * &self.z;
        let f = self.order.functions();
        let bins = self.beta.bins();
        Ok(DMatrix::from_fn(self.order.harmonics(), bins, |h, j| {
            (0..f)
                .map(|k| self.beta.beta[(h * f + k, j)] * psi_row[k])
                .sum()
        }))
    }
}

/// `Ψ = UZ`.
pub fn temporal_functions(u: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if u.ncols() != z.nrows() {
        return Err(Error::dims(format!(
            "U has {} columns, Z has {} rows",
            u.ncols(),
            z.nrows()
        )));
    }
    Ok(u * z)
}

/// Model projections of frame `p` at arbitrary angles.
pub fn synthesize_sinogram(
    solution: &ProSepSolution,
    frame: usize,
    angles: &[f64],
) -> Result<Sinogram> {
    let coeffs = solution.harmonics_at(frame)?;
    let theta = real_trig_theta(angles, solution.order.max_harmonic);
    Sinogram::new(
        (theta * coeffs).transpose(),
        angles.to_vec(),
        solution.detector,
    )
}

/// The time-sequential data the model predicts: view `θ_p` of frame `p`.
pub fn model_acquisition(solution: &ProSepSolution) -> Result<TimeSequentialSinogram> {
    let views = solution.views();
    let mut values = DMatrix::zeros(solution.detector.bins, views);
    for p in 0..views {
        let sino = synthesize_sinogram(solution, p, &solution.scheme.angles[p..=p])?;
        values.set_column(p, &sino.values.column(0));
    }
    TimeSequentialSinogram::new(values, solution.scheme.clone(), solution.detector)
}

/// Makes `β` consistent with `g(−s, θ) = g(s, θ + π)` by copying each bin
/// with positive offset onto its mirror, with the harmonic signs applied.
/// A bin at the center keeps only the even harmonics.
pub fn enforce_symmetry(beta: &mut HarmonicCoefficients, detector: &DetectorGrid) -> Result<()> {
    if !detector.is_symmetric() {
        return Err(Error::AsymmetricDetector);
    }
    let signs = real_trig_symmetry_signs(beta.order.max_harmonic);
    let f = beta.order.functions();
    for j in 0..detector.bins {
        let mirror = detector.mirror(j);
        if mirror < j {
            continue;
        }
        for (h, s) in signs.iter().enumerate() {
            for k in 0..f {
                let value = beta.beta[(h * f + k, j)];
                if mirror == j {
                    if *s < 0.0 {
                        beta.beta[(h * f + k, j)] = 0.0;
                    }
                } else {
                    beta.beta[(h * f + k, mirror)] = s * value;
                }
            }
        }
    }
    Ok(())
}

/// Synthesizes every frame at `fbp_angles` uniform angles in `[0, π)` and
/// reconstructs it by FBP.
pub fn reconstruct_movie(solution: &ProSepSolution, fbp_angles: usize) -> Result<Movie> {
    let angles = uniform_half_circle(fbp_angles);
    let frames = (0..solution.views())
        .into_par_iter()
        .map(|p| fbp(&synthesize_sinogram(solution, p, &angles)?))
        .collect::<Result<Vec<_>>>()?;
    Movie::new(frames, crate::phantom::sample_times(solution.views()))
}

/// The baseline that ignores motion: one FBP of the inconsistent
/// time-sequential sinogram, repeated for every frame.
pub fn naive_fbp_movie(data: &TimeSequentialSinogram) -> Result<Movie> {
    let frame = fbp(&data.as_sinogram()?)?;
    Movie::new(vec![frame; data.views()], data.times.clone())
}

/// Pixel pairs inside the support disk; pixels outside it are zero in every
/// frame and are left out of the pixel averages.
fn support_pairs<'a>(x: &'a Frame, reference: &'a Frame) -> Result<Vec<(f64, f64)>> {
    x.check_same_grid(reference)?;
    let width = x.width();
    Ok((0..width * width)
        .filter(|i| pixel_inside_disk(width, i / width, i % width))
        .map(|i| (x.values()[i], reference.values()[i]))
        .collect())
}

/// `10·log₁₀(peak²/mse)` over the support disk, capped at 200 dB.
pub fn psnr(x: &Frame, reference: &Frame, peak: f64) -> Result<f64> {
    let pairs = support_pairs(x, reference)?;
    let mse = pairs.iter().map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pairs.len().max(1) as f64;
    if mse < peak * peak * 1e-20 {
        return Ok(200.0);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Mean absolute error over the support disk.
pub fn mae(x: &Frame, reference: &Frame) -> Result<f64> {
    let pairs = support_pairs(x, reference)?;
    Ok(pairs.iter().map(|(a, b)| (a - b).abs()).sum::<f64>() / pairs.len().max(1) as f64)
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Separable Gaussian filtering over the `valid` region.
fn filter_valid(values: &[f64], width: usize, window: &[f64]) -> Vec<f64> {
    let out = width + 1 - window.len();
    let mut rows = vec![0.0; width * out];
    for r in 0..width {
        for c in 0..out {
            rows[r * out + c] = window
                .iter()
                .enumerate()
                .map(|(k, w)| w * values[r * width + c + k])
                .sum();
        }
    }
    let mut both = vec![0.0; out * out];
    for r in 0..out {
        for c in 0..out {
            both[r * out + c] = window
                .iter()
                .enumerate()
                .map(|(k, w)| w * rows[(r + k) * out + c])
                .sum();
        }
    }
    both
}

/// Mean SSIM with an 11×11 Gaussian window (σ = 1.5), `K₁ = 0.01`,
/// `K₂ = 0.03`.
pub fn ssim(x: &Frame, reference: &Frame, dynamic_range: f64) -> Result<f64> {
    x.check_same_grid(reference)?;
    let width = x.width();
    if width < SSIM_WINDOW {
        return Err(Error::invalid(
            "width",
            format!("SSIM needs frames of at least {SSIM_WINDOW} pixels"),
        ));
    }
    let c1 = (0.01 * dynamic_range).powi(2);
    let c2 = (0.03 * dynamic_range).powi(2);
    let window = gaussian_window();
    let (a, b) = (x.values(), reference.values());
    let product = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..a.len()).map(f).collect() };
    let mu_a = filter_valid(a, width, &window);
    let mu_b = filter_valid(b, width, &window);
    let aa = filter_valid(&product(&|i| a[i] * a[i]), width, &window);
    let bb = filter_valid(&product(&|i| b[i] * b[i]), width, &window);
    let ab = filter_valid(&product(&|i| a[i] * b[i]), width, &window);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = aa[i] - ma * ma;
            let var_b = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub psnr: f64,
    pub ssim: f64,
    pub mae: f64,
}

/// Per-frame metrics against `benchmark` plus their average. Peak and
/// dynamic range are the maximum of the benchmark movie.
pub fn movie_metrics(movie: &Movie, benchmark: &Movie) -> Result<(Vec<MetricsRow>, MetricsRow)> {
    if movie.len() != benchmark.len() || movie.is_empty() {
        return Err(Error::dims(format!(
            "movie has {} frames, benchmark {}",
            movie.len(),
            benchmark.len()
        )));
    }
    let peak = benchmark
        .frames
        .iter()
        .flat_map(|f| f.values().iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let rows = movie
        .frames
        .par_iter()
        .zip(&benchmark.frames)
        .map(|(x, r)| {
            Ok(MetricsRow {
                psnr: psnr(x, r, peak)?,
                ssim: ssim(x, r, peak)?,
                mae: mae(x, r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let count = rows.len() as f64;
    let summary = MetricsRow {
        psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / count,
        ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / count,
        mae: rows.iter().map(|r| r.mae).sum::<f64>() / count,
    };
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, random_stiefel};
    use crate::psmodel::spline_interpolator;
    use crate::sampling::bit_reversed;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rustfft::{num_complex::Complex, FftPlanner};
    use std::f64::consts::PI;

    fn frame_of(width: usize, f: impl Fn(usize, usize) -> f64) -> Frame {
        let values = (0..width * width)
            .map(|i| f(i / width, i % width))
            .collect();
        Frame::new(width, 1.0, values).unwrap()
    }

    fn random_solution(
        views: usize,
        order: HarmonicOrder,
        bins: usize,
        seed: u64,
    ) -> ProSepSolution {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = spline_interpolator(views, order.subspace_dim).unwrap();
        let z = random_stiefel(order.subspace_dim, order.functions(), &mut rng);
        let beta = gaussian_matrix(order.coefficients(), bins, &mut rng);
        let mut beta = HarmonicCoefficients::new(beta, order).unwrap();
        let detector = DetectorGrid::new(bins, 1.0).unwrap();
        enforce_symmetry(&mut beta, &detector).unwrap();
        let scheme = bit_reversed(views, PI).unwrap();
        ProSepSolution::new(z, u, beta, scheme, detector).unwrap()
    }

    #[test]
    fn metrics_on_identical_frames() {
        let a = frame_of(16, |r, c| (r * c) as f64 / 100.0);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), 200.0);
        assert!((ssim(&a, &a, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_metrics() {
        let a = frame_of(20, |r, c| (r + 2 * c) as f64 / 60.0);
        let b = frame_of(20, |r, c| (r + 2 * c) as f64 / 60.0 + 0.1);
        assert!((psnr(&b, &a, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert!((mae(&b, &a).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
    }

    #[test]
    fn ssim_is_at_most_one() {
        let a = frame_of(24, |r, c| ((r * 7 + c * 3) % 5) as f64);
        let b = frame_of(24, |r, c| ((r * 2 + c * 5) % 7) as f64);
        let s = ssim(&a, &b, 6.0).unwrap();
        assert!(s <= 1.0 && s >= -1.0);
        assert!(ssim(&frame_of(8, |_, _| 0.0), &frame_of(8, |_, _| 0.0), 1.0).is_err());
    }

    #[test]
    fn temporal_functions_are_orthonormal() {
        let u = spline_interpolator(64, 5).unwrap();
        let z = random_stiefel(5, 3, &mut ChaCha8Rng::seed_from_u64(1));
        let psi = temporal_functions(&u, &z).unwrap();
        assert!(orthonormality_defect(&psi) < 1e-8);
        let square = temporal_functions(&u, &DMatrix::identity(5, 5)).unwrap();
        assert_eq!(square, u);
    }

    #[test]
    fn synthesis_matches_acquired_model_values() {
        let order = HarmonicOrder::new(3, 1, 3).unwrap();
        let sol = random_solution(16, order, 8, 2);
        let data = model_acquisition(&sol).unwrap();
        for p in 0..16 {
            let coeffs = sol.harmonics_at(p).unwrap();
            let row = real_trig_theta(&sol.scheme.angles[p..=p], 3);
            let direct = (row * coeffs).transpose();
            for j in 0..8 {
                assert!((direct[(j, 0)] - data.values[(j, p)]).abs() < 1e-10);
            }
        }
        assert!(sol.harmonics_at(16).is_err());
    }

    #[test]
    fn synthesis_is_band_limited() {
        let order = HarmonicOrder::new(4, 1, 3).unwrap();
        let sol = random_solution(16, order, 6, 3);
        let count = 32;
        let angles: Vec<f64> = (0..count)
            .map(|a| 2.0 * PI * a as f64 / count as f64)
            .collect();
        let sino = synthesize_sinogram(&sol, 5, &angles).unwrap();
        let fft = FftPlanner::new().plan_fft_forward(count);
        for j in 0..6 {
            let mut buf: Vec<Complex<f64>> = (0..count)
                .map(|a| Complex::new(sino.values[(j, a)], 0.0))
                .collect();
            fft.process(&mut buf);
            for (freq, c) in buf.iter().enumerate() {
                let harmonic = freq.min(count - freq);
                if harmonic > 4 {
                    assert!(c.norm() / (count as f64) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn synthesis_respects_symmetry() {
        let order = HarmonicOrder::new(3, 1, 3).unwrap();
        let sol = random_solution(16, order, 8, 4);
        let angles = [0.3, 1.1, 2.0];
        let shifted: Vec<f64> = angles.iter().map(|a| a + PI).collect();
        let a = synthesize_sinogram(&sol, 3, &angles).unwrap();
        let b = synthesize_sinogram(&sol, 3, &shifted).unwrap();
        for j in 0..8 {
            for c in 0..3 {
                assert!((a.values[(sol.detector.mirror(j), c)] - b.values[(j, c)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn static_solution_gives_constant_movie() {
        let order = HarmonicOrder::new(3, 0, 1).unwrap();
        let sol = random_solution(8, order, 16, 5);
        let movie = reconstruct_movie(&sol, 16).unwrap();
        assert_eq!(movie.len(), 8);
        assert_eq!(movie.width(), 16);
        for f in &movie.frames[1..] {
            let diff = f.combine(1.0, &movie.frames[0], -1.0).unwrap();
            assert!((diff.energy() / 256.0).sqrt() < 1e-6);
        }
    }

    #[test]
    fn summary_is_mean_of_rows() {
        let a = frame_of(16, |r, c| (r + c) as f64);
        let b = frame_of(16, |r, c| (r * c % 7) as f64);
        let movie = Movie::new(vec![a.clone(), b.clone()], vec![0.0, 0.5]).unwrap();
        let bench = Movie::new(vec![b, a], vec![0.0, 0.5]).unwrap();
        let (rows, summary) = movie_metrics(&movie, &bench).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((summary.mae - (rows[0].mae + rows[1].mae) / 2.0).abs() < 1e-12);
        assert!((summary.psnr - (rows[0].psnr + rows[1].psnr) / 2.0).abs() < 1e-12);
    }
}
