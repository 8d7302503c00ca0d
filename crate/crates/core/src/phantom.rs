//! Dynamic ellipse phantoms under global affine motion and simulated
//! time-sequential acquisition.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radon::{
    fbp, project_single, radon_project, uniform_half_circle, DetectorGrid, Frame, Sinogram,
};
use crate::sampling::AngularScheme;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    /// Counter-clockwise rotation of the first semi-axis, radians.
    #[serde(default)]
    pub rotation: f64,
    pub intensity: f64,
}

impl Ellipse {
    /// Normalized radius: 1 on the boundary.
    fn radius_at(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let (c, s) = (self.rotation.cos(), self.rotation.sin());
        let u = (c * dx + s * dy) / self.semi_axes[0];
        let v = (-s * dx + c * dy) / self.semi_axes[1];
        u.hypot(v)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.radius_at(x, y) <= 1.0
    }

    /// Half-width of the edge ramp in normalized radius for an edge of
    /// `edge_width` length units.
    fn ramp_half_width(&self, edge_width: f64) -> f64 {
        edge_width / (2.0 * (self.semi_axes[0] * self.semi_axes[1]).sqrt())
    }

    /// Indicator of the ellipse, with a raised-cosine ramp of total width
    /// `edge_width` across the boundary when it is positive.
    pub fn profile(&self, x: f64, y: f64, edge_width: f64) -> f64 {
        let rho = self.radius_at(x, y);
        if edge_width <= 0.0 {
            return if rho <= 1.0 { 1.0 } else { 0.0 };
        }
        let delta = self.ramp_half_width(edge_width);
        if rho <= 1.0 - delta {
            1.0
        } else if rho >= 1.0 + delta {
            0.0
        } else {
            0.5 * (1.0 + (std::f64::consts::PI * (rho - 1.0 + delta) / (2.0 * delta)).cos())
        }
    }
}

/// A static object: additive ellipses on a square grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub ellipses: Vec<Ellipse>,
    pub width: usize,
    pub pixel_size: f64,
    /// Width of the smooth transition across each ellipse boundary, in
    /// length units; 0 gives sharp edges.
    #[serde(default)]
    pub edge_width: f64,
}

impl PhantomSpec {
    /// Modified Shepp–Logan head shrunk to 75% of the support radius, leaving
    /// room for motion.
    pub fn shepp_logan(width: usize, pixel_size: f64) -> Self {
        const TABLE: [(f64, f64, f64, f64, f64, f64); 10] = [
            (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
            (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
            (0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
            (-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
            (0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
            (0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
            (0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
            (-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
            (0.0, -0.606, 0.023, 0.023, 0.0, 0.1),
            (0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
        ];
        let scale = 0.75 * width as f64 * pixel_size / 2.0;
        let ellipses = TABLE
            .iter()
            .map(|&(x, y, a, b, deg, intensity)| Ellipse {
                center: [x * scale, y * scale],
                semi_axes: [a * scale, b * scale],
                rotation: deg.to_radians(),
                intensity,
            })
            .collect();
        PhantomSpec {
            ellipses,
            width,
            pixel_size,
            edge_width: 0.0,
        }
    }

    /// Shepp-Logan with a two-pixel raised-cosine edge ramp, the default
    /// phantom for reconstruction experiments.
    pub fn smooth_shepp_logan(width: usize, pixel_size: f64) -> Self {
        Self::shepp_logan(width, pixel_size).with_edge_width(2.0 * pixel_size)
    }

    pub fn with_edge_width(mut self, edge_width: f64) -> Self {
        self.edge_width = edge_width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::invalid("phantom.width", "must be positive"));
        }
        if !(self.pixel_size > 0.0 && self.pixel_size.is_finite()) {
            return Err(Error::invalid(
                "phantom.pixel_size",
                "must be a positive length",
            ));
        }
        if !(self.edge_width >= 0.0 && self.edge_width.is_finite()) {
            return Err(Error::invalid(
                "phantom.edge_width",
                "must be a nonnegative length",
            ));
        }
        for (i, e) in self.ellipses.iter().enumerate() {
            let finite = e.center.iter().chain(&e.semi_axes).all(|v| v.is_finite())
                && e.rotation.is_finite()
                && e.intensity.is_finite();
            if !finite || e.semi_axes.iter().any(|&a| a <= 0.0) {
                return Err(Error::invalid(
                    "phantom.ellipses",
                    format!("ellipse {i} is malformed"),
                ));
            }
        }
        Ok(())
    }

    /// Largest radius at which a pixel center is guaranteed to survive the
    /// support mask.
    fn usable_radius(&self) -> f64 {
        self.width as f64 * self.pixel_size / 2.0
            - self.pixel_size * std::f64::consts::FRAC_1_SQRT_2
    }

    pub fn detector(&self) -> Result<DetectorGrid> {
        DetectorGrid::matching(self.width, self.pixel_size)
    }

    /// Checks that the warped object stays inside the support disk at
    /// `samples` uniformly spaced times in `[0, 1]`.
    pub fn check_motion(&self, motion: &MotionSpec, samples: usize) -> Result<()> {
        for i in 0..=samples {
            self.check_support(&motion_at(motion, i as f64 / samples.max(1) as f64))?;
        }
        Ok(())
    }

    fn check_support(&self, warp: &Affine) -> Result<()> {
        let limit = self.usable_radius();
        for (i, e) in self.ellipses.iter().enumerate() {
            // Image of the ellipse: warp(center) + M·unit circle, M = A·Rot·diag(a, b).
            let (c, s) = (e.rotation.cos(), e.rotation.sin());
            let grow = 1.0 + e.ramp_half_width(self.edge_width).max(0.0);
            let (a, b) = (e.semi_axes[0] * grow, e.semi_axes[1] * grow);
            let rot_axes = [[c * a, -s * b], [s * a, c * b]];
            let m = mat_mul(&warp.linear, &rot_axes);
            let center = warp.apply(e.center);
            let extent = center[0].hypot(center[1]) + spectral_norm(&m);
            if extent > limit {
                return Err(Error::SupportViolation(format!(
                    "ellipse {i} reaches radius {extent:.4} > {limit:.4}"
                )));
            }
        }
        Ok(())
    }
}

fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn spectral_norm(m: &[[f64; 2]; 2]) -> f64 {
    let e = (m[0][0].powi(2) + m[0][1].powi(2) + m[1][0].powi(2) + m[1][1].powi(2)) / 2.0;
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    (e + (e * e - det * det).max(0.0).sqrt()).sqrt()
}

/// A smooth scalar motion profile on normalized time `t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    Linear {
        rate: f64,
    },
    /// `a·(1 − cos 2πt)/2`: starts and ends at rest, peaks at `t = 1/2`.
    RaisedCosine {
        amplitude: f64,
    },
}

impl Trajectory {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Trajectory::Zero => 0.0,
            Trajectory::Constant { value } => value,
            Trajectory::Linear { rate } => rate * t,
            Trajectory::RaisedCosine { amplitude } => {
                amplitude * (1.0 - (2.0 * std::f64::consts::PI * t).cos()) / 2.0
            }
        }
    }

    /// sup over `t ∈ [0, 1]` of `|value(t)|`.
    pub fn bound(&self) -> f64 {
        match *self {
            Trajectory::Zero => 0.0,
            Trajectory::Constant { value } => value.abs(),
            Trajectory::Linear { rate } => rate.abs(),
            Trajectory::RaisedCosine { amplitude } => amplitude.abs(),
        }
    }
}

/// Global affine motion: per-axis scaling `1 + s_i(t)`, rotation `θ(t)` and
/// translation `c(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct MotionSpec {
    #[serde(default)]
    pub translation: [Trajectory; 2],
    #[serde(default)]
    pub rotation: Trajectory,
    #[serde(default)]
    pub scaling: [Trajectory; 2],
}

impl MotionSpec {
    pub fn identity() -> Self {
        MotionSpec::default()
    }

    /// Raised-cosine translation with peak norm `c_max` and raised-cosine
    /// rotation peaking at `theta_max`.
    pub fn smooth(c_max: f64, theta_max: f64) -> Self {
        MotionSpec {
            translation: [
                Trajectory::RaisedCosine {
                    amplitude: 0.8 * c_max,
                },
                Trajectory::RaisedCosine {
                    amplitude: -0.6 * c_max,
                },
            ],
            rotation: Trajectory::RaisedCosine {
                amplitude: theta_max,
            },
            scaling: [Trajectory::Zero, Trajectory::Zero],
        }
    }

    pub fn is_static(&self) -> bool {
        self.translation
            .iter()
            .chain(&self.scaling)
            .chain([&self.rotation])
            .all(|t| t.bound() == 0.0)
    }

    pub fn translation_bound(&self) -> f64 {
        self.translation[0]
            .bound()
            .hypot(self.translation[1].bound())
    }

    pub fn rotation_bound(&self) -> f64 {
        self.rotation.bound()
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.scaling {
            if s.bound() >= 0.5 {
                return Err(Error::invalid(
                    "motion.scaling",
                    "scale factors must stay within (0.5, 1.5)",
                ));
            }
        }
        let all = self
            .translation
            .iter()
            .chain(&self.scaling)
            .chain([&self.rotation]);
        for t in all {
            let finite = match *t {
                Trajectory::Zero => true,
                Trajectory::Constant { value } => value.is_finite(),
                Trajectory::Linear { rate } => rate.is_finite(),
                Trajectory::RaisedCosine { amplitude } => amplitude.is_finite(),
            };
            if !finite {
                return Err(Error::invalid("motion", "non-finite trajectory parameter"));
            }
        }
        Ok(())
    }
}

/// `x ↦ linear·x + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub linear: [[f64; 2]; 2],
    pub offset: [f64; 2],
}

impl Affine {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let l = &self.linear;
        [
            l[0][0] * p[0] + l[0][1] * p[1] + self.offset[0],
            l[1][0] * p[0] + l[1][1] * p[1] + self.offset[1],
        ]
    }

    pub fn inverse_apply(&self, p: [f64; 2]) -> [f64; 2] {
        let l = &self.linear;
        let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
        let (x, y) = (p[0] - self.offset[0], p[1] - self.offset[1]);
        [
            (l[1][1] * x - l[0][1] * y) / det,
            (-l[1][0] * x + l[0][0] * y) / det,
        ]
    }
}

/// Scaling, then rotation, then translation.
pub fn motion_at(motion: &MotionSpec, t: f64) -> Affine {
    let sx = 1.0 + motion.scaling[0].value(t);
    let sy = 1.0 + motion.scaling[1].value(t);
    let angle = motion.rotation.value(t);
    let (c, s) = (angle.cos(), angle.sin());
    Affine {
        linear: [[c * sx, -s * sy], [s * sx, c * sy]],
        offset: [
            motion.translation[0].value(t),
            motion.translation[1].value(t),
        ],
    }
}

/// Pull-back rasterization: each pixel center is mapped through the inverse
/// warp and tested against the static ellipses.
pub fn render_frame(spec: &PhantomSpec, motion: &MotionSpec, t: f64) -> Result<Frame> {
    spec.validate()?;
    let warp = motion_at(motion, t);
    spec.check_support(&warp)?;
    Frame::from_fn(spec.width, spec.pixel_size, |x, y| {
        let [u, v] = warp.inverse_apply([x, y]);
        spec.ellipses
            .iter()
            .map(|e| e.intensity * e.profile(u, v, spec.edge_width))
            .sum()
    })
}

/// A sequence of frames at uniform times `t_p = p/P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Movie {
    pub frames: Vec<Frame>,
    pub times: Vec<f64>,
}

impl Movie {
    pub fn new(frames: Vec<Frame>, times: Vec<f64>) -> Result<Self> {
        if frames.len() != times.len() {
            return Err(Error::dims(format!(
                "{} frames but {} times",
                frames.len(),
                times.len()
            )));
        }
        if let Some(first) = frames.first() {
            for f in &frames[1..] {
                first.check_same_grid(f)?;
            }
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("times", "must be strictly increasing"));
        }
        Ok(Movie { frames, times })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, Frame::width)
    }
}

pub fn sample_times(views: usize) -> Vec<f64> {
    (0..views).map(|p| p as f64 / views as f64).collect()
}

/// The analytic frames at `t_p = p/P`.
pub fn truth_movie(spec: &PhantomSpec, motion: &MotionSpec, views: usize) -> Result<Movie> {
    let times = sample_times(views);
    let frames = times
        .par_iter()
        .map(|&t| render_frame(spec, motion, t))
        .collect::<Result<Vec<_>>>()?;
    Movie::new(frames, times)
}

/// Data acquired one view per time sample: column `p` of `values` is the
/// projection of the object at `t_p` along `scheme.angles[p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSequentialSinogram {
    pub values: DMatrix<f64>,
    pub scheme: AngularScheme,
    pub times: Vec<f64>,
    pub detector: DetectorGrid,
}

impl TimeSequentialSinogram {
    pub fn new(
        values: DMatrix<f64>,
        scheme: AngularScheme,
        detector: DetectorGrid,
    ) -> Result<Self> {
        if values.nrows() != detector.bins || values.ncols() != scheme.len() {
            return Err(Error::dims(format!(
                "data is {}×{}, expected {}×{}",
                values.nrows(),
                values.ncols(),
                detector.bins,
                scheme.len()
            )));
        }
        let times = sample_times(scheme.len());
        Ok(TimeSequentialSinogram {
            values,
            scheme,
            times,
            detector,
        })
    }

    pub fn views(&self) -> usize {
        self.scheme.len()
    }

    /// The same data viewed as an ordinary (inconsistent) sinogram.
    pub fn as_sinogram(&self) -> Result<Sinogram> {
        Sinogram::new(
            self.values.clone(),
            self.scheme.angles.clone(),
            self.detector,
        )
    }
}

/// Additive white Gaussian noise with standard deviation `sigma·max|g|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

pub fn simulate_acquisition(
    spec: &PhantomSpec,
    motion: &MotionSpec,
    scheme: &AngularScheme,
    detector: &DetectorGrid,
    noise: NoiseSpec,
) -> Result<TimeSequentialSinogram> {
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(Error::invalid(
            "noise_sigma",
            "must be a nonnegative number",
        ));
    }
    let times = sample_times(scheme.len());
    let columns = times
        .par_iter()
        .zip(&scheme.angles)
        .map(|(&t, &theta)| project_single(&render_frame(spec, motion, t)?, theta, detector))
        .collect::<Result<Vec<_>>>()?;
    let mut values = DMatrix::zeros(detector.bins, scheme.len());
    for (p, col) in columns.iter().enumerate() {
        values.column_mut(p).copy_from_slice(col);
    }
    if noise.sigma > 0.0 {
        let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let dist = Normal::new(0.0, noise.sigma * peak)
            .map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        for v in values.iter_mut() {
            *v += dist.sample(&mut rng);
        }
    }
    TimeSequentialSinogram::new(values, scheme.clone(), *detector)
}

/// Reference movie: every frame reconstructed by FBP from `fbp_angles`
/// simultaneous projections over `[0, π)`.
pub fn benchmark_movie(
    spec: &PhantomSpec,
    motion: &MotionSpec,
    views: usize,
    fbp_angles: usize,
    detector: &DetectorGrid,
) -> Result<Movie> {
    let angles = uniform_half_circle(fbp_angles);
    let times = sample_times(views);
    let frames = times
        .par_iter()
        .map(|&t| {
            fbp(&radon_project(
                &render_frame(spec, motion, t)?,
                &angles,
                detector,
            )?)
        })
        .collect::<Result<Vec<_>>>()?;
    Movie::new(frames, times)
}
