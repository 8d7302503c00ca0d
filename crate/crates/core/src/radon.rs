//! Parallel-beam Radon transform, ramp-filtered backprojection and the
//! per-angle projection energy estimate.
//!
//! Coordinates: pixel `(row, col)` of a `W × W` frame has its center at
//! `x = (col − (W−1)/2)·h`, `y = (row − (W−1)/2)·h` where `h` is the pixel
//! size. A projection at angle `θ` integrates along the lines
//! `x·cos θ + y·sin θ = s`, so `g(−s, θ) = g(s, θ + π)`.
//!
//! Frames are piecewise constant over square pixels. The projector integrates
//! every pixel footprint exactly over each detector bin and divides by the bin
//! width, so values are bin-averaged line integrals. This keeps the total
//! projected mass independent of the angle.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// A square image whose support lies inside the inscribed disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    pixel_size: f64,
    values: Vec<f64>,
}

impl Frame {
    /// Builds a frame from row-major values. Pixels not entirely inside the
    /// inscribed disk of diameter `width·pixel_size` are zeroed.
    pub fn new(width: usize, pixel_size: f64, mut values: Vec<f64>) -> Result<Self> {
        if width == 0 {
            return Err(Error::invalid("width", "must be positive"));
        }
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(Error::invalid(
                "pixel_size",
                format!("{pixel_size} is not a positive length"),
            ));
        }
        if values.len() != width * width {
            return Err(Error::dims(format!(
                "{} values for a {width}×{width} frame",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "values",
                format!("non-finite pixel value {v}"),
            ));
        }
        for row in 0..width {
            for col in 0..width {
                if !pixel_inside_disk(width, row, col) {
                    values[row * width + col] = 0.0;
                }
            }
        }
        Ok(Frame {
            width,
            pixel_size,
            values,
        })
    }

    pub fn zeros(width: usize, pixel_size: f64) -> Result<Self> {
        Frame::new(width, pixel_size, vec![0.0; width * width])
    }

    /// Samples `f(x, y)` at every pixel center.
    pub fn from_fn(width: usize, pixel_size: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let c = (width as f64 - 1.0) / 2.0;
        let mut values = Vec::with_capacity(width * width);
        for row in 0..width {
            for col in 0..width {
                values.push(f(
                    (col as f64 - c) * pixel_size,
                    (row as f64 - c) * pixel_size,
                ));
            }
        }
        Frame::new(width, pixel_size, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.width
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Diameter `D` of the support disk.
    pub fn diameter(&self) -> f64 {
        self.width as f64 * self.pixel_size
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        let c = (self.width as f64 - 1.0) / 2.0;
        (
            (col as f64 - c) * self.pixel_size,
            (row as f64 - c) * self.pixel_size,
        )
    }

    /// ‖f‖₂² of the piecewise-constant image.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.pixel_size * self.pixel_size
    }

    /// ∫f of the piecewise-constant image.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.pixel_size * self.pixel_size
    }

    /// Radius of the smallest centered disk containing every nonzero pixel
    /// square (0 for an all-zero frame).
    pub fn support_radius(&self) -> f64 {
        let half = self.pixel_size / 2.0;
        let mut radius: f64 = 0.0;
        for row in 0..self.width {
            for col in 0..self.width {
                if self.get(row, col) != 0.0 {
                    let (x, y) = self.pixel_center(row, col);
                    radius = radius.max((x.abs() + half).hypot(y.abs() + half));
                }
            }
        }
        radius
    }

    /// Elementwise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Frame, b: f64) -> Result<Frame> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Frame::new(self.width, self.pixel_size, values)
    }

    pub fn check_same_grid(&self, other: &Frame) -> Result<()> {
        if self.width != other.width || self.pixel_size != other.pixel_size {
            return Err(Error::dims(format!(
                "frame grids differ: {}@{} vs {}@{}",
                self.width, self.pixel_size, other.width, other.pixel_size
            )));
        }
        Ok(())
    }
}

/// A pixel is kept when its farthest corner lies inside the inscribed disk.
pub(crate) fn pixel_inside_disk(width: usize, row: usize, col: usize) -> bool {
    let c = (width as f64 - 1.0) / 2.0;
    let dx = (col as f64 - c).abs() + 0.5;
    let dy = (row as f64 - c).abs() + 0.5;
    let r = width as f64 / 2.0;
    dx * dx + dy * dy <= r * r * (1.0 + 1e-12)
}

/// Uniform detector: bin `j` is centered at `s_j = (j − (J−1)/2)·spacing + center`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectorGrid {
    pub bins: usize,
    pub spacing: f64,
    #[serde(default)]
    pub center: f64,
}

impl DetectorGrid {
    pub fn new(bins: usize, spacing: f64) -> Result<Self> {
        DetectorGrid::with_center(bins, spacing, 0.0)
    }

    /// A grid shifted by `center`; only `center == 0` is symmetric.
    pub fn with_center(bins: usize, spacing: f64, center: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("bins", "must be positive"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(
                "spacing",
                format!("{spacing} is not a positive length"),
            ));
        }
        Ok(DetectorGrid {
            bins,
            spacing,
            center,
        })
    }

    /// One bin per pixel, spanning exactly the frame diameter.
    pub fn matching(frame_width: usize, pixel_size: f64) -> Result<Self> {
        DetectorGrid::new(frame_width, pixel_size)
    }

    pub fn offset(&self, j: usize) -> f64 {
        (j as f64 - (self.bins as f64 - 1.0) / 2.0) * self.spacing + self.center
    }

    pub fn offsets(&self) -> Vec<f64> {
        (0..self.bins).map(|j| self.offset(j)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.center == 0.0
    }

    /// Index of the bin at `−s_j`.
    pub fn mirror(&self, j: usize) -> usize {
        self.bins - 1 - j
    }

    /// Distance from `s = 0` to the nearest detector edge.
    pub fn half_extent(&self) -> f64 {
        self.bins as f64 * self.spacing / 2.0 - self.center.abs()
    }

    pub fn check_covers(&self, radius: f64) -> Result<()> {
        if self.half_extent() < radius * (1.0 - 1e-12) {
            return Err(Error::DetectorCoverage {
                half_extent: self.half_extent(),
                radius,
            });
        }
        Ok(())
    }

    fn lower_edge(&self) -> f64 {
        self.offset(0) - self.spacing / 2.0
    }
}

/// Projection data: `values[(j, a)]` is the bin-averaged line integral at
/// offset `s_j` and angle `angles[a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub values: DMatrix<f64>,
    pub angles: Vec<f64>,
    pub detector: DetectorGrid,
}

impl Sinogram {
    pub fn new(values: DMatrix<f64>, angles: Vec<f64>, detector: DetectorGrid) -> Result<Self> {
        if values.nrows() != detector.bins || values.ncols() != angles.len() {
            return Err(Error::dims(format!(
                "sinogram is {}×{} but detector has {} bins and {} angles were given",
                values.nrows(),
                values.ncols(),
                detector.bins,
                angles.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "values",
                "sinogram contains non-finite entries",
            ));
        }
        Ok(Sinogram {
            values,
            angles,
            detector,
        })
    }
}

/// Exact chord-length footprint of one square pixel, integrated over `[lo, hi]`
/// relative to the projected pixel center.
struct Footprint {
    outer: f64,
    inner: f64,
    height: f64,
    area: f64,
}

impl Footprint {
    fn new(pixel_size: f64, theta: f64) -> Self {
        let half = pixel_size / 2.0;
        let (c, s) = (theta.cos().abs(), theta.sin().abs());
        let outer = half * (c + s);
        let inner = half * (c - s).abs();
        let area = pixel_size * pixel_size;
        Footprint {
            outer,
            inner,
            height: area / (outer + inner),
            area,
        }
    }

    /// ∫₀^x of the trapezoid for x ≥ 0.
    fn half_integral(&self, x: f64) -> f64 {
        if x >= self.outer {
            return self.area / 2.0;
        }
        if x <= self.inner {
            return self.height * x;
        }
        let ramp = self.outer - self.inner;
        let rest = self.outer - x;
        self.height * self.inner + self.height * (ramp * ramp - rest * rest) / (2.0 * ramp)
    }

    /// ∫_{−∞}^x of the trapezoid.
    fn cumulative(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.area / 2.0 + self.half_integral(x)
        } else {
            self.area / 2.0 - self.half_integral(-x)
        }
    }
}

fn project_angle(frame: &Frame, theta: f64, detector: &DetectorGrid, out: &mut [f64]) {
    let fp = Footprint::new(frame.pixel_size, theta);
    let (c, s) = (theta.cos(), theta.sin());
    let lower = detector.lower_edge();
    let dsp = detector.spacing;
    let last = detector.bins as isize - 1;
    out.iter_mut().for_each(|v| *v = 0.0);
    for row in 0..frame.width {
        for col in 0..frame.width {
            let v = frame.get(row, col);
            if v == 0.0 {
                continue;
            }
            let (x, y) = frame.pixel_center(row, col);
            let center = x * c + y * s;
            let first_bin = (((center - fp.outer - lower) / dsp).floor() as isize).max(0);
            let last_bin = (((center + fp.outer - lower) / dsp).floor() as isize).min(last);
            let mut below = fp.cumulative(lower + first_bin as f64 * dsp - center);
            for b in first_bin..=last_bin {
                let above = fp.cumulative(lower + (b + 1) as f64 * dsp - center);
                out[b as usize] += v * (above - below);
                below = above;
            }
        }
    }
    out.iter_mut().for_each(|v| *v /= dsp);
}

/// Projects `frame` at every angle in `angles`.
pub fn radon_project(frame: &Frame, angles: &[f64], detector: &DetectorGrid) -> Result<Sinogram> {
    detector.check_covers(frame.diameter() / 2.0)?;
    let mut values = DMatrix::zeros(detector.bins, angles.len());
    let mut column = vec![0.0; detector.bins];
    for (a, &theta) in angles.iter().enumerate() {
        project_angle(frame, theta, detector, &mut column);
        values.column_mut(a).copy_from_slice(&column);
    }
    Sinogram::new(values, angles.to_vec(), *detector)
}

/// Projects at a single angle, returning one detector profile.
pub fn project_single(frame: &Frame, theta: f64, detector: &DetectorGrid) -> Result<Vec<f64>> {
    detector.check_covers(frame.diameter() / 2.0)?;
    let mut column = vec![0.0; detector.bins];
    project_angle(frame, theta, detector, &mut column);
    Ok(column)
}

/// `count` uniformly spaced angles covering `[0, π)`.
pub fn uniform_half_circle(count: usize) -> Vec<f64> {
    (0..count).map(|a| a as f64 * PI / count as f64).collect()
}

/// Ram-Lak filter in the frequency domain: the transform of the band-limited
/// spatial kernel `h(0) = 1/(4τ²)`, `h(nτ) = −1/(nπτ)²` for odd `n`.
struct RampFilter {
    len: usize,
    response: Vec<Complex<f64>>,
}

impl RampFilter {
    fn new(bins: usize, spacing: f64) -> Self {
        let len = 2 * bins.next_power_of_two();
        let mut kernel = vec![Complex::new(0.0, 0.0); len];
        kernel[0].re = 1.0 / (4.0 * spacing * spacing);
        for n in (1..bins).step_by(2) {
            let v = -1.0 / (n as f64 * PI * spacing).powi(2);
            kernel[n].re = v;
            kernel[len - n].re = v;
        }
        FftPlanner::new().plan_fft_forward(len).process(&mut kernel);
        RampFilter {
            len,
            response: kernel,
        }
    }
}

/// Filtered backprojection onto the `J × J` grid with pixel size equal to the
/// detector spacing.
pub fn fbp(sinogram: &Sinogram) -> Result<Frame> {
    let angles = &sinogram.angles;
    if angles.len() < 2 {
        return Err(Error::InsufficientAngles {
            got: angles.len(),
            required: 2,
        });
    }
    let det = sinogram.detector;
    let bins = det.bins;
    let tau = det.spacing;
    let filter = RampFilter::new(bins, tau);
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(filter.len);
    let inverse = planner.plan_fft_inverse(filter.len);

    let mut filtered = vec![vec![0.0; bins]; angles.len()];
    let mut buf = vec![Complex::new(0.0, 0.0); filter.len];
    for (a, out) in filtered.iter_mut().enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for j in 0..bins {
            buf[j].re = sinogram.values[(j, a)];
        }
        forward.process(&mut buf);
        for (b, h) in buf.iter_mut().zip(&filter.response) {
            *b *= h;
        }
        inverse.process(&mut buf);
        // rustfft is unnormalized; the extra τ is the convolution quadrature weight.
        let norm = tau / filter.len as f64;
        for j in 0..bins {
            out[j] = buf[j].re * norm;
        }
    }

    let width = bins;
    let trig: Vec<(f64, f64)> = angles.iter().map(|t| (t.cos(), t.sin())).collect();
    let first = det.offset(0);
    let scale = PI / angles.len() as f64;
    let c = (width as f64 - 1.0) / 2.0;
    let mut values = vec![0.0; width * width];
    for row in 0..width {
        let y = (row as f64 - c) * tau;
        for col in 0..width {
            if !pixel_inside_disk(width, row, col) {
                continue;
            }
            let x = (col as f64 - c) * tau;
            let mut acc = 0.0;
            for ((cos_t, sin_t), q) in trig.iter().zip(&filtered) {
                let pos = (x * cos_t + y * sin_t - first) / tau;
                if pos < 0.0 || pos > (bins - 1) as f64 {
                    continue;
                }
                let i0 = (pos.floor() as usize).min(bins - 1);
                let frac = pos - i0 as f64;
                let upper = if i0 + 1 < bins { q[i0 + 1] } else { 0.0 };
                acc += q[i0] * (1.0 - frac) + upper * frac;
            }
            values[row * width + col] = acc * scale;
        }
    }
    Frame::new(width, tau, values)
}

/// Both sides of the per-angle estimate `∫|Rf(s,θ)|² ds ≤ 2L‖f‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Support radius `L` used on the right-hand side.
    pub radius: f64,
}

impl EnergyCheck {
    pub fn holds_with_slack(&self, slack: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + slack)
    }
}

/// Evaluates the estimate at `angle` with `L` the tight support radius of the
/// frame. The integral is a quadrature over a detector twice as fine as the
/// pixel grid.
pub fn radon_energy_check(frame: &Frame, angle: f64) -> Result<EnergyCheck> {
    let radius = frame.support_radius();
    radon_energy_check_with_radius(frame, angle, radius)
}

/// As [`radon_energy_check`] with an explicit support radius `L`.
pub fn radon_energy_check_with_radius(
    frame: &Frame,
    angle: f64,
    radius: f64,
) -> Result<EnergyCheck> {
    if radius < frame.support_radius() * (1.0 - 1e-12) {
        return Err(Error::SupportViolation(format!(
            "frame support radius {} exceeds L = {radius}",
            frame.support_radius()
        )));
    }
    let detector = DetectorGrid::new(2 * frame.width(), frame.pixel_size() / 2.0)?;
    let profile = project_single(frame, angle, &detector)?;
    let lhs = profile.iter().map(|g| g * g).sum::<f64>() * detector.spacing;
    Ok(EnergyCheck {
        lhs,
        rhs: 2.0 * radius * frame.energy(),
        radius,
    })
}
