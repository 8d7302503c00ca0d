use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use prosep::phantom::{MotionSpec, NoiseSpec, PhantomSpec};
use prosep::psmodel::HarmonicOrder;
use prosep::radon::DetectorGrid;
use prosep::sampling::{span_for, AngularScheme, SchemeKind};
use prosep::solver::SolverConfig;
use serde::{Deserialize, Serialize};

/// Named hyperparameter sets: `(name, JSON overlay)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("p256", include_str!("../presets/p256.json")),
    ("p256-symm", include_str!("../presets/p256-symm.json")),
    ("p512", include_str!("../presets/p512.json")),
    ("p512-symm", include_str!("../presets/p512-symm.json")),
    ("p1024", include_str!("../presets/p1024.json")),
    ("p1024-symm", include_str!("../presets/p1024-symm.json")),
];

/// Everything needed to simulate and reconstruct one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// JSON phantom description; takes precedence over the built-in head.
    pub phantom_path: Option<PathBuf>,
    /// Inline phantom, filled in when the configuration is resolved.
    pub phantom: Option<PhantomSpec>,
    /// Built-in Shepp-Logan grid width in pixels.
    pub width: usize,
    pub pixel_size: f64,
    /// Edge ramp of the built-in phantom, in pixels.
    pub edge_width_px: f64,
    pub motion: MotionSpec,
    pub views: usize,
    pub scheme: SchemeKind,
    pub scheme_seed: u64,
    pub symmetric: bool,
    pub psm_order: usize,
    pub max_harmonic: usize,
    pub subspace_dim: usize,
    /// Detector bins; defaults to the frame width.
    pub bins: Option<usize>,
    /// Detector spacing; defaults to the pixel size.
    pub detector_spacing: Option<f64>,
    pub noise_sigma: f64,
    pub noise_seed: u64,
    /// Simultaneous projections per benchmark and reconstructed frame;
    /// defaults to `views`.
    pub fbp_angles: Option<usize>,
    pub solver: SolverConfig,
    /// Accept fewer equations per bin than unknowns.
    pub allow_underdetermined: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            phantom_path: None,
            phantom: None,
            width: 64,
            pixel_size: 1.0,
            edge_width_px: 2.0,
            motion: MotionSpec::smooth(3.0, std::f64::consts::PI / 16.0),
            views: 256,
            scheme: SchemeKind::BitReversed,
            scheme_seed: 0,
            symmetric: true,
            psm_order: 5,
            max_harmonic: 30,
            subspace_dim: 6,
            bins: None,
            detector_spacing: None,
            noise_sigma: 0.0,
            noise_seed: 0,
            fbp_angles: None,
            solver: SolverConfig::default(),
            allow_underdetermined: false,
        }
    }
}

/// Overlays `overlay` onto `base` key by key, recursing into objects.
fn merge(base: &mut serde_json::Value, overlay: serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (key, value) in o {
                match b.get_mut(&key) {
                    Some(slot) if slot.is_object() && value.is_object() => merge(slot, value),
                    _ => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let overlay: serde_json::Value = serde_json::from_str(text)?;
        RunConfig::default().overlaid(overlay)
    }

    /// A copy with the keys of `overlay` replaced.
    pub fn overlaid(&self, overlay: serde_json::Value) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        merge(&mut value, overlay);
        Ok(serde_json::from_value(value)?)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let Some((_, text)) = PRESETS.iter().find(|(n, _)| *n == name) else {
            let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
            bail!("unknown preset `{name}` (available: {})", names.join(", "));
        };
        RunConfig::from_json(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        RunConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Reads the `config` entry of a manifest written by a previous run.
    pub fn from_manifest(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let manifest: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let config = manifest
            .get("config")
            .cloned()
            .with_context(|| format!("{} has no `config` entry", path.display()))?;
        Ok(serde_json::from_value(config)?)
    }

    pub fn phantom_spec(&self) -> Result<PhantomSpec> {
        if let Some(spec) = &self.phantom {
            return Ok(spec.clone());
        }
        if let Some(path) = &self.phantom_path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            return serde_json::from_str(&text)
                .with_context(|| format!("parsing phantom {}", path.display()));
        }
        Ok(PhantomSpec::shepp_logan(self.width, self.pixel_size)
            .with_edge_width(self.edge_width_px * self.pixel_size))
    }

    /// Inlines the phantom and detector so the result replays without
    /// external files.
    pub fn resolved(&self) -> Result<Self> {
        let spec = self.phantom_spec()?;
        let mut out = self.clone();
        out.width = spec.width;
        out.pixel_size = spec.pixel_size;
        out.bins = Some(self.bins.unwrap_or(spec.width));
        out.detector_spacing = Some(self.detector_spacing.unwrap_or(spec.pixel_size));
        out.fbp_angles = Some(self.fbp_angles.unwrap_or(self.views));
        out.phantom = Some(spec);
        out.phantom_path = None;
        Ok(out)
    }

    pub fn detector(&self) -> Result<DetectorGrid> {
        Ok(DetectorGrid::new(
            self.bins.unwrap_or(self.width),
            self.detector_spacing.unwrap_or(self.pixel_size),
        )?)
    }

    pub fn order(&self) -> Result<HarmonicOrder> {
        HarmonicOrder::new(self.max_harmonic, self.psm_order, self.subspace_dim)
            .context("invalid `subspace_dim`")
    }

    pub fn scheme(&self) -> Result<AngularScheme> {
        Ok(AngularScheme::generate(
            self.scheme,
            self.views,
            span_for(self.symmetric),
            self.scheme_seed,
        )?)
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            sigma: self.noise_sigma,
            seed: self.noise_seed,
        }
    }

    pub fn fbp_angles(&self) -> usize {
        self.fbp_angles.unwrap_or(self.views)
    }

    /// Checks every field that can be checked without running anything.
    pub fn validate(&self) -> Result<()> {
        if self.views == 0 {
            bail!("invalid `views`: need at least one view");
        }
        if self.fbp_angles == Some(0) {
            bail!("invalid `fbp_angles`: need at least one angle");
        }
        let order = self.order()?;
        if !self.allow_underdetermined && !order.is_solvable(self.views, self.symmetric) {
            let rows = if self.symmetric {
                2 * self.views
            } else {
                self.views
            };
            bail!(
                "invalid `max_harmonic`/`psm_order`: {rows} equations per bin for {} unknowns \
                 (set `allow_underdetermined` to proceed)",
                order.coefficients()
            );
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            bail!("invalid `noise_sigma`: must be a nonnegative number");
        }
        let spec = self.phantom_spec()?;
        spec.validate().context("invalid `phantom`")?;
        self.motion.validate().context("invalid `motion`")?;
        spec.check_motion(&self.motion, 64)
            .context("invalid `motion`")?;
        let detector = self
            .detector()
            .context("invalid `bins`/`detector_spacing`")?;
        detector
            .check_covers(spec.width as f64 * spec.pixel_size / 2.0)
            .context("invalid `bins`/`detector_spacing`")?;
        self.solver.validate().context("invalid `solver`")?;
        Ok(())
    }
}
