//! View-angle sampling schemes for time-sequential acquisition.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Progressive,
    Random,
    BitReversed,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Progressive => "progressive",
            SchemeKind::Random => "random",
            SchemeKind::BitReversed => "bit_reversed",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "progressive" => Ok(SchemeKind::Progressive),
            "random" => Ok(SchemeKind::Random),
            "bit_reversed" | "bit-reversed" => Ok(SchemeKind::BitReversed),
            other => Err(Error::invalid(
                "scheme",
                format!("unknown scheme `{other}`"),
            )),
        }
    }
}

/// Angular span of a scheme: `[0, π)` when π-symmetry is exploited,
/// `[0, 2π)` otherwise.
pub fn span_for(symmetric: bool) -> f64 {
    if symmetric {
        PI
    } else {
        2.0 * PI
    }
}

/// The view angle `θ_p` acquired at time sample `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularScheme {
    pub angles: Vec<f64>,
    pub span: f64,
    pub kind: SchemeKind,
    pub seed: Option<u64>,
}

impl AngularScheme {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Generates a scheme of the given kind; `seed` is only used by `Random`.
    pub fn generate(kind: SchemeKind, views: usize, span: f64, seed: u64) -> Result<Self> {
        match kind {
            SchemeKind::Progressive => progressive(views, span),
            SchemeKind::Random => random_scheme(views, span, seed),
            SchemeKind::BitReversed => bit_reversed(views, span),
        }
    }
}

fn check_views(views: usize, span: f64) -> Result<()> {
    if views == 0 {
        return Err(Error::invalid("views", "need at least one view"));
    }
    if !(span > 0.0 && span.is_finite()) {
        return Err(Error::invalid(
            "span",
            format!("{span} is not a positive angle"),
        ));
    }
    Ok(())
}

/// `θ_p = p·span/P`.
pub fn progressive(views: usize, span: f64) -> Result<AngularScheme> {
    check_views(views, span)?;
    let angles = (0..views).map(|p| p as f64 * span / views as f64).collect();
    Ok(AngularScheme {
        angles,
        span,
        kind: SchemeKind::Progressive,
        seed: None,
    })
}

/// IID uniform angles on `[0, span)`; a draw that collides with an earlier
/// angle is redrawn so that all angles stay distinct.
pub fn random_scheme(views: usize, span: f64, seed: u64) -> Result<AngularScheme> {
    check_views(views, span)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut angles: Vec<f64> = Vec::with_capacity(views);
    let mut seen = std::collections::HashSet::with_capacity(views);
    while angles.len() < views {
        let theta = rng.random_range(0.0..span);
        if seen.insert(theta.to_bits()) {
            angles.push(theta);
        }
    }
    Ok(AngularScheme {
        angles,
        span,
        kind: SchemeKind::Random,
        seed: Some(seed),
    })
}

/// Reverses the low `bits` bits of `p`.
pub fn reverse_bits(p: usize, bits: u32) -> usize {
    if bits == 0 {
        return 0;
    }
    p.reverse_bits() >> (usize::BITS - bits)
}

/// `θ_p = rev_m(p)·span/P` with `m = log₂ P`.
pub fn bit_reversed(views: usize, span: f64) -> Result<AngularScheme> {
    check_views(views, span)?;
    if !views.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(views));
    }
    let bits = views.trailing_zeros();
    let angles = (0..views)
        .map(|p| reverse_bits(p, bits) as f64 * span / views as f64)
        .collect();
    Ok(AngularScheme {
        angles,
        span,
        kind: SchemeKind::BitReversed,
        seed: None,
    })
}
