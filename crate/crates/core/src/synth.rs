//! Reference densities for synthetic experiments, their inverse-transform
//! samplers, and comparison metrics.
//!
//! Samplers draw uniforms from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded
//! with `seed_from_u64`, so a seed reproduces the same sample on every
//! platform.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::DensityModel;
use crate::quadrature;

/// Right end used when integrating the exponential density; the mass
/// beyond it is `e^-50`.
const EXP_TRUNCATION: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrueDensity {
    /// `exp(-x)` on `[0, inf)`.
    Exp,
    /// `2/3` on `[1, 2]`, `1/3` on `[3, 4]`.
    Bimodal,
    /// `1` on `[0, 1/2]`, `1/2` on `[1, 3/2]` and on `[3, 7/2]`.
    Trimodal,
}

impl TrueDensity {
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::Exp => {
                if x >= 0.0 {
                    (-x).exp()
                } else {
                    0.0
                }
            }
            Self::Bimodal => {
                if (1.0..=2.0).contains(&x) {
                    2.0 / 3.0
                } else if (3.0..=4.0).contains(&x) {
                    1.0 / 3.0
                } else {
                    0.0
                }
            }
            Self::Trimodal => {
                if (0.0..=0.5).contains(&x) {
                    1.0
                } else if (1.0..=1.5).contains(&x) || (3.0..=3.5).contains(&x) {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// Quantile function, `p` in `[0, 1)`.
    pub fn inverse_cdf(&self, p: f64) -> f64 {
        match self {
            Self::Exp => -(-p).ln_1p(),
            Self::Bimodal => {
                if p < 2.0 / 3.0 {
                    1.0 + 1.5 * p
                } else {
                    3.0 + 3.0 * (p - 2.0 / 3.0)
                }
            }
            Self::Trimodal => {
                if p < 0.5 {
                    p
                } else if p < 0.75 {
                    1.0 + 2.0 * (p - 0.5)
                } else {
                    3.0 + 2.0 * (p - 0.75)
                }
            }
        }
    }

    /// Support end points and discontinuities, sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Exp => vec![0.0, EXP_TRUNCATION],
            Self::Bimodal => vec![1.0, 2.0, 3.0, 4.0],
            Self::Trimodal => vec![0.0, 0.5, 1.0, 1.5, 3.0, 3.5],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exp => "exp",
            Self::Bimodal => "bimodal",
            Self::Trimodal => "trimodal",
        }
    }

    /// `size` independent draws by inverse transform.
    pub fn sample(&self, size: usize, seed: u64) -> Result<Vec<f64>> {
        if size == 0 {
            return Err(Error::InvalidParameter {
                name: "size",
                reason: "sample size must be at least 1".into(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..size)
            .map(|_| self.inverse_cdf(rng.gen::<f64>()))
            .collect())
    }
}

impl fmt::Display for TrueDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrueDensity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(Self::Exp),
            "bimodal" => Ok(Self::Bimodal),
            "trimodal" => Ok(Self::Trimodal),
            other => Err(Error::InvalidParameter {
                name: "density",
                reason: format!("unknown density {other:?} (expected exp, bimodal or trimodal)"),
            }),
        }
    }
}

/// `integral (f_hat - f)^2` over the union of the model interval and the
/// true support, with each density taken as zero off its own support.
pub fn integrated_squared_error(model: &DensityModel, truth: TrueDensity, tol: f64) -> Result<f64> {
    let dom = model.domain();
    let mut breaks = truth.breakpoints();
    // Subdivide the model interval so high-degree polynomials stay well
    // resolved by each piece.
    let pieces = (model.basis().degree() / 8).max(1);
    breaks.extend((0..=pieces).map(|k| dom.from_unit(k as f64 / pieces as f64)));
    breaks.push(dom.a());
    breaks.push(dom.b());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    quadrature::integrate_piecewise(
        |x| {
            let d = model.pdf(x) - truth.pdf(x);
            d * d
        },
        &breaks,
        tol,
    )
}

/// Evenly spaced grid over `[a, b]` including both end points.
pub fn grid(a: f64, b: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..points)
            .map(|k| {
                if k + 1 == points {
                    b
                } else {
                    a + (b - a) * k as f64 / (points - 1) as f64
                }
            })
            .collect(),
    }
}

/// Number of strict interior local maxima of a sampled curve. A plateau
/// counts once when both of its neighbours are lower; end points never
/// count.
pub fn count_local_maxima(values: &[f64]) -> usize {
    let n = values.len();
    let mut count = 0;
    let mut i = 1;
    while i + 1 < n {
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        if j + 1 < n && values[i - 1] < values[i] && values[j + 1] < values[i] {
            count += 1;
        }
        i = j + 1;
    }
    count
}
