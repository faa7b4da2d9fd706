//! Bernstein window functions on the unit interval and the affine map from
//! the data interval onto it.
//!
//! Window `i` of degree `n` is
//!
//! ```text
//! phi_i(t) = N_i * C(n, i) * t^i * (1 - t)^(n - i),   0 <= t <= 1
//! ```
//!
//! with `N_i` chosen so that each window integrates to one. The Beta
//! integral gives `N_i = n + 1` for every `i`; construction confirms this
//! numerically.

use crate::error::{Error, Result};
use crate::quadrature;

/// Above this degree windows are evaluated in log space.
const LOG_SPACE_DEGREE: usize = 30;

/// Tolerance for the construction-time normalization audit.
const NORMALIZER_AUDIT_TOL: f64 = 1e-9;

/// A family of `n + 1` nonnegative, unit-integral Bernstein windows.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBasis {
    degree: usize,
    normalizer: f64,
    binomials: Vec<f64>,
    log_binomials: Vec<f64>,
}

impl WindowBasis {
    /// Builds the degree-`degree` Bernstein basis and audits the analytic
    /// normalizers against adaptive quadrature.
    pub fn bernstein(degree: usize) -> Result<Self> {
        let basis = Self::bernstein_unchecked(degree);
        for i in 0..=degree {
            let integral = basis.raw_integral(i)?;
            let n_i = 1.0 / integral;
            if (n_i - basis.normalizer).abs() > NORMALIZER_AUDIT_TOL * basis.normalizer {
                return Err(Error::InvalidParameter {
                    name: "degree",
                    reason: format!(
                        "window {i} normalizer audit failed: quadrature {n_i}, closed form {}",
                        basis.normalizer
                    ),
                });
            }
        }
        Ok(basis)
    }

    /// Same basis without the quadrature audit. Used when reloading models
    /// whose basis was audited when it was first built.
    pub(crate) fn bernstein_unchecked(degree: usize) -> Self {
        let n = degree;
        let mut binomials = Vec::with_capacity(n + 1);
        let mut log_binomials = Vec::with_capacity(n + 1);
        let mut c = 1.0f64;
        let mut lc = 0.0f64;
        binomials.push(c);
        log_binomials.push(lc);
        for k in 1..=n {
            // C(n, k) = C(n, k-1) * (n - k + 1) / k
            let ratio = (n - k + 1) as f64 / k as f64;
            c *= ratio;
            lc += ratio.ln();
            binomials.push(c);
            log_binomials.push(lc);
        }
        Self {
            degree,
            normalizer: (n + 1) as f64,
            binomials,
            log_binomials,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of windows, `degree + 1`.
    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `N_i`; identical for every window of a Bernstein basis.
    pub fn normalizer(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.normalizer)
    }

    /// Value of window `i` at `t`.
    pub fn value(&self, i: usize, t: f64) -> Result<f64> {
        self.check_index(i)?;
        check_unit(t)?;
        Ok(self.value_unchecked(i, t))
    }

    /// All `n + 1` window values at `t`.
    pub fn values(&self, t: f64) -> Result<Vec<f64>> {
        check_unit(t)?;
        Ok((0..=self.degree)
            .map(|i| self.value_unchecked(i, t))
            .collect())
    }

    /// `sum_i weights[i] * phi_i(t)` for `t` in `[0, 1]`.
    pub(crate) fn combine_unchecked(&self, weights: &[f64], t: f64) -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                if w == 0.0 {
                    0.0
                } else {
                    w * self.value_unchecked(i, t)
                }
            })
            .sum()
    }

    pub(crate) fn value_unchecked(&self, i: usize, t: f64) -> f64 {
        let n = self.degree;
        let j = n - i;
        if self.degree <= LOG_SPACE_DEGREE {
            return self.normalizer
                * self.binomials[i]
                * t.powi(i as i32)
                * (1.0 - t).powi(j as i32);
        }
        let s = 1.0 - t;
        // 0^0 = 1 at the endpoints.
        if (i > 0 && t == 0.0) || (j > 0 && s == 0.0) {
            return 0.0;
        }
        let mut log = self.normalizer.ln() + self.log_binomials[i];
        if i > 0 {
            log += i as f64 * t.ln();
        }
        if j > 0 {
            log += j as f64 * s.ln();
        }
        log.exp()
    }

    /// `integral_0^1 C(n, i) t^i (1 - t)^(n - i) dt` by adaptive quadrature.
    fn raw_integral(&self, i: usize) -> Result<f64> {
        let scale = 1.0 / self.normalizer;
        // The raw window peaks at i/n; splitting there keeps narrow
        // high-degree windows from slipping between the first nodes.
        let peak = if self.degree == 0 {
            0.5
        } else {
            (i as f64 / self.degree as f64).clamp(0.0, 1.0)
        };
        let mut breaks = vec![0.0];
        if peak > 0.0 && peak < 1.0 {
            breaks.push(peak);
        }
        breaks.push(1.0);
        quadrature::integrate_piecewise(|t| self.value_unchecked(i, t) * scale, &breaks, 1e-14)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i > self.degree {
            return Err(Error::WindowIndex {
                index: i,
                degree: self.degree,
            });
        }
        Ok(())
    }
}

fn check_unit(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutsideUnit { t });
    }
    Ok(())
}

/// Affine map between the data interval `[a, b]` and `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainMap {
    a: f64,
    b: f64,
}

impl DomainMap {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInterval { a, b });
        }
        Ok(Self { a, b })
    }

    /// `[min - eta, max + eta]` with `eta = 1e-9 * (max - min)`.
    ///
    /// A sample with zero spread gets the unit-width interval centred on it.
    pub fn enclosing(observations: &[f64]) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(index) = observations.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let lo = observations.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = observations
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let spread = hi - lo;
        if spread == 0.0 {
            return Self::new(lo - 0.5, hi + 0.5);
        }
        let eta = 1e-9 * spread;
        Self::new(lo - eta, hi + eta)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.a..=self.b).contains(&x)
    }

    /// `(x - a) / (b - a)`. Points outside `[a, b]` are rejected, not clamped.
    pub fn to_unit(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::OutsideDomain {
                index: 0,
                x,
                a: self.a,
                b: self.b,
            });
        }
        Ok(self.to_unit_unchecked(x))
    }

    pub(crate) fn to_unit_unchecked(&self, x: f64) -> f64 {
        ((x - self.a) / (self.b - self.a)).clamp(0.0, 1.0)
    }

    pub fn from_unit(&self, t: f64) -> f64 {
        self.a + t * (self.b - self.a)
    }

    /// Converts a density on `[0, 1]` to the matching density on `[a, b]`.
    pub fn density_back(&self, g: f64) -> f64 {
        g / (self.b - self.a)
    }
}
