//! Reference maximizers for small instances.
//!
//! Both work directly on the amplitude form of the likelihood,
//! `L(c) = sum_j ln(sum_i c_i^2 a_ij)` with `|c|^2 = r`, restricted to the
//! nonnegative orthant (the likelihood is invariant under sign flips of any
//! `c_i`). They share nothing with the coordinate solver and exist to check
//! it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design::DesignMatrix;
use crate::error::{Error, Result};

/// Largest window count the grid search accepts.
pub const GRID_MAX_WINDOWS: usize = 4;
/// Largest sample count projected gradient accepts.
pub const GRADIENT_MAX_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Grid,
    ProjectedGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Best amplitude vector, on the sphere `|c|^2 = r`.
    pub amplitudes: Vec<f64>,
    pub best_loglik: f64,
    /// Number of likelihood evaluations spent.
    pub evaluations: usize,
    pub method: OracleMethod,
    /// Endpoint of every start (projected gradient only).
    pub endpoints: Vec<Vec<f64>>,
    /// Worst relative analytic-vs-finite-difference gradient error seen at
    /// the start points (projected gradient only).
    pub gradient_check: f64,
}

impl OracleResult {
    /// Mixture weights `c_i^2`, comparable to fitted coefficients.
    pub fn weights(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c * c).collect()
    }
}

/// `sum_j ln(sum_i c_i^2 a_ij)`; `-inf` when some sample gets zero density.
pub fn amplitude_loglik(a: &DesignMatrix, c: &[f64]) -> f64 {
    a.columns()
        .map(|col| {
            col.iter()
                .zip(c)
                .map(|(x, ci)| x * ci * ci)
                .sum::<f64>()
                .ln()
        })
        .sum()
}

/// `dL/dc_k = sum_j 2 c_k a_kj / l_j`.
pub fn amplitude_gradient(a: &DesignMatrix, c: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; c.len()];
    for col in a.columns() {
        let l: f64 = col.iter().zip(c).map(|(x, ci)| x * ci * ci).sum();
        for ((gk, x), ck) in g.iter_mut().zip(col).zip(c) {
            *gk += 2.0 * ck * x / l;
        }
    }
    g
}

/// Max relative deviation of the analytic gradient from central differences.
pub fn gradient_check(a: &DesignMatrix, c: &[f64]) -> f64 {
    let g = amplitude_gradient(a, c);
    let scale = g
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    let mut probe = c.to_vec();
    for k in 0..c.len() {
        let h = 1e-5 * c[k].abs().max(1e-3);
        probe[k] = c[k] + h;
        let up = amplitude_loglik(a, &probe);
        probe[k] = c[k] - h;
        let down = amplitude_loglik(a, &probe);
        probe[k] = c[k];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - g[k]).abs() / scale);
    }
    worst
}

/// Exhaustive scan of the nonnegative orthant of the sphere in
/// hyperspherical angles, `resolution` points per angle.
pub fn grid_search(a: &DesignMatrix, r: f64, resolution: usize) -> Result<OracleResult> {
    let d = a.rows();
    if d > GRID_MAX_WINDOWS {
        return Err(Error::OracleTooLarge(format!(
            "grid search needs at most {GRID_MAX_WINDOWS} windows, got {d}"
        )));
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            reason: "need at least 2 points per angle".into(),
        });
    }
    let radius = r.sqrt();
    let angles = d - 1;
    let total = resolution.pow(angles as u32);
    let step = std::f64::consts::FRAC_PI_2 / (resolution - 1) as f64;
    let mut best = Vec::new();
    let mut best_ll = f64::NEG_INFINITY;
    let mut point = vec![0.0; d];
    for idx in 0..total {
        let mut rest = idx;
        let mut sin_prod = radius;
        for p in point.iter_mut().take(angles) {
            let theta = (rest % resolution) as f64 * step;
            rest /= resolution;
            *p = sin_prod * theta.cos();
            sin_prod *= theta.sin();
        }
        point[angles] = sin_prod;
        let ll = amplitude_loglik(a, &point);
        if ll > best_ll {
            best_ll = ll;
            best.clone_from(&point);
        }
    }
    if best.is_empty() {
        return Err(Error::OracleNonConvergence(
            "no grid point gives every sample positive density".into(),
        ));
    }
    Ok(OracleResult {
        amplitudes: best,
        best_loglik: best_ll,
        evaluations: total,
        method: OracleMethod::Grid,
        endpoints: Vec::new(),
        gradient_check: 0.0,
    })
}

/// Multi-start projected gradient ascent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientAscent {
    pub starts: usize,
    /// Stop when the tangential gradient norm is at or below this.
    pub tol: f64,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for GradientAscent {
    fn default() -> Self {
        Self {
            starts: 20,
            tol: 1e-10,
            max_steps: 200_000,
            seed: 0x5eed,
        }
    }
}

/// Ascends from random nonnegative starts, renormalizing onto the sphere
/// after every step; step lengths follow Armijo backtracking.
pub fn projected_gradient(a: &DesignMatrix, r: f64, cfg: &GradientAscent) -> Result<OracleResult> {
    let m = a.cols();
    if m > GRADIENT_MAX_SAMPLES {
        return Err(Error::OracleTooLarge(format!(
            "projected gradient needs at most {GRADIENT_MAX_SAMPLES} samples, got {m}"
        )));
    }
    if cfg.starts == 0 {
        return Err(Error::InvalidParameter {
            name: "starts",
            reason: "need at least one start".into(),
        });
    }
    let d = a.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut evaluations = 0;
    let mut endpoints = Vec::with_capacity(cfg.starts);
    let mut worst_check = 0.0f64;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in 0..cfg.starts {
        let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
        let mut c = project(&raw, r);
        worst_check = worst_check.max(gradient_check(a, &c));
        let mut f = amplitude_loglik(a, &c);
        evaluations += 1;
        let mut t: f64 = 1e-2;
        let mut done = false;
        let (mut p, mut pn2) = tangent_gradient(a, &c, r);
        for _ in 0..cfg.max_steps {
            if pn2.sqrt() <= cfg.tol {
                done = true;
                break;
            }
            t = (2.0 * t).min(1e6);
            let mut moved = false;
            while t > 1e-20 {
                let trial: Vec<f64> = c.iter().zip(&p).map(|(x, y)| (x + t * y).abs()).collect();
                let trial = project(&trial, r);
                let ft = amplitude_loglik(a, &trial);
                evaluations += 1;
                let (tp, tpn2) = tangent_gradient(a, &trial, r);
                // Armijo on the likelihood while the gain is resolvable;
                // below rounding level fall back to requiring a smaller
                // tangential gradient.
                let unresolved = (ft - f).abs() <= 1e-13 * f.abs().max(1.0);
                let accept = if unresolved {
                    tpn2 < pn2
                } else {
                    ft >= f + 1e-4 * t * pn2
                };
                if accept {
                    c = trial;
                    f = ft;
                    p = tp;
                    pn2 = tpn2;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if !done {
            return Err(Error::OracleNonConvergence(format!(
                "start {start} stalled with tangential gradient {:e} (tolerance {:e})",
                pn2.sqrt(),
                cfg.tol
            )));
        }
        if best.as_ref().map_or(true, |(_, bf)| f > *bf) {
            best = Some((c.clone(), f));
        }
        endpoints.push(c);
    }
    let (amplitudes, best_loglik) = best.expect("at least one start");
    Ok(OracleResult {
        amplitudes,
        best_loglik,
        evaluations,
        method: OracleMethod::ProjectedGradient,
        endpoints,
        gradient_check: worst_check,
    })
}

fn tangent_gradient(a: &DesignMatrix, c: &[f64], r: f64) -> (Vec<f64>, f64) {
    let g = amplitude_gradient(a, c);
    let radial = g.iter().zip(c).map(|(x, y)| x * y).sum::<f64>() / r;
    let p: Vec<f64> = g.iter().zip(c).map(|(x, y)| x - radial * y).collect();
    let pn2 = p.iter().map(|x| x * x).sum();
    (p, pn2)
}

fn project(x: &[f64], r: f64) -> Vec<f64> {
    let n: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s = r.sqrt() / n;
    x.iter().map(|v| v * s).collect()
}
