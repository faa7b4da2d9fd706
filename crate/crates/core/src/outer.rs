//! Amplitude iteration.
//!
//! The density is written `f = sum_i u_i v_i phi_i` with both `u` and `v` on
//! the sphere of squared radius `r`. Each outer step freezes `v`, maximizes
//! the likelihood over `u` with the inner coordinate solver, then moves `v`
//! to `theta * sqrt(u_i v_i)`, where `theta = sqrt(r / sum_i u_i v_i) >= 1`
//! restores `|v|^2 = r`. By Cauchy–Schwarz `sum_i u_i v_i <= r`, with
//! equality only when `u = v`; the iteration stops once the gap is below
//! `epsilon`.

use crate::design::{DesignMatrix, GramMatrix, SampleSet};
use crate::error::{Error, Result};
use crate::inner::{self, InnerSolver};
use crate::model::DensityModel;
use crate::windows::WindowBasis;

/// Fit parameters. `Default` gives `r = 1`, `epsilon = 1e-8`, a 10 000
/// step outer cap and the inner solver's scale-aware defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub r: f64,
    pub epsilon: f64,
    pub inner: InnerSolver,
    pub max_outer: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            r: 1.0,
            epsilon: 1e-8,
            inner: InnerSolver::default(),
            max_outer: 10_000,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: format!("{} is not positive", self.r),
            });
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("{} is not positive", self.epsilon),
            });
        }
        if let Some(d) = self.inner.delta {
            if !(d > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "delta",
                    reason: format!("{d} is not positive"),
                });
            }
        }
        Ok(())
    }
}

/// Per-iteration record of a fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    /// Rescaling factor applied after each step.
    pub theta: Vec<f64>,
    /// `sum_i u_i v_i` after each step.
    pub inner_product: Vec<f64>,
    /// Log-likelihood of `sum_i u_i v_i phi_i` on the original domain.
    pub loglik: Vec<f64>,
    /// Coordinate updates spent by each inner solve.
    pub inner_updates: Vec<usize>,
    /// `u_i v_i` at termination, before renormalization.
    pub raw_coefficients: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FitTrace {
    pub fn iterations(&self) -> usize {
        self.theta.len()
    }
}

/// State of the outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeState {
    /// Maximizer from the latest step; empty before the first step.
    pub u: Vec<f64>,
    /// The `v` that `u` was computed against.
    pub v: Vec<f64>,
    /// The rescaled `v` the next step will use.
    pub next_v: Vec<f64>,
    /// Number of completed steps.
    pub k: usize,
    pub inner_product: f64,
    pub trace: FitTrace,
}

/// Uniform start `v_i = sqrt(r / (n + 1))`.
pub fn init_state(degree: usize, r: f64) -> AmplitudeState {
    let count = degree + 1;
    let v0 = (r / count as f64).sqrt();
    AmplitudeState {
        u: Vec::new(),
        v: Vec::new(),
        next_v: vec![v0; count],
        k: 0,
        inner_product: f64::NAN,
        trace: FitTrace::default(),
    }
}

/// Precomputed inputs shared by every step of one fit.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    samples: &'a SampleSet,
    windows: DesignMatrix,
}

impl<'a> Problem<'a> {
    pub fn new(basis: &'a WindowBasis, samples: &'a SampleSet) -> Result<Self> {
        let windows = DesignMatrix::windows(basis, samples)?;
        Ok(Self { samples, windows })
    }

    /// The unweighted window matrix `a_ij = phi_i(t_j)`.
    pub fn windows(&self) -> &DesignMatrix {
        &self.windows
    }

    /// `sum_j ln(sum_i c_i a_ij / (b - a))`.
    fn loglik(&self, coefficients: &[f64]) -> f64 {
        let width = self.samples.domain().width();
        self.windows
            .columns()
            .map(|col| {
                let l: f64 = col.iter().zip(coefficients).map(|(a, c)| a * c).sum();
                (l / width).ln()
            })
            .sum()
    }
}

/// One outer step: solve for `u` against the pending `v`, record the
/// Cauchy–Schwarz gap, rescale `v`.
pub fn outer_step(
    state: &mut AmplitudeState,
    problem: &Problem<'_>,
    r: f64,
    inner_solver: &InnerSolver,
) -> Result<()> {
    let v = std::mem::take(&mut state.next_v);
    let design = problem.windows.weighted(&v)?;
    let gram = GramMatrix::build(&design, r)?;
    let alpha = inner_solver.solve(&gram)?;
    let mut u = inner::recover_u(&design, &alpha.alpha, r)?;
    // Put u exactly on the sphere so the Cauchy–Schwarz bound holds to
    // rounding.
    let norm_sq: f64 = u.iter().map(|x| x * x).sum();
    let scale = (r / norm_sq).sqrt();
    u.iter_mut().for_each(|x| *x *= scale);

    let products: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
    let inner_product: f64 = products.iter().sum();
    // theta >= 1 by Cauchy–Schwarz; a ratio below one is rounding.
    let theta = (r / inner_product).sqrt().max(1.0);
    let next_v: Vec<f64> = products.iter().map(|p| theta * p.sqrt()).collect();

    state.trace.loglik.push(problem.loglik(&products));
    state.trace.theta.push(theta);
    state.trace.inner_product.push(inner_product);
    state.trace.inner_updates.push(alpha.updates);
    state.u = u;
    state.v = v;
    state.next_v = next_v;
    state.inner_product = inner_product;
    state.k += 1;
    Ok(())
}

/// `sum_i u_i v_i + epsilon >= r`.
pub fn converged(state: &AmplitudeState, epsilon: f64, r: f64) -> bool {
    state.k > 0 && state.inner_product + epsilon >= r
}

/// Runs the outer iteration to convergence and returns the fitted model
/// with `c_i = u_i v_i * r / sum_i u_i v_i`.
pub fn fit(basis: &WindowBasis, samples: &SampleSet, config: &FitConfig) -> Result<DensityModel> {
    config.validate()?;
    let problem = Problem::new(basis, samples)?;
    let mut state = init_state(basis.degree(), config.r);
    loop {
        if state.k >= config.max_outer {
            let mut trace = state.trace;
            trace.raw_coefficients = state.u.iter().zip(&state.v).map(|(a, b)| a * b).collect();
            trace.u = state.u;
            trace.v = state.v;
            return Err(Error::OuterCapExceeded {
                iterations: state.k,
                inner_product: state.inner_product,
                r: config.r,
                trace: Box::new(trace),
            });
        }
        match outer_step(&mut state, &problem, config.r, &config.inner) {
            Ok(()) => {}
            Err(e @ Error::InnerCapExceeded { .. }) => {
                let mut trace = state.trace;
                trace.raw_coefficients = state.u.iter().zip(&state.v).map(|(a, b)| a * b).collect();
                trace.u = state.u;
                trace.v = state.v;
                return Err(Error::StepFailed {
                    step: state.k,
                    source: Box::new(e),
                    trace: Box::new(trace),
                });
            }
            Err(e) => return Err(e),
        }
        if converged(&state, config.epsilon, config.r) {
            break;
        }
    }
    let raw: Vec<f64> = state.u.iter().zip(&state.v).map(|(a, b)| a * b).collect();
    let scale = config.r / state.inner_product;
    let coefficients: Vec<f64> = raw.iter().map(|c| c * scale).collect();
    let mut trace = state.trace;
    trace.raw_coefficients = raw;
    trace.u = state.u;
    trace.v = state.v;
    DensityModel::from_fit(
        basis.clone(),
        samples.domain(),
        coefficients,
        state.inner_product,
        crate::model::FitMetadata {
            m: samples.len(),
            epsilon: config.epsilon,
            delta: config.inner.delta_for(samples.len()),
            r: config.r,
        },
        trace,
    )
}
