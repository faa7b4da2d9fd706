//! Coordinate solver for the quadratic system
//!
//! ```text
//! alpha_k * sum_j D_kj alpha_j = 1,   k = 1..m
//! ```
//!
//! Each update picks the equation with the largest residual and solves its
//! scalar quadratic in `alpha_k` exactly, taking the positive root. The sum
//! of absolute residuals decreases strictly with every update. Once the
//! residual is below `delta` the maximizer of the likelihood on the sphere
//! `|u|^2 = r` is `u = (r / m) sum_j alpha_j b_j`.

use crate::design::{DesignMatrix, GramMatrix};
use crate::error::{Error, Result};

/// Relative tolerance on `|u|^2 = r` accepted by [`recover_u`].
pub const SPHERE_TOL: f64 = 1e-8;

/// Solver state and its residual history.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaState {
    pub alpha: Vec<f64>,
    /// `E_i = alpha_i (D alpha)_i - 1`.
    pub residuals: Vec<f64>,
    /// `E = sum_i |E_i|`.
    pub total_error: f64,
    /// Number of coordinate updates performed.
    pub updates: usize,
    /// `E` at the start and after every update.
    pub trace: Vec<f64>,
    /// Smallest `alpha_k` held at any point of the solve.
    pub min_alpha: f64,
}

impl AlphaState {
    /// True when every recorded residual is strictly below its predecessor.
    pub fn strictly_decreasing(&self) -> bool {
        self.trace.windows(2).all(|w| w[1] < w[0])
    }
}

/// Uniform start `alpha_k = sqrt(1 / (Dbar m))`.
pub fn init_alpha(gram: &GramMatrix) -> AlphaState {
    let m = gram.dim();
    let a0 = (1.0 / (gram.max_entry() * m as f64)).sqrt();
    state_from(gram, vec![a0; m])
}

fn state_from(gram: &GramMatrix, alpha: Vec<f64>) -> AlphaState {
    let (residuals, total_error) = residuals(gram, &alpha);
    let min_alpha = alpha.iter().copied().fold(f64::INFINITY, f64::min);
    AlphaState {
        alpha,
        residuals,
        total_error,
        updates: 0,
        trace: vec![total_error],
        min_alpha,
    }
}

/// Residuals `E_i` and their absolute sum `E`.
pub fn residuals(gram: &GramMatrix, alpha: &[f64]) -> (Vec<f64>, f64) {
    let res: Vec<f64> = alpha
        .iter()
        .enumerate()
        .map(|(i, &ai)| {
            let g: f64 = gram.row(i).iter().zip(alpha).map(|(d, a)| d * a).sum();
            ai.mul_add(g, -1.0)
        })
        .collect();
    let total = res.iter().map(|e| e.abs()).sum();
    (res, total)
}

/// Positive root of `D_kk x^2 + s x - 1 = 0` with `s = sum_{i != k} D_ik alpha_i`.
pub fn coordinate_update(gram: &GramMatrix, alpha: &[f64], k: usize) -> f64 {
    let s = off_diagonal_sum(gram, alpha, k);
    positive_root(gram.get(k, k), s)
}

fn off_diagonal_sum(gram: &GramMatrix, alpha: &[f64], k: usize) -> f64 {
    gram.row(k)
        .iter()
        .zip(alpha)
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, (d, a))| d * a)
        .sum()
}

// (-s + sqrt(s^2 + 4 d)) / (2 d), rationalized to avoid cancellation for large s.
fn positive_root(d: f64, s: f64) -> f64 {
    2.0 / (s + (s * s + 4.0 * d).sqrt())
}

/// Termination settings for the coordinate solver.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InnerSolver {
    /// Residual target; defaults to `1e-10 * m`.
    pub delta: Option<f64>,
    /// Update cap; defaults to `200 * m^2`.
    pub max_updates: Option<usize>,
}

impl InnerSolver {
    pub fn new(delta: f64, max_updates: usize) -> Self {
        Self {
            delta: Some(delta),
            max_updates: Some(max_updates),
        }
    }

    pub fn delta_for(&self, m: usize) -> f64 {
        self.delta.unwrap_or(1e-10 * m as f64)
    }

    pub fn max_updates_for(&self, m: usize) -> usize {
        self.max_updates.unwrap_or(200 * m * m)
    }

    pub fn solve(&self, gram: &GramMatrix) -> Result<AlphaState> {
        self.run(gram, init_alpha(gram))
    }

    /// Solves from an arbitrary positive starting point.
    pub fn solve_from(&self, gram: &GramMatrix, alpha: Vec<f64>) -> Result<AlphaState> {
        if alpha.len() != gram.dim() {
            return Err(Error::Dimension {
                expected: gram.dim(),
                got: alpha.len(),
            });
        }
        if let Some(k) = alpha.iter().position(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("component {k} is not positive"),
            });
        }
        self.run(gram, state_from(gram, alpha))
    }

    fn run(&self, gram: &GramMatrix, mut st: AlphaState) -> Result<AlphaState> {
        let m = gram.dim();
        let delta = self.delta_for(m);
        let cap = self.max_updates_for(m);
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("{delta} is not positive"),
            });
        }
        // Row products (D alpha)_i, kept current incrementally.
        let mut rowdot: Vec<f64> = (0..m)
            .map(|i| gram.row(i).iter().zip(&st.alpha).map(|(d, a)| d * a).sum())
            .collect();

        while st.total_error > delta {
            if st.updates >= cap {
                return Err(cap_error(st));
            }
            let k = worst_index(&st.residuals);
            let dkk = gram.get(k, k);
            let s = off_diagonal_sum(gram, &st.alpha, k);
            let next = positive_root(dkk, s);
            let step = next - st.alpha[k];
            if step == 0.0 {
                // The worst equation is already solved to rounding; nothing
                // can make further progress.
                return Err(cap_error(st));
            }
            st.alpha[k] = next;
            st.min_alpha = st.min_alpha.min(next);
            st.updates += 1;

            if st.updates % m == 0 {
                for (i, r) in rowdot.iter_mut().enumerate() {
                    *r = gram.row(i).iter().zip(&st.alpha).map(|(d, a)| d * a).sum();
                }
            } else {
                let col = gram.row(k);
                for (i, r) in rowdot.iter_mut().enumerate() {
                    if i != k {
                        *r += col[i] * step;
                    }
                }
                rowdot[k] = dkk.mul_add(next, s);
            }
            let mut total = 0.0;
            for (e, (a, g)) in st.residuals.iter_mut().zip(st.alpha.iter().zip(&rowdot)) {
                *e = a.mul_add(*g, -1.0);
                total += e.abs();
            }
            st.total_error = total;
            st.trace.push(total);
        }
        Ok(st)
    }
}

fn cap_error(st: AlphaState) -> Error {
    Error::InnerCapExceeded {
        updates: st.updates,
        residual: st.total_error,
        trace: st.trace,
    }
}

// Largest |E_i|, lowest index on ties.
fn worst_index(res: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = res[0].abs();
    for (i, e) in res.iter().enumerate().skip(1) {
        if e.abs() > best_val {
            best = i;
            best_val = e.abs();
        }
    }
    best
}

/// Solves with explicit `delta` and update cap.
pub fn solve(gram: &GramMatrix, delta: f64, max_updates: usize) -> Result<AlphaState> {
    InnerSolver::new(delta, max_updates).solve(gram)
}

/// `u = (r / m) sum_j alpha_j b_j`.
///
/// Rejects `alpha` whose `u` misses the sphere `|u|^2 = r` by more than
/// [`SPHERE_TOL`] relative, which indicates an unconverged solve.
pub fn recover_u(design: &DesignMatrix, alpha: &[f64], r: f64) -> Result<Vec<f64>> {
    if alpha.len() != design.cols() {
        return Err(Error::Dimension {
            expected: design.cols(),
            got: alpha.len(),
        });
    }
    let m = design.cols();
    let factor = r / m as f64;
    let mut u = vec![0.0; design.rows()];
    for (col, &a) in design.columns().zip(alpha) {
        for (ui, b) in u.iter_mut().zip(col) {
            *ui += a * b;
        }
    }
    for ui in &mut u {
        *ui *= factor;
    }
    let norm_sq: f64 = u.iter().map(|x| x * x).sum();
    if (norm_sq - r).abs() > SPHERE_TOL * r {
        return Err(Error::SphereViolation { norm_sq, r });
    }
    Ok(u)
}
