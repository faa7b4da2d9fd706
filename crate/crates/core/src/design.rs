//! Sample sets, weighted design matrices and the Gram matrix of the inner
//! quadratic system.

use crate::error::{Error, Result};
use crate::windows::{DomainMap, WindowBasis};

/// Observations together with the interval that contains them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    observations: Vec<f64>,
    domain: DomainMap,
    unit: Vec<f64>,
}

impl SampleSet {
    /// Fails if the sample is empty or any observation lies outside `domain`.
    pub fn new(observations: Vec<f64>, domain: DomainMap) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut unit = Vec::with_capacity(observations.len());
        for (index, &x) in observations.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if !domain.contains(x) {
                return Err(Error::OutsideDomain {
                    index,
                    x,
                    a: domain.a(),
                    b: domain.b(),
                });
            }
            unit.push(domain.to_unit_unchecked(x));
        }
        Ok(Self {
            observations,
            domain,
            unit,
        })
    }

    /// Uses the default enclosing interval of the observations.
    pub fn with_enclosing_domain(observations: Vec<f64>) -> Result<Self> {
        let domain = DomainMap::enclosing(&observations)?;
        Self::new(observations, domain)
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn domain(&self) -> DomainMap {
        self.domain
    }

    /// Observations mapped to `[0, 1]`.
    pub fn unit_samples(&self) -> &[f64] {
        &self.unit
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// A nonnegative `(n + 1) x m` matrix, stored by column so that each
/// sample's vector `b_j` is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    /// Builds a matrix from its columns, checking nonnegativity and that no
    /// column vanishes.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let cols = columns.len();
        if cols == 0 {
            return Err(Error::EmptySample);
        }
        let rows = columns[0].len();
        let mut data = Vec::with_capacity(rows * cols);
        for col in &columns {
            if col.len() != rows {
                return Err(Error::Dimension {
                    expected: rows,
                    got: col.len(),
                });
            }
            data.extend_from_slice(col);
        }
        let matrix = Self { rows, cols, data };
        matrix.validate()?;
        Ok(matrix)
    }

    /// The unweighted window matrix `a_ij = phi_i(t_j)`.
    pub fn windows(basis: &WindowBasis, samples: &SampleSet) -> Result<Self> {
        let rows = basis.len();
        let mut data = Vec::with_capacity(rows * samples.len());
        for &t in samples.unit_samples() {
            data.extend((0..rows).map(|i| basis.value_unchecked(i, t)));
        }
        let matrix = Self {
            rows,
            cols: samples.len(),
            data,
        };
        matrix.validate()?;
        Ok(matrix)
    }

    /// Scales row `i` by `weights[i]`: `b_ij = weights[i] * a_ij`.
    pub fn weighted(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                got: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "v",
                reason: format!(
                    "component {i} = {} is not a finite nonnegative number",
                    weights[i]
                ),
            });
        }
        let data = self
            .data
            .chunks_exact(self.rows)
            .flat_map(|col| col.iter().zip(weights).map(|(a, w)| a * w))
            .collect();
        let matrix = Self {
            rows: self.rows,
            cols: self.cols,
            data,
        };
        matrix.validate()?;
        Ok(matrix)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    /// Column `b_j`.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.rows)
    }

    fn validate(&self) -> Result<()> {
        for (j, col) in self.columns().enumerate() {
            if col.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "design",
                    reason: format!("column {j} has a negative or non-finite entry"),
                });
            }
            if !col.iter().any(|&x| x > 0.0) {
                return Err(Error::Infeasible { sample: j });
            }
        }
        Ok(())
    }
}

/// `b_ij = v_i * phi_i(t_j)`.
pub fn build_design(basis: &WindowBasis, samples: &SampleSet, v: &[f64]) -> Result<DesignMatrix> {
    DesignMatrix::windows(basis, samples)?.weighted(v)
}

/// Dense symmetric `m x m` matrix `D_kj = (r / m) (b_k . b_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    m: usize,
    r: f64,
    dbar: f64,
    data: Vec<f64>,
}

impl GramMatrix {
    pub fn build(design: &DesignMatrix, r: f64) -> Result<Self> {
        check_radius(r)?;
        let m = design.cols();
        let factor = r / m as f64;
        let mut data = vec![0.0; m * m];
        for k in 0..m {
            let bk = design.column(k);
            for j in k..m {
                let dot: f64 = bk.iter().zip(design.column(j)).map(|(x, y)| x * y).sum();
                let d = factor * dot;
                data[k * m + j] = d;
                data[j * m + k] = d;
            }
        }
        Self::from_parts(m, r, data)
    }

    /// Wraps an explicit symmetric matrix given row-major.
    pub fn from_rows(rows: Vec<Vec<f64>>, r: f64) -> Result<Self> {
        check_radius(r)?;
        let m = rows.len();
        let mut data = Vec::with_capacity(m * m);
        for row in &rows {
            if row.len() != m {
                return Err(Error::Dimension {
                    expected: m,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        for k in 0..m {
            for j in 0..k {
                if data[k * m + j] != data[j * m + k] {
                    return Err(Error::InvalidParameter {
                        name: "gram",
                        reason: format!("entries ({k},{j}) and ({j},{k}) differ"),
                    });
                }
            }
        }
        Self::from_parts(m, r, data)
    }

    fn from_parts(m: usize, r: f64, data: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptySample);
        }
        if let Some(p) = data.iter().position(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gram",
                reason: format!("entry ({}, {}) is negative or non-finite", p / m, p % m),
            });
        }
        if let Some(k) = (0..m).find(|&k| data[k * m + k] <= 0.0) {
            return Err(Error::Infeasible { sample: k });
        }
        let dbar = data.iter().copied().fold(0.0, f64::max);
        Ok(Self { m, r, dbar, data })
    }

    /// Sample count.
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Largest entry.
    pub fn max_entry(&self) -> f64 {
        self.dbar
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.data[k * self.m + j]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.m..(k + 1) * self.m]
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("{r} is not a positive finite number"),
        });
    }
    Ok(())
}
