//! The fitted density: evaluation, likelihood, normalization audit and the
//! plain-text model document.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::design::SampleSet;
use crate::error::{Error, Result};
use crate::outer::FitTrace;
use crate::quadrature;
use crate::windows::{DomainMap, WindowBasis};

pub const FORMAT_VERSION: u32 = 1;
pub const BASIS_KIND: &str = "bernstein";

/// Tolerance on `sum_i c_i = r`.
const SUM_TOL: f64 = 1e-12;

/// Fit settings recorded with a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitMetadata {
    pub m: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub r: f64,
}

/// `f(x) = sum_i c_i phi_i((x - a) / (b - a)) / (b - a)` on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityModel {
    basis: WindowBasis,
    domain: DomainMap,
    coefficients: Vec<f64>,
    raw_inner_product: f64,
    meta: FitMetadata,
    trace: Option<FitTrace>,
}

impl DensityModel {
    pub(crate) fn from_fit(
        basis: WindowBasis,
        domain: DomainMap,
        coefficients: Vec<f64>,
        raw_inner_product: f64,
        meta: FitMetadata,
        trace: FitTrace,
    ) -> Result<Self> {
        let mut model = Self::new(basis, domain, coefficients, raw_inner_product, meta)?;
        model.trace = Some(trace);
        Ok(model)
    }

    /// Assembles a model from explicit coefficients, enforcing `c_i >= 0`
    /// and `sum_i c_i = r`.
    pub fn new(
        basis: WindowBasis,
        domain: DomainMap,
        coefficients: Vec<f64>,
        raw_inner_product: f64,
        meta: FitMetadata,
    ) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::Constraint(format!(
                "{} coefficients for {} windows",
                coefficients.len(),
                basis.len()
            )));
        }
        if let Some(i) = coefficients
            .iter()
            .position(|c| !(*c >= 0.0) || !c.is_finite())
        {
            return Err(Error::Constraint(format!(
                "coefficient {i} = {} is not a finite nonnegative number",
                coefficients[i]
            )));
        }
        if !(meta.r > 0.0 && meta.r.is_finite()) {
            return Err(Error::Constraint(format!("r = {} is not positive", meta.r)));
        }
        let sum: f64 = coefficients.iter().sum();
        if (sum - meta.r).abs() > SUM_TOL * meta.r.max(1.0) {
            return Err(Error::Constraint(format!(
                "sum of coefficients {sum} differs from r = {}",
                meta.r
            )));
        }
        if meta.m == 0 {
            return Err(Error::Constraint("sample count m is zero".into()));
        }
        if !(meta.epsilon > 0.0) || !(meta.delta > 0.0) {
            return Err(Error::Constraint(
                "epsilon and delta must be positive".into(),
            ));
        }
        if !raw_inner_product.is_finite() {
            return Err(Error::Constraint("raw inner product is not finite".into()));
        }
        Ok(Self {
            basis,
            domain,
            coefficients,
            raw_inner_product,
            meta,
            trace: None,
        })
    }

    pub fn basis(&self) -> &WindowBasis {
        &self.basis
    }

    pub fn domain(&self) -> DomainMap {
        self.domain
    }

    /// `c_i`, summing to `r`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `sum_i u_i v_i` at termination, before renormalization.
    pub fn raw_inner_product(&self) -> f64 {
        self.raw_inner_product
    }

    pub fn metadata(&self) -> FitMetadata {
        self.meta
    }

    pub fn r(&self) -> f64 {
        self.meta.r
    }

    /// Convergence history; absent on models loaded from a document.
    pub fn trace(&self) -> Option<&FitTrace> {
        self.trace.as_ref()
    }

    /// Density at `x`; zero outside `[a, b]`.
    pub fn pdf(&self, x: f64) -> f64 {
        if !self.domain.contains(x) {
            return 0.0;
        }
        let t = self.domain.to_unit_unchecked(x);
        self.domain
            .density_back(self.basis.combine_unchecked(&self.coefficients, t))
    }

    /// `sum_j ln f(x_j)`.
    pub fn log_likelihood(&self, observations: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (index, &x) in observations.iter().enumerate() {
            if !self.domain.contains(x) {
                return Err(Error::OutsideDomain {
                    index,
                    x,
                    a: self.domain.a(),
                    b: self.domain.b(),
                });
            }
            let f = self.pdf(x);
            if !(f > 0.0) {
                return Err(Error::ZeroDensity { index });
            }
            total += f.ln();
        }
        Ok(total)
    }

    /// `integral_a^b f` by adaptive quadrature to absolute tolerance `tol`.
    pub fn integrate(&self, tol: f64) -> Result<f64> {
        // Split the domain so every piece is well inside the quadrature
        // rule's exactness range for the polynomial degree.
        let pieces = (self.basis.degree() / 8).max(1);
        let breaks: Vec<f64> = (0..=pieces)
            .map(|k| self.domain.from_unit(k as f64 / pieces as f64))
            .collect();
        let mut breaks = breaks;
        breaks[0] = self.domain.a();
        breaks[pieces] = self.domain.b();
        quadrature::integrate_piecewise(|x| self.pdf(x), &breaks, tol)
    }

    /// Residual of the Lagrange stationarity condition
    /// `sum_j r b_kj / (m l_j) - u_k` with `u_k = v_k = sqrt(c_k)`.
    pub fn stationarity_residual(&self, samples: &SampleSet) -> Vec<f64> {
        let m = samples.len() as f64;
        let r = self.meta.r;
        let amps: Vec<f64> = self.coefficients.iter().map(|c| c.sqrt()).collect();
        let mut acc = vec![0.0; self.coefficients.len()];
        for &t in samples.unit_samples() {
            let a = self.basis.values(t).expect("unit sample");
            let l: f64 = a.iter().zip(&self.coefficients).map(|(x, c)| x * c).sum();
            for (k, s) in acc.iter_mut().enumerate() {
                *s += r * amps[k] * a[k] / (m * l);
            }
        }
        acc.iter().zip(&amps).map(|(s, u)| s - u).collect()
    }

    fn document(&self) -> ModelDocument {
        ModelDocument {
            format_version: FORMAT_VERSION,
            basis_kind: BASIS_KIND.to_string(),
            degree: self.basis.degree(),
            a: self.domain.a(),
            b: self.domain.b(),
            r: self.meta.r,
            coefficients: self.coefficients.clone(),
            raw_inner_product: self.raw_inner_product,
            m: self.meta.m,
            epsilon: self.meta.epsilon,
            delta: self.meta.delta,
        }
    }

    /// Serializes the model document.
    pub fn to_writer<W: Write>(&self, mut w: W) -> Result<()> {
        let mut ser = serde_json::Serializer::with_formatter(&mut w, DecimalFormatter::default());
        self.document()
            .serialize(&mut ser)
            .map_err(|e| Error::Malformed(e.to_string()))?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_document_string(&self) -> String {
        let mut buf = Vec::new();
        self.to_writer(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8 document")
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.to_writer(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Parses a model document and re-validates every invariant.
    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_reader(r).map_err(|e| Error::Malformed(e.to_string()))?;
        doc.into_model()
    }

    pub fn from_document_str(s: &str) -> Result<Self> {
        Self::from_reader(s.as_bytes())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format_version: u32,
    basis_kind: String,
    degree: usize,
    a: f64,
    b: f64,
    r: f64,
    coefficients: Vec<f64>,
    raw_inner_product: f64,
    m: usize,
    epsilon: f64,
    delta: f64,
}

impl ModelDocument {
    fn into_model(self) -> Result<DensityModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Malformed(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        if self.basis_kind != BASIS_KIND {
            return Err(Error::Malformed(format!(
                "unknown basis_kind {:?}",
                self.basis_kind
            )));
        }
        let domain =
            DomainMap::new(self.a, self.b).map_err(|e| Error::Constraint(e.to_string()))?;
        DensityModel::new(
            WindowBasis::bernstein_unchecked(self.degree),
            domain,
            self.coefficients,
            self.raw_inner_product,
            FitMetadata {
                m: self.m,
                epsilon: self.epsilon,
                delta: self.delta,
                r: self.r,
            },
        )
    }
}

/// Pretty JSON with every float written to 17 significant digits.
#[derive(Default)]
struct DecimalFormatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for DecimalFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object_value(w)
    }
}
