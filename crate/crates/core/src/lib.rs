//! Maximum-likelihood density estimation with nonnegative Bernstein windows.
//!
//! The estimate is `f(x) = sum_i c_i phi_i(x)` with unit-integral windows
//! `phi_i` and coefficients written as products of amplitudes,
//! `c_i = u_i v_i`, where `u` and `v` both lie on the sphere `|.|^2 = r`.
//! Fitting alternates an exact maximization over `u` (reduced to a system
//! of scalar quadratics, see [`inner`]) with a geometric-mean update of `v`
//! (see [`outer`]) until `u` and `v` agree.
//!
//! ```no_run
//! use ampdens::{fit, FitConfig, SampleSet, WindowBasis};
//!
//! let xs = vec![0.3, 1.2, 0.8, 2.5, 0.1];
//! let samples = SampleSet::with_enclosing_domain(xs).unwrap();
//! let basis = WindowBasis::bernstein(4).unwrap();
//! let model = fit(&basis, &samples, &FitConfig::default()).unwrap();
//! println!("{}", model.pdf(1.0));
//! ```

pub mod design;
pub mod error;
pub mod inner;
pub mod model;
pub mod oracle;
pub mod outer;
pub mod quadrature;
pub mod synth;
pub mod windows;

pub use design::{build_design, DesignMatrix, GramMatrix, SampleSet};
pub use error::{Error, Result};
pub use inner::{AlphaState, InnerSolver};
pub use model::{DensityModel, FitMetadata};
pub use outer::{fit, AmplitudeState, FitConfig, FitTrace};
pub use synth::TrueDensity;
pub use windows::{DomainMap, WindowBasis};
