//! Horn-type hypergeometric series in any number of variables: truncated
//! evaluation, closed-form derivatives with respect to parameters, repeated
//! derivatives and ε-expansions, plus two independent derivative oracles.
//!
//! ```
//! use horn_core::{catalog, derivative, eval};
//!
//! let f = catalog::build(&catalog::CatalogSpec::pfq(vec![2.0], vec![], 0.5)).unwrap();
//! let df = derivative::differentiate(&f, "a").unwrap();
//! let r = eval::evaluate_expansion(&df, &eval::EvalOptions::default()).unwrap();
//! assert!((r.value - 4.0 * 2f64.ln()).abs() < 1e-10);
//! ```

pub mod catalog;
pub mod derivative;
pub mod error;
pub mod eval;
pub mod json;
pub mod model;
pub mod oracle;
pub mod special;
pub mod summation;

pub use error::{HornError, Result};
pub use eval::{EvalOptions, EvalResult, Execution};
pub use model::{
    DerivativeExpansion, HornSeries, Parameter, Placement, PochhammerFactor, PrefactorAtom,
    Rational,
};
