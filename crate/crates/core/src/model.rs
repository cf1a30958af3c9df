//! Data model for Horn-type series, their prefactors and derivative
//! expansions.
//!
//! A series in φ variables is
//!
//! ```text
//! P · Σ_{n ∈ ℕ^φ} ∏_f (base_f)_{q_f·n + o_f}^{±1} ∏_r x_r^{n_r} / n_r!
//! ```
//!
//! where each Pochhammer base is either a parameter plus an integer shift or
//! a plain integer constant, and `P` is a product of [`PrefactorAtom`]s.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{HornError, Result};
use crate::special::{pochhammer, pole_tolerance};

/// Exact rational constant used in prefactors.
pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    /// Coefficient `c` in `value + c·ε`.
    pub epsilon_slope: f64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        Parameter {
            name: name.into(),
            value,
            epsilon_slope: 0.0,
        }
    }

    pub fn with_slope(mut self, slope: f64) -> Self {
        self.epsilon_slope = slope;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Numerator,
    Denominator,
}

/// One Pochhammer symbol `(base)_{coeffs·n + offset}`.
///
/// `base` is `param + shift`, or the integer `shift` alone when `param` is
/// `None`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PochhammerFactor {
    pub param: Option<String>,
    pub shift: i64,
    pub coeffs: Vec<i64>,
    pub offset: i64,
    pub placement: Placement,
}

impl PochhammerFactor {
    pub fn upper(param: &str, coeffs: Vec<i64>) -> Self {
        Self::new(Some(param), 0, coeffs, 0, Placement::Numerator)
    }

    pub fn lower(param: &str, coeffs: Vec<i64>) -> Self {
        Self::new(Some(param), 0, coeffs, 0, Placement::Denominator)
    }

    pub fn constant(base: i64, coeffs: Vec<i64>, placement: Placement) -> Self {
        Self::new(None, base, coeffs, 0, placement)
    }

    pub fn new(
        param: Option<&str>,
        shift: i64,
        coeffs: Vec<i64>,
        offset: i64,
        placement: Placement,
    ) -> Self {
        PochhammerFactor {
            param: param.map(str::to_owned),
            shift,
            coeffs,
            offset,
            placement,
        }
    }

    /// `coeffs · idx + offset`.
    pub fn index(&self, idx: &[u32]) -> i64 {
        self.coeffs
            .iter()
            .zip(idx)
            .map(|(&q, &n)| q * n as i64)
            .sum::<i64>()
            + self.offset
    }

    pub fn depends_on(&self, name: &str) -> bool {
        self.param.as_deref() == Some(name)
    }

    /// Constant factors: no parameter, all-zero coefficients, zero offset.
    pub fn is_inert(&self) -> bool {
        self.offset == 0 && self.coeffs.iter().all(|&q| q == 0)
    }
}

/// Primitive scalar multiplying a series.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PrefactorAtom {
    Const(Rational),
    /// `x_var^exponent`
    VarPower { var: usize, exponent: i32 },
    /// `(param + offset)^exponent`, exponent ±1
    ParamLinear {
        param: String,
        offset: i64,
        exponent: i8,
    },
    /// `Γ(param + num_offset) / Γ(param + den_offset)`
    GammaRatio {
        param: String,
        num_offset: i64,
        den_offset: i64,
    },
}

impl PrefactorAtom {
    pub fn param(&self) -> Option<&str> {
        match self {
            PrefactorAtom::ParamLinear { param, .. } | PrefactorAtom::GammaRatio { param, .. } => {
                Some(param)
            }
            _ => None,
        }
    }

    pub fn inverse_linear(param: &str, offset: i64) -> Self {
        PrefactorAtom::ParamLinear {
            param: param.to_owned(),
            offset,
            exponent: -1,
        }
    }

    pub fn integer(n: i64) -> Self {
        PrefactorAtom::Const(Rational::from_integer(n))
    }
}

/// A Horn-type series with all parameters and variables bound.
#[derive(Debug, Clone, PartialEq)]
pub struct HornSeries {
    variables: Vec<f64>,
    parameters: Vec<Parameter>,
    factors: Vec<PochhammerFactor>,
    prefactor: Vec<PrefactorAtom>,
}

impl HornSeries {
    /// Assembles a series without validating it; see [`HornSeries::validate`].
    pub fn new(
        variables: Vec<f64>,
        parameters: Vec<Parameter>,
        factors: Vec<PochhammerFactor>,
        prefactor: Vec<PrefactorAtom>,
    ) -> Self {
        HornSeries {
            variables,
            parameters,
            factors,
            prefactor,
        }
    }

    pub fn variables(&self) -> &[f64] {
        &self.variables
    }

    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn factors(&self) -> &[PochhammerFactor] {
        &self.factors
    }

    pub fn prefactor(&self) -> &[PrefactorAtom] {
        &self.prefactor
    }

    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn param_value(&self, name: &str) -> Result<f64> {
        self.parameter(name)
            .map(|p| p.value)
            .ok_or_else(|| HornError::UnknownParameter(name.to_owned()))
    }

    /// Numeric value of a factor base.
    pub fn base_value(&self, factor: &PochhammerFactor) -> Result<f64> {
        match &factor.param {
            Some(name) => Ok(self.param_value(name)? + factor.shift as f64),
            None => Ok(factor.shift as f64),
        }
    }

    /// Copy with one parameter rebound; the original is untouched.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<HornSeries> {
        let mut out = self.clone();
        let p = out
            .parameters
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| HornError::UnknownParameter(name.to_owned()))?;
        p.value = value;
        Ok(out)
    }

    /// Copy with one variable rebound.
    pub fn with_variable(&self, var: usize, value: f64) -> HornSeries {
        let mut out = self.clone();
        out.variables[var] = value;
        out
    }

    pub(crate) fn into_parts(
        self,
    ) -> (
        Vec<f64>,
        Vec<Parameter>,
        Vec<PochhammerFactor>,
        Vec<PrefactorAtom>,
    ) {
        (self.variables, self.parameters, self.factors, self.prefactor)
    }

    /// All structural and pole problems of the series.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let phi = self.variables.len();

        for (i, v) in self.variables.iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation::NonFinite(format!("variable {i}")));
            }
        }
        for (i, p) in self.parameters.iter().enumerate() {
            if self.parameters[..i].iter().any(|q| q.name == p.name) {
                out.push(Violation::DuplicateParameter(p.name.clone()));
            }
            if !p.value.is_finite() || !p.epsilon_slope.is_finite() {
                out.push(Violation::NonFinite(format!("parameter `{}`", p.name)));
            }
        }

        for (i, f) in self.factors.iter().enumerate() {
            if f.coeffs.len() != phi {
                out.push(Violation::CoefficientArity {
                    factor: i,
                    expected: phi,
                    found: f.coeffs.len(),
                });
                continue;
            }
            let base = match self.base_value(f) {
                Ok(b) => b,
                Err(_) => {
                    out.push(Violation::UnknownParameter {
                        location: format!("factor {i}"),
                        name: f.param.clone().unwrap_or_default(),
                    });
                    continue;
                }
            };
            if let Some(v) = self.reachable_pole(f, base) {
                out.push(v(i, f.param.clone()));
            }
        }

        for (i, atom) in self.prefactor.iter().enumerate() {
            if let Some(name) = atom.param() {
                if self.parameter(name).is_none() {
                    out.push(Violation::UnknownParameter {
                        location: format!("prefactor atom {i}"),
                        name: name.to_owned(),
                    });
                    continue;
                }
            }
            match atom {
                PrefactorAtom::Const(_) => {}
                PrefactorAtom::VarPower { var, exponent } => {
                    if *var >= phi {
                        out.push(Violation::VariableOutOfRange { atom: i, var: *var });
                    } else if *exponent < 0 && self.variables[*var] == 0.0 {
                        out.push(Violation::PrefactorPole { atom: i });
                    }
                }
                PrefactorAtom::ParamLinear {
                    param,
                    offset,
                    exponent,
                } => {
                    if exponent.abs() != 1 {
                        out.push(Violation::BadExponent { atom: i });
                    } else if *exponent < 0 {
                        let v = self.parameter(param).map(|p| p.value).unwrap_or(f64::NAN)
                            + *offset as f64;
                        if v.abs() <= pole_tolerance() {
                            out.push(Violation::ZeroInverseAtom {
                                atom: i,
                                param: param.clone(),
                            });
                        }
                    }
                }
                PrefactorAtom::GammaRatio {
                    param,
                    num_offset,
                    den_offset,
                } => {
                    let v = self.parameter(param).map(|p| p.value).unwrap_or(f64::NAN);
                    if pochhammer(v + *den_offset as f64, num_offset - den_offset).is_err() {
                        out.push(Violation::PrefactorPole { atom: i });
                    }
                }
            }
        }

        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    /// Like [`HornSeries::validate`] but as a `Result` carrying a [`HornError`].
    pub fn check(&self) -> Result<()> {
        self.validate().map_err(HornError::Invalid)
    }

    /// Detects a base value for which some index actually visited by the
    /// summation (variables bound to zero pin their index at 0) makes the
    /// factor singular.
    #[allow(clippy::type_complexity)]
    fn reachable_pole(
        &self,
        f: &PochhammerFactor,
        base: f64,
    ) -> Option<fn(usize, Option<String>) -> Violation> {
        let active = || {
            f.coeffs
                .iter()
                .zip(&self.variables)
                .filter(|(_, &x)| x != 0.0)
                .map(|(&q, _)| q)
        };
        let unbounded_above = active().any(|q| q > 0);
        let unbounded_below = active().any(|q| q < 0);
        let reaches_at_least = |t: i64| unbounded_above || f.offset >= t;
        let reaches_at_most = |t: i64| unbounded_below || f.offset <= t;

        let nearest = base.round();
        let is_integer = (base - nearest).abs() <= pole_tolerance();
        if !is_integer {
            return None;
        }
        let z = nearest as i64;
        match f.placement {
            // (−m)_N = 0 once N ≥ m + 1
            Placement::Denominator if z <= 0 && reaches_at_least(1 - z) => {
                Some(|i, param| Violation::DenominatorPole { factor: i, param })
            }
            // (z)_{−k} = 1/(z−k)_k blows up once k ≥ z ≥ 1
            Placement::Numerator if z >= 1 && reaches_at_most(-z) => {
                Some(|i, param| Violation::NumeratorPole { factor: i, param })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    CoefficientArity {
        factor: usize,
        expected: usize,
        found: usize,
    },
    DuplicateParameter(String),
    UnknownParameter {
        location: String,
        name: String,
    },
    NonFinite(String),
    DenominatorPole {
        factor: usize,
        param: Option<String>,
    },
    NumeratorPole {
        factor: usize,
        param: Option<String>,
    },
    ZeroInverseAtom {
        atom: usize,
        param: String,
    },
    BadExponent {
        atom: usize,
    },
    VariableOutOfRange {
        atom: usize,
        var: usize,
    },
    PrefactorPole {
        atom: usize,
    },
}

fn describe(param: &Option<String>) -> String {
    param
        .as_deref()
        .map(|p| format!(" (`{p}`)"))
        .unwrap_or_default()
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CoefficientArity {
                factor,
                expected,
                found,
            } => write!(
                f,
                "coefficient arity mismatch: factor {factor} has {found} coefficients, series has {expected} variables"
            ),
            Violation::DuplicateParameter(name) => write!(f, "duplicate parameter `{name}`"),
            Violation::UnknownParameter { location, name } => {
                write!(f, "{location} references unknown parameter `{name}`")
            }
            Violation::NonFinite(what) => write!(f, "{what} is not finite"),
            Violation::DenominatorPole { factor, param } => write!(
                f,
                "denominator parameter at pole: factor {factor}{}",
                describe(param)
            ),
            Violation::NumeratorPole { factor, param } => write!(
                f,
                "numerator parameter at pole under negative index: factor {factor}{}",
                describe(param)
            ),
            Violation::ZeroInverseAtom { atom, param } => write!(
                f,
                "inverse linear prefactor atom {atom} in `{param}` vanishes"
            ),
            Violation::BadExponent { atom } => {
                write!(f, "prefactor atom {atom}: linear exponent must be +1 or -1")
            }
            Violation::VariableOutOfRange { atom, var } => {
                write!(f, "prefactor atom {atom} refers to missing variable {var}")
            }
            Violation::PrefactorPole { atom } => write!(f, "prefactor atom {atom} is singular"),
        }
    }
}

/// A parameter derivative written as a finite sum of series, each carrying
/// its own prefactor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DerivativeExpansion {
    pub members: Vec<HornSeries>,
}

impl DerivativeExpansion {
    pub fn new(members: Vec<HornSeries>) -> Self {
        DerivativeExpansion { members }
    }

    pub fn singleton(series: HornSeries) -> Self {
        DerivativeExpansion {
            members: vec![series],
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(a: f64, b: f64, c: f64, x: f64) -> HornSeries {
        HornSeries::new(
            vec![x],
            vec![
                Parameter::new("a", a),
                Parameter::new("b", b),
                Parameter::new("c", c),
            ],
            vec![
                PochhammerFactor::upper("a", vec![1]),
                PochhammerFactor::upper("b", vec![1]),
                PochhammerFactor::lower("c", vec![1]),
            ],
            vec![],
        )
    }

    #[test]
    fn well_formed_gauss_validates() {
        assert_eq!(gauss(1.0, 1.0, 2.0, 0.5).validate(), Ok(()));
    }

    #[test]
    fn denominator_at_pole() {
        let err = gauss(1.0, 1.0, 0.0, 0.5).validate().unwrap_err();
        assert_eq!(err.len(), 1);
        assert!(err[0].to_string().contains("denominator parameter at pole"));
        // c = -3 is reached at n = 4
        assert!(gauss(1.0, 1.0, -3.0, 0.5).validate().is_err());
    }

    #[test]
    fn coefficient_arity_mismatch() {
        let s = HornSeries::new(
            vec![0.1, 0.2],
            vec![Parameter::new("a", 0.5)],
            vec![PochhammerFactor::upper("a", vec![1, 1, 0])],
            vec![],
        );
        let err = s.validate().unwrap_err();
        assert!(err[0].to_string().contains("coefficient arity mismatch"));
    }

    #[test]
    fn reports_every_violation() {
        let s = HornSeries::new(
            vec![0.1],
            vec![Parameter::new("a", 0.5), Parameter::new("a", 1.0)],
            vec![
                PochhammerFactor::upper("zz", vec![1]),
                PochhammerFactor::lower("a", vec![1, 2]),
            ],
            vec![PrefactorAtom::VarPower {
                var: 3,
                exponent: 1,
            }],
        );
        assert_eq!(s.validate().unwrap_err().len(), 4);
    }

    #[test]
    fn numerator_pole_needs_negative_index() {
        let mk = |a: f64, q: Vec<i64>| {
            HornSeries::new(
                vec![0.1, 0.1],
                vec![Parameter::new("a", a)],
                vec![PochhammerFactor::upper("a", q)],
                vec![],
            )
        };
        assert!(mk(2.0, vec![1, -1]).validate().is_err());
        assert!(mk(2.0, vec![1, 1]).validate().is_ok());
        assert!(mk(2.5, vec![1, -1]).validate().is_ok());
    }

    #[test]
    fn zero_variable_pins_index() {
        // (0)_n in the denominator only along a variable bound to zero
        let s = HornSeries::new(
            vec![0.3, 0.0],
            vec![Parameter::new("c", 0.0)],
            vec![PochhammerFactor::lower("c", vec![0, 1])],
            vec![],
        );
        assert!(s.validate().is_ok());
    }

    #[test]
    fn zero_inverse_atom() {
        let s = HornSeries::new(
            vec![0.1],
            vec![Parameter::new("a", 2.0)],
            vec![],
            vec![PrefactorAtom::inverse_linear("a", -2)],
        );
        assert!(matches!(
            s.validate().unwrap_err()[0],
            Violation::ZeroInverseAtom { .. }
        ));
    }

    #[test]
    fn rebinding() {
        let s = gauss(1.0, 1.0, 2.0, 0.5);
        let t = s.with_parameter("a", 1.5).unwrap();
        assert_eq!(t.param_value("a").unwrap(), 1.5);
        assert_eq!(s.param_value("a").unwrap(), 1.0);
        assert_eq!(t.with_parameter("a", 1.0).unwrap(), s);
        assert!(matches!(
            s.with_parameter("q", 1.0),
            Err(HornError::UnknownParameter(_))
        ));
        assert!(s.with_parameter("c", 0.0).unwrap().validate().is_err());
    }

    #[test]
    fn factor_index_with_offset() {
        let f = PochhammerFactor::new(Some("a"), 1, vec![2, -1, 1], 3, Placement::Numerator);
        assert_eq!(f.index(&[1, 4, 2]), 3);
    }
}
