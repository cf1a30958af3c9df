//! The `horn-series/1` JSON schema.
//!
//! Reals are written as decimal strings (shortest round-trip form) so that
//! reloading reproduces every bit; plain JSON numbers are accepted on input.
//! A document with a `"catalog"` key is read as a [`CatalogSpec`] shorthand.

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use crate::catalog::{self, CatalogSpec};
use crate::error::{HornError, Result};
use crate::model::{
    DerivativeExpansion, HornSeries, Parameter, Placement, PochhammerFactor, PrefactorAtom,
    Rational,
};

pub const VERSION: &str = "horn-series/1";

#[derive(Debug, Clone, Copy, PartialEq)]
struct Real(f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_real(self.0))
    }
}

/// Shortest decimal that parses back to `x`.
pub fn format_real(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct RealVisitor;
        impl Visitor<'_> for RealVisitor {
            type Value = Real;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a real as a decimal string or number")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Real, E> {
                v.trim()
                    .parse()
                    .map(Real)
                    .map_err(|_| E::custom(format!("not a real: {v:?}")))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Real, E> {
                Ok(Real(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Real, E> {
                Ok(Real(v as f64))
            }
        }
        d.deserialize_any(RealVisitor)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesDoc {
    version: String,
    variables: Vec<VariableDoc>,
    parameters: Vec<ParameterDoc>,
    factors: Vec<FactorDoc>,
    #[serde(default)]
    prefactor: Vec<AtomDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    value: Real,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParameterDoc {
    name: String,
    value: Real,
    #[serde(default = "zero")]
    epsilon_slope: Real,
}

fn zero() -> Real {
    Real(0.0)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorDoc {
    param: Option<String>,
    #[serde(default)]
    shift: i64,
    coeffs: Vec<i64>,
    #[serde(default)]
    offset: i64,
    placement: Placement,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum AtomDoc {
    Const {
        num: i64,
        den: i64,
    },
    VarPower {
        var: usize,
        exponent: i32,
    },
    ParamLinear {
        param: String,
        offset: i64,
        exponent: i8,
    },
    GammaRatio {
        param: String,
        num_offset: i64,
        den_offset: i64,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpansionDoc {
    version: String,
    members: Vec<Value>,
}

fn to_doc(s: &HornSeries) -> SeriesDoc {
    SeriesDoc {
        version: VERSION.into(),
        variables: s
            .variables()
            .iter()
            .map(|&v| VariableDoc { value: Real(v) })
            .collect(),
        parameters: s
            .parameters()
            .iter()
            .map(|p| ParameterDoc {
                name: p.name.clone(),
                value: Real(p.value),
                epsilon_slope: Real(p.epsilon_slope),
            })
            .collect(),
        factors: s
            .factors()
            .iter()
            .map(|f| FactorDoc {
                param: f.param.clone(),
                shift: f.shift,
                coeffs: f.coeffs.clone(),
                offset: f.offset,
                placement: f.placement,
            })
            .collect(),
        prefactor: s
            .prefactor()
            .iter()
            .map(|a| match a {
                PrefactorAtom::Const(r) => AtomDoc::Const {
                    num: *r.numer(),
                    den: *r.denom(),
                },
                PrefactorAtom::VarPower { var, exponent } => AtomDoc::VarPower {
                    var: *var,
                    exponent: *exponent,
                },
                PrefactorAtom::ParamLinear {
                    param,
                    offset,
                    exponent,
                } => AtomDoc::ParamLinear {
                    param: param.clone(),
                    offset: *offset,
                    exponent: *exponent,
                },
                PrefactorAtom::GammaRatio {
                    param,
                    num_offset,
                    den_offset,
                } => AtomDoc::GammaRatio {
                    param: param.clone(),
                    num_offset: *num_offset,
                    den_offset: *den_offset,
                },
            })
            .collect(),
    }
}

fn from_doc(doc: SeriesDoc) -> Result<HornSeries> {
    check_version(&doc.version)?;
    let prefactor = doc
        .prefactor
        .into_iter()
        .map(|a| {
            Ok(match a {
                AtomDoc::Const { den: 0, .. } => {
                    return Err(HornError::Schema("const atom with zero denominator".into()))
                }
                AtomDoc::Const { num, den } => PrefactorAtom::Const(Rational::new(num, den)),
                AtomDoc::VarPower { var, exponent } => PrefactorAtom::VarPower { var, exponent },
                AtomDoc::ParamLinear {
                    param,
                    offset,
                    exponent,
                } => PrefactorAtom::ParamLinear {
                    param,
                    offset,
                    exponent,
                },
                AtomDoc::GammaRatio {
                    param,
                    num_offset,
                    den_offset,
                } => PrefactorAtom::GammaRatio {
                    param,
                    num_offset,
                    den_offset,
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(HornSeries::new(
        doc.variables.into_iter().map(|v| v.value.0).collect(),
        doc.parameters
            .into_iter()
            .map(|p| Parameter::new(p.name, p.value.0).with_slope(p.epsilon_slope.0))
            .collect(),
        doc.factors
            .into_iter()
            .map(|f| PochhammerFactor {
                param: f.param,
                shift: f.shift,
                coeffs: f.coeffs,
                offset: f.offset,
                placement: f.placement,
            })
            .collect(),
        prefactor,
    ))
}

fn check_version(v: &str) -> Result<()> {
    if v == VERSION {
        Ok(())
    } else {
        Err(HornError::Schema(format!(
            "unsupported version {v:?}, expected {VERSION:?}"
        )))
    }
}

fn schema_err(e: serde_json::Error) -> HornError {
    HornError::Schema(e.to_string())
}

pub fn series_to_value(s: &HornSeries) -> Value {
    serde_json::to_value(to_doc(s)).expect("series documents serialize")
}

pub fn expansion_to_value(e: &DerivativeExpansion) -> Value {
    serde_json::json!({
        "version": VERSION,
        "members": e.members.iter().map(series_to_value).collect::<Vec<_>>(),
    })
}

pub fn to_json(s: &HornSeries) -> String {
    series_to_value(s).to_string()
}

pub fn to_json_pretty(s: &HornSeries) -> String {
    serde_json::to_string_pretty(&series_to_value(s)).expect("values serialize")
}

pub fn expansion_to_json(e: &DerivativeExpansion) -> String {
    expansion_to_value(e).to_string()
}

/// Any loadable document.
#[derive(Debug, Clone, PartialEq)]
pub enum Document {
    Series(HornSeries),
    Expansion(DerivativeExpansion),
}

/// Reads a series document, catalog shorthand or expansion document.
/// Syntax errors carry line and column; catalog shorthand is validated.
pub fn parse_document(text: &str) -> Result<Document> {
    let value: Value = serde_json::from_str(text)?;
    document_from_value(value)
}

pub fn document_from_value(value: Value) -> Result<Document> {
    let obj = value
        .as_object()
        .ok_or_else(|| HornError::Schema("top level must be an object".into()))?;
    if obj.contains_key("catalog") {
        let spec: CatalogSpec = serde_json::from_value(value).map_err(schema_err)?;
        return Ok(Document::Series(catalog::build(&spec)?));
    }
    if obj.contains_key("members") {
        let doc: ExpansionDoc = serde_json::from_value(value).map_err(schema_err)?;
        check_version(&doc.version)?;
        let members = doc
            .members
            .into_iter()
            .enumerate()
            .map(|(index, m)| {
                series_from_value(m).map_err(|e| HornError::Member {
                    index,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        return Ok(Document::Expansion(DerivativeExpansion::new(members)));
    }
    series_from_value(value).map(Document::Series)
}

fn series_from_value(value: Value) -> Result<HornSeries> {
    let doc: SeriesDoc = serde_json::from_value(value).map_err(schema_err)?;
    from_doc(doc)
}

/// Reads a single series (full schema or catalog shorthand). Full documents
/// are not validated here.
pub fn from_json(text: &str) -> Result<HornSeries> {
    match parse_document(text)? {
        Document::Series(s) => Ok(s),
        Document::Expansion(_) => Err(HornError::Schema(
            "expected a series, found an expansion".into(),
        )),
    }
}

pub fn expansion_from_json(text: &str) -> Result<DerivativeExpansion> {
    match parse_document(text)? {
        Document::Expansion(e) => Ok(e),
        Document::Series(s) => Ok(DerivativeExpansion::singleton(s)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> HornSeries {
        HornSeries::new(
            vec![0.1, 1e-300],
            vec![
                Parameter::new("a", 0.7).with_slope(-1.0),
                Parameter::new("b", std::f64::consts::PI),
            ],
            vec![
                PochhammerFactor::new(Some("a"), 2, vec![2, 1, ], 3, Placement::Numerator),
                PochhammerFactor::constant(2, vec![1, 1], Placement::Denominator),
            ],
            vec![
                PrefactorAtom::Const(Rational::new(-3, 4)),
                PrefactorAtom::VarPower { var: 1, exponent: 1 },
                PrefactorAtom::inverse_linear("a", 3),
                PrefactorAtom::GammaRatio {
                    param: "b".into(),
                    num_offset: 2,
                    den_offset: 0,
                },
            ],
        )
    }

    #[test]
    fn round_trip_sample() {
        let s = sample();
        assert_eq!(from_json(&to_json(&s)).unwrap(), s);
        assert_eq!(from_json(&to_json_pretty(&s)).unwrap(), s);
    }

    #[test]
    fn reals_are_strings() {
        let v = series_to_value(&sample());
        assert_eq!(v["variables"][0]["value"], "0.1");
        assert_eq!(v["variables"][1]["value"], "1e-300");
        assert_eq!(v["prefactor"][0]["kind"], "const");
        assert_eq!(v["factors"][1]["param"], Value::Null);
    }

    #[test]
    fn catalog_shorthand() {
        let s = from_json(r#"{"catalog":"2F1","params":[1,1,2],"vars":[0.5]}"#).unwrap();
        assert_eq!(s.parameters().len(), 3);
        assert_eq!(s.factors()[2].placement, Placement::Denominator);
    }

    #[test]
    fn numbers_accepted_for_reals() {
        let text = r#"{"version":"horn-series/1","variables":[{"value":0.5}],
            "parameters":[{"name":"a","value":2}],
            "factors":[{"param":"a","coeffs":[1],"placement":"numerator"}]}"#;
        let s = from_json(text).unwrap();
        assert_eq!(s.param_value("a").unwrap(), 2.0);
    }

    #[test]
    fn syntax_errors_have_positions() {
        match from_json("{\n  \"version\": ,\n}") {
            Err(HornError::Json { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(
            from_json(r#"{"version":"horn-series/9","variables":[],"parameters":[],"factors":[]}"#),
            Err(HornError::Schema(_))
        ));
        assert!(matches!(from_json("[1,2]"), Err(HornError::Schema(_))));
        assert!(matches!(
            from_json(r#"{"version":"horn-series/1","variables":[],"parameters":[],"factors":[],"prefactor":[{"kind":"const","num":1,"den":0}]}"#),
            Err(HornError::Schema(_))
        ));
    }

    #[test]
    fn expansion_round_trip() {
        let e = DerivativeExpansion::new(vec![sample(), sample().with_variable(0, 0.25)]);
        assert_eq!(expansion_from_json(&expansion_to_json(&e)).unwrap(), e);
    }

    fn arb_series() -> impl Strategy<Value = HornSeries> {
        let real = prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -10.0..10.0f64];
        (1usize..4)
            .prop_flat_map(move |phi| {
                (
                    prop::collection::vec(real.clone(), phi),
                    prop::collection::vec((real.clone(), real.clone()), 0..4),
                    prop::collection::vec(
                        (
                            any::<bool>(),
                            any::<i64>(),
                            prop::collection::vec(-3i64..4, phi),
                            any::<i64>(),
                            any::<bool>(),
                        ),
                        0..5,
                    ),
                    prop::collection::vec((any::<i64>(), 1i64..i64::MAX, 0usize..phi, any::<i32>()), 0..3),
                )
            })
            .prop_map(|(vars, params, factors, atoms)| {
                let parameters: Vec<_> = params
                    .iter()
                    .enumerate()
                    .map(|(i, (v, s))| Parameter::new(format!("p{i}"), *v).with_slope(*s))
                    .collect();
                let factors = factors
                    .into_iter()
                    .enumerate()
                    .map(|(i, (has, shift, coeffs, offset, num))| PochhammerFactor {
                        param: (has && !parameters.is_empty()).then(|| format!("p{}", i % parameters.len())),
                        shift,
                        coeffs,
                        offset,
                        placement: if num { Placement::Numerator } else { Placement::Denominator },
                    })
                    .collect();
                let mut prefactor = Vec::new();
                for (i, (n, d, var, e)) in atoms.into_iter().enumerate() {
                    prefactor.push(PrefactorAtom::Const(Rational::new(n, d)));
                    prefactor.push(PrefactorAtom::VarPower { var, exponent: e });
                    if !parameters.is_empty() {
                        let p = format!("p{}", i % parameters.len());
                        prefactor.push(PrefactorAtom::ParamLinear {
                            param: p.clone(),
                            offset: n,
                            exponent: if e % 2 == 0 { 1 } else { -1 },
                        });
                        prefactor.push(PrefactorAtom::GammaRatio {
                            param: p,
                            num_offset: n,
                            den_offset: d,
                        });
                    }
                }
                HornSeries::new(vars, parameters, factors, prefactor)
            })
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(s in arb_series()) {
            let back = from_json(&to_json(&s)).unwrap();
            prop_assert_eq!(&back, &s);
            for (a, b) in back.variables().iter().zip(s.variables()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(to_json(&back), to_json(&s));
        }

        #[test]
        fn reals_round_trip_bitwise(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let back: f64 = format_real(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
