//! Named Horn-type functions: generalized hypergeometric pFq, Appell F1–F4,
//! the Horn functions H1, H3, G3, Kampé de Fériet functions and generalized
//! Lauricella series with integer coefficients.
//!
//! Two-variable functions use `x` for the first index `m` and `y` for the
//! second index `n`.

use serde::{Deserialize, Serialize};

use crate::error::{HornError, Result};
use crate::model::{HornSeries, Parameter, Placement, PochhammerFactor};

/// Families accepted by [`build`]; `pFq` is spelled with concrete digits,
/// e.g. `2F1`.
pub const FAMILIES: &[&str] = &[
    "pFq",
    "F1",
    "F2",
    "F3",
    "F4",
    "H1",
    "H3",
    "G3",
    "KdF",
    "GenLauricella",
];

/// Coefficient layout for the open-ended families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Layout {
    /// Kampé de Fériet: `a` upper parameters on every index, `b[i]` upper
    /// parameters on index `i` alone, `c` lower on every index, `d[i]` lower
    /// on index `i`. Parameters are given in that order.
    KampeDeFeriet {
        a: usize,
        b: Vec<usize>,
        c: usize,
        d: Vec<usize>,
    },
    /// Explicit integer coefficient vectors, numerators first.
    Lauricella {
        numerator: Vec<Vec<i64>>,
        denominator: Vec<Vec<i64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSpec {
    #[serde(rename = "catalog")]
    pub name: String,
    pub params: Vec<f64>,
    pub vars: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slopes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Layout>,
}

impl CatalogSpec {
    pub fn new(name: &str, params: Vec<f64>, vars: Vec<f64>) -> Self {
        CatalogSpec {
            name: name.to_owned(),
            params,
            vars,
            slopes: Vec::new(),
            layout: None,
        }
    }

    /// One-variable `pFq(upper; lower; x)`.
    pub fn pfq(upper: Vec<f64>, lower: Vec<f64>, x: f64) -> Self {
        let name = format!("{}F{}", upper.len(), lower.len());
        Self::new(&name, [upper, lower].concat(), vec![x])
    }

    pub fn with_slopes(mut self, slopes: Vec<f64>) -> Self {
        self.slopes = slopes;
        self
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = Some(layout);
        self
    }
}

/// Parameter names, variable count and factor layout of a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyLayout {
    pub name: String,
    pub parameters: Vec<String>,
    pub variables: usize,
    pub factors: Vec<FactorLayout>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorLayout {
    pub param: String,
    pub coeffs: Vec<i64>,
    pub placement: Placement,
}

fn parse_pfq(name: &str) -> Option<(usize, usize)> {
    let (p, q) = name.split_once('F')?;
    Some((p.parse().ok()?, q.parse().ok()?))
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn fixed(
    name: &str,
    params: &[&str],
    vars: usize,
    factors: &[(&str, &[i64], Placement)],
) -> FamilyLayout {
    FamilyLayout {
        name: name.to_owned(),
        parameters: params.iter().map(|s| s.to_string()).collect(),
        variables: vars,
        factors: factors
            .iter()
            .map(|(p, c, placement)| FactorLayout {
                param: p.to_string(),
                coeffs: c.to_vec(),
                placement: *placement,
            })
            .collect(),
    }
}

/// Layout for `name`. Open-ended families need `layout`.
pub fn family_layout(name: &str, layout: Option<&Layout>) -> Result<FamilyLayout> {
    use Placement::{Denominator as D, Numerator as N};
    if let Some((p, q)) = parse_pfq(name) {
        let (upper, lower) = if p <= 2 && q <= 1 {
            (
                ["a", "b"][..p].iter().map(|s| s.to_string()).collect(),
                ["c"][..q].iter().map(|s| s.to_string()).collect(),
            )
        } else {
            (names("a", p), names("b", q))
        };
        let factors = upper
            .iter()
            .map(|u: &String| (u.clone(), N))
            .chain(lower.iter().map(|l| (l.clone(), D)))
            .map(|(param, placement)| FactorLayout {
                param,
                coeffs: vec![1],
                placement,
            })
            .collect();
        return Ok(FamilyLayout {
            name: name.to_owned(),
            parameters: [upper, lower].concat(),
            variables: 1,
            factors,
        });
    }
    Ok(match name {
        "F1" => fixed(
            name,
            &["a", "b1", "b2", "c"],
            2,
            &[
                ("a", &[1, 1], N),
                ("b1", &[1, 0], N),
                ("b2", &[0, 1], N),
                ("c", &[1, 1], D),
            ],
        ),
        "F2" => fixed(
            name,
            &["a", "b1", "b2", "c1", "c2"],
            2,
            &[
                ("a", &[1, 1], N),
                ("b1", &[1, 0], N),
                ("b2", &[0, 1], N),
                ("c1", &[1, 0], D),
                ("c2", &[0, 1], D),
            ],
        ),
        "F3" => fixed(
            name,
            &["a1", "a2", "b1", "b2", "c"],
            2,
            &[
                ("a1", &[1, 0], N),
                ("a2", &[0, 1], N),
                ("b1", &[1, 0], N),
                ("b2", &[0, 1], N),
                ("c", &[1, 1], D),
            ],
        ),
        "F4" => fixed(
            name,
            &["a", "b", "c1", "c2"],
            2,
            &[
                ("a", &[1, 1], N),
                ("b", &[1, 1], N),
                ("c1", &[1, 0], D),
                ("c2", &[0, 1], D),
            ],
        ),
        "H1" => fixed(
            name,
            &["a", "b", "c", "d"],
            2,
            &[
                ("a", &[1, -1], N),
                ("b", &[1, 1], N),
                ("c", &[0, 1], N),
                ("d", &[1, 0], D),
            ],
        ),
        "H3" => fixed(
            name,
            &["a", "b", "c"],
            2,
            &[("a", &[2, 1], N), ("b", &[0, 1], N), ("c", &[1, 1], D)],
        ),
        "G3" => fixed(name, &["a", "b"], 2, &[("a", &[-1, 2], N), ("b", &[2, -1], N)]),
        "KdF" => match layout {
            Some(Layout::KampeDeFeriet { a, b, c, d }) => kdf_layout(*a, b, *c, d)?,
            _ => return Err(missing_layout(name, "{a, b, c, d}")),
        },
        "GenLauricella" => match layout {
            Some(Layout::Lauricella {
                numerator,
                denominator,
            }) => lauricella_layout(numerator, denominator)?,
            _ => return Err(missing_layout(name, "{numerator, denominator}")),
        },
        "pFq" => {
            return Err(HornError::Arity {
                family: name.into(),
                expected: "concrete digits such as 2F1".into(),
                found: name.into(),
            })
        }
        other => return Err(HornError::UnknownFunction(other.to_owned())),
    })
}

fn missing_layout(family: &str, shape: &str) -> HornError {
    HornError::Arity {
        family: family.into(),
        expected: format!("a layout {shape}"),
        found: "none".into(),
    }
}

fn kdf_layout(a: usize, b: &[usize], c: usize, d: &[usize]) -> Result<FamilyLayout> {
    if b.len() != d.len() || b.is_empty() {
        return Err(HornError::Arity {
            family: "KdF".into(),
            expected: "equal, nonzero numbers of b and d blocks".into(),
            found: format!("{} and {}", b.len(), d.len()),
        });
    }
    let phi = b.len();
    let all = vec![1; phi];
    let unit = |i: usize| {
        let mut v = vec![0; phi];
        v[i] = 1;
        v
    };
    let mut parameters = Vec::new();
    let mut factors = Vec::new();
    let mut push = |name: String, coeffs: Vec<i64>, placement| {
        parameters.push(name.clone());
        factors.push(FactorLayout {
            param: name,
            coeffs,
            placement,
        });
    };
    for j in 1..=a {
        push(format!("a{j}"), all.clone(), Placement::Numerator);
    }
    for (i, &n) in b.iter().enumerate() {
        for j in 1..=n {
            push(format!("b{}_{j}", i + 1), unit(i), Placement::Numerator);
        }
    }
    for j in 1..=c {
        push(format!("c{j}"), all.clone(), Placement::Denominator);
    }
    for (i, &n) in d.iter().enumerate() {
        for j in 1..=n {
            push(format!("d{}_{j}", i + 1), unit(i), Placement::Denominator);
        }
    }
    Ok(FamilyLayout {
        name: "KdF".into(),
        parameters,
        variables: phi,
        factors,
    })
}

fn lauricella_layout(numerator: &[Vec<i64>], denominator: &[Vec<i64>]) -> Result<FamilyLayout> {
    let phi = numerator
        .iter()
        .chain(denominator)
        .map(Vec::len)
        .next()
        .ok_or_else(|| HornError::Arity {
            family: "GenLauricella".into(),
            expected: "at least one coefficient vector".into(),
            found: "none".into(),
        })?;
    if let Some(bad) = numerator.iter().chain(denominator).find(|v| v.len() != phi) {
        return Err(HornError::Arity {
            family: "GenLauricella".into(),
            expected: format!("coefficient vectors of length {phi}"),
            found: format!("{bad:?}"),
        });
    }
    let a = names("a", numerator.len());
    let c = names("c", denominator.len());
    let factors = a
        .iter()
        .zip(numerator)
        .map(|(p, q)| (p, q, Placement::Numerator))
        .chain(c.iter().zip(denominator).map(|(p, q)| (p, q, Placement::Denominator)))
        .map(|(p, q, placement)| FactorLayout {
            param: p.clone(),
            coeffs: q.clone(),
            placement,
        })
        .collect();
    Ok(FamilyLayout {
        name: "GenLauricella".into(),
        parameters: [a, c].concat(),
        variables: phi,
        factors,
    })
}

/// Builds and validates the series described by `spec`.
pub fn build(spec: &CatalogSpec) -> Result<HornSeries> {
    let layout = family_layout(&spec.name, spec.layout.as_ref())?;
    let arity = |what: &str, expected: usize, found: usize| {
        if expected == found {
            Ok(())
        } else {
            Err(HornError::Arity {
                family: spec.name.clone(),
                expected: format!("{expected} {what}"),
                found: found.to_string(),
            })
        }
    };
    arity("parameters", layout.parameters.len(), spec.params.len())?;
    arity("variables", layout.variables, spec.vars.len())?;
    if !spec.slopes.is_empty() {
        arity("slopes", layout.parameters.len(), spec.slopes.len())?;
    }

    let parameters = layout
        .parameters
        .iter()
        .enumerate()
        .map(|(i, name)| {
            Parameter::new(name.clone(), spec.params[i])
                .with_slope(spec.slopes.get(i).copied().unwrap_or(0.0))
        })
        .collect();
    let factors = layout
        .factors
        .iter()
        .map(|f| PochhammerFactor::new(Some(&f.param), 0, f.coeffs.clone(), 0, f.placement))
        .collect();
    let series = HornSeries::new(spec.vars.clone(), parameters, factors, vec![]);
    series.check()?;
    Ok(series)
}

/// Layouts of the fixed families plus a representative `2F1`.
pub fn list() -> Vec<FamilyLayout> {
    ["2F1", "F1", "F2", "F3", "F4", "H1", "H3", "G3"]
        .iter()
        .map(|n| family_layout(n, None).expect("fixed family"))
        .collect()
}
