//! Closed-form parameter derivatives of Horn series.
//!
//! For a factor `(b)_{q·n + o}` with `b = p + shift`, the logarithmic
//! derivative `ψ(b + o + q·n) − ψ(b)` splits into a constant part
//! `ψ(b + o) − ψ(b)` (a finite sum of `1/(b + j)`) and a telescoping sum over
//! the variables ξ with `q_ξ ≠ 0`. Each ξ-piece is a finite sum over the
//! residues γ of `1/(b + o + γ + Σ_{λ<ξ} q_λ n_λ + q_ξ k)` (or the mirrored
//! form for `q_ξ < 0`) after resumming `n_ξ = n + k + 1`, which introduces one
//! new summation index `k` bound to `x_ξ`. Every other factor of the term
//! is evaluated at the shifted index, realised through its coefficient for
//! `k` and an integer offset.
//!
//! Members coming from the constant part, or from parameter-dependent
//! prefactor atoms, have no natural extra index; they are padded with a
//! variable bound to zero so every member has exactly one more variable than
//! its source.

use std::collections::BTreeMap;

use num_traits::CheckedMul;

use crate::error::{HornError, Result};
use crate::eval::{atom_value, ordered_map, Execution};
use crate::model::{
    DerivativeExpansion, HornSeries, Placement, PochhammerFactor, PrefactorAtom, Rational,
};
use crate::special::pole_tolerance;

/// `∂F/∂param` as a finite sum of series in one more variable.
///
/// Members are emitted in a fixed order: parameter-dependent prefactor atoms
/// first, then each factor occurrence in turn (its constant part, then ξ
/// ascending, then γ ascending).
pub fn differentiate(series: &HornSeries, param: &str) -> Result<DerivativeExpansion> {
    series.check()?;
    series.param_value(param)?;
    let mut members = Vec::new();

    for (i, atom) in series.prefactor().iter().enumerate() {
        if atom.param() == Some(param) {
            for extra in atom_derivative(atom)? {
                let mut atoms = series.prefactor().to_vec();
                atoms.remove(i);
                members.push(constant_member(series, atoms, extra)?);
            }
        }
    }

    for (fi, factor) in series.factors().iter().enumerate() {
        if factor.depends_on(param) {
            differentiate_occurrence(series, fi, &mut members)?;
        }
    }

    Ok(DerivativeExpansion::new(members))
}

/// Replacement atom lists for the derivative of one prefactor atom.
fn atom_derivative(atom: &PrefactorAtom) -> Result<Vec<Vec<PrefactorAtom>>> {
    Ok(match atom {
        PrefactorAtom::ParamLinear { exponent: 1, .. } => vec![vec![]],
        PrefactorAtom::ParamLinear { exponent: -1, .. } => {
            vec![vec![PrefactorAtom::integer(-1), atom.clone(), atom.clone()]]
        }
        PrefactorAtom::GammaRatio {
            param,
            num_offset,
            den_offset,
        } => digamma_difference(param, *num_offset, *den_offset, 1)
            .into_iter()
            .map(|mut extra| {
                extra.insert(0, atom.clone());
                extra
            })
            .collect(),
        _ => vec![],
    })
}

/// `sign · (ψ(p + top) − ψ(p + bottom))` as a list of atom products.
fn digamma_difference(param: &str, top: i64, bottom: i64, sign: i64) -> Vec<Vec<PrefactorAtom>> {
    let (lo, len, sign) = if top >= bottom {
        (bottom, top - bottom, sign)
    } else {
        (top, bottom - top, -sign)
    };
    (0..len)
        .map(|j| {
            let mut atoms = Vec::with_capacity(2);
            if sign < 0 {
                atoms.push(PrefactorAtom::integer(-1));
            }
            atoms.push(PrefactorAtom::inverse_linear(param, lo + j));
            atoms
        })
        .collect()
}

fn differentiate_occurrence(
    series: &HornSeries,
    fi: usize,
    members: &mut Vec<HornSeries>,
) -> Result<()> {
    let factor = &series.factors()[fi];
    let param = factor.param.as_deref().expect("occurrence has a parameter");
    let sign: i64 = match factor.placement {
        Placement::Numerator => 1,
        Placement::Denominator => -1,
    };
    let shift = factor.shift;
    let offset = factor.offset;

    // ψ(b + o) − ψ(b)
    for extra in digamma_difference(param, shift + offset, shift, sign) {
        members.push(constant_member(series, series.prefactor().to_vec(), extra)?);
    }

    let phi = series.variable_count();
    for xi in 0..phi {
        let q_xi = factor.coeffs[xi];
        if q_xi == 0 {
            continue;
        }
        for gamma in 0..q_xi.abs() {
            members.push(branch_member(series, fi, xi, gamma)?);
        }
    }
    Ok(())
}

/// One (ξ, γ) member in φ+1 variables.
fn branch_member(series: &HornSeries, fi: usize, xi: usize, gamma: i64) -> Result<HornSeries> {
    let phi = series.variable_count();
    let k = phi;
    let target = &series.factors()[fi];
    let param = target.param.clone().expect("occurrence has a parameter");
    let q_xi = target.coeffs[xi];
    let mut factors = Vec::with_capacity(series.factors().len() + 5);
    let mut atoms = series.prefactor().to_vec();

    let extend = |coeffs: &[i64], k_entry: i64| {
        let mut c = coeffs.to_vec();
        c.push(k_entry);
        c
    };

    for (gi, g) in series.factors().iter().enumerate() {
        let c = g.coeffs[xi];
        if gi == fi {
            // (b)_{N + c} = Γ(b + c)/Γ(b) · (b + c)_N with N = q·n + q_ξ k
            let c = g.offset + c;
            let (num_offset, den_offset) = match g.placement {
                Placement::Numerator => (g.shift + c, g.shift),
                Placement::Denominator => (g.shift, g.shift + c),
            };
            atoms.push(PrefactorAtom::GammaRatio {
                param: param.clone(),
                num_offset,
                den_offset,
            });
            factors.push(PochhammerFactor {
                param: g.param.clone(),
                shift: g.shift + c,
                coeffs: extend(&g.coeffs, q_xi),
                offset: 0,
                placement: g.placement,
            });
        } else {
            let shifted = PochhammerFactor {
                param: g.param.clone(),
                shift: g.shift,
                coeffs: extend(&g.coeffs, c),
                offset: g.offset + c,
                placement: g.placement,
            };
            if !shifted.is_inert() {
                factors.push(shifted);
            }
        }
    }

    // x_ξ^{n_ξ+k+1}/(n_ξ+k+1)! = x_ξ · (1)_k (1)_{n_ξ} / (2)_{n_ξ+k} · x^n/n! x^k/k!
    let unit = |positions: &[usize]| {
        let mut c = vec![0; phi + 1];
        for &p in positions {
            c[p] = 1;
        }
        c
    };
    factors.push(PochhammerFactor::constant(1, unit(&[k]), Placement::Numerator));
    factors.push(PochhammerFactor::constant(1, unit(&[xi]), Placement::Numerator));
    factors.push(PochhammerFactor::constant(2, unit(&[xi, k]), Placement::Denominator));
    atoms.push(PrefactorAtom::VarPower {
        var: xi,
        exponent: 1,
    });

    // 1/(z + M) = (1/z) (z)_M / (z+1)_M, M = Σ_{λ<ξ} q_λ n_λ + q_ξ k
    let mut partial = vec![0; phi + 1];
    partial[..xi].copy_from_slice(&target.coeffs[..xi]);
    partial[k] = q_xi;
    let (z, mut branch_sign) = if q_xi > 0 {
        (target.shift + target.offset + gamma, 1)
    } else {
        (target.shift + target.offset - gamma - 1, -1)
    };
    if target.placement == Placement::Denominator {
        branch_sign = -branch_sign;
    }
    if branch_sign < 0 {
        atoms.push(PrefactorAtom::integer(-1));
    }
    let inverse = PrefactorAtom::inverse_linear(&param, z);
    ensure_nonzero(series, &inverse)?;
    atoms.push(inverse);
    factors.push(PochhammerFactor::new(
        Some(&param),
        z,
        partial.clone(),
        0,
        Placement::Numerator,
    ));
    factors.push(PochhammerFactor::new(
        Some(&param),
        z + 1,
        partial,
        0,
        Placement::Denominator,
    ));

    let mut variables = series.variables().to_vec();
    variables.push(series.variables()[xi]);
    Ok(HornSeries::new(
        variables,
        series.parameters().to_vec(),
        factors,
        merge_constants(atoms),
    ))
}

/// The source series times extra atoms, padded with a zero-bound variable.
fn constant_member(
    series: &HornSeries,
    mut atoms: Vec<PrefactorAtom>,
    extra: Vec<PrefactorAtom>,
) -> Result<HornSeries> {
    for a in &extra {
        if matches!(a, PrefactorAtom::ParamLinear { exponent: -1, .. }) {
            ensure_nonzero(series, a)?;
        }
    }
    atoms.extend(extra);
    let mut variables = series.variables().to_vec();
    variables.push(0.0);
    let factors = series
        .factors()
        .iter()
        .map(|f| {
            let mut f = f.clone();
            f.coeffs.push(0);
            f
        })
        .collect();
    Ok(HornSeries::new(
        variables,
        series.parameters().to_vec(),
        factors,
        merge_constants(atoms),
    ))
}

fn ensure_nonzero(series: &HornSeries, atom: &PrefactorAtom) -> Result<()> {
    if let PrefactorAtom::ParamLinear { param, offset, .. } = atom {
        let v = series.param_value(param)? + *offset as f64;
        if v.abs() <= pole_tolerance() {
            return Err(HornError::Pole(format!(
                "exceptional parameter: {param}{offset:+} vanishes at {}",
                v - *offset as f64
            )));
        }
    }
    debug_assert!(atom_value(series, atom).is_ok());
    Ok(())
}

/// Folds every `Const` atom into one leading constant (dropped when it is 1).
/// Constants that would overflow are left as separate atoms.
fn merge_constants(atoms: Vec<PrefactorAtom>) -> Vec<PrefactorAtom> {
    let mut constant = Rational::from_integer(1);
    let mut rest = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match atom {
            PrefactorAtom::Const(r) => match constant.checked_mul(&r) {
                Some(p) => constant = p,
                None => rest.push(PrefactorAtom::Const(r)),
            },
            other => rest.push(other),
        }
    }
    if constant != Rational::from_integer(1) {
        rest.insert(0, PrefactorAtom::Const(constant));
    }
    rest
}

/// Mixed derivative `∂^N F / ∏ ∂p^{k_p}` by repeated differentiation; every
/// member has `φ + N` variables.
pub fn differentiate_n(
    series: &HornSeries,
    orders: &BTreeMap<String, u32>,
) -> Result<DerivativeExpansion> {
    differentiate_n_with(series, orders, Execution::default())
}

pub fn differentiate_n_with(
    series: &HornSeries,
    orders: &BTreeMap<String, u32>,
    exec: Execution,
) -> Result<DerivativeExpansion> {
    series.check()?;
    for name in orders.keys() {
        series.param_value(name)?;
    }
    let mut current = DerivativeExpansion::singleton(series.clone());
    for (name, &order) in orders {
        for _ in 0..order {
            current = apply_to_members(&current, exec, |m| differentiate(m, name))?;
        }
    }
    Ok(current)
}

fn apply_to_members<F>(
    exp: &DerivativeExpansion,
    exec: Execution,
    f: F,
) -> Result<DerivativeExpansion>
where
    F: Fn(&HornSeries) -> Result<DerivativeExpansion> + Sync + Send,
{
    let parts = ordered_map(&exp.members, exec, f);
    let mut members = Vec::new();
    for (index, part) in parts.into_iter().enumerate() {
        let part = part.map_err(|e| HornError::Member {
            index,
            source: Box::new(e),
        })?;
        members.extend(part.members);
    }
    Ok(DerivativeExpansion::new(members))
}

/// Taylor coefficients in ε of `F(p_i + c_i ε)` for `k = 0..=order`, with
/// `c_i` the parameters' `epsilon_slope`.
///
/// `coefficient_k = D^k F / k!` with `D = Σ_i c_i ∂/∂p_i`, built as
/// `coefficient_k = (1/k) · D coefficient_{k-1}`. Slopes must be exactly
/// representable as small rationals.
pub fn epsilon_expand(series: &HornSeries, order: u32) -> Result<Vec<DerivativeExpansion>> {
    series.check()?;
    let slopes: Vec<(String, Rational)> = series
        .parameters()
        .iter()
        .filter(|p| p.epsilon_slope != 0.0)
        .map(|p| exact_rational(p.epsilon_slope).map(|r| (p.name.clone(), r)))
        .collect::<Result<_>>()?;

    let mut out = vec![DerivativeExpansion::singleton(series.clone())];
    for k in 1..=order {
        let prev = out.last().expect("coefficient 0 present");
        let next = apply_to_members(prev, Execution::default(), |m| {
            let mut members = Vec::new();
            for (name, slope) in &slopes {
                let weight = *slope / Rational::from_integer(k as i64);
                for member in differentiate(m, name)?.members {
                    members.push(scale(member, weight));
                }
            }
            Ok(DerivativeExpansion::new(members))
        })?;
        out.push(next);
    }
    Ok(out)
}

fn scale(series: HornSeries, factor: Rational) -> HornSeries {
    let (variables, parameters, factors, mut atoms) = series.into_parts();
    atoms.push(PrefactorAtom::Const(factor));
    HornSeries::new(variables, parameters, factors, merge_constants(atoms))
}

/// The rational with denominator ≤ 10^6 that equals `x` exactly as an f64.
pub fn exact_rational(x: f64) -> Result<Rational> {
    let not_rational = || HornError::Schema(format!("slope {x} is not a small exact rational"));
    let r = Rational::approximate_float(x).ok_or_else(not_rational)?;
    if *r.denom() <= 1_000_000 && *r.numer() as f64 / *r.denom() as f64 == x {
        Ok(r)
    } else {
        Err(not_rational())
    }
}
