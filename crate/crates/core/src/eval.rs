//! Truncated summation of Horn series over total-degree shells.
//!
//! Shell `s` holds every multi-index of total degree `s`; shells are summed in
//! increasing order, each in lexicographic index order, with compensated
//! accumulation. Terms inside a shell may be computed in parallel but are
//! always accumulated in the same order, so results are bit-reproducible.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{HornError, Result};
use crate::model::{DerivativeExpansion, HornSeries, Placement, PrefactorAtom};
use crate::special::{log_gamma, pochhammer, reciprocal_pochhammer, Sign, SignedLog};
use crate::summation::NeumaierSum;

/// Shells smaller than this are always computed sequentially.
#[cfg(feature = "parallel")]
const PARALLEL_SHELL_THRESHOLD: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub max_total_order: u32,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub min_shells: u32,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            max_total_order: 60,
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            min_shells: 8,
        }
    }
}

impl EvalOptions {
    pub fn check(&self) -> Result<()> {
        if self.min_shells < 1 || self.max_total_order < self.min_shells {
            return Err(HornError::Options(format!(
                "need max_total_order ({}) >= min_shells ({}) >= 1",
                self.max_total_order, self.min_shells
            )));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(HornError::Options("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: f64,
    pub tail_estimate: f64,
    pub shells_used: u32,
    pub terms_used: u64,
    pub converged: bool,
}

impl EvalResult {
    /// Turns an unconverged result into [`HornError::NotConverged`].
    pub fn require_converged(self) -> Result<EvalResult> {
        if self.converged {
            Ok(self)
        } else {
            Err(HornError::NotConverged(self))
        }
    }
}

/// How terms inside a shell are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Data-parallel over the terms of a shell (and the members of an
    /// expansion). Falls back to sequential without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Order-preserving map over a slice.
pub(crate) fn ordered_map<T, U, F>(items: &[T], exec: Execution, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel if items.len() > 1 => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

fn ln_factorial(n: u32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(1025);
        t.push(0.0);
        for k in 1..=1024u32 {
            let prev = t[k as usize - 1];
            t.push(prev + (k as f64).ln());
        }
        t
    });
    match table.get(n as usize) {
        Some(&v) => v,
        None => log_gamma(n as f64 + 1.0).map(|g| g.log_abs).unwrap_or(f64::INFINITY),
    }
}

/// Bare term (prefactor excluded) as a signed logarithm.
pub fn term_log(series: &HornSeries, idx: &[u32]) -> Result<SignedLog> {
    let xs = series.variables();
    if idx.len() != xs.len() {
        return Err(HornError::Schema(format!(
            "multi-index of length {} for a {}-variable series",
            idx.len(),
            xs.len()
        )));
    }
    let mut acc = SignedLog::ONE;
    for (&n, &x) in idx.iter().zip(xs) {
        if n == 0 {
            continue;
        }
        if x == 0.0 {
            return Ok(SignedLog::ZERO);
        }
        let sign = if x < 0.0 && n % 2 == 1 {
            Sign::Negative
        } else {
            Sign::Positive
        };
        acc = acc * SignedLog::new(n as f64 * x.abs().ln() - ln_factorial(n), sign);
    }
    for f in series.factors() {
        let base = series.base_value(f)?;
        let index = f.index(idx);
        let value = match f.placement {
            Placement::Numerator => pochhammer(base, index)?,
            Placement::Denominator => reciprocal_pochhammer(base, index)?,
        };
        acc = acc * value;
        if acc.is_zero() {
            return Ok(SignedLog::ZERO);
        }
    }
    Ok(acc)
}

/// `∏ pochhammer(base, q·idx)^{±1} · ∏ x_r^{idx_r}/idx_r!`, prefactor excluded.
pub fn term_value(series: &HornSeries, idx: &[u32]) -> Result<f64> {
    term_log(series, idx).map(SignedLog::to_f64)
}

/// Numeric value of one prefactor atom.
pub fn atom_value(series: &HornSeries, atom: &PrefactorAtom) -> Result<f64> {
    Ok(match atom {
        PrefactorAtom::Const(r) => *r.numer() as f64 / *r.denom() as f64,
        PrefactorAtom::VarPower { var, exponent } => {
            let x = *series.variables().get(*var).ok_or_else(|| {
                HornError::Schema(format!("prefactor refers to missing variable {var}"))
            })?;
            if x == 0.0 && *exponent < 0 {
                return Err(HornError::Pole(format!("x_{var}^{exponent} at x = 0")));
            }
            x.powi(*exponent)
        }
        PrefactorAtom::ParamLinear {
            param,
            offset,
            exponent,
        } => {
            let v = series.param_value(param)? + *offset as f64;
            if *exponent < 0 {
                if v == 0.0 {
                    return Err(HornError::Pole(format!("1/({param}{offset:+}) at zero")));
                }
                1.0 / v
            } else {
                v
            }
        }
        PrefactorAtom::GammaRatio {
            param,
            num_offset,
            den_offset,
        } => {
            let v = series.param_value(param)?;
            pochhammer(v + *den_offset as f64, num_offset - den_offset)?.to_f64()
        }
    })
}

/// Product of all prefactor atoms.
pub fn prefactor_value(series: &HornSeries) -> Result<f64> {
    series
        .prefactor()
        .iter()
        .try_fold(1.0, |acc, atom| Ok(acc * atom_value(series, atom)?))
}

/// Multi-indices of total degree `s` over the active variables, in
/// lexicographic order. Inactive entries stay at zero.
pub(crate) fn shell_indices(phi: usize, active: &[usize], s: u32) -> Vec<Vec<u32>> {
    fn fill(active: &[usize], rest: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        match active {
            [] => {
                if rest == 0 {
                    out.push(current.clone());
                }
            }
            [last] => {
                current[*last] = rest;
                out.push(current.clone());
                current[*last] = 0;
            }
            [first, tail @ ..] => {
                for v in 0..=rest {
                    current[*first] = v;
                    fill(tail, rest - v, current, out);
                }
                current[*first] = 0;
            }
        }
    }
    let mut out = Vec::new();
    let mut current = vec![0; phi];
    fill(active, s, &mut current, &mut out);
    out
}

/// Outcome of a shell-by-shell summation. `shell_magnitudes[s]` is
/// `Σ|scale·term|` over shell `s`.
#[derive(Debug, Clone)]
pub(crate) struct ShellSum {
    pub value: f64,
    pub shell_magnitudes: Vec<f64>,
    pub terms_used: u64,
    pub converged: bool,
    pub tail_estimate: f64,
}

/// Sums `scale · weight(idx)` shell by shell until the last `min_shells`
/// shells all fall below tolerance or `max_total_order` is exhausted.
pub(crate) fn sum_shells<W>(
    series: &HornSeries,
    scale: f64,
    opts: &EvalOptions,
    exec: Execution,
    weight: W,
) -> Result<ShellSum>
where
    W: Fn(&[u32]) -> Result<f64> + Sync + Send,
{
    opts.check()?;
    let phi = series.variable_count();
    let active: Vec<usize> = (0..phi).filter(|&r| series.variables()[r] != 0.0).collect();
    let window = opts.min_shells as usize;

    let mut acc = NeumaierSum::new();
    let mut magnitudes = Vec::new();
    let mut terms_used = 0u64;

    for s in 0..=opts.max_total_order {
        let indices = shell_indices(phi, &active, s);
        let terms = compute_shell(&indices, exec, &weight)?;
        let mut magnitude = 0.0;
        for t in terms {
            let t = scale * t;
            acc.add(t);
            magnitude += t.abs();
        }
        terms_used += indices.len() as u64;
        magnitudes.push(magnitude);

        if magnitudes.len() >= window {
            let tol = opts.tolerance(acc.value());
            let recent = &magnitudes[magnitudes.len() - window..];
            if recent.iter().all(|&m| m <= tol) {
                let tail = recent.iter().copied().fold(0.0, f64::max);
                return Ok(ShellSum {
                    value: acc.value(),
                    shell_magnitudes: magnitudes,
                    terms_used,
                    converged: true,
                    tail_estimate: tail,
                });
            }
        }
    }
    let tail = magnitudes[magnitudes.len().saturating_sub(window)..]
        .iter()
        .copied()
        .fold(0.0, |m: f64, v| if v.is_nan() { f64::NAN } else { m.max(v) });
    Ok(ShellSum {
        value: acc.value(),
        shell_magnitudes: magnitudes,
        terms_used,
        converged: false,
        tail_estimate: tail,
    })
}

fn compute_shell<W>(indices: &[Vec<u32>], exec: Execution, weight: &W) -> Result<Vec<f64>>
where
    W: Fn(&[u32]) -> Result<f64> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    let exec = if indices.len() < PARALLEL_SHELL_THRESHOLD {
        Execution::Sequential
    } else {
        exec
    };
    ordered_map(indices, exec, |idx| weight(idx))
        .into_iter()
        .collect()
}

/// Evaluates a series with the default [`Execution`].
pub fn evaluate(series: &HornSeries, opts: &EvalOptions) -> Result<EvalResult> {
    evaluate_with(series, opts, Execution::default())
}

pub fn evaluate_with(
    series: &HornSeries,
    opts: &EvalOptions,
    exec: Execution,
) -> Result<EvalResult> {
    series.check()?;
    let scale = prefactor_value(series)?;
    let sum = sum_shells(series, scale, opts, exec, |idx| term_value(series, idx))?;
    Ok(EvalResult {
        value: sum.value,
        tail_estimate: sum.tail_estimate,
        shells_used: sum.shell_magnitudes.len() as u32,
        terms_used: sum.terms_used,
        converged: sum.converged,
    })
}

/// Sum of member evaluations. Errors carry the failing member's position.
pub fn evaluate_expansion(exp: &DerivativeExpansion, opts: &EvalOptions) -> Result<EvalResult> {
    evaluate_expansion_with(exp, opts, Execution::default())
}

pub fn evaluate_expansion_with(
    exp: &DerivativeExpansion,
    opts: &EvalOptions,
    exec: Execution,
) -> Result<EvalResult> {
    opts.check()?;
    let results = ordered_map(&exp.members, exec, |m| evaluate_with(m, opts, exec));
    let mut value = NeumaierSum::new();
    let mut out = EvalResult {
        value: 0.0,
        tail_estimate: 0.0,
        shells_used: 0,
        terms_used: 0,
        converged: true,
    };
    for (index, r) in results.into_iter().enumerate() {
        let r = r.map_err(|e| HornError::Member {
            index,
            source: Box::new(e),
        })?;
        value.add(r.value);
        out.tail_estimate += r.tail_estimate;
        out.shells_used = out.shells_used.max(r.shells_used);
        out.terms_used += r.terms_used;
        out.converged &= r.converged;
    }
    out.value = value.value();
    Ok(out)
}

/// Empirical ratio test: true when the series met its tolerance, or when
/// the last `min_shells` shell magnitudes decrease strictly (zero shells
/// allowed). A heuristic, not Horn's convergence region.
pub fn converges_at(series: &HornSeries, opts: &EvalOptions) -> bool {
    converges_at_with(series, opts, Execution::default())
}

pub fn converges_at_with(series: &HornSeries, opts: &EvalOptions, exec: Execution) -> bool {
    if series.check().is_err() {
        return false;
    }
    let sum = match sum_shells(series, 1.0, opts, exec, |idx| term_value(series, idx)) {
        Ok(s) => s,
        Err(_) => return false,
    };
    if sum.converged {
        return true;
    }
    shells_decrease(&sum.shell_magnitudes, opts.min_shells as usize)
}

pub(crate) fn shells_decrease(magnitudes: &[f64], window: usize) -> bool {
    if magnitudes.len() < window.max(2) {
        return false;
    }
    let recent = &magnitudes[magnitudes.len() - window.max(2)..];
    if recent.iter().any(|m| !m.is_finite()) {
        return false;
    }
    let nonzero: Vec<f64> = recent.iter().copied().filter(|&m| m > 0.0).collect();
    nonzero.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Parameter, PochhammerFactor};

    fn pfq(upper: &[f64], lower: &[f64], x: f64) -> HornSeries {
        let mut params = Vec::new();
        let mut factors = Vec::new();
        for (i, &a) in upper.iter().enumerate() {
            let name = format!("a{i}");
            factors.push(PochhammerFactor::upper(&name, vec![1]));
            params.push(Parameter::new(name, a));
        }
        for (i, &b) in lower.iter().enumerate() {
            let name = format!("b{i}");
            factors.push(PochhammerFactor::lower(&name, vec![1]));
            params.push(Parameter::new(name, b));
        }
        HornSeries::new(vec![x], params, factors, vec![])
    }

    fn h3(a: f64, b: f64, c: f64, x: f64, y: f64) -> HornSeries {
        HornSeries::new(
            vec![x, y],
            vec![
                Parameter::new("a", a),
                Parameter::new("b", b),
                Parameter::new("c", c),
            ],
            vec![
                PochhammerFactor::upper("a", vec![2, 1]),
                PochhammerFactor::upper("b", vec![0, 1]),
                PochhammerFactor::lower("c", vec![1, 1]),
            ],
            vec![],
        )
    }

    #[test]
    fn term_values() {
        let g = pfq(&[1.0, 1.0], &[2.0], 0.5);
        assert!((term_value(&g, &[2]).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(term_value(&g, &[0]).unwrap(), 1.0);
        let h = h3(1.0, 1.0, 1.0, 0.1, 0.1);
        assert!((term_value(&h, &[1, 1]).unwrap() - 0.03).abs() < 1e-15);
        assert_eq!(term_value(&h, &[0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn gauss_log_closed_form() {
        let r = evaluate(&pfq(&[1.0, 1.0], &[2.0], 0.5), &EvalOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.value - 2.0 * 2f64.ln()).abs() < 1e-11);
        assert!(r.tail_estimate <= 1e-12 * r.value.abs());
    }

    #[test]
    fn all_variables_zero() {
        let mut s = h3(0.3, 0.4, 1.2, 0.0, 0.0);
        let r = evaluate(&s, &EvalOptions::default()).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.converged);
        s = HornSeries::new(
            s.variables().to_vec(),
            s.parameters().to_vec(),
            s.factors().to_vec(),
            vec![PrefactorAtom::integer(3)],
        );
        assert_eq!(evaluate(&s, &EvalOptions::default()).unwrap().value, 3.0);
    }

    #[test]
    fn exponential_series() {
        let r = evaluate(&pfq(&[], &[], 0.7), &EvalOptions::default()).unwrap();
        assert!((r.value - 0.7f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn shells_are_lexicographic() {
        let s = shell_indices(3, &[0, 1, 2], 2);
        let expected: Vec<Vec<u32>> = vec![
            vec![0, 0, 2],
            vec![0, 1, 1],
            vec![0, 2, 0],
            vec![1, 0, 1],
            vec![1, 1, 0],
            vec![2, 0, 0],
        ];
        assert_eq!(s, expected);
        assert_eq!(shell_indices(3, &[0, 2], 1), vec![vec![0, 0, 1], vec![1, 0, 0]]);
        assert_eq!(shell_indices(2, &[], 0), vec![vec![0, 0]]);
        assert!(shell_indices(2, &[], 3).is_empty());
    }

    #[test]
    fn divergent_series_not_converged() {
        let s = pfq(&[1.0, 1.0], &[2.0], 1.5);
        let r = evaluate(&s, &EvalOptions::default()).unwrap();
        assert!(!r.converged);
        assert!(r.require_converged().is_err());
        assert!(!converges_at(&s, &EvalOptions::default()));
        assert!(converges_at(&pfq(&[1.0, 1.0], &[2.0], 0.5), &EvalOptions::default()));
    }

    #[test]
    fn sequential_and_parallel_bit_identical() {
        let s = h3(0.7, 0.9, 1.3, 0.08, 0.15);
        let opts = EvalOptions {
            max_total_order: 80,
            abs_tol: 1e-30,
            rel_tol: 1e-30,
            min_shells: 8,
        };
        let a = evaluate_with(&s, &opts, Execution::Sequential).unwrap();
        let b = evaluate_with(&s, &opts, Execution::Parallel).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn empty_and_singleton_expansions() {
        let opts = EvalOptions::default();
        let empty = evaluate_expansion(&DerivativeExpansion::default(), &opts).unwrap();
        assert_eq!(empty.value, 0.0);
        assert!(empty.converged);
        let g = pfq(&[0.5, 1.5], &[2.5], 0.3);
        let one = evaluate_expansion(&DerivativeExpansion::singleton(g.clone()), &opts).unwrap();
        assert_eq!(one.value, evaluate(&g, &opts).unwrap().value);
    }

    #[test]
    fn expansion_errors_name_the_member() {
        let bad = pfq(&[1.0], &[0.0], 0.3);
        let exp = DerivativeExpansion::new(vec![pfq(&[1.0], &[2.0], 0.3), bad]);
        match evaluate_expansion(&exp, &EvalOptions::default()) {
            Err(HornError::Member { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn options_are_checked() {
        let opts = EvalOptions {
            min_shells: 0,
            ..EvalOptions::default()
        };
        assert!(matches!(
            evaluate(&pfq(&[], &[], 0.1), &opts),
            Err(HornError::Options(_))
        ));
    }
}
