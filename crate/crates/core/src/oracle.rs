//! Derivative oracles independent of the derivative engine: the term-wise
//! digamma series and central finite differences.

use serde::Serialize;

use crate::derivative::differentiate;
use crate::error::{HornError, Result};
use crate::eval::{
    evaluate, evaluate_expansion, prefactor_value, sum_shells, term_value, EvalOptions,
    EvalResult, Execution,
};
use crate::model::{HornSeries, Placement, PrefactorAtom};
use crate::special::digamma;

/// `∂F/∂param` summed term by term with `d(b)_N/db = (b)_N [ψ(b+N) − ψ(b)]`,
/// truncated exactly like [`evaluate`].
pub fn digamma_derivative(
    series: &HornSeries,
    param: &str,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    digamma_derivative_with(series, param, opts, Execution::default())
}

pub fn digamma_derivative_with(
    series: &HornSeries,
    param: &str,
    opts: &EvalOptions,
    exec: Execution,
) -> Result<EvalResult> {
    series.check()?;
    let p = series.param_value(param)?;
    let scale = prefactor_value(series)?;

    // logarithmic derivative of the prefactor
    let mut log_prefactor = 0.0;
    for atom in series.prefactor() {
        match atom {
            PrefactorAtom::ParamLinear {
                param: name,
                offset,
                exponent,
            } if name == param => log_prefactor += *exponent as f64 / (p + *offset as f64),
            PrefactorAtom::GammaRatio {
                param: name,
                num_offset,
                den_offset,
            } if name == param => {
                log_prefactor += digamma(p + *num_offset as f64)? - digamma(p + *den_offset as f64)?
            }
            _ => {}
        }
    }

    let occurrences: Vec<_> = series
        .factors()
        .iter()
        .filter(|f| f.depends_on(param))
        .map(|f| {
            let sign = match f.placement {
                Placement::Numerator => 1.0,
                Placement::Denominator => -1.0,
            };
            (f, p + f.shift as f64, sign)
        })
        .collect();

    let sum = sum_shells(series, scale, opts, exec, |idx| {
        let t = term_value(series, idx)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let mut w = log_prefactor;
        for (f, base, sign) in &occurrences {
            let n = f.index(idx);
            if n != 0 {
                w += sign * (digamma(base + n as f64)? - digamma(*base)?);
            }
        }
        Ok(t * w)
    })?;

    Ok(EvalResult {
        value: sum.value,
        tail_estimate: sum.tail_estimate,
        shells_used: sum.shell_magnitudes.len() as u32,
        terms_used: sum.terms_used,
        converged: sum.converged,
    })
}

/// `(F(p+h) − F(p−h)) / 2h`.
pub fn central_difference(
    series: &HornSeries,
    param: &str,
    h: f64,
    opts: &EvalOptions,
) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(HornError::Options(format!("step h = {h} must be positive")));
    }
    let p = series.param_value(param)?;
    let plus = evaluate(&series.with_parameter(param, p + h)?, opts)?;
    let minus = evaluate(&series.with_parameter(param, p - h)?, opts)?;
    Ok((plus.value - minus.value) / (2.0 * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Engine vs digamma oracle, relative to `max(1, |value|)`.
    pub oracle_rel: f64,
    /// Engine vs finite difference, absolute.
    pub finite_difference_abs: f64,
    pub h: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            oracle_rel: 1e-9,
            finite_difference_abs: 1e-6,
            h: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodValue {
    pub value: Option<f64>,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MethodValue {
    fn from_result(r: Result<EvalResult>) -> Self {
        match r {
            Ok(r) => MethodValue {
                value: Some(r.value),
                converged: r.converged,
                error: None,
            },
            Err(e) => MethodValue {
                value: None,
                converged: false,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotConverged,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviations {
    pub engine_oracle: Option<f64>,
    pub engine_finite_difference: Option<f64>,
    pub oracle_finite_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub param: String,
    pub engine: MethodValue,
    pub members: Option<usize>,
    pub oracle: MethodValue,
    pub finite_difference: MethodValue,
    pub deviations: Deviations,
    pub tolerances: Tolerances,
    pub status: Status,
}

/// Runs the engine and both oracles and compares them. Never fails; problems
/// are reported in the result.
pub fn verify(
    series: &HornSeries,
    param: &str,
    tol: &Tolerances,
    opts: &EvalOptions,
) -> VerifyReport {
    let expansion = differentiate(series, param);
    let members = expansion.as_ref().ok().map(|e| e.len());
    let engine = MethodValue::from_result(expansion.and_then(|e| evaluate_expansion(&e, opts)));
    let oracle = MethodValue::from_result(digamma_derivative(series, param, opts));
    let finite_difference = match central_difference(series, param, tol.h, opts) {
        Ok(v) => {
            let converged = [tol.h, -tol.h].iter().all(|dh| {
                series
                    .param_value(param)
                    .and_then(|p| series.with_parameter(param, p + dh))
                    .and_then(|s| evaluate(&s, opts))
                    .map(|r| r.converged)
                    .unwrap_or(false)
            });
            MethodValue {
                value: Some(v),
                converged,
                error: None,
            }
        }
        Err(e) => MethodValue {
            value: None,
            converged: false,
            error: Some(e.to_string()),
        },
    };

    let diff = |a: &MethodValue, b: &MethodValue| Some((a.value? - b.value?).abs());
    let deviations = Deviations {
        engine_oracle: diff(&engine, &oracle),
        engine_finite_difference: diff(&engine, &finite_difference),
        oracle_finite_difference: diff(&oracle, &finite_difference),
    };

    let status = if [&engine, &oracle, &finite_difference]
        .iter()
        .any(|m| m.error.is_some())
    {
        Status::Error
    } else if !(engine.converged && oracle.converged && finite_difference.converged) {
        Status::NotConverged
    } else {
        let scale = engine.value.unwrap_or(0.0).abs().max(1.0);
        let ok_oracle = deviations
            .engine_oracle
            .is_some_and(|d| d <= tol.oracle_rel * scale);
        let ok_fd = deviations
            .engine_finite_difference
            .is_some_and(|d| d <= tol.finite_difference_abs);
        if ok_oracle && ok_fd {
            Status::Pass
        } else {
            Status::Fail
        }
    };

    VerifyReport {
        param: param.to_owned(),
        engine,
        members,
        oracle,
        finite_difference,
        deviations,
        tolerances: *tol,
        status,
    }
}
