//! Scalar special functions: signed log-gamma, digamma and Pochhammer symbols
//! for arbitrary integer shifts.

use std::f64::consts::PI;
use std::ops::{Div, Mul};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

/// Default absolute distance to a nonpositive integer that counts as a pole.
pub const DEFAULT_POLE_TOLERANCE: f64 = 1e-12;

/// Shifts up to this size are accumulated as direct products.
const DIRECT_PRODUCT_LIMIT: u64 = 64;

static POLE_TOLERANCE_BITS: AtomicU64 = AtomicU64::new(0x3D71_9799_812D_EA11); // 1e-12

/// Current pole-detection tolerance.
pub fn pole_tolerance() -> f64 {
    f64::from_bits(POLE_TOLERANCE_BITS.load(Ordering::Relaxed))
}

/// Replace the process-wide pole-detection tolerance. Non-finite or negative
/// values are ignored.
pub fn set_pole_tolerance(tol: f64) {
    if tol.is_finite() && tol >= 0.0 {
        POLE_TOLERANCE_BITS.store(tol.to_bits(), Ordering::Relaxed);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpecialError {
    #[error("pole of {function} at {at}")]
    Pole { function: &'static str, at: f64 },
}

/// Returns the integer `z` rounds to when it lies within the pole tolerance
/// of a nonpositive integer.
pub fn nonpositive_integer(z: f64) -> Option<i64> {
    let r = z.round();
    if r <= 0.0 && (z - r).abs() <= pole_tolerance() {
        Some(r as i64)
    } else {
        None
    }
}

/// Sign of a real quantity carried next to its log-magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Negative => -1.0,
            Sign::Zero => 0.0,
            Sign::Positive => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        self.as_f64() as i8
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        match (self, rhs) {
            (Sign::Zero, _) | (_, Sign::Zero) => Sign::Zero,
            (a, b) if a == b => Sign::Positive,
            _ => Sign::Negative,
        }
    }
}

/// A real number stored as `sign · exp(log_abs)`. Zero carries
/// `log_abs = -inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub log_abs: f64,
    pub sign: Sign,
}

impl SignedLog {
    pub const ONE: SignedLog = SignedLog {
        log_abs: 0.0,
        sign: Sign::Positive,
    };
    pub const ZERO: SignedLog = SignedLog {
        log_abs: f64::NEG_INFINITY,
        sign: Sign::Zero,
    };

    pub fn new(log_abs: f64, sign: Sign) -> SignedLog {
        if sign == Sign::Zero {
            SignedLog::ZERO
        } else {
            SignedLog { log_abs, sign }
        }
    }

    pub fn from_f64(x: f64) -> SignedLog {
        SignedLog::new(x.abs().ln(), Sign::of(x))
    }

    pub fn is_zero(&self) -> bool {
        self.sign == Sign::Zero
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn recip(self) -> Option<SignedLog> {
        if self.is_zero() {
            None
        } else {
            Some(SignedLog::new(-self.log_abs, self.sign))
        }
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            s => s.as_f64() * self.log_abs.exp(),
        }
    }
}

impl Mul for SignedLog {
    type Output = SignedLog;

    fn mul(self, rhs: SignedLog) -> SignedLog {
        SignedLog::new(self.log_abs + rhs.log_abs, self.sign * rhs.sign)
    }
}

impl Div for SignedLog {
    type Output = SignedLog;

    /// Panics on division by zero; callers check with [`SignedLog::recip`].
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: SignedLog) -> SignedLog {
        self * rhs.recip().expect("division by a zero SignedLog")
    }
}

/// `ln|Γ(z)|` together with the sign of `Γ(z)`.
pub fn log_gamma(z: f64) -> Result<SignedLog, SpecialError> {
    if z.is_nan() || nonpositive_integer(z).is_some() {
        return Err(SpecialError::Pole {
            function: "log_gamma",
            at: z,
        });
    }
    let (value, sign) = libm::lgamma_r(z);
    let sign = if sign < 0 {
        Sign::Negative
    } else {
        Sign::Positive
    };
    Ok(SignedLog::new(value, sign))
}

/// Coefficients B_{2k}/(2k) of the digamma asymptotic series, k = 1..8.
const DIGAMMA_ASYMPTOTIC: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
];

/// Digamma ψ(z) = Γ'(z)/Γ(z).
///
/// Negative arguments go through the reflection formula; positive ones are
/// pushed up to z ≥ 8 with ψ(z) = ψ(z+1) − 1/z before the asymptotic series.
pub fn digamma(z: f64) -> Result<f64, SpecialError> {
    if z.is_nan() || nonpositive_integer(z).is_some() {
        return Err(SpecialError::Pole {
            function: "digamma",
            at: z,
        });
    }
    if z < 0.0 {
        // ψ(z) = ψ(1 − z) − π cot(πz)
        let reflected = digamma(1.0 - z)?;
        return Ok(reflected - PI / (PI * z).tan());
    }
    let mut x = z;
    let mut shift = 0.0;
    while x < 8.0 {
        shift += 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut series = 0.0;
    let mut power = inv2;
    for c in DIGAMMA_ASYMPTOTIC {
        series += c * power;
        power *= inv2;
    }
    Ok(x.ln() - 0.5 / x - series - shift)
}

/// Rising factorial `(a)_n = Γ(a+n)/Γ(a)` for any integer `n`.
///
/// Negative shifts follow the gamma-ratio definition,
/// `(a)_{-k} = 1/((a-1)(a-2)…(a-k))`, and fail with a pole when that
/// product contains a zero.
pub fn pochhammer(a: f64, n: i64) -> Result<SignedLog, SpecialError> {
    if n >= 0 {
        Ok(rising(a, n as u64))
    } else {
        let k = n.unsigned_abs();
        // (a-1)(a-2)…(a-k) = (a-k)_k
        rising(a - k as f64, k)
            .recip()
            .ok_or(SpecialError::Pole {
                function: "pochhammer",
                at: a,
            })
    }
}

/// `1/(a)_n`, finite wherever the reciprocal is: a negative shift whose
/// product crosses zero gives an exact zero rather than a pole.
pub fn reciprocal_pochhammer(a: f64, n: i64) -> Result<SignedLog, SpecialError> {
    if n >= 0 {
        rising(a, n as u64).recip().ok_or(SpecialError::Pole {
            function: "reciprocal_pochhammer",
            at: a,
        })
    } else {
        let k = n.unsigned_abs();
        Ok(rising(a - k as f64, k))
    }
}

fn rising(a: f64, n: u64) -> SignedLog {
    if n == 0 {
        return SignedLog::ONE;
    }
    if let Some(m) = nonpositive_integer(a) {
        // the product a(a+1)…(a+n-1) reaches zero once n > -a
        if n > m.unsigned_abs() {
            return SignedLog::ZERO;
        }
    }
    if n <= DIRECT_PRODUCT_LIMIT {
        return direct_product(a, n);
    }
    let last = a + (n - 1) as f64;
    if last < 0.0 {
        // every factor is negative: (a)_n = (-1)^n (1-a-n)_n
        let flipped = rising(-last, n);
        let sign = if n.is_multiple_of(2) {
            Sign::Positive
        } else {
            Sign::Negative
        };
        return SignedLog::new(flipped.log_abs, flipped.sign * sign);
    }
    match (log_gamma(a + n as f64), log_gamma(a)) {
        (Ok(top), Ok(bottom)) => top / bottom,
        // a within tolerance of a pole but the product does not cross zero
        _ => direct_product(a, n),
    }
}

fn direct_product(a: f64, n: u64) -> SignedLog {
    let mut mantissa = 1.0f64;
    let mut log_acc = 0.0f64;
    for j in 0..n {
        let factor = a + j as f64;
        if factor == 0.0 {
            return SignedLog::ZERO;
        }
        mantissa *= factor;
        let m = mantissa.abs();
        if !(1e-150..=1e150).contains(&m) {
            log_acc += m.ln();
            mantissa = mantissa.signum();
        }
    }
    SignedLog::new(log_acc + mantissa.abs().ln(), Sign::of(mantissa))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn log_gamma_known_values() {
        let one = log_gamma(1.0).unwrap();
        assert_eq!(one.sign, Sign::Positive);
        assert!(one.log_abs.abs() < 1e-15);

        let half = log_gamma(0.5).unwrap();
        assert_eq!(half.sign, Sign::Positive);
        assert!(close(half.log_abs, 0.5 * PI.ln(), 1e-14));
        assert!(close(half.log_abs, 0.57236494292, 1e-11));
    }

    #[test]
    fn log_gamma_negative_half_matches_reflection() {
        // Γ(z)Γ(1−z) = π / sin(πz) with Γ(1.5) = √π / 2
        let gamma_three_halves = PI.sqrt() / 2.0;
        let expected = PI / ((-0.5 * PI).sin() * gamma_three_halves);
        let got = log_gamma(-0.5).unwrap();
        assert_eq!(got.sign, Sign::Negative);
        assert!(close(got.log_abs, expected.abs().ln(), 1e-13));
        assert!(close(got.log_abs, 1.26551212349, 1e-11));
    }

    #[test]
    fn log_gamma_poles() {
        for z in [0.0, -1.0, -7.0, -3.0 + 1e-13] {
            assert!(matches!(log_gamma(z), Err(SpecialError::Pole { .. })));
        }
        assert!(log_gamma(-3.0 + 1e-6).is_ok());
    }

    #[test]
    fn log_gamma_large_argument() {
        // Stirling with three correction terms is far below 1e-13 at 1e6
        let z = 1e6f64;
        let stirling = (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * z)
            - 1.0 / (360.0 * z.powi(3));
        let got = log_gamma(z).unwrap().log_abs;
        assert!((got - stirling).abs() / stirling < 1e-13);
    }

    #[test]
    fn digamma_known_values() {
        let euler = 0.577_215_664_901_532_9;
        assert!(close(digamma(1.0).unwrap(), -euler, 1e-14));
        assert!(close(digamma(1.0).unwrap(), -0.57721566490, 1e-10));
        assert!(close(
            digamma(0.5).unwrap(),
            -euler - 2.0 * 2f64.ln(),
            1e-14
        ));
        assert!(close(digamma(2.0).unwrap() - digamma(1.0).unwrap(), 1.0, 1e-14));
    }

    #[test]
    fn digamma_negative_and_poles() {
        // ψ(−0.5) = ψ(1.5) − π cot(−π/2) = ψ(1.5) = 2 − γ − 2 ln 2
        let expected = 2.0 - 0.577_215_664_901_532_9 - 2.0 * 2f64.ln();
        assert!(close(digamma(-0.5).unwrap(), expected, 1e-13));
        assert!(digamma(0.0).is_err());
        assert!(digamma(-4.0).is_err());
    }

    #[test]
    fn pochhammer_examples() {
        assert!(close(pochhammer(3.0, 4).unwrap().to_f64(), 360.0, 1e-15));
        for a in [-3.5, 0.0, 1.0, 17.25] {
            assert_eq!(pochhammer(a, 0).unwrap(), SignedLog::ONE);
        }
        assert!(close(pochhammer(2.5, -2).unwrap().to_f64(), 4.0 / 3.0, 1e-15));
        let zero = pochhammer(-2.0, 4).unwrap();
        assert!(zero.is_zero());
        assert_eq!(zero.to_f64(), 0.0);
    }

    #[test]
    fn pochhammer_negative_shift_poles() {
        // (3)_{-3} = 1/(2·1·0)
        assert!(pochhammer(3.0, -3).is_err());
        assert!(pochhammer(3.0, -2).is_ok());
        // nonpositive bases never meet a zero on the way down
        assert!(close(pochhammer(0.0, -2).unwrap().to_f64(), 0.5, 1e-15));
    }

    #[test]
    fn pochhammer_large_shift_agrees_with_product() {
        // the log-gamma path (|n| > 64) against a plain product
        for (a, n) in [(0.3, 90i64), (-10.5, 80), (-200.25, 70), (2.5, -80), (-95.5, 100)] {
            let got = pochhammer(a, n).unwrap();
            let mut log_abs = 0.0;
            let mut negative = false;
            if n >= 0 {
                for j in 0..n {
                    let f = a + j as f64;
                    log_abs += f.abs().ln();
                    negative ^= f < 0.0;
                }
            } else {
                for j in 1..=(-n) {
                    let f = a - j as f64;
                    log_abs -= f.abs().ln();
                    negative ^= f < 0.0;
                }
            }
            assert_eq!(got.sign == Sign::Negative, negative, "a={a} n={n}");
            assert!((got.log_abs - log_abs).abs() < 1e-11 * log_abs.abs().max(1.0));
        }
    }

    #[test]
    fn pochhammer_nonpositive_integer_long_run() {
        assert!(pochhammer(-100.0, 150).unwrap().is_zero());
        // all factors negative, product nonzero
        let p = pochhammer(-100.0, 80).unwrap();
        assert_eq!(p.sign, Sign::Positive);
        let expected: f64 = (21..=100).map(|j| (j as f64).ln()).sum();
        assert!((p.log_abs - expected).abs() < 1e-10);
    }

    #[test]
    fn reciprocal_pochhammer_zeroes_instead_of_poles() {
        assert!(reciprocal_pochhammer(3.0, -3).unwrap().is_zero());
        assert!(reciprocal_pochhammer(0.0, 2).is_err());
        let r = reciprocal_pochhammer(2.5, 3).unwrap().to_f64();
        assert!(close(r, 1.0 / (2.5 * 3.5 * 4.5), 1e-15));
        let r = reciprocal_pochhammer(2.5, -2).unwrap().to_f64();
        assert!(close(r, 0.75, 1e-15));
    }

    #[test]
    fn pole_tolerance_default() {
        assert_eq!(pole_tolerance(), DEFAULT_POLE_TOLERANCE);
    }

    #[test]
    fn signed_log_arithmetic() {
        let a = SignedLog::from_f64(-3.0);
        let b = SignedLog::from_f64(0.5);
        assert!(close((a * b).to_f64(), -1.5, 1e-15));
        assert!(close((a / b).to_f64(), -6.0, 1e-15));
        assert!((a * SignedLog::ZERO).is_zero());
        assert!(SignedLog::ZERO.recip().is_none());
    }
}
