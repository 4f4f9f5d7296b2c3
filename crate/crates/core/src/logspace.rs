//! Log-domain number carrier and streaming log-sum-exp accumulation.

use std::cmp::Ordering;

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        }
    }
}

impl Serialize for Sign {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.as_i8())
    }
}

/// A real number stored as `sign * exp(log_magnitude)`.
///
/// When `sign` is `Zero` the magnitude is meaningless and kept at `-inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogValue {
    pub log_magnitude: f64,
    pub sign: Sign,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        log_magnitude: f64::NEG_INFINITY,
        sign: Sign::Zero,
    };

    /// A positive value given by its natural log. `-inf` maps to zero.
    pub fn from_ln(ln: f64) -> Self {
        if ln == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                log_magnitude: ln,
                sign: Sign::Positive,
            }
        }
    }

    pub fn from_signed_ln(sign: Sign, ln: f64) -> Self {
        match sign {
            Sign::Zero => Self::ZERO,
            _ if ln == f64::NEG_INFINITY => Self::ZERO,
            _ => Self {
                log_magnitude: ln,
                sign,
            },
        }
    }

    pub fn from_f64(x: f64) -> Self {
        match x.partial_cmp(&0.0) {
            Some(Ordering::Greater) => Self::from_signed_ln(Sign::Positive, x.ln()),
            Some(Ordering::Less) => Self::from_signed_ln(Sign::Negative, (-x).ln()),
            _ => Self::ZERO,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == Sign::Zero
    }

    /// Natural log of a nonnegative value (`-inf` for zero, NaN if negative).
    pub fn ln(&self) -> f64 {
        match self.sign {
            Sign::Positive => self.log_magnitude,
            Sign::Zero => f64::NEG_INFINITY,
            Sign::Negative => f64::NAN,
        }
    }

    /// Linear value; may overflow to `+-inf`.
    pub fn to_f64(&self) -> f64 {
        match self.sign {
            Sign::Positive => self.log_magnitude.exp(),
            Sign::Negative => -self.log_magnitude.exp(),
            Sign::Zero => 0.0,
        }
    }

    /// Linear value when it is representable as a finite double.
    pub fn finite_linear(&self) -> Option<f64> {
        Some(self.to_f64()).filter(|x| x.is_finite())
    }

    /// Multiplies by `exp(ln_factor)`.
    pub fn mul_ln(self, ln_factor: f64) -> Self {
        Self::from_signed_ln(self.sign, self.log_magnitude + ln_factor)
    }

    /// Total order consistent with the real values represented.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        let rank = |s: Sign| s.as_i8();
        match rank(self.sign).cmp(&rank(other.sign)) {
            Ordering::Equal => match self.sign {
                Sign::Positive => self.log_magnitude.total_cmp(&other.log_magnitude),
                Sign::Negative => other.log_magnitude.total_cmp(&self.log_magnitude),
                Sign::Zero => Ordering::Equal,
            },
            ord => ord,
        }
    }

    /// `sign(x) * ln(1 + |x|)`: finite, monotone in `x` and invertible, so it
    /// can stand in for a signed log in tabular reports.
    pub fn signed_log1p(&self) -> f64 {
        let mag = log_add_exp(self.log_magnitude, 0.0);
        match self.sign {
            Sign::Positive => mag,
            Sign::Negative => -mag,
            Sign::Zero => 0.0,
        }
    }
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum exp(x_i))`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut acc = LogSumExp::default();
    xs.iter().for_each(|&x| acc.push(x));
    acc.ln_sum()
}

/// Streaming `ln(sum exp(x_i))` that rescales whenever a new maximum arrives.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSumExp {
    #[inline]
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.scaled += (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn ln_sum(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// `ln(n!)`, summed term by term so it never overflows.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}
