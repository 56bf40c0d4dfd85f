//! Scalar number formats and the arithmetic used to emulate them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScalarFormat {
    Float64,
    Float32,
    /// Two's-complement fixed point; `int_bits` includes the sign bit.
    Fixed {
        width_bits: u32,
        int_bits: u32,
        frac_bits: u32,
    },
    /// Reduced-precision binary float with a hidden leading bit.
    CustomFloat {
        exp_bits: u32,
        mantissa_bits: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("fixed width {width} must equal int_bits {int} + frac_bits {frac}")]
    WidthMismatch { width: u32, int: u32, frac: u32 },
    #[error("fixed width {0} not in {{8, 16, 32, 64}}")]
    UnsupportedWidth(u32),
    #[error("fixed int_bits must be at least 1 (sign bit)")]
    NoSignBit,
    #[error("custom float with {0} exponent and {1} mantissa bits cannot be emulated (need 2..=11 and 1..=52)")]
    UnsupportedFloat(u32, u32),
    #[error("unknown scalar format '{0}'")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("fixed-point overflow")]
    Overflow,
    #[error("value is not finite")]
    NotFinite,
}

impl ScalarFormat {
    pub fn fixed(width_bits: u32, int_bits: u32, frac_bits: u32) -> Result<Self, FormatError> {
        let f = ScalarFormat::Fixed { width_bits, int_bits, frac_bits };
        f.validate()?;
        Ok(f)
    }

    pub fn custom(exp_bits: u32, mantissa_bits: u32) -> Result<Self, FormatError> {
        let f = ScalarFormat::CustomFloat { exp_bits, mantissa_bits };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        match *self {
            ScalarFormat::Fixed { width_bits, int_bits, frac_bits } => {
                if int_bits < 1 {
                    return Err(FormatError::NoSignBit);
                }
                if width_bits != int_bits + frac_bits {
                    return Err(FormatError::WidthMismatch { width: width_bits, int: int_bits, frac: frac_bits });
                }
                if ![8, 16, 32, 64].contains(&width_bits) {
                    return Err(FormatError::UnsupportedWidth(width_bits));
                }
                Ok(())
            }
            ScalarFormat::CustomFloat { exp_bits, mantissa_bits } => {
                if !(2..=11).contains(&exp_bits) || !(1..=52).contains(&mantissa_bits) {
                    return Err(FormatError::UnsupportedFloat(exp_bits, mantissa_bits));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn width_bits(&self) -> u32 {
        match *self {
            ScalarFormat::Float64 => 64,
            ScalarFormat::Float32 => 32,
            ScalarFormat::Fixed { width_bits, .. } => width_bits,
            ScalarFormat::CustomFloat { exp_bits, mantissa_bits } => 1 + exp_bits + mantissa_bits,
        }
    }

    /// Bytes occupied in host memory and on the bus (width rounded up to a byte).
    pub fn bytes(&self) -> usize {
        self.width_bits().div_ceil(8) as usize
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, ScalarFormat::Fixed { .. })
    }

    /// Round `v` to the nearest representable value.
    pub fn quantize(&self, v: f64) -> Result<f64, ArithError> {
        match *self {
            ScalarFormat::Fixed { .. } => {
                let a = FixedArith::new(*self);
                Ok(a.decode(a.encode(v)?))
            }
            _ => FloatArith::new(*self).encode(v),
        }
    }
}

impl fmt::Display for ScalarFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ScalarFormat::Float64 => write!(f, "f64"),
            ScalarFormat::Float32 => write!(f, "f32"),
            ScalarFormat::Fixed { width_bits, int_bits, frac_bits } => {
                write!(f, "fixed({width_bits},{int_bits},{frac_bits})")
            }
            ScalarFormat::CustomFloat { exp_bits, mantissa_bits } => write!(f, "float({exp_bits},{mantissa_bits})"),
        }
    }
}

impl FromStr for ScalarFormat {
    type Err = FormatError;

    /// Accepts `f64`, `f32`, `fixed(w,i,f)` and `float(e,m)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        match t.as_str() {
            "f64" | "float64" | "double" => return Ok(ScalarFormat::Float64),
            "f32" | "float32" | "float" => return Ok(ScalarFormat::Float32),
            _ => {}
        }
        let unknown = || FormatError::Unknown(s.to_string());
        let (head, rest) = t.split_once('(').ok_or_else(unknown)?;
        let args: Vec<u32> = rest
            .strip_suffix(')')
            .ok_or_else(unknown)?
            .split(',')
            .map(|a| a.parse::<u32>().map_err(|_| unknown()))
            .collect::<Result<_, _>>()?;
        match (head, args.as_slice()) {
            ("fixed", [w, i, f]) => ScalarFormat::fixed(*w, *i, *f),
            ("fixed", [w, i]) if i <= w => ScalarFormat::fixed(*w, *i, w - i),
            ("float", [e, m]) => ScalarFormat::custom(*e, *m),
            _ => Err(unknown()),
        }
    }
}

/// Value semantics of a scalar format on an internal word type.
pub trait Arithmetic {
    type Word: Copy + PartialEq + fmt::Debug;

    fn zero(&self) -> Self::Word;
    fn encode(&self, v: f64) -> Result<Self::Word, ArithError>;
    fn decode(&self, w: Self::Word) -> f64;
    fn mul(&self, a: Self::Word, b: Self::Word) -> Result<Self::Word, ArithError>;
    fn add(&self, a: Self::Word, b: Self::Word) -> Result<Self::Word, ArithError>;
}

/// Floating formats, evaluated in f64 and rounded after every operation.
#[derive(Debug, Clone, Copy)]
pub struct FloatArith {
    format: ScalarFormat,
}

impl FloatArith {
    pub fn new(format: ScalarFormat) -> Self {
        assert!(!format.is_fixed(), "FloatArith on fixed format");
        FloatArith { format }
    }

    fn round(&self, v: f64) -> f64 {
        match self.format {
            ScalarFormat::Float32 => v as f32 as f64,
            ScalarFormat::CustomFloat { exp_bits, mantissa_bits } => round_custom(v, exp_bits, mantissa_bits),
            _ => v,
        }
    }
}

impl Arithmetic for FloatArith {
    type Word = f64;

    fn zero(&self) -> f64 {
        0.0
    }

    fn encode(&self, v: f64) -> Result<f64, ArithError> {
        if !v.is_finite() {
            return Err(ArithError::NotFinite);
        }
        Ok(self.round(v))
    }

    fn decode(&self, w: f64) -> f64 {
        w
    }

    fn mul(&self, a: f64, b: f64) -> Result<f64, ArithError> {
        Ok(self.round(a * b))
    }

    fn add(&self, a: f64, b: f64) -> Result<f64, ArithError> {
        Ok(self.round(a + b))
    }
}

/// Round to `mantissa_bits` fraction bits, flushing subnormals to zero and
/// overflowing to infinity.
pub fn round_custom(v: f64, exp_bits: u32, mantissa_bits: u32) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let bias = (1i32 << (exp_bits - 1)) - 1;
    let exponent = |x: f64| ((x.to_bits() >> 52) & 0x7ff) as i32 - 1023;
    let e = exponent(v);
    let scale = (mantissa_bits as i32) - e;
    let r = (v * 2f64.powi(scale)).round_ties_even() * 2f64.powi(-scale);
    let e = exponent(r);
    if e < 1 - bias {
        0.0f64.copysign(v)
    } else if e > bias {
        f64::INFINITY.copysign(v)
    } else {
        r
    }
}

/// Two's-complement fixed point on i64 words, products formed in i128 and
/// rounded once (half to even). Overflow is an error rather than saturation.
#[derive(Debug, Clone, Copy)]
pub struct FixedArith {
    width: u32,
    frac: u32,
}

impl FixedArith {
    pub fn new(format: ScalarFormat) -> Self {
        match format {
            ScalarFormat::Fixed { width_bits, frac_bits, .. } => FixedArith { width: width_bits, frac: frac_bits },
            _ => panic!("FixedArith on non-fixed format"),
        }
    }

    fn check(&self, w: i128) -> Result<i64, ArithError> {
        let lim = 1i128 << (self.width - 1);
        if w < -lim || w >= lim {
            Err(ArithError::Overflow)
        } else {
            Ok(w as i64)
        }
    }

    /// Largest magnitude strictly representable, exclusive.
    pub fn range(&self) -> f64 {
        2f64.powi((self.width - self.frac) as i32 - 1)
    }
}

fn shift_round_half_even(x: i128, shift: u32) -> i128 {
    if shift == 0 {
        return x;
    }
    let q = x >> shift;
    let rem = x - (q << shift);
    let half = 1i128 << (shift - 1);
    if rem > half || (rem == half && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

impl Arithmetic for FixedArith {
    type Word = i64;

    fn zero(&self) -> i64 {
        0
    }

    fn encode(&self, v: f64) -> Result<i64, ArithError> {
        if !v.is_finite() {
            return Err(ArithError::NotFinite);
        }
        let scaled = (v * 2f64.powi(self.frac as i32)).round_ties_even();
        if scaled.abs() >= 2f64.powi(self.width as i32) {
            return Err(ArithError::Overflow);
        }
        self.check(scaled as i128)
    }

    fn decode(&self, w: i64) -> f64 {
        w as f64 * 2f64.powi(-(self.frac as i32))
    }

    fn mul(&self, a: i64, b: i64) -> Result<i64, ArithError> {
        self.check(shift_round_half_even(a as i128 * b as i128, self.frac))
    }

    fn add(&self, a: i64, b: i64) -> Result<i64, ArithError> {
        self.check(a as i128 + b as i128)
    }
}

/// Run `$body` with `$a` bound to the arithmetic of `$fmt`.
macro_rules! with_arith {
    ($fmt:expr, |$a:ident| $body:expr) => {
        match $fmt {
            f @ $crate::tensor_ir::ScalarFormat::Fixed { .. } => {
                let $a = $crate::tensor_ir::FixedArith::new(f);
                $body
            }
            f => {
                let $a = $crate::tensor_ir::FloatArith::new(f);
                $body
            }
        }
    };
}
pub(crate) use with_arith;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in ["f64", "f32", "fixed(64,24,40)", "fixed(32,8,24)", "float(8,23)"] {
            let f: ScalarFormat = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert_eq!("fixed(32,8)".parse::<ScalarFormat>().unwrap(), ScalarFormat::fixed(32, 8, 24).unwrap());
        assert!("fixed(48,24,24)".parse::<ScalarFormat>().is_err());
        assert!("fixed(32,0,32)".parse::<ScalarFormat>().is_err());
        assert!("fixed(32,8,20)".parse::<ScalarFormat>().is_err());
        assert!("bf16".parse::<ScalarFormat>().is_err());
    }

    #[test]
    fn widths() {
        assert_eq!(ScalarFormat::Float64.width_bits(), 64);
        assert_eq!(ScalarFormat::custom(5, 10).unwrap().width_bits(), 16);
        assert_eq!(ScalarFormat::fixed(32, 8, 24).unwrap().bytes(), 4);
    }

    #[test]
    fn fixed_rounding_is_half_even() {
        let a = FixedArith::new(ScalarFormat::fixed(8, 4, 4).unwrap());
        // 1/32 is half an ulp: ties to even (0), 3/32 ties to 2/32.
        assert_eq!(a.encode(1.0 / 32.0).unwrap(), 0);
        assert_eq!(a.encode(3.0 / 32.0).unwrap(), 2);
        assert_eq!(a.encode(-3.0 / 32.0).unwrap(), -2);
        // 0.25 * 0.125 = 1/32 -> 0; 0.75 * 0.125 = 3/32 -> 2/16
        let q = a.encode(0.125).unwrap();
        assert_eq!(a.mul(a.encode(0.25).unwrap(), q).unwrap(), 0);
        assert_eq!(a.mul(a.encode(0.75).unwrap(), q).unwrap(), 2);
    }

    #[test]
    fn fixed_overflow_is_an_error() {
        let a = FixedArith::new(ScalarFormat::fixed(8, 4, 4).unwrap());
        assert_eq!(a.encode(8.0), Err(ArithError::Overflow));
        assert!(a.encode(7.9375).is_ok());
        let x = a.encode(7.0).unwrap();
        assert_eq!(a.add(x, x), Err(ArithError::Overflow));
        assert_eq!(a.mul(x, x), Err(ArithError::Overflow));
        let wide = FixedArith::new(ScalarFormat::fixed(64, 24, 40).unwrap());
        let big = wide.encode(4_000_000.0).unwrap();
        assert_eq!(wide.mul(big, big), Err(ArithError::Overflow));
    }

    #[test]
    fn custom_float_matches_f32_in_range() {
        for v in [1.0 / 3.0, -2.5e-3, 12345.678, 1e-20] {
            assert_eq!(round_custom(v, 8, 23), v as f32 as f64);
        }
        assert_eq!(round_custom(1e-40, 8, 23), 0.0);
        assert_eq!(round_custom(1e39, 8, 23), f64::INFINITY);
        assert_eq!(round_custom(1.0 + 1.0 / 1024.0, 5, 10), 1.0 + 1.0 / 1024.0);
        assert_eq!(round_custom(1.0 + 1.0 / 4096.0, 5, 10), 1.0);
    }
}
