//! Exact complex-rational constants.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// An exact constant `re + im·i` with arbitrary-precision rational parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Number {
    pub re: BigRational,
    pub im: BigRational,
}

impl Number {
    pub fn zero() -> Self {
        Self::real(BigRational::zero())
    }

    pub fn one() -> Self {
        Self::real(BigRational::one())
    }

    pub fn i() -> Self {
        Number {
            re: BigRational::zero(),
            im: BigRational::one(),
        }
    }

    pub fn real(re: BigRational) -> Self {
        Number {
            re,
            im: BigRational::zero(),
        }
    }

    pub fn int(n: i64) -> Self {
        Self::real(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Self::real(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    /// Real and strictly negative.
    pub fn is_negative(&self) -> bool {
        self.im.is_zero() && self.re.is_negative()
    }

    /// Sign used to normalise leading coefficients: the sign of the real part,
    /// or of the imaginary part for pure imaginaries.
    pub fn leading_sign_negative(&self) -> bool {
        if self.re.is_zero() {
            self.im.is_negative()
        } else {
            self.re.is_negative()
        }
    }

    pub fn as_integer(&self) -> Option<BigInt> {
        if self.is_real() && self.re.is_integer() {
            Some(self.re.to_integer())
        } else {
            None
        }
    }

    pub fn add(&self, o: &Number) -> Number {
        Number {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    pub fn sub(&self, o: &Number) -> Number {
        Number {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }

    pub fn mul(&self, o: &Number) -> Number {
        Number {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }

    pub fn neg(&self) -> Number {
        Number {
            re: -&self.re,
            im: -&self.im,
        }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self) -> Option<Number> {
        if self.is_zero() {
            return None;
        }
        let n = &self.re * &self.re + &self.im * &self.im;
        Some(Number {
            re: &self.re / &n,
            im: -&self.im / &n,
        })
    }

    pub fn div(&self, o: &Number) -> Option<Number> {
        o.inv().map(|inv| self.mul(&inv))
    }

    /// Integer power; `None` when raising zero to a negative power.
    pub fn powi(&self, n: &BigInt) -> Option<Number> {
        let mut base = if n.is_negative() {
            self.inv()?
        } else {
            self.clone()
        };
        let mut e = n.abs();
        let mut acc = Number::one();
        let two = BigInt::from(2);
        while !e.is_zero() {
            if e.is_odd() {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e = e.div_floor(&two);
        }
        Some(acc)
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }

    /// Exact rational from a finite decimal literal such as `0.125`.
    pub fn from_decimal(text: &str) -> Option<Number> {
        let (int_part, frac_part) = match text.split_once('.') {
            Some((a, b)) => (a, b),
            None => (text, ""),
        };
        let digits = format!("{int_part}{frac_part}");
        let num: BigInt = digits.parse().ok()?;
        let den = num_traits::pow(BigInt::from(10), frac_part.len());
        Some(Number::real(BigRational::new(num, den)))
    }

    pub fn total_cmp(&self, o: &Number) -> Ordering {
        self.re.cmp(&o.re).then_with(|| self.im.cmp(&o.im))
    }
}

/// Exact `q`-th root of a non-negative rational, if it exists.
pub fn rational_root(r: &BigRational, q: u32) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().nth_root(q);
    let d = r.denom().nth_root(q);
    if num_traits::pow(n.clone(), q as usize) == *r.numer()
        && num_traits::pow(d.clone(), q as usize) == *r.denom()
    {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

fn fmt_rational(r: &BigRational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            return fmt_rational(&self.re, f);
        }
        if self.re.is_zero() {
            if self.im.is_one() {
                return write!(f, "i");
            }
            if (-&self.im).is_one() {
                return write!(f, "-i");
            }
            fmt_rational(&self.im, f)?;
            return write!(f, "*i");
        }
        fmt_rational(&self.re, f)?;
        if self.im.is_negative() {
            write!(f, " - ")?;
        } else {
            write!(f, " + ")?;
        }
        let a = self.im.abs();
        if a.is_one() {
            write!(f, "i")
        } else {
            fmt_rational(&a, f)?;
            write!(f, "*i")
        }
    }
}
