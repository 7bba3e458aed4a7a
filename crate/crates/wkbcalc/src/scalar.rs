//! Exact scalars in the Gaussian rationals Q(i).
//!
//! Every coefficient in the calculus lives here. There is no floating
//! point anywhere: rational parts are `BigRational`, stored in lowest
//! terms with positive denominator (the representation `num-rational`
//! maintains on construction).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// `re + im*i` with exact rational parts.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar {
    re: BigRational,
    im: BigRational,
}

impl Scalar {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Scalar { re, im }
    }

    pub fn zero() -> Self {
        Scalar { re: BigRational::zero(), im: BigRational::zero() }
    }

    pub fn one() -> Self {
        Scalar { re: BigRational::one(), im: BigRational::zero() }
    }

    /// The imaginary unit.
    pub fn i() -> Self {
        Scalar { re: BigRational::zero(), im: BigRational::one() }
    }

    pub fn from_int(n: i64) -> Self {
        Scalar { re: BigRational::from_integer(BigInt::from(n)), im: BigRational::zero() }
    }

    /// `p/q`, panics on `q == 0`.
    pub fn from_ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        Scalar {
            re: BigRational::new(BigInt::from(p), BigInt::from(q)),
            im: BigRational::zero(),
        }
    }

    /// `(a + b*i)/q`.
    pub fn gaussian(a: i64, b: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        Scalar {
            re: BigRational::new(BigInt::from(a), BigInt::from(q)),
            im: BigRational::new(BigInt::from(b), BigInt::from(q)),
        }
    }

    pub fn re(&self) -> &BigRational {
        &self.re
    }

    pub fn im(&self) -> &BigRational {
        &self.im
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

    pub fn conj(&self) -> Self {
        Scalar { re: self.re.clone(), im: -self.im.clone() }
    }

    /// `re^2 + im^2`, the norm form of Q(i)/Q.
    pub fn norm(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm();
        Some(Scalar { re: &self.re / &n, im: -&self.im / &n })
    }

    /// Integer power, negative exponents through `inv`.
    pub fn pow(&self, e: i64) -> Option<Self> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut acc = Scalar::one();
        for _ in 0..e.unsigned_abs() {
            acc = &acc * &base;
        }
        Some(acc)
    }

    /// A square root in Q(i) if one exists, canonicalized so the first
    /// nonzero component of (re, im) is positive.
    pub fn sqrt(&self) -> Option<Self> {
        if self.is_zero() {
            return Some(Scalar::zero());
        }
        let root = if self.im.is_zero() {
            if self.re.is_positive() {
                Scalar { re: sqrt_rational(&self.re)?, im: BigRational::zero() }
            } else {
                let m = -self.re.clone();
                Scalar { re: BigRational::zero(), im: sqrt_rational(&m)? }
            }
        } else {
            // (p + qi)^2 = a + bi: p^2 - q^2 = a, 2pq = b, p^2 + q^2 = sqrt(a^2 + b^2).
            let r = sqrt_rational(&self.norm())?;
            let two = BigRational::from_integer(BigInt::from(2));
            let p2 = (&self.re + &r) / &two;
            let p = sqrt_rational(&p2)?;
            if p.is_zero() {
                return None;
            }
            let q = &self.im / (&two * &p);
            Scalar { re: p, im: q }
        };
        debug_assert_eq!(&root * &root, *self);
        if root.re.is_negative() || (root.re.is_zero() && root.im.is_negative()) {
            Some(-root)
        } else {
            Some(root)
        }
    }
}

/// Exact square root of a nonnegative rational, if it is a perfect square.
fn sqrt_rational(x: &BigRational) -> Option<BigRational> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer().sqrt();
    if &(&n * &n) != x.numer() {
        return None;
    }
    let d = x.denom().sqrt();
    if &(&d * &d) != x.denom() {
        return None;
    }
    Some(BigRational::new(n, d))
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        Scalar { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        Scalar { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        Scalar {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar { re: -self.re, im: -self.im }
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar { re: -self.re.clone(), im: -self.im.clone() }
    }
}

macro_rules! forward_owned_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        *self = &*self * rhs;
    }
}

fn fmt_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Scalar {
    /// Standalone grammar form: `3/2`, `-i`, `1/2-3*i`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut out = String::new();
        if !self.re.is_zero() {
            out.push_str(&fmt_rational(&self.re));
        }
        if !self.im.is_zero() {
            let mag = self.im.abs();
            let sign = if self.im.is_negative() { "-" } else if out.is_empty() { "" } else { "+" };
            out.push_str(sign);
            if mag.is_one() {
                out.push('i');
            } else {
                out.push_str(&fmt_rational(&mag));
                out.push_str("*i");
            }
        }
        write!(f, "{}", out)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_is_exact() {
        let a = Scalar::from_ratio(1, 3);
        let b = Scalar::from_ratio(1, 6);
        assert_eq!(&a + &b, Scalar::from_ratio(1, 2));
        let i = Scalar::i();
        assert_eq!(&i * &i, Scalar::from_int(-1));
    }

    #[test]
    fn inverse_of_gaussian() {
        let z = Scalar::gaussian(1, 1, 1); // 1 + i
        let w = z.inv().unwrap();
        assert_eq!(&z * &w, Scalar::one());
        assert!(Scalar::zero().inv().is_none());
    }

    #[test]
    fn sqrt_decidable_cases() {
        // -1 has root i
        assert_eq!(Scalar::from_int(-1).sqrt().unwrap(), Scalar::i());
        // 9/4 has root 3/2
        assert_eq!(Scalar::from_ratio(9, 4).sqrt().unwrap(), Scalar::from_ratio(3, 2));
        // 2i = (1+i)^2
        let z = Scalar::gaussian(0, 2, 1);
        assert_eq!(z.sqrt().unwrap(), Scalar::gaussian(1, 1, 1));
        // 2 is not a square in Q(i)
        assert!(Scalar::from_int(2).sqrt().is_none());
        // i is not a square in Q(i)
        assert!(Scalar::i().sqrt().is_none());
    }

    #[test]
    fn display_forms() {
        assert_eq!(Scalar::from_ratio(-3, 2).to_string(), "-3/2");
        assert_eq!(Scalar::i().to_string(), "i");
        assert_eq!((-Scalar::i()).to_string(), "-i");
        assert_eq!(Scalar::gaussian(1, -3, 2).to_string(), "1/2-3/2*i");
        assert_eq!(Scalar::zero().to_string(), "0");
    }
}
