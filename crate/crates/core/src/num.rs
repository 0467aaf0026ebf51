//! Multiprecision complex numbers on top of MPFR floats, plus small exact
//! helpers (rational exponents, roots of unity).

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

use num_rational::Rational64;
use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

/// Working precision in bits.
pub type Prec = u32;

/// Default working precision.
pub const DEFAULT_PREC: Prec = 128;

/// Exact rational used for exponents, widths and weights.
pub type Q = Rational64;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

/// Fractional part in `[0, 1)`.
pub fn frac(x: Q) -> Q {
    x - Q::from_integer(x.floor().to_integer())
}

pub fn pi(prec: Prec) -> Float {
    Float::with_val(prec, Constant::Pi)
}

pub fn float_from_q(x: Q, prec: Prec) -> Float {
    Float::with_val(prec, *x.numer()) / *x.denom()
}

/// A complex number with MPFR real and imaginary parts.
#[derive(Clone, PartialEq)]
pub struct ComplexBig {
    pub re: Float,
    pub im: Float,
}

impl fmt::Debug for ComplexBig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}i)", self.re.to_f64(), self.im.to_f64())
    }
}

impl fmt::Display for ComplexBig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = Some(((self.prec() as f64) * std::f64::consts::LOG10_2) as usize + 1);
        write!(
            f,
            "{} + {}i",
            self.re.to_string_radix(10, digits),
            self.im.to_string_radix(10, digits)
        )
    }
}

impl ComplexBig {
    pub fn new(re: Float, im: Float) -> Self {
        Self { re, im }
    }

    pub fn zero(prec: Prec) -> Self {
        Self { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn one(prec: Prec) -> Self {
        Self::from_i64(1, prec)
    }

    pub fn i(prec: Prec) -> Self {
        Self { re: Float::new(prec), im: Float::with_val(prec, 1) }
    }

    pub fn from_i64(v: i64, prec: Prec) -> Self {
        Self { re: Float::with_val(prec, v), im: Float::new(prec) }
    }

    pub fn from_f64(re: f64, im: f64, prec: Prec) -> Self {
        Self { re: Float::with_val(prec, re), im: Float::with_val(prec, im) }
    }

    pub fn from_real(re: Float) -> Self {
        let prec = re.prec();
        Self { re, im: Float::new(prec) }
    }

    pub fn from_q(x: Q, prec: Prec) -> Self {
        Self::from_real(float_from_q(x, prec))
    }

    pub fn from_rational(x: &rug::Rational, prec: Prec) -> Self {
        Self::from_real(Float::with_val(prec, x))
    }

    pub fn from_integer(x: &rug::Integer, prec: Prec) -> Self {
        Self::from_real(Float::with_val(prec, x))
    }

    pub fn prec(&self) -> Prec {
        self.re.prec().max(self.im.prec())
    }

    pub fn with_prec(&self, prec: Prec) -> Self {
        Self { re: Float::with_val(prec, &self.re), im: Float::with_val(prec, &self.im) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: Float::with_val(self.im.prec(), -&self.im) }
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, self.re.square_ref()) + Float::with_val(p, self.im.square_ref())
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    pub fn abs_f64(&self) -> f64 {
        self.abs().to_f64()
    }

    pub fn arg(&self) -> Float {
        Float::with_val(self.prec(), self.im.atan2_ref(&self.re))
    }

    pub fn to_c64(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn mul_i(&self) -> Self {
        Self { re: Float::with_val(self.im.prec(), -&self.im), im: self.re.clone() }
    }

    pub fn scale(&self, s: &Float) -> Self {
        let p = self.prec().max(s.prec());
        Self { re: Float::with_val(p, &self.re * s), im: Float::with_val(p, &self.im * s) }
    }

    pub fn scale_i64(&self, s: i64) -> Self {
        let p = self.prec();
        Self { re: Float::with_val(p, &self.re * s), im: Float::with_val(p, &self.im * s) }
    }

    pub fn div_i64(&self, s: i64) -> Self {
        let p = self.prec();
        Self { re: Float::with_val(p, &self.re / s), im: Float::with_val(p, &self.im / s) }
    }

    pub fn scale_q(&self, s: Q) -> Self {
        self.scale_i64(*s.numer()).div_i64(*s.denom())
    }

    pub fn recip(&self) -> Self {
        let n = self.norm_sqr();
        let p = self.prec();
        Self {
            re: Float::with_val(p, &self.re / &n),
            im: Float::with_val(p, -Float::with_val(p, &self.im / &n)),
        }
    }

    pub fn exp(&self) -> Self {
        let p = self.prec();
        let r = Float::with_val(p, self.re.exp_ref());
        let (s, c) = Float::with_val(p, &self.im).sin_cos(Float::new(p));
        Self { re: Float::with_val(p, &r * &c), im: r * s }
    }

    /// `e^{2 pi i x}` for real `x`.
    pub fn expi_2pi(x: &Float) -> Self {
        let p = x.prec();
        let t = Float::with_val(p, x * pi(p)) * 2u32;
        let (s, c) = t.sin_cos(Float::new(p));
        Self { re: c, im: s }
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Self {
        let p = self.prec();
        Self { re: Float::with_val(p, self.abs().ln_ref()), im: self.arg() }
    }

    /// Principal square root (branch cut on the negative real axis).
    pub fn sqrt(&self) -> Self {
        let p = self.prec();
        if self.is_zero() {
            return Self::zero(p);
        }
        let r = self.abs();
        // sqrt((r + |re|)/2)
        let t = Float::with_val(p, (r + Float::with_val(p, self.re.abs_ref())) / 2u32).sqrt();
        let half = Float::with_val(p, &self.im / &t) / 2u32;
        if self.re.is_sign_positive() {
            Self { re: t, im: half }
        } else {
            let re = half.abs();
            let im = if self.im < 0 { -t } else { t };
            Self { re, im }
        }
    }

    pub fn powi(&self, n: i64) -> Self {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut acc = Self::one(self.prec());
        let mut base = self.clone();
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// `z^{two_k/2}` using the principal square root when `two_k` is odd.
    pub fn pow_half(&self, two_k: i64) -> Self {
        if two_k % 2 == 0 {
            self.powi(two_k / 2)
        } else {
            self.sqrt().powi(two_k)
        }
    }

    pub fn max_abs_component(&self) -> f64 {
        self.re.to_f64().abs().max(self.im.to_f64().abs())
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl<'a> $tr<&'a ComplexBig> for &'a ComplexBig {
            type Output = ComplexBig;
            fn $m(self, o: &'a ComplexBig) -> ComplexBig {
                let f: fn(&ComplexBig, &ComplexBig) -> ComplexBig = $body;
                f(self, o)
            }
        }
        impl $tr<ComplexBig> for ComplexBig {
            type Output = ComplexBig;
            fn $m(self, o: ComplexBig) -> ComplexBig {
                (&self).$m(&o)
            }
        }
        impl<'a> $tr<&'a ComplexBig> for ComplexBig {
            type Output = ComplexBig;
            fn $m(self, o: &'a ComplexBig) -> ComplexBig {
                (&self).$m(o)
            }
        }
    };
}

binop!(Add, add, |a, b| {
    let p = a.prec().max(b.prec());
    ComplexBig { re: Float::with_val(p, &a.re + &b.re), im: Float::with_val(p, &a.im + &b.im) }
});
binop!(Sub, sub, |a, b| {
    let p = a.prec().max(b.prec());
    ComplexBig { re: Float::with_val(p, &a.re - &b.re), im: Float::with_val(p, &a.im - &b.im) }
});
binop!(Mul, mul, |a, b| {
    let p = a.prec().max(b.prec());
    let ac = Float::with_val(p, &a.re * &b.re);
    let bd = Float::with_val(p, &a.im * &b.im);
    let ad = Float::with_val(p, &a.re * &b.im);
    let bc = Float::with_val(p, &a.im * &b.re);
    ComplexBig { re: ac - bd, im: ad + bc }
});
binop!(Div, div, |a, b| a * &b.recip());

impl Neg for ComplexBig {
    type Output = ComplexBig;
    fn neg(self) -> ComplexBig {
        ComplexBig { re: -self.re, im: -self.im }
    }
}

impl Neg for &ComplexBig {
    type Output = ComplexBig;
    fn neg(self) -> ComplexBig {
        -(self.clone())
    }
}

impl AddAssign<&ComplexBig> for ComplexBig {
    fn add_assign(&mut self, o: &ComplexBig) {
        self.re += &o.re;
        self.im += &o.im;
    }
}

impl SubAssign<&ComplexBig> for ComplexBig {
    fn sub_assign(&mut self, o: &ComplexBig) {
        self.re -= &o.re;
        self.im -= &o.im;
    }
}

impl MulAssign<&ComplexBig> for ComplexBig {
    fn mul_assign(&mut self, o: &ComplexBig) {
        *self = &*self * o;
    }
}

/// `acc += a * b` without intermediate allocation of a full product.
pub fn fma_into(acc: &mut ComplexBig, a: &ComplexBig, b: &ComplexBig, tmp: &mut Float) {
    use rug::Assign;
    tmp.assign(&a.re * &b.re);
    acc.re += &*tmp;
    tmp.assign(&a.im * &b.im);
    acc.re -= &*tmp;
    tmp.assign(&a.re * &b.im);
    acc.im += &*tmp;
    tmp.assign(&a.im * &b.re);
    acc.im += &*tmp;
}

/// Sum in a fixed pairwise-tree order, independent of how the terms were produced.
pub fn tree_sum(mut terms: Vec<ComplexBig>, prec: Prec) -> ComplexBig {
    if terms.is_empty() {
        return ComplexBig::zero(prec);
    }
    while terms.len() > 1 {
        let mut next = Vec::with_capacity(terms.len().div_ceil(2));
        let mut it = terms.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a + b),
                None => next.push(a),
            }
        }
        terms = next;
    }
    terms.pop().unwrap()
}

/// Table of `e^{2 pi i j / order}` for `0 <= j < order`.
#[derive(Debug)]
pub struct RootsOfUnity {
    order: u64,
    table: Vec<ComplexBig>,
}

impl RootsOfUnity {
    fn build(order: u64, prec: Prec) -> Self {
        let work = prec + 16;
        let table = (0..order)
            .map(|j| {
                let x = Float::with_val(work, j) / order;
                ComplexBig::expi_2pi(&x).with_prec(prec)
            })
            .collect();
        Self { order, table }
    }

    /// Shared table for `(order, prec)`, built on first use.
    pub fn get(order: u64, prec: Prec) -> Arc<RootsOfUnity> {
        static CACHE: OnceLock<Mutex<HashMap<(u64, Prec), Arc<RootsOfUnity>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().unwrap().get(&(order, prec)) {
            return t.clone();
        }
        let t = Arc::new(Self::build(order.max(1), prec));
        cache.lock().unwrap().entry((order, prec)).or_insert(t).clone()
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn pow(&self, e: i64) -> &ComplexBig {
        &self.table[e.rem_euclid(self.order as i64) as usize]
    }
}

/// `e^{2 pi i x}` for exact rational `x`.
pub fn root_of_unity(x: Q, prec: Prec) -> ComplexBig {
    let x = frac(x);
    let d = *x.denom() as u64;
    if d <= 4096 {
        RootsOfUnity::get(d, prec).pow(*x.numer()).clone()
    } else {
        ComplexBig::expi_2pi(&float_from_q(x, prec + 16)).with_prec(prec)
    }
}

/// Integer power of a float: `x^n`.
pub fn powi_float(x: &Float, n: i64) -> Float {
    Float::with_val(x.prec(), x.pow(n as i32))
}

/// `digits` decimal digits -> bits, with guard bits.
pub fn digits_to_bits(digits: u32) -> Prec {
    (digits as f64 * 3.33).ceil() as Prec + 32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_principal_branch() {
        let p = 128;
        let z = ComplexBig::from_f64(-4.0, 0.0, p);
        let s = z.sqrt();
        assert!((s.im.to_f64() - 2.0).abs() < 1e-30 && s.re.to_f64().abs() < 1e-30);
        let z = ComplexBig::from_f64(-4.0, -1e-10, p);
        assert!(z.sqrt().im.to_f64() < 0.0);
        let z = ComplexBig::from_f64(3.0, -4.0, p);
        let s = z.sqrt();
        let back = &s * &s;
        assert!((&back - &z).abs_f64() < 1e-35);
    }

    #[test]
    fn roots_table_consistent() {
        let t = RootsOfUnity::get(12, 100);
        let z = t.pow(5).powi(12);
        assert!((&z - &ComplexBig::one(100)).abs_f64() < 1e-28);
        assert_eq!(t.pow(-1), t.pow(11));
    }

    #[test]
    fn exp_and_ln_invert() {
        let z = ComplexBig::from_f64(0.3, 2.5, 150);
        let w = z.exp().ln();
        assert!((&w - &z).abs_f64() < 1e-40);
    }

    #[test]
    fn tree_sum_matches_sequential() {
        let terms: Vec<_> = (1..=37).map(|i| ComplexBig::from_f64(i as f64, -(i as f64), 64)).collect();
        let s = tree_sum(terms, 64);
        assert_eq!(s.re.to_f64(), 703.0);
        assert_eq!(s.im.to_f64(), -703.0);
    }
}
