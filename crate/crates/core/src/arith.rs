//! Integer helpers: gcds, divisors, factorization, Kronecker symbols,
//! 2x2 integer matrices and continued-fraction (Manin) matrices.

use std::fmt;
use std::ops::Mul;

pub use num_integer::{gcd, lcm};

/// Extended gcd: returns `(g, x, y)` with `a*x + b*y = g >= 0`.
pub fn egcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i64, 0i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let qt = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - qt * r1);
        (s0, s1) = (s1, s0 - qt * s1);
        (t0, t1) = (t1, t0 - qt * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Inverse of `a` modulo `m` in `[0, m)`; `None` if not a unit. Mod 1 everything is 0.
pub fn modinv(a: i64, m: i64) -> Option<i64> {
    assert!(m > 0);
    if m == 1 {
        return Some(0);
    }
    let (g, x, _) = egcd(a.rem_euclid(m), m);
    (g == 1).then(|| x.rem_euclid(m))
}

pub fn powmod(mut b: i64, mut e: u64, m: i64) -> i64 {
    let m128 = m as i128;
    let mut acc: i128 = 1 % m128;
    let mut base = (b.rem_euclid(m)) as i128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % m128;
        }
        base = base * base % m128;
        e >>= 1;
    }
    b = acc as i64;
    b
}

/// Prime factorization by trial division, ascending primes.
pub fn factor(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn prime_divisors(n: u64) -> Vec<u64> {
    factor(n).into_iter().map(|(p, _)| p).collect()
}

/// Positive divisors in increasing order.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (p, e) in factor(n) {
        let cur = ds.clone();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            ds.extend(cur.iter().map(|d| d * pk));
        }
    }
    ds.sort_unstable();
    ds
}

pub fn euler_phi(n: u64) -> u64 {
    factor(n).into_iter().fold(n, |acc, (p, _)| acc / p * (p - 1))
}

/// `[SL2(Z) : Gamma0(N)] = N prod_{p | N} (1 + 1/p)`.
pub fn gamma0_index(n: u64) -> u64 {
    factor(n).into_iter().fold(n, |acc, (p, _)| acc / p * (p + 1))
}

pub fn is_squarefree(n: u64) -> bool {
    factor(n).iter().all(|&(_, e)| e == 1)
}

/// Kronecker symbol `(a | b)`, for all integers with `(a, b) != (0, 0)`.
pub fn kronecker(a: i64, b: i64) -> Result<i32, ArithError> {
    if a == 0 && b == 0 {
        return Err(ArithError::KroneckerZero);
    }
    if b == 0 {
        return Ok(if a.abs() == 1 { 1 } else { 0 });
    }
    let (mut a, mut b) = (a as i128, b as i128);
    if a % 2 == 0 && b % 2 == 0 {
        return Ok(0);
    }
    let mut v = 0;
    while b % 2 == 0 {
        v += 1;
        b /= 2;
    }
    let mut k: i32 = if v % 2 == 0 || (a.rem_euclid(8) == 1 || a.rem_euclid(8) == 7) { 1 } else { -1 };
    if b < 0 {
        b = -b;
        if a < 0 {
            k = -k;
        }
    }
    // b odd positive: Jacobi symbol
    loop {
        if a == 0 {
            return Ok(if b > 1 { 0 } else { k });
        }
        let mut v = 0;
        while a % 2 == 0 {
            v += 1;
            a /= 2;
        }
        if v % 2 == 1 && (b.rem_euclid(8) == 3 || b.rem_euclid(8) == 5) {
            k = -k;
        }
        if a < 0 {
            a = -a;
            if b % 4 == 3 {
                k = -k;
            }
        }
        if a % 4 == 3 && b % 4 == 3 {
            k = -k;
        }
        let r = a;
        a = b % r;
        b = r;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArithError {
    #[error("kronecker symbol (0|0) is undefined")]
    KroneckerZero,
    #[error("continued fraction needs a positive denominator, got {0}")]
    BadDenominator(i64),
}

/// Integer matrix `(a, b; c, d)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Mat2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}; {}, {}]", self.a, self.b, self.c, self.d)
    }
}

impl Mat2 {
    pub const I: Mat2 = Mat2 { a: 1, b: 0, c: 0, d: 1 };
    pub const T: Mat2 = Mat2 { a: 1, b: 1, c: 0, d: 1 };
    pub const S: Mat2 = Mat2 { a: 0, b: -1, c: 1, d: 0 };

    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        Self { a, b, c, d }
    }

    pub fn t_pow(m: i64) -> Self {
        Self::new(1, m, 0, 1)
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    /// Adjugate; the inverse when `det = 1`.
    pub fn adj(&self) -> Self {
        Self::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.a, -self.b, -self.c, -self.d)
    }

    pub fn in_gamma0(&self, n: i64) -> bool {
        self.det() == 1 && self.c % n == 0
    }

    pub fn is_upper(&self) -> bool {
        self.c == 0
    }

    /// Action on a point of `P^1(Q)`, given as `(num, den)` with `den = 0` for infinity.
    pub fn act_cusp(&self, (x, y): (i64, i64)) -> (i64, i64) {
        let (p, q) = (self.a * x + self.b * y, self.c * x + self.d * y);
        let g = gcd(p, q).max(1);
        let (p, q) = (p / g, q / g);
        if q < 0 || (q == 0 && p < 0) {
            (-p, -q)
        } else {
            (p, q)
        }
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

/// Convergents `p_j/q_j` (`j = -1..=m`) of the regular continued fraction of `num/den`,
/// starting from `1/0`. The last one is `num/den` in lowest terms.
pub fn convergents(num: i64, den: i64) -> Result<Vec<(i64, i64)>, ArithError> {
    if den < 1 {
        return Err(ArithError::BadDenominator(den));
    }
    let mut out = vec![(1i64, 0i64)];
    let (mut pm2, mut qm2, mut pm1, mut qm1) = (0i64, 1i64, 1i64, 0i64);
    let (mut x, mut y) = (num, den);
    while y != 0 {
        let a = x.div_euclid(y);
        (x, y) = (y, x - a * y);
        let (p, qv) = (a * pm1 + pm2, a * qm1 + qm2);
        out.push((p, qv));
        (pm2, qm2, pm1, qm1) = (pm1, qm1, p, qv);
    }
    Ok(out)
}

/// Matrices `M_j = ((-1)^{j-1} p_j, p_{j-1}; (-1)^{j-1} q_j, q_{j-1})`, `j = 0..=m`,
/// so that `{inf, num/den} = sum_j M_j {0, inf}` as modular symbols.
pub fn cf_manin_matrices(num: i64, den: i64) -> Result<Vec<Mat2>, ArithError> {
    let cv = convergents(num, den)?;
    Ok(cv
        .windows(2)
        .enumerate()
        .map(|(j, w)| {
            let (pm1, qm1) = w[0];
            let (p, qv) = w[1];
            let s = if j % 2 == 0 { -1 } else { 1 };
            Mat2::new(s * p, pm1, s * qv, qm1)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker(0, 1), Ok(1));
        assert_eq!(kronecker(-4, 3), Ok(-1));
        assert_eq!(kronecker(2, 15), Ok(1));
        assert_eq!(kronecker(0, 0), Err(ArithError::KroneckerZero));
        assert_eq!(kronecker(-1, -1), Ok(-1));
        assert_eq!(kronecker(5, 8), Ok(-1));
    }

    #[test]
    fn kronecker_matches_legendre() {
        for p in [3i64, 5, 7, 11, 13, 101] {
            for a in -30..30i64 {
                let e = powmod(a, ((p - 1) / 2) as u64, p);
                let leg = if a % p == 0 { 0 } else if e == 1 { 1 } else { -1 };
                assert_eq!(kronecker(a, p).unwrap(), leg, "({a}|{p})");
            }
        }
    }

    #[test]
    fn manin_small_cases() {
        let ms = cf_manin_matrices(0, 1).unwrap();
        assert_eq!(ms, vec![Mat2::new(0, 1, -1, 0)]);
        let cv = convergents(3, 7).unwrap();
        assert_eq!(cv, vec![(1, 0), (0, 1), (1, 2), (3, 7)]);
        for m in cf_manin_matrices(3, 7).unwrap() {
            assert_eq!(m.det(), 1);
        }
    }

    #[test]
    fn divisor_and_index() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(gamma0_index(6), 12);
        assert_eq!(gamma0_index(11), 12);
        assert_eq!(euler_phi(36), 12);
    }

    proptest! {
        #[test]
        fn kronecker_multiplicative(a in -200i64..200, b in -200i64..200, c in -200i64..200) {
            prop_assume!(!(a == 0 && c == 0) && !(b == 0 && c == 0) && !(a == 0 && b == 0));
            prop_assume!(c != 0 && b != 0);
            prop_assert_eq!(kronecker(a * b, c).unwrap(), kronecker(a, c).unwrap() * kronecker(b, c).unwrap());
            prop_assert_eq!(kronecker(a, b * c).unwrap(), kronecker(a, b).unwrap() * kronecker(a, c).unwrap());
        }

        #[test]
        fn manin_endpoints_telescope(num in -500i64..500, den in 1i64..500) {
            let ms = cf_manin_matrices(num, den).unwrap();
            let g = gcd(num, den);
            let mut prev = (1i64, 0i64);
            for m in &ms {
                prop_assert_eq!(m.det(), 1);
                // M_j(0) is the previous endpoint, M_j(inf) the next
                prop_assert_eq!(m.act_cusp((0, 1)), prev);
                prev = m.act_cusp((1, 0));
            }
            prop_assert_eq!(prev, (num / g, den / g));
        }

        #[test]
        fn egcd_bezout(a in -10000i64..10000, b in -10000i64..10000) {
            let (g, x, y) = egcd(a, b);
            prop_assert_eq!(a * x + b * y, g);
            prop_assert_eq!(g, gcd(a, b));
        }
    }
}
