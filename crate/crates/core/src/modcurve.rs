//! `Gamma0(N)` combinatorics: cusps, widths, irregularity exponents, right coset
//! representatives `gamma_c T^m` and their permutations under `T` and `S`.

use std::collections::HashMap;
use std::fmt;

use crate::arith::{divisors, euler_phi, gamma0_index, gcd, lcm, modinv, Mat2};
use crate::arithchar::DirichletCharacter;
use crate::num::{ComplexBig, Prec, Q};
use crate::qseries::FracQExp;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModError {
    #[error("Q = {q} is not a primitive divisor of N = {n}")]
    NotPrimitiveDivisor { n: u64, q: u64 },
    #[error("half-integral weight needs Q odd or 4 | Q, got Q = {0}")]
    HalfIntegralQ(u64),
    #[error("coset {j}: |a(0)| = {value:e} lies in the ambiguous band [{lo:e}, {hi:e}]")]
    Ambiguous { j: usize, value: f64, lo: f64, hi: f64 },
    #[error("vanishing set is not stable under T at coset {0}")]
    NotTStable(usize),
    #[error("expansion count {got} does not match the number of cosets {want}")]
    CountMismatch { got: usize, want: usize },
    #[error("cusp {0} is irregular for Atkin-Lehner reduction at level {1}")]
    Irregular(String, u64),
    #[error("malformed cusp string {0:?}")]
    Parse(String),
}

/// A cusp `a/c` in lowest terms, `c >= 0`; infinity is `1/0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cusp {
    pub a: i64,
    pub c: i64,
    /// Scaling matrix with `gamma(oo) = a/c`.
    pub gamma: Mat2,
    pub width: u64,
}

impl Cusp {
    pub fn is_infinity(&self) -> bool {
        self.c == 0
    }

    /// `alpha(c)` with `e^{2 pi i alpha} = chi(1 + a c w)`.
    pub fn alpha(&self, chi: &DirichletCharacter) -> Q {
        let d = 1 + self.gamma.a * self.gamma.c * self.width as i64;
        chi.value_q(d).expect("1 + A C w is a unit")
    }

    pub fn label(&self) -> String {
        if self.c == 0 {
            "oo".into()
        } else {
            format!("{}/{}", self.a, self.c)
        }
    }

    pub fn parse_label(s: &str) -> Result<(i64, i64), ModError> {
        if s == "oo" {
            return Ok((1, 0));
        }
        let (a, c) = s.split_once('/').ok_or_else(|| ModError::Parse(s.into()))?;
        let a = a.trim().parse().map_err(|_| ModError::Parse(s.into()))?;
        let c = c.trim().parse().map_err(|_| ModError::Parse(s.into()))?;
        Ok((a, c))
    }
}

impl fmt::Display for Cusp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `N / gcd(N, c^2)`.
pub fn width(n: u64, c: i64) -> u64 {
    let c = c.unsigned_abs();
    n / gcd(n, (c % n) * (c % n) % n)
}

fn scaling_matrix(a: i64, c: i64) -> Mat2 {
    if c == 0 {
        return Mat2::I;
    }
    // d = a^{-1} mod c in [0, c), b = (a d - 1)/c
    let d = modinv(a, c).expect("lowest terms");
    Mat2::new(a, (a * d - 1) / c, c, d)
}

/// One cusp per class; denominators `d | N`, numerators minimal positive in each unit class
/// mod `gcd(d, N/d)`. `d = N` is reported as infinity and `d = 1` as `0/1`.
pub fn cusp_list(n: u64) -> Vec<Cusp> {
    let ni = n as i64;
    let mut out = Vec::new();
    for d in divisors(n) {
        let di = d as i64;
        if d == n {
            out.push(Cusp { a: 1, c: 0, gamma: Mat2::I, width: 1 });
            continue;
        }
        let g = gcd(di, ni / di);
        for u in (0..g).filter(|u| gcd(*u, g) == 1) {
            let a = if d == 1 { 0 } else { (0..).map(|t| u + t * g).find(|a| *a >= 1 && gcd(*a, di) == 1).unwrap() };
            out.push(Cusp { a, c: di, gamma: scaling_matrix(a, di), width: width(n, di) });
        }
    }
    out.sort_by_key(|c| (c.c == 0, c.c, c.a));
    out
}

/// Number of cusps, `sum_{d | N} phi(gcd(d, N/d))`.
pub fn cusp_count(n: u64) -> usize {
    divisors(n).into_iter().map(|d| euler_phi(gcd(d, n / d)) as usize).sum()
}

/// Canonical key of `(c : d)` in `P^1(Z/N)`: the least pair over unit multiples.
#[derive(Debug, Clone)]
struct P1Keys {
    n: i64,
    units: Vec<i64>,
}

impl P1Keys {
    fn new(n: u64) -> Self {
        let n = n as i64;
        let units = (1..=n.max(1)).filter(|u| gcd(*u, n) == 1).collect();
        Self { n, units }
    }

    fn key(&self, c: i64, d: i64) -> (i64, i64) {
        if self.n == 1 {
            return (0, 0);
        }
        let (c, d) = (c.rem_euclid(self.n), d.rem_euclid(self.n));
        self.units
            .iter()
            .map(|u| ((u * c).rem_euclid(self.n), (u * d).rem_euclid(self.n)))
            .min()
            .unwrap()
    }
}

/// Right cosets `Gamma0(N) gamma_j`, `gamma_j = gamma_c T^m` for `0 <= m < w(c)`.
#[derive(Debug, Clone)]
pub struct CosetSystem {
    pub n: u64,
    pub cusps: Vec<Cusp>,
    /// `(cusp index, m)` per coset.
    pub cosets: Vec<(usize, i64)>,
    pub reps: Vec<Mat2>,
    /// `gamma_j T = delta gamma_{t(j)}`.
    pub t_perm: Vec<(usize, Mat2)>,
    /// `gamma_j S = delta gamma_{s(j)}`.
    pub s_perm: Vec<(usize, Mat2)>,
    keys: P1Keys,
    lookup: HashMap<(i64, i64), usize>,
}

impl CosetSystem {
    pub fn new(n: u64) -> Self {
        let cusps = cusp_list(n);
        let keys = P1Keys::new(n);
        let mut cosets = Vec::new();
        let mut reps = Vec::new();
        let mut lookup = HashMap::new();
        for (ci, c) in cusps.iter().enumerate() {
            for m in 0..c.width as i64 {
                let g = c.gamma * Mat2::t_pow(m);
                let prev = lookup.insert(keys.key(g.c, g.d), reps.len());
                assert!(prev.is_none(), "coset representatives must be distinct");
                cosets.push((ci, m));
                reps.push(g);
            }
        }
        let mut sys = Self { n, cusps, cosets, reps, t_perm: Vec::new(), s_perm: Vec::new(), keys, lookup };
        sys.t_perm = sys.reps.iter().map(|g| sys.locate(*g * Mat2::T)).collect();
        sys.s_perm = sys.reps.iter().map(|g| sys.locate(*g * Mat2::S)).collect();
        sys
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn index(&self) -> u64 {
        gamma0_index(self.n)
    }

    pub fn cusp_of(&self, j: usize) -> &Cusp {
        &self.cusps[self.cosets[j].0]
    }

    /// Coset index of the cusp representative itself (`m = 0`).
    pub fn cusp_coset(&self, ci: usize) -> usize {
        self.cosets.iter().position(|&(c, m)| c == ci && m == 0).unwrap()
    }

    /// `gamma = delta gamma_j` with `delta` in `Gamma0(N)`.
    pub fn locate(&self, gamma: Mat2) -> (usize, Mat2) {
        assert_eq!(gamma.det(), 1);
        let j = self.lookup[&self.keys.key(gamma.c, gamma.d)];
        let delta = gamma * self.reps[j].adj();
        debug_assert!(delta.in_gamma0(self.n as i64));
        (j, delta)
    }

    /// Cusp class of `x/y` (`y = 0` for infinity).
    pub fn cusp_index_of(&self, x: i64, y: i64) -> usize {
        let (g, u, v) = crate::arith::egcd(x, y);
        let gamma = Mat2::new(x / g, -v, y / g, u);
        self.cosets[self.locate(gamma).0].0
    }
}

/// Indices `j` with `f | gamma_j` vanishing at infinity: `alpha > 0`, or `alpha = 0` and
/// `a(0) = 0`. Values of `|a(0)|` between `2^{-prec/2}` and `2^{-prec/4}`, relative to the
/// growth-normalized coefficient size, are rejected as ambiguous.
pub fn vanishing_set(sys: &CosetSystem, expansions: &[FracQExp]) -> Result<Vec<bool>, ModError> {
    if expansions.len() != sys.len() {
        return Err(ModError::CountMismatch { got: expansions.len(), want: sys.len() });
    }
    let mut e = Vec::with_capacity(sys.len());
    for (j, f) in expansions.iter().enumerate() {
        let a0 = f.coeff_at(Q::from_integer(0));
        let vanishes = match a0 {
            None => true,
            Some(a0) => {
                let scale = f.scale_growth().max(1.0);
                let lo = scale * 2f64.powi(-(f.prec as i32) / 2);
                let hi = scale * 2f64.powi(-(f.prec as i32) / 4);
                let v = a0.abs_f64();
                if v >= lo && v < hi {
                    return Err(ModError::Ambiguous { j, value: v, lo, hi });
                }
                v < lo
            }
        };
        e.push(vanishes);
    }
    for j in 0..sys.len() {
        if e[j] != e[sys.t_perm[j].0] {
            return Err(ModError::NotTStable(j));
        }
    }
    Ok(e)
}

/// Atkin-Lehner data for `Q || N`.
#[derive(Debug, Clone)]
pub struct AtkinLehner {
    /// `(Q x, y; N, Q)` with determinant `Q`.
    pub w: Mat2,
    pub q: u64,
    /// `s(k, W_Q) / (g(chi_Q) Q^{k/2})`.
    pub normalizer: ComplexBig,
}

/// `W_Q = (Q x, y; N, Q)` and its normalizing constant; `two_k` is twice the weight.
pub fn atkin_lehner(n: u64, q: u64, two_k: i64, chi: &DirichletCharacter, prec: Prec) -> Result<AtkinLehner, ModError> {
    if q == 0 || !n.is_multiple_of(q) || gcd(q, n / q) != 1 {
        return Err(ModError::NotPrimitiveDivisor { n, q });
    }
    let half = two_k % 2 != 0;
    if half && q % 4 == 2 {
        return Err(ModError::HalfIntegralQ(q));
    }
    let (qi, r) = (q as i64, (n / q) as i64);
    // Q x - (N/Q) y = 1
    let x = if r == 1 { 1 } else { modinv(qi, r).unwrap() };
    let y = (qi * x - 1) / r;
    let w = Mat2::new(qi * x, y, n as i64, qi);
    debug_assert_eq!(w.det(), qi);
    let s = if !half {
        ComplexBig::one(prec)
    } else if q % 2 == 1 {
        crate::num::root_of_unity(Q::new((x - 1) / 2, 4), prec)
    } else {
        // k + y/2 is an integer since y is odd when 4 | Q
        let e = (two_k + y) / 2;
        let sign = if e.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        ComplexBig::from_f64(1.0, sign, prec)
    };
    let chi_n = chi.extend_to(lcm(chi.modulus(), n)).map_err(|_| ModError::NotPrimitiveDivisor { n, q })?;
    let (chi_q, _) = chi_n.decompose(q).map_err(|_| ModError::NotPrimitiveDivisor { n, q })?;
    let g = chi_q.gauss_sum(prec);
    let qk = crate::num::float_from_q(Q::new(two_k, 4), prec);
    let qpow = rug::Float::with_val(prec, q).pow_ref_f(&qk);
    let normalizer = s / g.scale(&qpow);
    Ok(AtkinLehner { w, q, normalizer })
}

trait PowRefF {
    fn pow_ref_f(&self, e: &rug::Float) -> rug::Float;
}

impl PowRefF for rug::Float {
    fn pow_ref_f(&self, e: &rug::Float) -> rug::Float {
        use rug::ops::Pow;
        rug::Float::with_val(self.prec(), self.pow(e))
    }
}

/// `gamma = W_Q delta (1/Q, v/Q; 0, 1)` for a regular cusp `A/C` (`gcd(N/gcd(N,C), C) = 1`),
/// with `Q = N/gcd(N, C)`. Returns `(W_Q, delta, v)`.
pub fn atkin_lehner_decompose(gamma: Mat2, n: u64) -> Result<(Mat2, Mat2, i64), ModError> {
    let ni = n as i64;
    let g = gcd(ni, gamma.c);
    let q = ni / g;
    if gcd(q, gamma.c) != 1 {
        return Err(ModError::Irregular(format!("{}/{}", gamma.a, gamma.c), n));
    }
    let r = ni / q;
    let x0 = if r == 1 { 1 } else { modinv(q, r).unwrap() };
    for t in 0..=(q * r).max(1) {
        let x = x0 + t * r;
        let y = (q * x - 1) / r;
        let w = Mat2::new(q * x, y, ni, q);
        for v in 0..q.max(1) {
            // Q delta = adj(W) gamma (Q, -v; 0, 1)
            let m = w.adj() * gamma * Mat2::new(q, -v, 0, 1);
            if [m.a, m.b, m.c, m.d].iter().all(|e| e % q == 0) {
                let delta = Mat2::new(m.a / q, m.b / q, m.c / q, m.d / q);
                if delta.in_gamma0(ni) {
                    return Ok((w, delta, v));
                }
            }
        }
    }
    Err(ModError::Irregular(format!("{}/{}", gamma.a, gamma.c), n))
}

/// Modulus `R = lcm(N/gcd(N, C D), M/gcd(M, B C))` of the cyclotomic field containing the
/// coefficients of `f | gamma`, for `chi` of conductor `M`.
pub fn cyclotomic_r(gamma: Mat2, n: u64, m: u64) -> u64 {
    let (ni, mi) = (n as i64, m as i64);
    let a = ni / gcd(ni, gamma.c * gamma.d);
    let b = mi / gcd(mi, gamma.b * gamma.c);
    lcm(a as u64, b as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cusp_examples() {
        assert_eq!(cusp_list(1).len(), 1);
        assert_eq!(cusp_list(11).len(), 2);
        let c4: Vec<String> = cusp_list(4).iter().map(|c| c.label()).collect();
        assert_eq!(c4, vec!["0/1", "1/2", "oo"]);
        let w: Vec<u64> = cusp_list(11).iter().map(|c| c.width).collect();
        assert_eq!(w, vec![11, 1]);
    }

    #[test]
    fn coset_examples() {
        assert_eq!(CosetSystem::new(1).len(), 1);
        assert_eq!(CosetSystem::new(6).len(), 12);
        assert_eq!(CosetSystem::new(11).len(), 12);
        let sys = CosetSystem::new(4);
        let (j, d) = sys.locate(Mat2::S);
        assert_eq!(d * sys.reps[j], Mat2::S);
    }

    #[test]
    fn atkin_lehner_examples() {
        let triv = DirichletCharacter::trivial(1);
        let al = atkin_lehner(11, 11, 4, &triv, 64).unwrap();
        assert_eq!(al.w.det(), 11);
        assert!((al.normalizer.re.to_f64() - 1.0 / 11.0).abs() < 1e-15);
        assert!(atkin_lehner(12, 2, 3, &triv, 64).is_err());
        assert!(atkin_lehner(12, 6, 4, &triv, 64).is_err());
        assert_eq!(cyclotomic_r(Mat2::new(1, 0, 1, 1), 4, 1), 4);
    }
}
