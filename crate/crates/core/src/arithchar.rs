//! Dirichlet characters in Conrey labelling, Gauss sums, generalized Bernoulli
//! numbers and the constant-term constant `S_k(chi)`.
//!
//! A character mod `N` is stored as a table of exponents: `chi(n) = e^{2 pi i t[n]/L}`
//! with `L` the exponent of `(Z/NZ)^*`, and `None` at non-units.
//!
//! Conrey labels: for odd `p^e` we fix `g` = the least primitive root mod `p`, bumped
//! by `p` when it fails to generate mod `p^2`. Then `chi_m(g^b) = e(log_g(m) b / phi(p^e))`.
//! For `2^e` write `n = eps 5^a`; `chi_m(n) = e((1-eps_m)(1-eps_n)/8 + a_m a_n / 2^{e-2})`.

use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};
use std::collections::HashMap;

use rug::ops::Pow;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::arith::{divisors, factor, gcd, lcm, modinv, powmod, prime_divisors};
use crate::num::{tree_sum, ComplexBig, Prec, RootsOfUnity, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CharError {
    #[error("Conrey index {index} is not a unit mod {modulus}")]
    NotUnit { modulus: u64, index: u64 },
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("{q} is not a primitive divisor of {modulus}")]
    NotPrimitiveDivisor { modulus: u64, q: u64 },
    #[error("cannot induce a character of conductor {conductor} to modulus {modulus}")]
    BadInduction { conductor: u64, modulus: u64 },
    #[error("generalized Bernoulli numbers need k >= 1")]
    ZeroK,
}

/// External name of a character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CharLabel {
    pub modulus: u64,
    pub index: u64,
}

impl fmt::Display for CharLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.modulus, self.index)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DirichletCharacter {
    modulus: u64,
    index: u64,
    order: u64,
    table: Arc<Vec<Option<u64>>>,
    conductor: u64,
    parity: i32,
}

impl fmt::Debug for DirichletCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chi[{}.{}]", self.modulus, self.index)
    }
}

/// Per prime power: `(q, p, e, generator g or 0 for 2-powers)`.
fn components(n: u64) -> Vec<(u64, u64, u32, u64)> {
    factor(n)
        .into_iter()
        .map(|(p, e)| {
            let q = p.pow(e);
            let g = if p == 2 { 0 } else { odd_generator(p) };
            (q, p, e, g)
        })
        .collect()
}

fn odd_generator(p: u64) -> u64 {
    let pf = prime_divisors(p - 1);
    let mut g = 2u64;
    loop {
        if pf.iter().all(|&r| powmod(g as i64, (p - 1) / r, p as i64) != 1) {
            break;
        }
        g += 1;
    }
    if powmod(g as i64, p - 1, (p * p) as i64) == 1 {
        g += p;
    }
    g
}

/// Discrete log table for the generator `g` mod `q = p^e` (odd p).
fn dlog_odd(q: u64, g: u64, phi: u64) -> Vec<Option<u64>> {
    let mut t = vec![None; q as usize];
    let mut x = 1u64;
    for i in 0..phi {
        t[x as usize] = Some(i);
        x = x * g % q;
    }
    t
}

/// `(eps, a)` with `n = eps 5^a mod 2^e`, for odd `n`.
fn dlog_two(q: u64, e: u32) -> Vec<Option<(i64, u64)>> {
    let mut t = vec![None; q as usize];
    let half = if e >= 2 { 1u64 << (e - 2) } else { 1 };
    for a in 0..half {
        let f = powmod(5, a, q as i64) as u64;
        for eps in [1i64, -1] {
            let n = (eps * f as i64).rem_euclid(q as i64) as usize;
            if t[n].is_none() {
                t[n] = Some((eps, a));
            }
        }
    }
    t
}

/// Exponent of `(Z/qZ)^*` used for a component table.
fn component_order(q: u64, p: u64, e: u32) -> u64 {
    if p == 2 {
        if e <= 1 {
            1
        } else {
            (1u64 << (e - 2)).max(2)
        }
    } else {
        q / p * (p - 1)
    }
}

/// Component exponent table mod `q` for Conrey index `m`, over `component_order`.
fn component_table(q: u64, p: u64, e: u32, g: u64, m: u64) -> Vec<Option<u64>> {
    let l = component_order(q, p, e);
    if p == 2 {
        if e == 1 {
            return (0..q).map(|n| (n % 2 == 1).then_some(0)).collect();
        }
        let logs = dlog_two(q, e);
        let (em, am) = logs[(m % q) as usize].unwrap();
        let span = 1u64 << (e - 2);
        (0..q)
            .map(|n| {
                logs[n as usize].map(|(en, an)| {
                    let sign_part = ((1 - em) * (1 - en)) as u64 * l / 8;
                    (sign_part + am * an * (l / span)) % l
                })
            })
            .collect()
    } else {
        let logs = dlog_odd(q, g, l);
        let lm = logs[(m % q) as usize].unwrap();
        logs.iter().map(|o| o.map(|x| x * lm % l)).collect()
    }
}

/// Chinese remainder: `x = r_i mod m_i` for pairwise coprime moduli.
fn crt(parts: &[(u64, u64)]) -> u64 {
    let mut x = 0i128;
    let mut m = 1i128;
    for &(r, mi) in parts {
        let mi = mi as i128;
        let inv = modinv((m % mi) as i64, mi as i64).unwrap() as i128;
        let t = ((r as i128 - x).rem_euclid(mi) * inv).rem_euclid(mi);
        x += m * t;
        m *= mi;
    }
    x.rem_euclid(m) as u64
}

fn cache() -> &'static Mutex<HashMap<(u64, u64), DirichletCharacter>> {
    static C: OnceLock<Mutex<HashMap<(u64, u64), DirichletCharacter>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

impl DirichletCharacter {
    /// Character with Conrey label `(modulus, index)`.
    pub fn conrey(modulus: u64, index: u64) -> Result<Self, CharError> {
        if modulus == 0 {
            return Err(CharError::ZeroModulus);
        }
        let index = index % modulus;
        if gcd(index, modulus) != 1 && modulus > 1 {
            return Err(CharError::NotUnit { modulus, index });
        }
        let index = if modulus == 1 { 1 } else { index };
        if let Some(c) = cache().lock().unwrap().get(&(modulus, index)) {
            return Ok(c.clone());
        }
        let comps = components(modulus);
        let order = comps.iter().fold(1u64, |acc, &(q, p, e, _)| lcm(acc, component_order(q, p, e)));
        let tables: Vec<(u64, u64, Vec<Option<u64>>)> = comps
            .iter()
            .map(|&(q, p, e, g)| (q, order / component_order(q, p, e), component_table(q, p, e, g, index)))
            .collect();
        let table: Vec<Option<u64>> = (0..modulus)
            .map(|n| {
                let mut s = 0u64;
                for (q, mult, t) in &tables {
                    s += t[(n % q) as usize]? * mult;
                }
                Some(s % order)
            })
            .collect();
        let mut chi = Self { modulus, index, order, table: Arc::new(table), conductor: 0, parity: 1 };
        chi.parity = if chi.exp_over_order(-1) == Some(0) { 1 } else { -1 };
        chi.conductor = chi.compute_conductor();
        cache().lock().unwrap().insert((modulus, index), chi.clone());
        Ok(chi)
    }

    pub fn trivial(modulus: u64) -> Self {
        Self::conrey(modulus, 1).expect("1 is a unit")
    }

    /// All characters mod `n`, by increasing Conrey index.
    pub fn all(modulus: u64) -> Vec<Self> {
        (1..=modulus.max(1))
            .filter(|&m| gcd(m, modulus) == 1)
            .map(|m| Self::conrey(modulus, m).unwrap())
            .collect()
    }

    /// Primitive characters of conductor exactly `f`.
    pub fn primitive_of_conductor(f: u64) -> Vec<Self> {
        Self::all(f).into_iter().filter(|c| c.conductor == f).collect()
    }

    /// Recover the Conrey label of the character with the given exponent table over `order`.
    fn from_table(modulus: u64, order: u64, table: &[Option<u64>]) -> Self {
        let mut parts = Vec::new();
        for (q, p, e, g) in components(modulus) {
            let other = modulus / q;
            let lift = |r: u64| crt(&[(r % q, q), (1 % other, other)]);
            let comp_l = component_order(q, p, e);
            let val = |n: u64| -> u64 {
                let x = table[n as usize].expect("unit");
                // component value e(x/order) = e(y/comp_l)
                debug_assert_eq!(x * comp_l % order, 0);
                x * comp_l / order
            };
            let m = if p == 2 {
                if e == 1 {
                    1
                } else {
                    let eps_m = if val(lift(q - 1)) == 0 { 1i64 } else { -1 };
                    let span = 1u64 << (e - 2);
                    let a = if e == 2 { 0 } else { val(lift(5)) * span / comp_l };
                    (eps_m * powmod(5, a, q as i64)).rem_euclid(q as i64) as u64
                }
            } else {
                powmod(g as i64, val(lift(g)), q as i64) as u64
            };
            parts.push((m, q));
        }
        let idx = if modulus == 1 { 1 } else { crt(&parts) };
        Self::conrey(modulus, idx).unwrap()
    }

    pub fn label(&self) -> CharLabel {
        CharLabel { modulus: self.modulus, index: self.index }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Exponent of the value group: values are `order`-th roots of unity.
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn conductor(&self) -> u64 {
        self.conductor
    }

    pub fn parity(&self) -> i32 {
        self.parity
    }

    pub fn is_trivial(&self) -> bool {
        self.conductor == 1
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor == self.modulus
    }

    /// `chi(n) = e(t/order)`; `None` when `gcd(n, modulus) > 1`.
    pub fn exp_over_order(&self, n: i64) -> Option<u64> {
        self.table[n.rem_euclid(self.modulus as i64) as usize]
    }

    /// `chi(n) = e(x)` with `x` in `[0, 1)`.
    pub fn value_q(&self, n: i64) -> Option<Q> {
        self.exp_over_order(n).map(|t| Q::new(t as i64, self.order as i64))
    }

    pub fn value(&self, n: i64, prec: Prec) -> ComplexBig {
        match self.exp_over_order(n) {
            None => ComplexBig::zero(prec),
            Some(t) => RootsOfUnity::get(self.order, prec).pow(t as i64).clone(),
        }
    }

    /// Real value when the character is real at `n` (-1, 0, 1).
    pub fn value_real(&self, n: i64) -> Option<i64> {
        match self.exp_over_order(n) {
            None => Some(0),
            Some(0) => Some(1),
            Some(t) if 2 * t == self.order => Some(-1),
            _ => None,
        }
    }

    pub fn conj(&self) -> Self {
        if self.modulus == 1 {
            return self.clone();
        }
        let inv = modinv(self.index as i64, self.modulus as i64).unwrap() as u64;
        Self::conrey(self.modulus, inv).unwrap()
    }

    /// Product of characters, taken modulo `lcm` of the moduli.
    pub fn mul(&self, other: &Self) -> Self {
        if self.modulus == other.modulus {
            return Self::conrey(self.modulus, self.index * other.index % self.modulus.max(1)).unwrap();
        }
        let m = lcm(self.modulus, other.modulus);
        self.extend_to(m).unwrap().mul(&other.extend_to(m).unwrap())
    }

    pub fn pow(&self, e: u64) -> Self {
        Self::conrey(self.modulus, powmod(self.index as i64, e, self.modulus as i64) as u64).unwrap()
    }

    /// The same character viewed modulo a multiple `m` of the modulus.
    pub fn extend_to(&self, m: u64) -> Result<Self, CharError> {
        if !m.is_multiple_of(self.modulus) {
            return Err(CharError::BadInduction { conductor: self.modulus, modulus: m });
        }
        self.primitive().induce(m)
    }

    /// Induce a primitive character to any modulus divisible by its conductor.
    pub fn induce(&self, m: u64) -> Result<Self, CharError> {
        let prim = self.primitive();
        if !m.is_multiple_of(prim.modulus) {
            return Err(CharError::BadInduction { conductor: prim.modulus, modulus: m });
        }
        if m == prim.modulus {
            return Ok(prim);
        }
        let order = components(m).iter().fold(1u64, |acc, &(q, p, e, _)| lcm(acc, component_order(q, p, e)));
        let scale = order / prim.order;
        let table: Vec<Option<u64>> = (0..m)
            .map(|n| {
                if gcd(n, m) != 1 {
                    None
                } else {
                    prim.exp_over_order(n as i64).map(|t| t * scale)
                }
            })
            .collect();
        Ok(Self::from_table(m, order, &table))
    }

    fn compute_conductor(&self) -> u64 {
        let n = self.modulus;
        for d in divisors(n) {
            let ok = (0..n).all(|x| match self.table[x as usize] {
                Some(t) => x % d != 1 % d || t == 0,
                None => true,
            });
            if ok {
                return d;
            }
        }
        n
    }

    /// The primitive character `chi_f` inducing this one.
    pub fn primitive(&self) -> Self {
        let f = self.conductor;
        if f == self.modulus {
            return self.clone();
        }
        let order = components(f).iter().fold(1u64, |acc, &(q, p, e, _)| lcm(acc, component_order(q, p, e)));
        let table: Vec<Option<u64>> = (0..f)
            .map(|r| {
                if gcd(r, f) != 1 {
                    return None;
                }
                let mut n = r;
                while gcd(n, self.modulus) != 1 {
                    n += f;
                }
                let t = self.table[(n % self.modulus) as usize].unwrap();
                debug_assert_eq!(t * order % self.order, 0);
                Some(t * order / self.order)
            })
            .collect();
        Self::from_table(f, order, &table)
    }

    /// `chi = chi_Q chi_{N/Q}` for a primitive divisor `Q || N`.
    pub fn decompose(&self, q: u64) -> Result<(Self, Self), CharError> {
        let n = self.modulus;
        if q == 0 || !n.is_multiple_of(q) || gcd(q, n / q) != 1 {
            return Err(CharError::NotPrimitiveDivisor { modulus: n, q });
        }
        let r = n / q;
        let iq = if q == 1 { 1 } else { self.index % q };
        let ir = if r == 1 { 1 } else { self.index % r };
        Ok((Self::conrey(q, iq)?, Self::conrey(r, ir)?))
    }

    /// Standard Gauss sum of the primitive character inducing `chi`.
    pub fn gauss_sum(&self, prec: Prec) -> ComplexBig {
        let prim = self.primitive();
        let f = prim.modulus;
        if f == 1 {
            return ComplexBig::one(prec);
        }
        let work = prec + 16;
        let zf = RootsOfUnity::get(f, work);
        let zc = RootsOfUnity::get(prim.order, work);
        let terms: Vec<ComplexBig> = (1..f)
            .filter_map(|a| prim.exp_over_order(a as i64).map(|t| zc.pow(t as i64) * zf.pow(a as i64)))
            .collect();
        tree_sum(terms, work).with_prec(prec)
    }
}

/// Exact element of the cyclotomic field `Q(zeta_L)`, as `sum_j c_j zeta_L^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cyclotomic {
    pub order: u64,
    pub coeffs: Vec<Rational>,
}

impl Cyclotomic {
    pub fn to_complex(&self, prec: Prec) -> ComplexBig {
        let z = RootsOfUnity::get(self.order, prec + 8);
        let terms = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(j, c)| z.pow(j as i64).scale(&rug::Float::with_val(prec + 8, c)))
            .collect();
        tree_sum(terms, prec + 8).with_prec(prec)
    }

    /// Rational value when the element lies in `Q` after reduction by `1 + zeta + ... = 0`
    /// relations of order 1 or 2.
    pub fn as_rational(&self) -> Option<Rational> {
        match self.order {
            1 => Some(self.coeffs[0].clone()),
            2 => Some(Rational::from(&self.coeffs[0] - &self.coeffs[1])),
            _ => {
                let mut r = self.coeffs[0].clone();
                for j in 1..self.coeffs.len() {
                    let jj = j as u64;
                    if 2 * jj == self.order {
                        r -= &self.coeffs[j];
                    } else if !self.coeffs[j].is_zero() {
                        return None;
                    }
                }
                Some(r)
            }
        }
    }

    pub fn conj(&self) -> Self {
        let l = self.order as usize;
        let mut c = vec![Rational::new(); l];
        for (j, v) in self.coeffs.iter().enumerate() {
            c[(l - j) % l] += v;
        }
        Self { order: self.order, coeffs: c }
    }
}

/// Classical Bernoulli numbers `B_0..=B_n` with `B_1 = -1/2`.
pub fn bernoulli_numbers(n: usize) -> Vec<Rational> {
    static CACHE: OnceLock<Mutex<Vec<Rational>>> = OnceLock::new();
    let c = CACHE.get_or_init(|| Mutex::new(vec![Rational::from(1)]));
    let mut b = c.lock().unwrap();
    while b.len() <= n {
        let m = b.len();
        // sum_{j<m} C(m+1, j) B_j + (m+1) B_m = 0
        let mut s = Rational::new();
        for (j, bj) in b.iter().enumerate() {
            s += Rational::from(Integer::from(Integer::binomial_u(m as u32 + 1, j as u32)) * bj);
        }
        b.push(-s / (m as u32 + 1));
    }
    b[..=n].to_vec()
}

/// Bernoulli polynomial `B_k(x)` at a rational point.
pub fn bernoulli_poly(k: usize, x: &Rational) -> Rational {
    let b = bernoulli_numbers(k);
    let mut s = Rational::new();
    let mut xp = Rational::from(1);
    for j in (0..=k).rev() {
        s += Rational::from(Integer::from(Integer::binomial_u(k as u32, j as u32)) * &b[j]) * &xp;
        xp *= x;
    }
    s
}

/// `B_k(chi) = f^{k-1} sum_{a=1}^{f} chi(a) B_k(a/f)` for the primitive character of `chi`.
/// With this convention `B_1(1) = +1/2`.
pub fn gen_bernoulli(chi: &DirichletCharacter, k: u32) -> Result<Cyclotomic, CharError> {
    if k == 0 {
        return Err(CharError::ZeroK);
    }
    let prim = chi.primitive();
    let f = prim.modulus();
    let mut coeffs = vec![Rational::new(); prim.order() as usize];
    let fk = Rational::from(Integer::from(f).pow(k - 1));
    for a in 1..=f {
        if let Some(t) = prim.exp_over_order(a as i64) {
            coeffs[t as usize] += bernoulli_poly(k as usize, &Rational::from((a, f)));
        }
    }
    for c in coeffs.iter_mut() {
        *c *= &fk;
    }
    Ok(Cyclotomic { order: prim.order(), coeffs })
}

/// `L(chi, 1 - k) = -B_k(chi)/k` as a complex number.
pub fn l_value_negative(chi: &DirichletCharacter, k: u32, prec: Prec) -> ComplexBig {
    let b = gen_bernoulli(chi, k).unwrap().to_complex(prec);
    -(b.div_i64(k as i64))
}

/// `S_k(chi) = (M/f)^k g(chi_f) conj(B_k(chi_f))/k prod_{p | M} (1 - chi_f(p)/p^k)`, with `M`
/// the modulus of `chi`.
///
/// The Euler factor uses `p^k`; this is what makes
/// `S_k(chi) = -(2 (k-1)! M^k / (-2 pi i)^k) L(chi, k)` hold.
pub fn s_k_constant(chi: &DirichletCharacter, k: u32, prec: Prec) -> ComplexBig {
    let work = prec + 16;
    if chi.parity() != if k.is_multiple_of(2) { 1 } else { -1 } {
        return ComplexBig::zero(prec);
    }
    let prim = chi.primitive();
    let m = chi.modulus();
    let f = prim.modulus();
    let ratio = Integer::from(m / f).pow(k);
    let b = gen_bernoulli(&prim, k).unwrap().conj().to_complex(work);
    let mut r = prim.gauss_sum(work) * b;
    r = r.scale(&rug::Float::with_val(work, &ratio)).div_i64(k as i64);
    for p in prime_divisors(m) {
        let pk = rug::Float::with_val(work, Integer::from(p).pow(k));
        let v = prim.value(p as i64, work);
        let factor = ComplexBig::one(work) - v.scale(&pk.recip());
        r = r * factor;
    }
    r.with_prec(prec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chi_m4() -> DirichletCharacter {
        DirichletCharacter::conrey(4, 3).unwrap()
    }

    #[test]
    fn conrey_basics() {
        let c = chi_m4();
        assert_eq!(c.parity(), -1);
        assert_eq!(c.conductor(), 4);
        assert_eq!(c.value_real(3), Some(-1));
        let c8 = DirichletCharacter::conrey(8, 5).unwrap();
        assert_eq!((c8.parity(), c8.conductor()), (1, 8));
        let c87 = DirichletCharacter::conrey(8, 7).unwrap();
        assert_eq!(c87.conductor(), 4);
        assert_eq!(c87.primitive().label(), CharLabel { modulus: 4, index: 3 });
        assert_eq!(DirichletCharacter::trivial(1).value_real(0), Some(1));
    }

    #[test]
    fn multiplicative_and_zero_pattern() {
        for n in [1u64, 5, 8, 9, 12, 15, 16, 20, 21, 24, 25, 27, 36] {
            for chi in DirichletCharacter::all(n) {
                for a in 0..n as i64 {
                    assert_eq!(chi.exp_over_order(a).is_none(), gcd(a as u64, n) != 1 && n > 1);
                    for b in 0..n as i64 {
                        if let (Some(x), Some(y)) = (chi.exp_over_order(a), chi.exp_over_order(b)) {
                            assert_eq!(chi.exp_over_order(a * b), Some((x + y) % chi.order()));
                        }
                    }
                }
                assert_eq!(n % chi.conductor(), 0);
                let p = chi.primitive();
                for a in 0..n as i64 {
                    if let Some(x) = chi.value_q(a) {
                        assert_eq!(p.value_q(a), Some(x));
                    }
                }
            }
        }
    }

    #[test]
    fn labels_round_trip_through_tables() {
        for n in [7u64, 8, 16, 24, 45] {
            for chi in DirichletCharacter::all(n) {
                let back = DirichletCharacter::from_table(n, chi.order(), &chi.table);
                assert_eq!(back.label(), chi.label());
            }
        }
    }

    #[test]
    fn count_primitive() {
        // number of primitive characters mod f: 1,0,1,1,3,0,5,2,4,...
        let counts: Vec<usize> = (1..=9).map(|f| DirichletCharacter::primitive_of_conductor(f).len()).collect();
        assert_eq!(counts, vec![1, 0, 1, 1, 3, 0, 5, 2, 4]);
    }

    #[test]
    fn decompose_examples() {
        let t = DirichletCharacter::trivial(12);
        let (a, b) = t.decompose(4).unwrap();
        assert!(a.is_trivial() && b.is_trivial() && a.modulus() == 4 && b.modulus() == 3);
        let chi3 = DirichletCharacter::conrey(3, 2).unwrap();
        let prod = chi_m4().mul(&chi3);
        let (a, b) = prod.decompose(4).unwrap();
        assert_eq!(a.label(), chi_m4().label());
        assert_eq!(b.label(), chi3.label());
        let (a, b) = prod.decompose(1).unwrap();
        assert_eq!(a.modulus(), 1);
        assert_eq!(b.label(), prod.label());
        assert!(prod.decompose(2).is_err());
    }

    #[test]
    fn gauss_sum_examples() {
        let p = 128;
        assert!((DirichletCharacter::trivial(1).gauss_sum(p) - ComplexBig::one(p)).abs_f64() < 1e-35);
        let g = chi_m4().gauss_sum(p);
        assert!((g - ComplexBig::from_f64(0.0, 2.0, p)).abs_f64() < 1e-35);
        let g3 = DirichletCharacter::conrey(3, 2).unwrap().gauss_sum(p);
        assert!((g3.im.to_f64() - 3f64.sqrt()).abs() < 1e-15 && g3.re.to_f64().abs() < 1e-35);
        for f in 3..=30 {
            for chi in DirichletCharacter::primitive_of_conductor(f) {
                let n = chi.gauss_sum(p).norm_sqr() - rug::Float::with_val(p, f);
                assert!(n.abs().to_f64() < 2f64.powi(-120), "f={f}");
            }
        }
    }

    #[test]
    fn bernoulli_examples() {
        let t = DirichletCharacter::trivial(1);
        assert_eq!(gen_bernoulli(&t, 4).unwrap().as_rational(), Some(Rational::from((-1, 30))));
        assert_eq!(gen_bernoulli(&t, 2).unwrap().as_rational(), Some(Rational::from((1, 6))));
        assert_eq!(gen_bernoulli(&t, 1).unwrap().as_rational(), Some(Rational::from((1, 2))));
        assert_eq!(gen_bernoulli(&chi_m4(), 1).unwrap().as_rational(), Some(Rational::from((-1, 2))));
        assert!(gen_bernoulli(&t, 0).is_err());
    }

    #[test]
    fn s_k_examples() {
        let p = 128;
        let s = s_k_constant(&DirichletCharacter::trivial(1), 2, p);
        assert!((s.re.to_f64() - 1.0 / 12.0).abs() < 1e-30);
        // (2)^2 (1/12) (1 - 1/2^2)
        let s = s_k_constant(&DirichletCharacter::trivial(2), 2, p);
        assert!((s.re.to_f64() - 0.25).abs() < 1e-30);
        assert!(s_k_constant(&chi_m4(), 2, p).is_zero());
    }
}
