//! Integral q-expansions of a few standard forms, bundled as JSON and regenerable from
//! eta products and divisor sums.

use rug::ops::Pow;
use rug::Integer;
use serde::{Deserialize, Serialize};

use crate::arithchar::DirichletCharacter;
use crate::num::{Prec, Q};
use crate::qseries::{parse_q, FracQExp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub id: String,
    pub level: u64,
    pub weight: String,
    pub character: (u64, u64),
    /// Coefficients of `q^0, q^1, ...` as decimal strings.
    pub coeffs: Vec<String>,
}

impl Fixture {
    pub fn weight_q(&self) -> Q {
        parse_q(&self.weight).expect("bundled weight")
    }

    pub fn character(&self) -> DirichletCharacter {
        DirichletCharacter::conrey(self.character.0, self.character.1).expect("bundled character")
    }

    pub fn integers(&self) -> Vec<Integer> {
        self.coeffs.iter().map(|s| s.parse().expect("bundled coefficient")).collect()
    }

    pub fn expansion(&self, prec: Prec) -> FracQExp {
        let coeffs = self.integers().iter().map(|z| crate::num::ComplexBig::from_integer(z, prec)).collect();
        FracQExp::new(Q::from_integer(0), 1, self.weight_q(), coeffs, prec)
    }
}

pub const IDS: [&str; 5] = ["delta", "11a", "theta", "e4", "e6"];

const BUNDLED: [(&str, &str); 5] = [
    ("delta", include_str!("../fixtures/delta.json")),
    ("11a", include_str!("../fixtures/11a.json")),
    ("theta", include_str!("../fixtures/theta.json")),
    ("e4", include_str!("../fixtures/e4.json")),
    ("e6", include_str!("../fixtures/e6.json")),
];

pub fn bundled(id: &str) -> Option<Fixture> {
    BUNDLED.iter().find(|(k, _)| *k == id).map(|(_, s)| serde_json::from_str(s).expect("bundled fixture parses"))
}

/// `prod_i eta(d_i tau)^{r_i}` as coefficients of `q^{s + n}`, where `s = sum d_i r_i / 24`
/// must be a nonnegative integer; returns the coefficients from `q^0`.
pub fn eta_product(factors: &[(u64, i32)], len: usize) -> Vec<Integer> {
    let s: i64 = factors.iter().map(|&(d, r)| d as i64 * r as i64).sum();
    assert!(s % 24 == 0 && s >= 0, "eta product must have integral order at infinity");
    let shift = (s / 24) as usize;
    let mut f = vec![Integer::new(); len];
    if shift >= len {
        return f;
    }
    let m = len - shift;
    f[shift] = Integer::from(1);
    let mut series = vec![Integer::new(); m];
    series[0] = Integer::from(1);
    for &(d, r) in factors {
        // prod (1 - q^{dn})^{|r|}, then invert if r < 0
        let mut p = vec![Integer::new(); m];
        p[0] = Integer::from(1);
        let d = d as usize;
        for _ in 0..r.unsigned_abs() {
            for n in (1..).map(|n| n * d).take_while(|&e| e < m) {
                for j in (n..m).rev() {
                    let t = p[j - n].clone();
                    p[j] -= t;
                }
            }
        }
        if r < 0 {
            p = inverse(&p);
        }
        series = mul_trunc(&series, &p);
    }
    f[shift..].clone_from_slice(&series);
    f
}

fn mul_trunc(a: &[Integer], b: &[Integer]) -> Vec<Integer> {
    let m = a.len();
    let mut out = vec![Integer::new(); m];
    for (i, x) in a.iter().enumerate().filter(|(_, x)| **x != 0) {
        for j in 0..m - i {
            out[i + j] += Integer::from(x * &b[j]);
        }
    }
    out
}

/// Inverse of a series with constant term 1.
fn inverse(p: &[Integer]) -> Vec<Integer> {
    let m = p.len();
    let mut out = vec![Integer::new(); m];
    out[0] = Integer::from(1);
    for n in 1..m {
        let mut s = Integer::new();
        for j in 1..=n {
            s += Integer::from(&p[j] * &out[n - j]);
        }
        out[n] = -s;
    }
    out
}

/// `1 + c sum sigma_{k-1}(n) q^n`.
fn level_one_eisenstein(k: u32, c: i64, len: usize) -> Vec<Integer> {
    let mut out = vec![Integer::new(); len];
    if len > 0 {
        out[0] = Integer::from(1);
    }
    for (n, x) in out.iter_mut().enumerate().skip(1) {
        let mut s = Integer::new();
        for d in crate::arith::divisors(n as u64) {
            s += Integer::from(d).pow(k - 1);
        }
        *x = s * c;
    }
    out
}

fn theta_coeffs(len: usize) -> Vec<Integer> {
    let mut out = vec![Integer::new(); len];
    let mut n = 0usize;
    while n * n < len {
        out[n * n] = Integer::from(if n == 0 { 1 } else { 2 });
        n += 1;
    }
    out
}

/// Regenerate a bundled fixture with `len` coefficients.
pub fn generate(id: &str, len: usize) -> Option<Fixture> {
    let (level, weight, character, coeffs) = match id {
        "delta" => (1, "12", (1, 1), eta_product(&[(1, 24)], len)),
        "11a" => (11, "2", (1, 1), eta_product(&[(1, 2), (11, 2)], len)),
        "theta" => (4, "1/2", (1, 1), theta_coeffs(len)),
        "e4" => (1, "4", (1, 1), level_one_eisenstein(4, 240, len)),
        "e6" => (1, "6", (1, 1), level_one_eisenstein(6, -504, len)),
        _ => return None,
    };
    Some(Fixture { id: id.into(), level, weight: weight.into(), character, coeffs: coeffs.iter().map(|z| z.to_string()).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_matches_generator() {
        for id in IDS {
            let b = bundled(id).unwrap();
            assert_eq!(b.coeffs.len(), 50);
            assert_eq!(Some(b), generate(id, 50), "{id}");
        }
    }

    #[test]
    fn known_coefficients() {
        let d = eta_product(&[(1, 24)], 8);
        let want = [0i64, 1, -24, 252, -1472, 4830, -6048, -16744];
        assert!(d.iter().zip(want).all(|(a, b)| *a == b));
        let e = eta_product(&[(1, 2), (11, 2)], 8);
        let want = [0i64, 1, -2, -1, 2, 1, 2, -2];
        assert!(e.iter().zip(want).all(|(a, b)| *a == b));
        // eta(2 tau)^5 / (eta(tau)^2 eta(4 tau)^2) = theta
        let t = eta_product(&[(2, 5), (1, -2), (4, -2)], 30);
        assert_eq!(t, theta_coeffs(30));
    }
}
