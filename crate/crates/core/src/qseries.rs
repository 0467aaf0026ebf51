//! Expansions `q^alpha sum_n a(n) q^{n/w}` with `q^x = e^{2 pi i tau x}`.
//!
//! Exponents are exact rationals. Every expansion carries its reliable length: the
//! coefficients past it are unknown, and binary operations propagate that bound
//! instead of padding with zeros.

use num_integer::Integer as _;
use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::arith::{gcd, lcm};
use crate::num::{frac, root_of_unity, tree_sum, ComplexBig, Prec, Q};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QExpError {
    #[error("weights differ: {0} vs {1}")]
    WeightMismatch(Q, Q),
    #[error("cannot multiply an expansion carrying a non-holomorphic 1/(c tau + d) term")]
    AnomalousOperand,
    #[error("divisor has no nonzero coefficient among the known ones")]
    ZeroDivisor,
    #[error("quotient has a nonzero term of negative exponent {0}")]
    NonHolomorphic(Q),
    #[error("upper-triangular matrix needs a > 0 and d > 0")]
    BadMatrix,
    #[error("truncation too short: tail bound {tail:e} exceeds tolerance {tol:e}")]
    Truncation { tail: f64, tol: f64 },
    #[error("malformed serialized expansion: {0}")]
    Parse(String),
    #[error("coefficient at exponent {0} is off the requested grid and not negligible")]
    OffGrid(Q),
}

/// A term `lambda/(c tau + d)`, produced only by the weight-2 quasimodular series.
#[derive(Debug, Clone, PartialEq)]
pub struct Anomalous {
    pub lambda: ComplexBig,
    pub c: i64,
    pub d: i64,
}

impl Anomalous {
    fn normalized(mut self) -> Self {
        let g = gcd(self.c, self.d).max(1);
        let s = if self.c < 0 || (self.c == 0 && self.d < 0) { -1 } else { 1 };
        self.lambda = self.lambda.div_i64(g * s);
        self.c /= g * s;
        self.d /= g * s;
        self
    }
}

#[derive(Clone, PartialEq)]
pub struct FracQExp {
    pub alpha: Q,
    pub width: u64,
    pub weight: Q,
    pub coeffs: Vec<ComplexBig>,
    pub anomalous: Vec<Anomalous>,
    pub prec: Prec,
}

impl std::fmt::Debug for FracQExp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "q^{} [w={}, k={}] ", self.alpha, self.width, self.weight)?;
        f.debug_list().entries(self.coeffs.iter().take(8)).finish()?;
        if self.coeffs.len() > 8 {
            write!(f, " ..({})", self.coeffs.len())?;
        }
        if !self.anomalous.is_empty() {
            write!(f, " + anomalous{:?}", self.anomalous)?;
        }
        Ok(())
    }
}

fn ceil_q(x: Q) -> i64 {
    x.ceil().to_integer()
}

/// `2^{-prec/2}` times `scale`: values below are numerically zero.
pub fn zero_threshold(prec: Prec, scale: f64) -> f64 {
    scale.max(1e-300) * 2f64.powi(-(prec as i32) / 2)
}

impl FracQExp {
    pub fn new(alpha: Q, width: u64, weight: Q, coeffs: Vec<ComplexBig>, prec: Prec) -> Self {
        assert!(width >= 1);
        assert!(alpha >= Q::from_integer(0) && alpha < Q::from_integer(1));
        Self { alpha, width, weight, coeffs, anomalous: Vec::new(), prec }
    }

    /// The constant `c` known to infinite order, represented with `len` coefficients.
    pub fn constant(c: ComplexBig, weight: Q, len: usize) -> Self {
        let prec = c.prec();
        let mut coeffs = vec![ComplexBig::zero(prec); len.max(1)];
        coeffs[0] = c;
        Self::new(Q::from_integer(0), 1, weight, coeffs, prec)
    }

    pub fn from_i64(coeffs: &[i64], weight: Q, prec: Prec) -> Self {
        Self::new(Q::from_integer(0), 1, weight, coeffs.iter().map(|&c| ComplexBig::from_i64(c, prec)).collect(), prec)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn exponent(&self, n: usize) -> Q {
        self.alpha + Q::new(n as i64, self.width as i64)
    }

    /// Exclusive bound on the exponents with known coefficients.
    pub fn horizon(&self) -> Q {
        self.exponent(self.coeffs.len())
    }

    pub fn coeff_at(&self, x: Q) -> Option<&ComplexBig> {
        let t = (x - self.alpha) * Q::from_integer(self.width as i64);
        if !t.is_integer() || t < Q::from_integer(0) {
            return None;
        }
        self.coeffs.get(t.to_integer() as usize)
    }

    pub fn scale_max(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs_f64()).fold(0.0, f64::max)
    }

    /// Largest `|a_n| / (1 + x_n)^{k-1}` over exponents `x_n`: the coefficient size with
    /// the polynomial growth of a weight `k` form divided out.
    pub fn scale_growth(&self) -> f64 {
        let g = (*self.weight.numer() as f64 / *self.weight.denom() as f64 - 1.0).max(0.0);
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let x = self.exponent(i);
                c.abs_f64() / (1.0 + *x.numer() as f64 / *x.denom() as f64).powf(g)
            })
            .fold(0.0, f64::max)
    }

    pub fn truncate(&mut self, len: usize) {
        self.coeffs.truncate(len);
    }

    pub fn scaled(&self, s: &ComplexBig) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c = &*c * s;
        }
        for a in out.anomalous.iter_mut() {
            a.lambda = &a.lambda * s;
        }
        out
    }

    pub fn anomalous_norm(&self) -> f64 {
        self.anomalous.iter().map(|a| a.lambda.abs_f64()).sum()
    }

    /// Re-express on the grid `alpha' + n/w'`, which must contain every known exponent.
    pub fn on_grid(&self, alpha: Q, width: u64) -> Result<Self, QExpError> {
        let w = width as i64;
        let start = (self.alpha - alpha) * Q::from_integer(w);
        let step = Q::new(w, self.width as i64);
        if !start.is_integer() || !step.is_integer() || start < Q::from_integer(0) {
            return Err(QExpError::OffGrid(self.alpha));
        }
        let (s, st) = (start.to_integer() as usize, step.to_integer() as usize);
        let len = ceil_q((self.horizon() - alpha) * Q::from_integer(w)).max(0) as usize;
        let mut coeffs = vec![ComplexBig::zero(self.prec); len];
        for (n, c) in self.coeffs.iter().enumerate() {
            coeffs[s + n * st] = c.clone();
        }
        Ok(Self { alpha, width, weight: self.weight, coeffs, anomalous: self.anomalous.clone(), prec: self.prec })
    }

    /// Coarsen to the grid `alpha' + n/w'`, dropping coefficients that are numerically zero.
    pub fn coarsen(&self, alpha: Q, width: u64) -> Result<Self, QExpError> {
        let thr = zero_threshold(self.prec, self.scale_max());
        let mut coeffs = Vec::new();
        let mut last_ok = 0usize;
        let mut n = 0usize;
        loop {
            let x = alpha + Q::new(n as i64, width as i64);
            if x >= self.horizon() {
                break;
            }
            coeffs.push(self.coeff_at(x).cloned().unwrap_or_else(|| ComplexBig::zero(self.prec)));
            last_ok = n + 1;
            n += 1;
        }
        coeffs.truncate(last_ok);
        for (i, c) in self.coeffs.iter().enumerate() {
            let x = self.exponent(i);
            let t = (x - alpha) * Q::from_integer(width as i64);
            if (!t.is_integer() || t < Q::from_integer(0)) && c.abs_f64() > thr {
                return Err(QExpError::OffGrid(x));
            }
        }
        Ok(Self { alpha, width, weight: self.weight, coeffs, anomalous: self.anomalous.clone(), prec: self.prec })
    }

    /// Index of the first coefficient above the numeric-zero threshold.
    pub fn leading_index(&self) -> Option<usize> {
        let thr = zero_threshold(self.prec, self.scale_max());
        self.coeffs.iter().position(|c| c.abs_f64() > thr)
    }

    pub fn add(&self, other: &Self) -> Result<Self, QExpError> {
        if self.weight != other.weight {
            return Err(QExpError::WeightMismatch(self.weight, other.weight));
        }
        let w = lcm(lcm(self.width, other.width), *(self.alpha - other.alpha).denom() as u64);
        let alpha = self.alpha.min(other.alpha);
        let horizon = self.horizon().min(other.horizon());
        let mut a = self.on_grid(alpha, w)?;
        let b = other.on_grid(alpha, w)?;
        let len = ceil_q((horizon - alpha) * Q::from_integer(w as i64)).max(0) as usize;
        a.coeffs.resize(len, ComplexBig::zero(self.prec));
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs.iter()) {
            *x += y;
        }
        a.prec = self.prec.max(other.prec);
        a.anomalous = merge_anomalous(&self.anomalous, &other.anomalous);
        Ok(a)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, QExpError> {
        self.add(&other.scaled(&ComplexBig::from_i64(-1, other.prec)))
    }

    pub fn mul(&self, other: &Self) -> Result<Self, QExpError> {
        if !self.anomalous.is_empty() || !other.anomalous.is_empty() {
            return Err(QExpError::AnomalousOperand);
        }
        let w = lcm(self.width, other.width);
        let raw = self.alpha + other.alpha;
        let shift = raw.floor().to_integer() as usize * w as usize;
        let alpha = frac(raw);
        let horizon = (self.horizon() + other.alpha).min(other.horizon() + self.alpha);
        let len = ceil_q((horizon - alpha) * Q::from_integer(w as i64)).max(0) as usize;
        let a = self.on_grid(self.alpha, w)?;
        let b = other.on_grid(other.alpha, w)?;
        let prec = self.prec.max(other.prec);
        let coeffs: Vec<ComplexBig> = crate::par::map_indexed(len, |n| {
            if n < shift {
                return ComplexBig::zero(prec);
            }
            let m = n - shift;
            let mut acc = ComplexBig::zero(prec);
            let mut tmp = Float::new(prec);
            for i in 0..=m.min(a.coeffs.len().saturating_sub(1)) {
                if m - i < b.coeffs.len() {
                    crate::num::fma_into(&mut acc, &a.coeffs[i], &b.coeffs[m - i], &mut tmp);
                }
            }
            acc
        });
        Ok(Self { alpha, width: w, weight: self.weight + other.weight, coeffs, anomalous: Vec::new(), prec })
    }

    /// `self / other`; fails if the quotient has a genuine negative-exponent term.
    pub fn div(&self, other: &Self) -> Result<Self, QExpError> {
        if !self.anomalous.is_empty() || !other.anomalous.is_empty() {
            return Err(QExpError::AnomalousOperand);
        }
        let lead = other.leading_index().ok_or(QExpError::ZeroDivisor)?;
        let beta = other.exponent(lead);
        let w = lcm(self.width, other.width);
        let f = self.on_grid(self.alpha, w)?;
        let g = other.on_grid(other.alpha, w)?;
        let g_lead = (lead as u64 * (w / other.width)) as usize;
        let gs = &g.coeffs[g_lead..];
        // leading zeros of f relax how much of g is needed
        let lf = f.leading_index().unwrap_or(f.coeffs.len());
        let len = f.coeffs.len().min(lf + gs.len());
        let prec = self.prec.max(other.prec);
        let inv0 = gs[0].recip();
        let mut h: Vec<ComplexBig> = Vec::with_capacity(len);
        let mut tmp = Float::new(prec);
        for n in 0..len {
            let mut acc = f.coeffs[n].clone();
            let mut sub = ComplexBig::zero(prec);
            for j in 1..=n.min(gs.len() - 1) {
                crate::num::fma_into(&mut sub, &gs[j], &h[n - j], &mut tmp);
            }
            acc -= &sub;
            h.push(&acc * &inv0);
        }
        let gamma = self.alpha - beta;
        let mut start = 0usize;
        if gamma < Q::from_integer(0) {
            start = ceil_q(-gamma * Q::from_integer(w as i64)) as usize;
            let scale = h.iter().map(|c| c.abs_f64()).fold(0.0, f64::max);
            let thr = zero_threshold(prec, scale.max(self.scale_max() / gs[0].abs_f64()));
            for (i, c) in h.iter().take(start).enumerate() {
                if c.abs_f64() > thr {
                    return Err(QExpError::NonHolomorphic(gamma + Q::new(i as i64, w as i64)));
                }
            }
        }
        let base = gamma + Q::new(start as i64, w as i64);
        let coeffs: Vec<ComplexBig> = h.into_iter().skip(start).collect();
        let out = Self { alpha: base, width: w, weight: self.weight - other.weight, coeffs, anomalous: Vec::new(), prec };
        // base lies in [0, 1) by construction
        debug_assert!(base >= Q::from_integer(0) && base < Q::from_integer(1));
        Ok(out)
    }

    /// `(F |_k U)(tau) = det^{k/2} d^{-k} F((a tau + b)/d)` for `U = (a, b; 0, d)`.
    pub fn slash_upper(&self, a: i64, b: i64, d: i64) -> Result<Self, QExpError> {
        if a <= 0 || d <= 0 {
            return Err(QExpError::BadMatrix);
        }
        let prec = self.prec;
        let ratio = Q::new(a, d);
        let factor = upper_factor(self.weight, a, d, prec);
        let spacing = ratio / Q::from_integer(self.width as i64);
        let w = *spacing.denom() as u64;
        let step = *spacing.numer() as usize;
        let raw = self.alpha * ratio;
        let alpha = frac(raw);
        let shift = raw.floor().to_integer() as usize * w as usize;
        let horizon = self.horizon() * ratio;
        let len = ceil_q((horizon - alpha) * Q::from_integer(w as i64)).max(0) as usize;
        let mut coeffs = vec![ComplexBig::zero(prec); len];
        let bd = Q::new(b, d);
        for (n, c) in self.coeffs.iter().enumerate() {
            let x = self.exponent(n);
            let phase = root_of_unity(x * bd, prec);
            coeffs[shift + n * step] = (c * &phase).scale(&factor);
        }
        let anomalous = self
            .anomalous
            .iter()
            .map(|t| {
                Anomalous { lambda: t.lambda.scale(&factor).scale_i64(d), c: t.c * a, d: t.c * b + t.d * d }.normalized()
            })
            .collect();
        Ok(Self { alpha, width: w, weight: self.weight, coeffs, anomalous, prec })
    }

    /// `F | T^m`: coefficient `a(n)` picks up `e^{2 pi i m (alpha + n/w)}`.
    pub fn t_twist(&self, m: i64) -> Self {
        self.slash_upper(1, m, 1).expect("T^m is admissible")
    }

    /// Value at `tau` with a bound on the omitted tail.
    pub fn eval_with_tail(&self, tau: &ComplexBig) -> (ComplexBig, f64) {
        let prec = self.prec.max(tau.prec());
        let two_pi_i_tau = tau.mul_i().scale(&Float::with_val(prec, crate::num::pi(prec) * 2u32));
        let step = two_pi_i_tau.div_i64(self.width as i64).exp();
        let mut qn = two_pi_i_tau.scale(&crate::num::float_from_q(self.alpha, prec)).exp();
        let mut terms = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            terms.push(c * &qn);
            qn = &qn * &step;
        }
        let mut v = tree_sum(terms, prec);
        for t in &self.anomalous {
            let den = tau.scale_i64(t.c) + ComplexBig::from_i64(t.d, prec);
            v += &(&t.lambda / &den);
        }
        let r = step.abs_f64();
        let tail_coef = self.coeffs.iter().rev().take(5).map(|c| c.abs_f64()).fold(0.0, f64::max);
        let tail = if r >= 1.0 { f64::INFINITY } else { tail_coef * qn.abs_f64() / (1.0 - r) * (self.coeffs.len() as f64 + 1.0) };
        (v, tail)
    }

    pub fn eval(&self, tau: &ComplexBig, tol: f64) -> Result<ComplexBig, QExpError> {
        let (v, tail) = self.eval_with_tail(tau);
        if tail > tol {
            return Err(QExpError::Truncation { tail, tol });
        }
        Ok(v)
    }

    pub fn to_json(&self) -> QExpJson {
        QExpJson {
            alpha: format!("{}/{}", self.alpha.numer(), self.alpha.denom()),
            width: self.width,
            weight: fmt_weight(self.weight),
            prec: self.prec,
            coeffs: self.coeffs.iter().map(|c| [float_str(&c.re), float_str(&c.im)]).collect(),
            anomalous: self
                .anomalous
                .iter()
                .map(|a| AnomalousJson { lambda: [float_str(&a.lambda.re), float_str(&a.lambda.im)], c: a.c, d: a.d })
                .collect(),
        }
    }

    pub fn from_json(j: &QExpJson) -> Result<Self, QExpError> {
        let alpha = parse_q(&j.alpha)?;
        let weight = parse_q(&j.weight)?;
        let parse_c = |p: &[String; 2]| -> Result<ComplexBig, QExpError> {
            Ok(ComplexBig::new(parse_float(&p[0], j.prec)?, parse_float(&p[1], j.prec)?))
        };
        let coeffs = j.coeffs.iter().map(parse_c).collect::<Result<Vec<_>, _>>()?;
        let anomalous = j
            .anomalous
            .iter()
            .map(|a| Ok(Anomalous { lambda: parse_c(&a.lambda)?, c: a.c, d: a.d }))
            .collect::<Result<Vec<_>, QExpError>>()?;
        if j.width == 0 || alpha < Q::from_integer(0) || alpha >= Q::from_integer(1) {
            return Err(QExpError::Parse("alpha must be in [0,1) and width positive".into()));
        }
        Ok(Self { alpha, width: j.width, weight, coeffs, anomalous, prec: j.prec })
    }
}

/// `det^{k/2} d^{-k}` for `(a, b; 0, d)`, a positive real.
fn upper_factor(k: Q, a: i64, d: i64, prec: Prec) -> Float {
    let work = prec + 16;
    // (a d)^{k/2} d^{-k} = (a/d)^{k/2}
    let r = Float::with_val(work, a) / d;
    let v = r.pow(crate::num::float_from_q(k / Q::from_integer(2), work));
    Float::with_val(prec, v)
}

fn merge_anomalous(a: &[Anomalous], b: &[Anomalous]) -> Vec<Anomalous> {
    let mut out: Vec<Anomalous> = a.to_vec();
    for t in b {
        match out.iter_mut().find(|s| s.c == t.c && s.d == t.d) {
            Some(s) => s.lambda += &t.lambda,
            None => out.push(t.clone()),
        }
    }
    out
}

pub fn fmt_weight(k: Q) -> String {
    if k.is_integer() {
        k.to_integer().to_string()
    } else {
        format!("{}/{}", k.numer(), k.denom())
    }
}

pub fn parse_q(s: &str) -> Result<Q, QExpError> {
    let bad = || QExpError::Parse(format!("bad rational {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let (n, d): (i64, i64) = (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?);
            if d == 0 {
                return Err(bad());
            }
            Ok(Q::new(n, d))
        }
        None => Ok(Q::from_integer(s.trim().parse().map_err(|_| bad())?)),
    }
}

/// Shortest decimal string that reads back to the same float at its precision.
pub fn float_str(x: &Float) -> String {
    x.to_string_radix(10, None)
}

pub fn parse_float(s: &str, prec: Prec) -> Result<Float, QExpError> {
    let p = Float::parse(s).map_err(|e| QExpError::Parse(format!("{s:?}: {e}")))?;
    Ok(Float::with_val(prec, p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalousJson {
    pub lambda: [String; 2],
    pub c: i64,
    pub d: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QExpJson {
    pub alpha: String,
    pub width: u64,
    pub weight: String,
    pub prec: Prec,
    pub coeffs: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anomalous: Vec<AnomalousJson>,
}

/// Helper for denominators used by callers that build grids.
pub fn lcm_den(xs: impl IntoIterator<Item = Q>) -> u64 {
    xs.into_iter().fold(1u64, |acc, x| acc.lcm(&(*x.denom() as u64)))
}
