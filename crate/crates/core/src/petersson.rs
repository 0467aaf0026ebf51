//! Petersson products `<f, g> = (1/[Gamma : Gamma0(N)]) int f conj(g) y^k dmu` from the
//! expansions of `f` and `g` at every cusp.
//!
//! Period polynomials `P(a, b, F)(X) = int_a^b (X - tau)^{k-2} F(tau) dtau` are stored by
//! their coefficients of `X^0 .. X^{k-2}`, so that `[X^{k-2-n}] P = (-1)^n C(k-2, n) I_n`
//! with `I_n = int_a^b tau^n F(tau) dtau`.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use num_complex::Complex64;
use rug::ops::Pow;
use rug::{Float, Integer};
use serde::{Deserialize, Serialize};

use crate::arith::{cf_manin_matrices, egcd, Mat2};
use crate::arithchar::DirichletCharacter;
use crate::bgbasis::{expand_all_cosets, expand_at_cusps, BGForm, BgError, CuspExpansion};
use crate::modcurve::{vanishing_set, CosetSystem, ModError};
use crate::num::{float_from_q, pi, tree_sum, ComplexBig, Prec, Q};
use crate::qseries::{float_str, FracQExp};
use crate::specfun::{w_k, SpecError};

pub const NORMALIZATION: &str = "index-normalized";

#[derive(Debug, thiserror::Error)]
pub enum PeterssonError {
    #[error("weight {0} is not an integer >= 2")]
    Weight(Q),
    #[error("forms differ in {0}")]
    Mismatch(&'static str),
    #[error("{form} does not vanish at cusp {cusp}")]
    NotCuspidal { form: &'static str, cusp: String },
    #[error("divergent pair: neither form vanishes at cusp {0}")]
    Divergent(String),
    #[error("frequency must be positive, got {0}")]
    Frequency(Q),
    #[error("expansion at cusp {0} carries non-holomorphic terms")]
    Anomalous(String),
    #[error("quadrature error estimate {err:e} above tolerance {tol:e}")]
    Budget { err: f64, tol: f64 },
    #[error("tolerance {0:e} is below the oracle's floor of 1e-8")]
    Tolerance(f64),
    #[error(transparent)]
    Mod(#[from] ModError),
    #[error(transparent)]
    Bg(#[from] BgError),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

type Result<T> = std::result::Result<T, PeterssonError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    HaberlandCuspidal,
    HaberlandGeneral,
    NelsonCollins,
    QuadratureOracle,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::HaberlandCuspidal => "haberland-cuspidal",
            Method::HaberlandGeneral => "haberland-general",
            Method::NelsonCollins => "nelson-collins",
            Method::QuadratureOracle => "quadrature-oracle",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PeterssonResult {
    pub value: ComplexBig,
    pub method: Method,
    /// Coefficients per form, summed over cusps.
    pub coefficients_used: usize,
    pub error_estimate: f64,
    pub normalization: &'static str,
    pub precision_bits: Prec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeterssonJson {
    pub re: String,
    pub im: String,
    pub method: Method,
    pub coefficients_used: usize,
    pub error_estimate: f64,
    pub normalization: String,
    pub precision_bits: Prec,
}

impl PeterssonResult {
    pub fn to_json(&self) -> PeterssonJson {
        PeterssonJson {
            re: float_str(&self.value.re),
            im: float_str(&self.value.im),
            method: self.method,
            coefficients_used: self.coefficients_used,
            error_estimate: self.error_estimate,
            normalization: self.normalization.to_string(),
            precision_bits: self.precision_bits,
        }
    }
}

/// Expansions of one form at every cusp, and the derived `f | gamma_j` for every coset.
#[derive(Debug, Clone)]
pub struct CosetExpansions {
    pub weight: Q,
    pub character: DirichletCharacter,
    pub cusps: Vec<CuspExpansion>,
    pub cosets: Vec<FracQExp>,
}

impl CosetExpansions {
    pub fn new(sys: &CosetSystem, weight: Q, character: DirichletCharacter, cusps: Vec<CuspExpansion>) -> Self {
        let cosets = expand_all_cosets(sys, &cusps);
        Self { weight, character, cusps, cosets }
    }

    pub fn from_form(form: &BGForm, sys: &CosetSystem, len: &[usize]) -> Result<Self> {
        let cusps = expand_at_cusps(form, sys, &|ci| len[ci])?;
        Ok(Self::new(sys, form.weight, form.character.clone(), cusps))
    }

    pub fn coefficients(&self) -> usize {
        self.cusps.iter().map(|c| c.expansion.len()).sum()
    }

    /// `a self + other`, cusp by cusp.
    pub fn combine(&self, a: &ComplexBig, other: &Self, sys: &CosetSystem) -> Result<Self> {
        let mut cusps = Vec::with_capacity(self.cusps.len());
        for (x, y) in self.cusps.iter().zip(&other.cusps) {
            let e = x.expansion.scaled(a).add(&y.expansion).map_err(|_| PeterssonError::Mismatch("expansion grids"))?;
            cusps.push(CuspExpansion { expansion: e, ..x.clone() });
        }
        Ok(Self::new(sys, self.weight, self.character.clone(), cusps))
    }
}

fn integral_weight(k: Q) -> Result<u32> {
    if !k.is_integer() || k < Q::from_integer(2) {
        return Err(PeterssonError::Weight(k));
    }
    Ok(k.to_integer() as u32)
}

fn check_pair(f: &CosetExpansions, g: &CosetExpansions, sys: &CosetSystem) -> Result<()> {
    if f.weight != g.weight {
        return Err(PeterssonError::Mismatch("weight"));
    }
    if f.cosets.len() != sys.len() || g.cosets.len() != sys.len() {
        return Err(PeterssonError::Mismatch("coset count"));
    }
    for (x, y) in f.cusps.iter().zip(&g.cusps) {
        if x.width != y.width || x.expansion.alpha != y.expansion.alpha || x.expansion.width != y.expansion.width {
            return Err(PeterssonError::Mismatch("expansion grids"));
        }
        if !x.expansion.anomalous.is_empty() || !y.expansion.anomalous.is_empty() {
            return Err(PeterssonError::Anomalous(x.cusp.clone()));
        }
    }
    Ok(())
}

/// Bits of accuracy targeted at working precision `prec`, leaving 32 guard bits.
pub fn target_bits(prec: Prec) -> u32 {
    prec.saturating_sub(32).max(16)
}

// ---------------------------------------------------------------------------
// Period polynomials

/// Polynomial of degree `k - 2` with an absolute bound on each coefficient's error.
#[derive(Debug, Clone)]
pub struct Period {
    pub coeffs: Vec<ComplexBig>,
    pub err: f64,
}

impl Period {
    pub fn zero(k: u32, prec: Prec) -> Self {
        Self { coeffs: vec![ComplexBig::zero(prec); (k - 1) as usize], err: 0.0 }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + b).collect(), err: self.err + o.err }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a - b).collect(), err: self.err + o.err }
    }

    pub fn scale(&self, s: &ComplexBig) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| a * s).collect(), err: self.err * s.abs_f64() }
    }

    /// `(P |_{2-k} g)(X) = (cX + d)^{k-2} P(g X)`.
    pub fn slash(&self, g: Mat2) -> Self {
        let m = self.coeffs.len();
        let prec = self.coeffs[0].prec();
        let lin = |u: i64, v: i64, e: usize| -> Vec<Integer> {
            // (u X + v)^e
            let mut p = vec![Integer::from(1)];
            for _ in 0..e {
                let mut q = vec![Integer::new(); p.len() + 1];
                for (i, a) in p.iter().enumerate() {
                    q[i] += Integer::from(a * v);
                    q[i + 1] += Integer::from(a * u);
                }
                p = q;
            }
            p
        };
        let mut out = vec![ComplexBig::zero(prec); m];
        for (i, p) in self.coeffs.iter().enumerate() {
            let a = lin(g.a, g.b, i);
            let c = lin(g.c, g.d, m - 1 - i);
            for (s, x) in a.iter().enumerate() {
                for (t, y) in c.iter().enumerate() {
                    let z = Integer::from(x * y);
                    if z != 0 {
                        out[s + t] += &p.scale(&Float::with_val(prec, &z));
                    }
                }
            }
        }
        let mag = ((g.a.abs() + g.b.abs()).max(g.c.abs() + g.d.abs())) as f64;
        Self { coeffs: out, err: self.err * m as f64 * mag.powi(m as i32 - 1) }
    }

    /// `I_n` for `0 <= n <= k - 2`.
    pub fn moments(&self) -> Vec<ComplexBig> {
        let m = self.coeffs.len();
        (0..m)
            .map(|n| {
                let b = Integer::from(Integer::binomial_u(m as u32 - 1, n as u32));
                let v = self.coeffs[m - 1 - n].scale(&(Float::with_val(self.coeffs[0].prec(), 1) / Float::with_val(self.coeffs[0].prec(), &b)));
                if n % 2 == 1 {
                    -v
                } else {
                    v
                }
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs_f64()).fold(0.0, f64::max)
    }
}

/// `sum_m t_m (X - a)^m` in the monomial basis.
fn shifted_to_monomial(t: &[ComplexBig], a: &ComplexBig) -> Vec<ComplexBig> {
    let prec = a.prec();
    let m = t.len();
    let neg_a = -a.clone();
    let mut out = vec![ComplexBig::zero(prec); m];
    for (deg, tm) in t.iter().enumerate() {
        // (X - a)^deg = sum_i C(deg, i) X^i (-a)^{deg - i}
        let mut pw = ComplexBig::one(prec);
        for i in (0..=deg).rev() {
            let b = Float::with_val(prec, Integer::from(Integer::binomial_u(deg as u32, i as u32)));
            out[i] += &(tm * &pw.scale(&b));
            pw = &pw * &neg_a;
        }
    }
    out
}

/// `int_a^{i oo} (X - tau)^{k-2} e^{2 pi i m tau} dtau`, as coefficients of `X^0 .. X^{k-2}`.
pub fn exp_period_integral(m: Q, a: &ComplexBig, k: u32, prec: Prec) -> Result<Vec<ComplexBig>> {
    if m <= Q::from_integer(0) {
        return Err(PeterssonError::Frequency(m));
    }
    if k < 2 {
        return Err(PeterssonError::Weight(Q::from_integer(k as i64)));
    }
    let two_pi = Float::with_val(prec, pi(prec) * 2u32);
    let z = ComplexBig::i(prec).scale(&(two_pi * float_from_q(m, prec)));
    let e = (&z * a).exp();
    let fact = Float::with_val(prec, Integer::from(Integer::factorial(k - 2)));
    // -e (k-2)! z^{j-k+1} / j! on (X - a)^j
    let t: Vec<ComplexBig> = (0..k - 1)
        .map(|j| {
            let jf = Float::with_val(prec, Integer::from(Integer::factorial(j)));
            -(&e * &z.powi(j as i64 - k as i64 + 1)).scale(&(Float::with_val(prec, &fact / &jf)))
        })
        .collect();
    Ok(shifted_to_monomial(&t, a))
}

/// `P(a, i oo, F)` without the exponent-zero term, which is returned separately.
fn p_inf(f: &FracQExp, a: &ComplexBig, k: u32, prec: Prec) -> (Period, ComplexBig) {
    let m = (k - 1) as usize;
    let two_pi = Float::with_val(prec, pi(prec) * 2u32);
    let two_pi_i = ComplexBig::i(prec).scale(&two_pi);
    let w = f.width as i64;
    let step = (&two_pi_i * a).div_i64(w).exp();
    let mut e = (&two_pi_i * a).scale(&float_from_q(f.alpha, prec)).exp();
    let mut t = vec![ComplexBig::zero(prec); m];
    let mut c0 = ComplexBig::zero(prec);
    let mut last = 0f64;
    let mut abs_sum = 0f64;
    for (n, c) in f.coeffs.iter().enumerate() {
        let lam = f.exponent(n);
        let term = &e.with_prec(prec) * c;
        e = &e * &step;
        if lam == Q::from_integer(0) {
            c0 = c.with_prec(prec);
            continue;
        }
        let z = two_pi_i.scale(&float_from_q(lam, prec));
        let zinv = z.recip();
        let mut zp = zinv.powi(m as i64);
        let mut mag = 0f64;
        for tm in t.iter_mut() {
            let v = &term * &zp;
            mag = mag.max(v.abs_f64());
            *tm += &v;
            zp = &zp * &z;
        }
        abs_sum += mag;
        if n + 4 > f.coeffs.len() {
            last = last.max(mag);
        }
    }
    // -(k-2)! / j! on (X - a)^j
    let fact = Float::with_val(prec, Integer::from(Integer::factorial(k - 2)));
    for (j, tm) in t.iter_mut().enumerate() {
        let jf = Float::with_val(prec, Integer::from(Integer::factorial(j as u32)));
        *tm = -tm.scale(&Float::with_val(prec, &fact / &jf));
    }
    let coeffs = shifted_to_monomial(&t, a);
    let r = step.abs_f64();
    let shift = (1.0 + a.abs_f64()).powi(m as i32 - 1) * 2f64.powi(m as i32);
    let fact_f = fact.to_f64();
    let tail = if r < 1.0 { 2.0 * last * r / (1.0 - r) } else { f64::INFINITY };
    let round = abs_sum * 2f64.powi(-(prec as i32) + 8);
    (Period { coeffs, err: fact_f * shift * (tail + round) }, c0)
}

/// `c0 ((X - a)^{k-1} - (X - b)^{k-1}) / (k - 1)`, the exponent-zero part of `P(a, b, F)`.
fn constant_period(c0: &ComplexBig, a: &ComplexBig, b: &ComplexBig, k: u32, prec: Prec) -> Period {
    let m = k as usize; // degree k - 1 before cancellation
    let mut ta = vec![ComplexBig::zero(prec); m];
    ta[m - 1] = c0.div_i64(k as i64 - 1);
    let pa = shifted_to_monomial(&ta, a);
    let pb = shifted_to_monomial(&ta, b);
    let coeffs: Vec<ComplexBig> = pa.iter().zip(&pb).take(m - 1).map(|(x, y)| x - y).collect();
    Period { coeffs, err: 0.0 }
}

fn mobius(g: Mat2, tau: &ComplexBig) -> ComplexBig {
    let prec = tau.prec();
    let num = tau.scale_i64(g.a) + ComplexBig::from_i64(g.b, prec);
    let den = tau.scale_i64(g.c) + ComplexBig::from_i64(g.d, prec);
    &num / &den
}

/// Endpoint of a period: a point of the upper half-plane, or a cusp `x/y` (`y = 0` for `i oo`).
#[derive(Debug, Clone)]
pub enum Endpoint {
    Interior(ComplexBig),
    Cusp(i64, i64),
}

impl Endpoint {
    pub fn infinity() -> Self {
        Endpoint::Cusp(1, 0)
    }
}

/// Period machinery for one form, with `P(0, i oo, f_j)` cached per coset.
pub struct Periods<'a> {
    ex: &'a CosetExpansions,
    sys: &'a CosetSystem,
    k: u32,
    prec: Prec,
    zero_inf: Vec<OnceLock<Period>>,
}

impl<'a> Periods<'a> {
    pub fn new(ex: &'a CosetExpansions, sys: &'a CosetSystem, prec: Prec) -> Result<Self> {
        let k = integral_weight(ex.weight)?;
        Ok(Self { ex, sys, k, prec, zero_inf: (0..sys.len()).map(|_| OnceLock::new()).collect() })
    }

    fn chi(&self, d: i64) -> ComplexBig {
        self.ex.character.value(d, self.prec)
    }

    /// `P(a, i oo, f_j)`; the caller guarantees `f_j` vanishes at infinity.
    pub fn to_infinity(&self, j: usize, a: &ComplexBig) -> Period {
        p_inf(&self.ex.cosets[j], a, self.k, self.prec).0
    }

    /// Case 4: `P(0, i oo, f_j)`, split at `i t0` with `t0 = sqrt(w(c) / w(S(c)))`.
    pub fn zero_to_infinity(&self, j: usize) -> &Period {
        self.zero_inf[j].get_or_init(|| {
            let prec = self.prec;
            let (jp, delta) = self.sys.s_perm[j];
            let w = self.ex.cosets[j].width as f64;
            let wp = self.ex.cosets[jp].width as f64;
            let t0 = Float::with_val(prec, w / wp).sqrt();
            let hi_pt = ComplexBig::new(Float::new(prec), t0.clone());
            let lo_pt = ComplexBig::new(Float::new(prec), Float::with_val(prec, 1) / t0);
            let hi = self.to_infinity(j, &hi_pt);
            // P(0, i t0, f_j) = -chi(delta) P(i / t0, i oo, f_{S(j)}) | S^{-1}
            let lo = self.to_infinity(jp, &lo_pt).scale(&self.chi(delta.d)).slash(Mat2::S.adj());
            hi.sub(&lo)
        })
    }

    pub fn precompute_zero_inf(&self) {
        crate::par::map_indexed(self.sys.len(), |j| {
            self.zero_to_infinity(j);
        });
    }

    /// `P(x, i oo, f_j)` for a point `x` strictly inside the upper half-plane, including
    /// the constant term, which must vanish.
    fn interior_to_infinity_checked(&self, j: usize, a: &ComplexBig) -> Result<Period> {
        let (p, c0) = p_inf(&self.ex.cosets[j], a, self.k, self.prec);
        if c0.abs_f64() > zero_tol(&self.ex.cosets[j]) {
            return Err(PeterssonError::Divergent(self.sys.cusp_of(j).label()));
        }
        Ok(p)
    }

    /// `P(a, b, f_j)` for interior points.
    pub fn interior(&self, j: usize, a: &ComplexBig, b: &ComplexBig) -> Period {
        let f = &self.ex.cosets[j];
        let (pa, c0) = p_inf(f, a, self.k, self.prec);
        let (pb, _) = p_inf(f, b, self.k, self.prec);
        let p = pa.sub(&pb);
        if c0.is_zero() {
            p
        } else {
            p.add(&constant_period(&c0, a, b, self.k, self.prec))
        }
    }

    /// `f_j | gamma = chi(delta) f_{j'}`.
    fn transport(&self, j: usize, gamma: Mat2) -> (usize, ComplexBig) {
        let (jp, delta) = self.sys.locate(self.sys.reps[j] * gamma);
        (jp, self.chi(delta.d))
    }

    /// Case 5: `P(a, b, f_j)` between cusps by the continued-fraction decomposition.
    pub fn between_cusps(&self, j: usize, a: (i64, i64), b: (i64, i64)) -> Period {
        let (a, b) = (normalize_cusp(a), normalize_cusp(b));
        if a == b {
            return Period::zero(self.k, self.prec);
        }
        if b.1 == 0 {
            return self.between_cusps(j, b, a).scale(&ComplexBig::from_i64(-1, self.prec));
        }
        let (g, u, v) = egcd(a.0, a.1);
        debug_assert_eq!(g, 1);
        let gamma = Mat2::new(a.0, -v, a.1, u);
        let (bn, bd) = b;
        let delta = a.0 * bd - bn * a.1;
        let bp = u * bn + v * bd;
        let (num, den) = if delta < 0 { (-bp, -delta) } else { (bp, delta) };
        let mats = cf_manin_matrices(num, den).expect("positive denominator");
        let terms: Vec<Period> = mats
            .iter()
            .map(|m| {
                let gm = gamma * *m;
                let (jp, chi) = self.transport(j, gm);
                self.zero_to_infinity(jp).scale(&chi).slash(gm.adj())
            })
            .collect();
        terms.iter().skip(1).fold(terms[0].clone(), |acc, p| acc.add(p))
    }

    /// General partial period for the cases that converge.
    pub fn partial(&self, j: usize, a: &Endpoint, b: &Endpoint) -> Result<Period> {
        match (a, b) {
            (Endpoint::Interior(x), Endpoint::Interior(y)) => Ok(self.interior(j, x, y)),
            (Endpoint::Cusp(p, q), Endpoint::Cusp(r, s)) => Ok(self.between_cusps(j, (*p, *q), (*r, *s))),
            (Endpoint::Cusp(..), Endpoint::Interior(_)) => {
                Ok(self.partial(j, b, a)?.scale(&ComplexBig::from_i64(-1, self.prec)))
            }
            (Endpoint::Interior(x), Endpoint::Cusp(p, q)) => {
                let (p, q) = normalize_cusp((*p, *q));
                if q == 0 {
                    return self.interior_to_infinity_checked(j, x);
                }
                // gamma(i oo) = p/q; P(x, gamma oo, f_j) = P(gamma^{-1} x, i oo, f_j | gamma) | gamma^{-1}
                let (_, u, v) = egcd(p, q);
                let gamma = Mat2::new(p, -v, q, u);
                let (jp, chi) = self.transport(j, gamma);
                let x1 = mobius(gamma.adj(), x);
                Ok(self.interior_to_infinity_checked(jp, &x1)?.scale(&chi).slash(gamma.adj()))
            }
        }
    }
}

fn normalize_cusp((x, y): (i64, i64)) -> (i64, i64) {
    if y == 0 {
        return (1, 0);
    }
    let g = num_integer::gcd(x, y);
    let s = if y < 0 { -1 } else { 1 };
    (s * x / g, s * y / g)
}

fn zero_tol(f: &FracQExp) -> f64 {
    f.scale_growth().max(1.0) * 2f64.powi(-(f.prec as i32) / 2)
}

/// `G = sum_n (-1)^n C(k-2, n) I_{k-2-n}(f) conj(I_n(g))`, with an error bound.
fn g_pair(pf: &Period, pg: &Period) -> (ComplexBig, f64) {
    let m = pf.coeffs.len();
    let prec = pf.coeffs[0].prec();
    let mf = pf.moments();
    let mg = pg.moments();
    let mut terms = Vec::with_capacity(m);
    let mut err = 0f64;
    let mut abs = 0f64;
    for n in 0..m {
        let b = Float::with_val(prec, Integer::from(Integer::binomial_u(m as u32 - 1, n as u32)));
        let t = (&mf[m - 1 - n] * &mg[n].conj()).scale(&b);
        let bf = b.to_f64();
        err += bf * (mf[m - 1 - n].abs_f64() * pg.err + pf.err * mg[n].abs_f64() + pf.err * pg.err);
        abs += t.abs_f64();
        terms.push(if n % 2 == 1 { -t } else { t });
    }
    (tree_sum(terms, prec), err + abs * 2f64.powi(-(prec as i32) + 8))
}

/// `1 / (s r (2i)^{k-1})`.
fn haberland_norm(k: u32, s: u64, r: u64, prec: Prec) -> ComplexBig {
    let two_i = ComplexBig::new(Float::new(prec), Float::with_val(prec, 2));
    two_i.powi(k as i64 - 1).scale_i64((s * r) as i64).recip()
}

fn finish(value: ComplexBig, err: f64, method: Method, coefficients_used: usize, prec: Prec) -> PeterssonResult {
    let floor = value.abs_f64().max(f64::MIN_POSITIVE) * 2f64.powi(-(target_bits(prec) as i32));
    PeterssonResult { value, method, coefficients_used, error_estimate: err.max(floor), normalization: NORMALIZATION, precision_bits: prec }
}

fn require_cuspidal(ex: &CosetExpansions, sys: &CosetSystem, name: &'static str) -> Result<()> {
    let e = vanishing_set(sys, &ex.cosets)?;
    if let Some(j) = e.iter().position(|v| !v) {
        return Err(PeterssonError::NotCuspidal { form: name, cusp: sys.cusp_of(j).label() });
    }
    Ok(())
}

/// `6 r (2i)^{k-1} <f, g> = sum_j G_j(0, i oo; -1, 1)` for two cusp forms.
pub fn haberland_cuspidal(f: &CosetExpansions, g: &CosetExpansions, sys: &CosetSystem, prec: Prec) -> Result<PeterssonResult> {
    check_pair(f, g, sys)?;
    let k = integral_weight(f.weight)?;
    require_cuspidal(f, sys, "f")?;
    require_cuspidal(g, sys, "g")?;
    let pf = Periods::new(f, sys, prec)?;
    let pg = Periods::new(g, sys, prec)?;
    pf.precompute_zero_inf();
    pg.precompute_zero_inf();
    let parts = crate::par::map_indexed(sys.len(), |j| {
        let a = pf.zero_to_infinity(j);
        let b = pg.between_cusps(j, (-1, 1), (1, 1));
        g_pair(a, &b)
    });
    let err: f64 = parts.iter().map(|p| p.1).sum();
    let sum = tree_sum(parts.into_iter().map(|p| p.0).collect(), prec);
    let norm = haberland_norm(k, 6, sys.index(), prec);
    let value = &sum * &norm;
    Ok(finish(value, err * norm.abs_f64(), Method::HaberlandCuspidal, f.coefficients().max(g.coefficients()), prec))
}

/// `r (2i)^{k-1} <f, g> = S_1 + S_2 + S_3` over the fundamental domain of the full modular group.
pub fn haberland_general(f: &CosetExpansions, g: &CosetExpansions, sys: &CosetSystem, prec: Prec) -> Result<PeterssonResult> {
    check_pair(f, g, sys)?;
    let k = integral_weight(f.weight)?;
    let e = vanishing_set(sys, &f.cosets)?;
    let eg = vanishing_set(sys, &g.cosets)?;
    if let Some(j) = (0..sys.len()).find(|&j| !e[j] && !eg[j]) {
        return Err(PeterssonError::Divergent(sys.cusp_of(j).label()));
    }
    let pf = Periods::new(f, sys, prec)?;
    let pg = Periods::new(g, sys, prec)?;
    let half = Float::with_val(prec, 0.5);
    let s3 = Float::with_val(prec, 3).sqrt() * &half;
    let rho = ComplexBig::new(-half.clone(), s3.clone());
    let rho1 = ComplexBig::new(half, s3);
    let i = ComplexBig::i(prec);
    let i1 = &i + &ComplexBig::one(prec);
    let parts: Vec<Result<(ComplexBig, f64)>> = crate::par::map_indexed(sys.len(), |j| {
        let sj = sys.s_perm[j].0;
        let (a, b) = if e[j] {
            (pf.interior_to_infinity_checked(j, &rho1)?, pg.interior(j, &i, &i1))
        } else if e[sj] {
            (pf.interior(j, &rho1, &rho), pg.interior_to_infinity_checked(j, &i)?)
        } else {
            // int_{i oo}^0 g_j = -P(0, i oo, g_j)
            let z = pg.zero_to_infinity(j).scale(&ComplexBig::from_i64(-1, prec));
            (pf.interior(j, &rho, &i), z)
        };
        Ok(g_pair(&a, &b))
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    let err: f64 = parts.iter().map(|p| p.1).sum();
    let sum = tree_sum(parts.into_iter().map(|p| p.0).collect(), prec);
    let norm = haberland_norm(k, 1, sys.index(), prec);
    let value = &sum * &norm;
    Ok(finish(value, err * norm.abs_f64(), Method::HaberlandGeneral, f.coefficients().max(g.coefficients()), prec))
}

// ---------------------------------------------------------------------------
// Truncation budgets

fn ln_bits(prec: Prec) -> f64 {
    target_bits(prec) as f64 * std::f64::consts::LN_2 + 10.0
}

/// Smallest `n` with `rate n - growth ln(n + 1) >= need`.
fn solve_budget(rate: f64, growth: f64, need: f64) -> usize {
    let mut n = (need / rate).ceil().max(1.0);
    while rate * n - growth * (n + 1.0).ln() < need {
        n = (n * 1.05).ceil();
    }
    n as usize
}

/// Coefficients per cusp for the Haberland methods: at the points `i t0` of case 4 a coset
/// of width `w` paired with width `w'` converges like `e^{-2 pi n / sqrt(w w')}`, and the
/// points `rho`, `i` of the general route like `e^{-2 pi (sqrt 3 / 2) n / w}`.
pub fn haberland_lengths(sys: &CosetSystem, k: Q, prec: Prec) -> Vec<usize> {
    let need = ln_bits(prec);
    let growth = float_growth(k);
    let mut slow = vec![f64::INFINITY; sys.cusps.len()];
    for (ci, c) in sys.cusps.iter().enumerate() {
        slow[ci] = 3f64.sqrt() / 2.0 / c.width as f64;
    }
    for j in 0..sys.len() {
        let ci = sys.cosets[j].0;
        let cp = sys.cosets[sys.s_perm[j].0].0;
        let s = 1.0 / ((sys.cusps[ci].width * sys.cusps[cp].width) as f64).sqrt();
        slow[ci] = slow[ci].min(s);
        slow[cp] = slow[cp].min(s);
    }
    slow.iter().map(|s| solve_budget(2.0 * std::f64::consts::PI * s, growth, need)).collect()
}

/// Coefficients per cusp for Nelson-Collins: the kernel decays like `e^{-4 pi sqrt(n / w)}`.
pub fn nelson_collins_lengths(sys: &CosetSystem, k: Q, prec: Prec) -> Vec<usize> {
    let need = ln_bits(prec);
    let growth = float_growth(k) + 1.0;
    sys.cusps
        .iter()
        .map(|c| {
            let w = c.width as f64;
            // in m = sqrt(n / w): 4 pi m - 2 growth ln(m + 1) >= need
            let mut m = need / (4.0 * std::f64::consts::PI);
            while 4.0 * std::f64::consts::PI * m - 2.0 * growth * (m + 1.0).ln() < need {
                m += 0.01;
            }
            (w * m * m).ceil() as usize + 1
        })
        .collect()
}

fn float_growth(k: Q) -> f64 {
    (*k.numer() as f64 / *k.denom() as f64).max(1.0)
}

// ---------------------------------------------------------------------------
// Nelson-Collins

/// `<f, g> = (4 (8 pi)^{-(k-1)} / r) sum_c w(c) sum_n a(n) conj(b(n)) x^{1-k} W_k(4 pi sqrt x)`
/// with `x` the exponent of the `n`-th term.
pub fn nelson_collins(f: &CosetExpansions, g: &CosetExpansions, sys: &CosetSystem, prec: Prec) -> Result<PeterssonResult> {
    check_pair(f, g, sys)?;
    let k = f.weight;
    let half = Q::new(1, 2);
    if k < half || !(k * Q::from_integer(2)).is_integer() {
        return Err(PeterssonError::Weight(k));
    }
    let work = prec + 16;
    let bits = target_bits(prec) + 8;
    let kf = float_from_q(k, work);
    let one_minus_k = Float::with_val(work, 1 - &kf);
    let four_pi = Float::with_val(work, pi(work) * 4u32);
    // terms (cusp index, coefficient index)
    let mut jobs = Vec::new();
    for (ci, (cf, cg)) in f.cusps.iter().zip(&g.cusps).enumerate() {
        let n = cf.expansion.len().min(cg.expansion.len());
        let ef = &cf.expansion;
        for i in 0..n {
            let x = ef.exponent(i);
            let p = &ef.coeffs[i] * &cg.expansion.coeffs[i].conj();
            if x == Q::from_integer(0) {
                let tol = zero_tol(ef) * cg.expansion.scale_growth().max(1.0);
                if p.abs_f64() <= tol {
                    continue;
                }
                if k != half {
                    return Err(PeterssonError::Divergent(cf.cusp.clone()));
                }
            }
            jobs.push((ci, x, p));
        }
    }
    let terms: Vec<Result<(ComplexBig, f64)>> = crate::par::map_slice(&jobs, |(ci, x, p)| {
        let w = sys.cusps[*ci].width as i64;
        let t = if *x == Q::from_integer(0) {
            // limit of x^{1/2} W_{1/2}(4 pi sqrt x) as x -> 0
            let two_pi = Float::with_val(work, pi(work) * 2u32);
            p.with_prec(work).scale(&(Float::with_val(work, 4u32) * two_pi.sqrt()).recip())
        } else {
            let xf = float_from_q(*x, work);
            let arg = Float::with_val(work, &four_pi * xf.clone().sqrt());
            let kern = w_k(k, &arg, bits)?;
            let pw = Float::with_val(work, xf.pow(&one_minus_k));
            p.with_prec(work).scale(&Float::with_val(work, &kern * &pw))
        };
        let t = t.scale_i64(w);
        let a = t.abs_f64();
        Ok((t, a))
    });
    let terms = terms.into_iter().collect::<Result<Vec<_>>>()?;
    // tail from the last few terms of each cusp
    let mut tail = 0f64;
    for (ci, c) in f.cusps.iter().enumerate() {
        let w = c.width as f64;
        let idx: Vec<usize> = jobs.iter().enumerate().filter(|(_, j)| j.0 == ci).map(|(i, _)| i).collect();
        if let Some(&li) = idx.last() {
            let last = idx.iter().rev().take(4).map(|&i| terms[i].1).fold(0.0, f64::max);
            let n = jobs[li].1;
            let m = (*n.numer() as f64 / *n.denom() as f64).sqrt();
            let c4 = 4.0 * std::f64::consts::PI;
            tail += 2.0 * last * (2.0 * w / (c4 * c4)) * (1.0 + c4 * m) * w;
        }
    }
    let abs: f64 = terms.iter().map(|t| t.1).sum();
    let sum = tree_sum(terms.into_iter().map(|t| t.0).collect(), work);
    let eight_pi = Float::with_val(work, pi(work) * 8u32);
    let pref = Float::with_val(work, eight_pi.pow(&one_minus_k)) * 4u32 / sys.index();
    let value = sum.scale(&pref).with_prec(prec);
    let pf = pref.to_f64();
    let err = pf * (tail + abs * 2f64.powi(-(bits as i32) + 4));
    Ok(finish(value, err, Method::NelsonCollins, f.coefficients().max(g.coefficients()), prec))
}

/// `sum_{m = +-1 mod 6} m / (e^{2 pi m / sqrt 6} - 1)`, evaluated with the `W_{1/2}` kernel at
/// `x = m^2 / 24`; the value is `1/12`.
pub fn eta_lattice_sum(prec: Prec) -> Result<Float> {
    let work = prec + 16;
    let bits = prec;
    let four_pi = Float::with_val(work, pi(work) * 4u32);
    let inv = Float::with_val(work, pi(work) / 2u32).sqrt().recip();
    let mut terms = Vec::new();
    let mut m = 1u64;
    loop {
        if m % 6 == 1 || m % 6 == 5 {
            let x = Float::with_val(work, m * m) / 24u32;
            let kern = w_k(Q::new(1, 2), &Float::with_val(work, &four_pi * x.sqrt()), bits)?;
            let t = Float::with_val(work, &kern * &inv) * m;
            let small = t.to_f64() < 2f64.powi(-(work as i32));
            terms.push(ComplexBig::from_real(t));
            if small {
                break;
            }
        }
        m += 1;
    }
    Ok(tree_sum(terms, work).re)
}

// ---------------------------------------------------------------------------
// Quadrature oracle

struct F64Exp {
    alpha: f64,
    width: f64,
    coeffs: Vec<Complex64>,
}

impl F64Exp {
    fn new(f: &FracQExp) -> Self {
        let mut coeffs: Vec<Complex64> = f.coeffs.iter().map(|c| c.to_c64()).collect();
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() == 0.0) {
            coeffs.pop();
        }
        Self { alpha: *f.alpha.numer() as f64 / *f.alpha.denom() as f64, width: f.width as f64, coeffs }
    }

    fn eval(&self, x: f64, y: f64) -> Complex64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let tau = Complex64::new(x, y);
        let i = Complex64::i();
        let step = (i * two_pi * tau / self.width).exp();
        let mut e = (i * two_pi * self.alpha * tau).exp();
        let mut s = Complex64::new(0.0, 0.0);
        for c in &self.coeffs {
            s += c * e;
            e *= step;
            if e.norm() < 1e-300 {
                break;
            }
        }
        s
    }

    fn constant(&self) -> Complex64 {
        if self.alpha == 0.0 {
            self.coeffs[0]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

/// `(1/r) sum_j int_F f_j conj(g_j) y^{k-2} dx dy` over the standard fundamental domain by
/// Gauss-Legendre rules in `f64`, with the error estimated by doubling the rule.
pub fn quadrature_oracle(f: &CosetExpansions, g: &CosetExpansions, sys: &CosetSystem, tol: f64) -> Result<PeterssonResult> {
    if tol < 1e-8 {
        return Err(PeterssonError::Tolerance(tol));
    }
    check_pair(f, g, sys)?;
    let k = *f.weight.numer() as f64 / *f.weight.denom() as f64;
    let fs: Vec<F64Exp> = f.cosets.iter().map(F64Exp::new).collect();
    let gs: Vec<F64Exp> = g.cosets.iter().map(F64Exp::new).collect();
    let mut tail_const = Complex64::new(0.0, 0.0);
    let mut wmax = 1f64;
    for j in 0..sys.len() {
        wmax = wmax.max(fs[j].width);
        let c = fs[j].constant() * gs[j].constant().conj();
        let scale = fs[j].coeffs.iter().chain(&gs[j].coeffs).map(|c| c.norm()).fold(1.0, f64::max);
        if c.norm() > 1e-12 * scale * scale {
            if k >= 1.0 {
                return Err(PeterssonError::Divergent(sys.cusp_of(j).label()));
            }
            tail_const += c;
        }
    }
    // non-constant terms decay at least like e^{-2 pi y / w}
    let y_top = (wmax * (1e-4 * tol).ln().abs() / (2.0 * std::f64::consts::PI)).max(3.0).ceil();
    // the integrand and its absolute value, which sets the scale for the stopping rule
    let integrand = |x: f64, y: f64| -> (Complex64, f64) {
        let mut s = Complex64::new(0.0, 0.0);
        let mut a = 0.0;
        for (u, v) in fs.iter().zip(&gs) {
            let t = u.eval(x, y) * v.eval(x, y).conj();
            s += t;
            a += t.norm();
        }
        let yk = y.powf(k - 2.0);
        (s * yk, a * yk)
    };
    let run = |n: usize| -> (Complex64, f64) {
        let gl = gauss_quad::GaussLegendre::new(NonZeroUsize::new(n).unwrap());
        let nodes = gl.as_node_weight_pairs();
        let map = |a: f64, b: f64| nodes.iter().map(move |&(t, w)| ((a + b) / 2.0 + (b - a) / 2.0 * t, w * (b - a) / 2.0));
        let xs: Vec<(f64, f64)> = map(-0.5, 0.0).chain(map(0.0, 0.5)).collect();
        let add = |acc: (Complex64, f64), (v, a): (Complex64, f64), w: f64| (acc.0 + v * w, acc.1 + a * w);
        let zero = (Complex64::new(0.0, 0.0), 0.0);
        // upper strip y in [1, y_top], unit segments
        let segs: Vec<(f64, f64)> = (1..y_top as usize).map(|s| (s as f64, s as f64 + 1.0)).collect();
        let upper: Vec<(Complex64, f64)> = crate::par::map_slice(&segs, |&(a, b)| {
            let mut s = zero;
            for (y, wy) in map(a, b) {
                for &(x, wx) in &xs {
                    s = add(s, integrand(x, y), wx * wy);
                }
            }
            s
        });
        // lower region sqrt(1 - x^2) <= y <= 1
        let lower: Vec<(Complex64, f64)> = crate::par::map_slice(&xs, |&(x, wx)| {
            let mut s = zero;
            for (y, wy) in map((1.0 - x * x).sqrt(), 1.0) {
                s = add(s, integrand(x, y), wx * wy);
            }
            s
        });
        upper.iter().chain(&lower).fold(zero, |acc, &t| add(acc, t, 1.0))
    };
    let tail = if tail_const.norm() > 0.0 { tail_const * (y_top.powf(k - 1.0) / (1.0 - k)) } else { Complex64::new(0.0, 0.0) };
    let r = sys.index() as f64;
    let mut n = 24;
    let (v, _) = run(n);
    let mut prev = (v + tail) / r;
    loop {
        n *= 2;
        let (v, abs) = run(n);
        let cur = (v + tail) / r;
        let scale = abs / r + tail.norm() / r;
        let err = (cur - prev).norm().max(scale * 1e-14);
        if err <= tol * scale {
            let value = ComplexBig::from_f64(cur.re, cur.im, 64);
            return Ok(PeterssonResult {
                value,
                method: Method::QuadratureOracle,
                coefficients_used: f.coefficients().max(g.coefficients()),
                error_estimate: err,
                normalization: NORMALIZATION,
                precision_bits: 53,
            });
        }
        if n > 200 {
            return Err(PeterssonError::Budget { err: err / scale, tol });
        }
        prev = cur;
    }
}

// ---------------------------------------------------------------------------
// Entry points on BG forms

fn expand_pair(f: &BGForm, g: &BGForm, sys: &CosetSystem, len: &[usize]) -> Result<(CosetExpansions, CosetExpansions)> {
    if f.level != g.level || f.level != sys.n {
        return Err(PeterssonError::Mismatch("level"));
    }
    if f.weight != g.weight {
        return Err(PeterssonError::Mismatch("weight"));
    }
    let fe = CosetExpansions::from_form(f, sys, len)?;
    let ge = CosetExpansions::from_form(g, sys, len)?;
    Ok((fe, ge))
}

pub fn petersson_haberland_cuspidal(f: &BGForm, g: &BGForm, sys: &CosetSystem, prec: Prec) -> Result<PeterssonResult> {
    integral_weight(f.weight)?;
    let (fe, ge) = expand_pair(f, g, sys, &haberland_lengths(sys, f.weight, prec))?;
    haberland_cuspidal(&fe, &ge, sys, prec)
}

pub fn petersson_haberland_general(f: &BGForm, g: &BGForm, sys: &CosetSystem, prec: Prec) -> Result<PeterssonResult> {
    integral_weight(f.weight)?;
    let (fe, ge) = expand_pair(f, g, sys, &haberland_lengths(sys, f.weight, prec))?;
    haberland_general(&fe, &ge, sys, prec)
}

pub fn petersson_nelson_collins(f: &BGForm, g: &BGForm, sys: &CosetSystem, prec: Prec) -> Result<PeterssonResult> {
    let (fe, ge) = expand_pair(f, g, sys, &nelson_collins_lengths(sys, f.weight, prec))?;
    nelson_collins(&fe, &ge, sys, prec)
}

/// Oracle expansions are cut for 64-bit accuracy at `Im tau >= sqrt(3)/2`.
pub fn petersson_quadrature_oracle(f: &BGForm, g: &BGForm, sys: &CosetSystem, tol: f64) -> Result<PeterssonResult> {
    let (fe, ge) = expand_pair(f, g, sys, &haberland_lengths(sys, f.weight, 96))?;
    quadrature_oracle(&fe, &ge, sys, tol)
}

/// Haberland for integral `k >= 2` (the cuspidal route when both forms are cusp forms),
/// Nelson-Collins otherwise.
pub fn auto_method(f: &CosetExpansions, g: &CosetExpansions, sys: &CosetSystem) -> Result<Method> {
    if integral_weight(f.weight).is_err() {
        return Ok(Method::NelsonCollins);
    }
    let ef = vanishing_set(sys, &f.cosets)?;
    let eg = vanishing_set(sys, &g.cosets)?;
    if ef.iter().all(|&v| v) && eg.iter().all(|&v| v) {
        Ok(Method::HaberlandCuspidal)
    } else {
        Ok(Method::HaberlandGeneral)
    }
}

pub fn run_method(method: Method, f: &CosetExpansions, g: &CosetExpansions, sys: &CosetSystem, prec: Prec) -> Result<PeterssonResult> {
    match method {
        Method::HaberlandCuspidal => haberland_cuspidal(f, g, sys, prec),
        Method::HaberlandGeneral => haberland_general(f, g, sys, prec),
        Method::NelsonCollins => nelson_collins(f, g, sys, prec),
        Method::QuadratureOracle => quadrature_oracle(f, g, sys, 1e-6),
    }
}

/// Coefficient budget per cusp for `method`.
pub fn lengths_for(method: Method, sys: &CosetSystem, k: Q, prec: Prec) -> Vec<usize> {
    match method {
        Method::NelsonCollins => nelson_collins_lengths(sys, k, prec),
        Method::QuadratureOracle => haberland_lengths(sys, k, 96),
        _ => haberland_lengths(sys, k, prec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_identity() {
        let s = eta_lattice_sum(128).unwrap();
        let d = (s - Float::with_val(128, 1) / 12u32).abs().to_f64();
        assert!(d < 1e-30, "{d:e}");
    }

    #[test]
    fn exp_period_weight_two() {
        let prec = 128;
        let a = ComplexBig::from_f64(0.3, 1.1, prec);
        let m = Q::new(3, 2);
        let p = exp_period_integral(m, &a, 2, prec).unwrap();
        let z = ComplexBig::i(prec).scale(&(Float::with_val(prec, pi(prec) * 3u32)));
        let want = -(&(&z * &a).exp() / &z);
        assert!((&p[0] - &want).abs_f64() < 1e-35);
        assert!(exp_period_integral(Q::from_integer(0), &a, 4, prec).is_err());
    }

    #[test]
    fn period_slash_is_action() {
        let prec = 96;
        let p = Period { coeffs: (0..5).map(|i| ComplexBig::from_f64(i as f64 - 1.5, 0.25 * i as f64, prec)).collect(), err: 0.0 };
        let g = Mat2::new(2, 1, 5, 3);
        let h = Mat2::new(1, -2, 1, -1);
        let a = p.slash(g).slash(h);
        let b = p.slash(g * h);
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).abs_f64() < 1e-20);
        }
    }
}
