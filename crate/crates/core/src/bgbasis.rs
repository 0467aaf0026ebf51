//! Forms in `M_k(Gamma0(N), chi)` as combinations of products of two Eisenstein series,
//! possibly divided by an auxiliary form (a power of theta or `F_2 - e F_2(e tau)`), and
//! their expansions at every cusp.

use std::collections::HashMap;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::arith::{divisors, gamma0_index, prime_divisors, Mat2};
use crate::arithchar::{CharLabel, DirichletCharacter};
use crate::eisenstein::{e2_diff_slash, eis_slash_any, f_expansion, theta_expansion, theta_slash, EisError, EisLabel, EisParams};
use crate::linalg::{mat_vec, rel_residual, PivotedQr};
use crate::modcurve::CosetSystem;
use crate::num::{float_from_q, ComplexBig, Prec, Q};
use crate::qseries::{FracQExp, QExpError, QExpJson};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BgError {
    #[error("weight {0} is not supported (need k >= 1/2)")]
    Weight(Q),
    #[error("target has {have} coefficients, the solve needs {need}")]
    TooShort { have: usize, need: usize },
    #[error("no product candidates for N = {n}, k = {k}")]
    NoCandidates { n: u64, k: u32 },
    #[error("residual {residual:e} (out-of-sample {oos:e}) above tolerance {tol:e}")]
    Residual { residual: f64, oos: f64, tol: f64 },
    #[error("character modulus {0} does not divide the level {1}")]
    CharLevel(u64, u64),
    #[error("anomalous terms did not cancel: {0:e}")]
    Anomalous(f64),
    #[error(transparent)]
    Eis(#[from] EisError),
    #[error(transparent)]
    QExp(#[from] QExpError),
    #[error("malformed form description: {0}")]
    Parse(String),
}

/// One factor of a product.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Factor {
    One,
    Eis(EisParams),
    /// `F_2(tau) - e F_2(e tau)`.
    E2Diff(u64),
}

impl Factor {
    pub fn weight(&self) -> u32 {
        match self {
            Factor::One => 0,
            Factor::Eis(p) => p.k,
            Factor::E2Diff(_) => 2,
        }
    }

    /// Nebentypus as a character modulo `n`.
    pub fn character(&self, n: u64) -> DirichletCharacter {
        match self {
            Factor::Eis(p) => p.character().extend_to(n).expect("level divides n"),
            _ => DirichletCharacter::trivial(n),
        }
    }

    pub fn at_infinity(&self, horizon: Q, prec: Prec) -> Result<FracQExp, BgError> {
        self.slash(Mat2::I, horizon, prec)
    }

    pub fn slash(&self, gamma: Mat2, horizon: Q, prec: Prec) -> Result<FracQExp, BgError> {
        Ok(match self {
            Factor::One => {
                let len = horizon.ceil().to_integer().max(1) as usize;
                FracQExp::constant(ComplexBig::one(prec), Q::from_integer(0), len)
            }
            Factor::Eis(p) if gamma == Mat2::I => f_expansion(p, horizon, prec),
            Factor::Eis(p) => eis_slash_any(p, gamma, horizon, prec)?,
            Factor::E2Diff(e) => e2_diff_slash(*e, gamma, horizon, prec)?,
        })
    }

    fn to_json(&self) -> FactorJson {
        match self {
            Factor::One => FactorJson::One,
            Factor::Eis(p) => FactorJson::Eis(p.label()),
            Factor::E2Diff(e) => FactorJson::E2Diff(*e),
        }
    }

    fn from_json(j: &FactorJson) -> Result<Self, BgError> {
        Ok(match j {
            FactorJson::One => Factor::One,
            FactorJson::Eis(l) => Factor::Eis(EisParams::from_label(l)?),
            FactorJson::E2Diff(e) => Factor::E2Diff(*e),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BGProduct {
    pub left: Factor,
    pub right: Factor,
}

impl BGProduct {
    pub fn weight(&self) -> u32 {
        self.left.weight() + self.right.weight()
    }
}

/// Auxiliary form `D` with `f D = combination`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divisor {
    ThetaPower(u32),
    E2Diff(u64),
}

impl Divisor {
    pub fn weight(&self) -> Q {
        match self {
            Divisor::ThetaPower(t) => Q::new(*t as i64, 2),
            Divisor::E2Diff(_) => Q::from_integer(2),
        }
    }

    pub fn level(&self) -> u64 {
        match self {
            Divisor::ThetaPower(_) => 4,
            Divisor::E2Diff(e) => *e,
        }
    }

    pub fn at_infinity(&self, horizon: Q, prec: Prec) -> Result<FracQExp, BgError> {
        self.slash(Mat2::I, horizon, prec)
    }

    pub fn slash(&self, gamma: Mat2, horizon: Q, prec: Prec) -> Result<FracQExp, BgError> {
        match self {
            Divisor::ThetaPower(t) => {
                let th = if gamma == Mat2::I { theta_expansion(horizon, prec) } else { theta_slash(gamma, horizon, prec)? };
                let mut acc = th.clone();
                for _ in 1..*t {
                    acc = acc.mul(&th)?;
                }
                Ok(acc)
            }
            Divisor::E2Diff(e) => Ok(e2_diff_slash(*e, gamma, horizon, prec)?),
        }
    }
}

/// Sturm bound `floor(k [Gamma : Gamma0(N)] / 12) + 1`.
pub fn sturm_bound(n: u64, k: u32) -> usize {
    (k as u64 * gamma0_index(n) / 12) as usize + 1
}

/// Eisenstein factors of weight `l` whose level divides `n`; weight 2 includes the
/// differences `F_2 - e F_2(e tau)` in place of the quasimodular `F_2(1, 1, e)`.
pub fn factors(n: u64, l: u32) -> Vec<Factor> {
    if l == 0 {
        return vec![Factor::One];
    }
    let mut out = Vec::new();
    for f1 in divisors(n) {
        for f2 in divisors(n / f1) {
            for e in divisors(n / (f1 * f2)) {
                for c1 in DirichletCharacter::primitive_of_conductor(f1) {
                    for c2 in DirichletCharacter::primitive_of_conductor(f2) {
                        if let Ok(p) = EisParams::new(c1.clone(), c2, l, e) {
                            if !p.is_quasimodular() {
                                out.push(Factor::Eis(p));
                            }
                        }
                    }
                }
            }
        }
    }
    if l == 2 {
        out.extend(divisors(n).into_iter().filter(|e| *e > 1).map(Factor::E2Diff));
    }
    out
}

/// Candidate products `F_l F'_{k-l}` with `l <= k - l`, plus `F_k F_0`, whose character is `chi`.
pub fn enumerate_products(n: u64, k: u32, chi: &DirichletCharacter) -> Vec<BGProduct> {
    let target = chi.extend_to(n).expect("modulus divides N").label();
    let mut out = Vec::new();
    for l in 1..=k / 2 {
        let left = factors(n, l);
        let right = if l == k - l { left.clone() } else { factors(n, k - l) };
        let rchars: Vec<CharLabel> = right.iter().map(|f| f.character(n).label()).collect();
        for (i, a) in left.iter().enumerate() {
            let ca = a.character(n);
            for (j, b) in right.iter().enumerate() {
                if l == k - l && j < i {
                    continue;
                }
                let cb = DirichletCharacter::conrey(rchars[j].modulus, rchars[j].index).unwrap();
                if ca.mul(&cb).label() == target {
                    out.push(BGProduct { left: a.clone(), right: b.clone() });
                }
            }
        }
    }
    for a in factors(n, k) {
        if a.character(n).label() == target {
            out.push(BGProduct { left: a, right: Factor::One });
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct RepresentOpts {
    /// Extra fitted coefficients beyond `max(Sturm bound, rank)`.
    pub margin: usize,
    /// Out-of-sample coefficients checked after the solve.
    pub oos: usize,
    pub tol: f64,
    pub prec: Prec,
}

impl RepresentOpts {
    pub fn new(prec: Prec) -> Self {
        Self { margin: 10, oos: 30, tol: 2f64.powi(-(prec as i32) / 2 + 8), prec }
    }
}

impl Default for RepresentOpts {
    fn default() -> Self {
        Self::new(crate::num::DEFAULT_PREC)
    }
}

/// A solved representation `f = (sum_i x_i P_i) / D`.
#[derive(Debug, Clone)]
pub struct BGForm {
    pub weight: Q,
    pub level: u64,
    pub character: DirichletCharacter,
    pub combination: Vec<(ComplexBig, BGProduct)>,
    pub divisor: Option<Divisor>,
    pub residual: f64,
    pub oos_residual: f64,
    pub oos_rows: usize,
    pub coefficients_used: usize,
    pub prec: Prec,
}

fn is_half_integral(k: Q) -> bool {
    !k.is_integer() && (k * Q::from_integer(2)).is_integer()
}

/// Smallest odd `t` with `k + t/2` integral and at least 3.
fn theta_power_for(k: Q) -> u32 {
    let mut t = 1u32;
    while k + Q::new(t as i64, 2) < Q::from_integer(3) {
        t += 2;
    }
    t
}

fn chi_minus4(n: u64) -> DirichletCharacter {
    DirichletCharacter::conrey(4, 3).unwrap().extend_to(n).unwrap()
}

/// Character of `f D` for the divisor `D`.
fn lifted_character(chi: &DirichletCharacter, n: u64, div: Option<Divisor>, lifted_k: u32) -> DirichletCharacter {
    match div {
        Some(Divisor::ThetaPower(_)) => chi.mul(&chi_minus4(n).pow(lifted_k as u64)).extend_to(n).unwrap(),
        _ => chi.extend_to(n).unwrap(),
    }
}

/// Row weights `(n+1)^{-(k-1)}` balance the growth of Eisenstein coefficients.
fn row_weights(rows: usize, k: u32, prec: Prec) -> Vec<rug::Float> {
    (0..rows).map(|n| rug::Float::with_val(prec, n + 1).pow_i(-(k as i32 - 1).max(0))).collect()
}

trait PowI {
    fn pow_i(self, e: i32) -> rug::Float;
}

impl PowI for rug::Float {
    fn pow_i(self, e: i32) -> rug::Float {
        use rug::ops::Pow;
        self.pow(e)
    }
}

fn integral_coeffs(f: &FracQExp, rows: usize, prec: Prec) -> Result<Vec<ComplexBig>, BgError> {
    let g = f.coarsen(Q::from_integer(0), 1)?;
    if g.coeffs.len() < rows {
        return Err(BgError::TooShort { have: g.coeffs.len(), need: rows });
    }
    Ok(g.coeffs[..rows].iter().map(|c| c.with_prec(prec)).collect())
}

fn product_at_infinity(p: &BGProduct, horizon: Q, prec: Prec) -> Result<FracQExp, BgError> {
    let a = p.left.at_infinity(horizon, prec)?;
    let b = p.right.at_infinity(horizon, prec)?;
    Ok(a.mul(&b)?)
}

/// Solve `target = sum x_i P_i` for integral weight `k` at level `n`.
fn solve_integral(target: &FracQExp, n: u64, k: u32, chi: &DirichletCharacter, opts: &RepresentOpts) -> Result<(Vec<(ComplexBig, BGProduct)>, f64, f64, usize, usize), BgError> {
    let work = opts.prec + 64;
    let cands = enumerate_products(n, k, chi);
    if cands.is_empty() {
        return Err(BgError::NoCandidates { n, k });
    }
    let sturm = sturm_bound(n, k);
    let sel_rows = sturm + opts.margin;
    let h_sel = Q::from_integer(sel_rows as i64);
    let sel: Vec<Result<Vec<ComplexBig>, BgError>> =
        crate::par::map_slice(&cands, |p| integral_coeffs(&product_at_infinity(p, h_sel, work)?, sel_rows, work));
    let wts = row_weights(sel_rows, k, work);
    let mut cols = Vec::with_capacity(cands.len());
    for c in sel {
        cols.push(c?.into_iter().zip(&wts).map(|(x, w)| x.scale(w)).collect::<Vec<_>>());
    }
    let qr = PivotedQr::new(&cols, 2f64.powi(-(opts.prec as i32) / 2), work);
    let chosen: Vec<BGProduct> = qr.pivots().iter().map(|&i| cands[i].clone()).collect();
    debug!("{} candidates, rank {} (Sturm bound {})", cands.len(), qr.rank, sturm);

    let fit = sturm.max(qr.rank) + opts.margin;
    let have = target.coarsen(Q::from_integer(0), 1)?.coeffs.len();
    if have < fit {
        return Err(BgError::TooShort { have, need: fit });
    }
    let oos = opts.oos.min(have - fit);
    if oos < opts.oos {
        warn!("only {oos} out-of-sample coefficients available (wanted {})", opts.oos);
    }
    let total = fit + oos;
    let h_tot = Q::from_integer(total as i64);
    let cols_full: Vec<Vec<ComplexBig>> = crate::par::map_slice(&chosen, |p| integral_coeffs(&product_at_infinity(p, h_tot, work)?, total, work))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let b_full = integral_coeffs(target, total, work)?;
    let wts = row_weights(total, k, work);
    let scaled = |v: &[ComplexBig], r: std::ops::Range<usize>| -> Vec<ComplexBig> { v[r.clone()].iter().zip(&wts[r]).map(|(x, w)| x.scale(w)).collect() };
    let a_fit: Vec<Vec<ComplexBig>> = cols_full.iter().map(|c| scaled(c, 0..fit)).collect();
    let b_fit = scaled(&b_full, 0..fit);
    let qr = PivotedQr::new(&a_fit, 2f64.powi(-(opts.prec as i32) / 2), work);
    let x = qr.solve(&b_fit);
    let residual = rel_residual(&mat_vec(&a_fit, &x, work), &b_fit, work);
    let oos_residual = if oos > 0 {
        let a_oos: Vec<Vec<ComplexBig>> = cols_full.iter().map(|c| scaled(c, fit..total)).collect();
        let b_oos = scaled(&b_full, fit..total);
        let bn: f64 = b_fit.iter().map(|c| c.abs_f64().powi(2)).sum::<f64>().sqrt();
        let on: f64 = b_oos.iter().map(|c| c.abs_f64().powi(2)).sum::<f64>().sqrt();
        // relative to the fitted part when the tail itself is tiny
        rel_residual(&mat_vec(&a_oos, &x, work), &b_oos, work) * on / on.max(bn * 1e-3).max(1e-300)
    } else {
        0.0
    };
    let combination = x.into_iter().zip(chosen).filter(|(c, _)| !c.is_zero()).collect();
    Ok((combination, residual, oos_residual, fit, oos))
}

/// Represent `target` (expansion at infinity) as an element of `M_k(Gamma0(N), chi)`.
pub fn represent(target: &FracQExp, n: u64, chi: &DirichletCharacter, opts: &RepresentOpts) -> Result<BGForm, BgError> {
    let k = target.weight;
    if k < Q::new(1, 2) || !(k * Q::from_integer(2)).is_integer() {
        return Err(BgError::Weight(k));
    }
    if !n.is_multiple_of(chi.modulus()) {
        return Err(BgError::CharLevel(chi.modulus(), n));
    }
    let chi_n = chi.extend_to(n).unwrap();
    let small_p = prime_divisors(n).first().copied();
    let mut strategies: Vec<Option<Divisor>> = Vec::new();
    if is_half_integral(k) {
        strategies.push(Some(Divisor::ThetaPower(theta_power_for(k))));
    } else if k <= Q::from_integer(2) {
        strategies.push(None);
        if let Some(p) = small_p {
            strategies.push(Some(Divisor::E2Diff(p)));
        }
    } else {
        strategies.push(None);
    }
    let mut last_err = None;
    for div in strategies {
        let lifted_w = k + div.map_or(Q::from_integer(0), |d| d.weight());
        let lk = lifted_w.to_integer() as u32;
        let lchi = lifted_character(&chi_n, n, div, lk);
        let lifted = match div {
            None => target.clone(),
            Some(d) => {
                let h = target.horizon();
                target.mul(&d.at_infinity(h, opts.prec + 64)?)?
            }
        };
        match solve_integral(&lifted, n, lk, &lchi, opts) {
            Ok((combination, residual, oos_residual, used, oos_rows)) => {
                if residual.max(oos_residual) <= opts.tol {
                    return Ok(BGForm { weight: k, level: n, character: chi_n, combination, divisor: div, residual, oos_residual, oos_rows, coefficients_used: used, prec: opts.prec });
                }
                debug!("strategy {:?}: residual {residual:e}, oos {oos_residual:e}", div);
                last_err = Some(BgError::Residual { residual, oos: oos_residual, tol: opts.tol });
            }
            Err(e) => {
                debug!("strategy {:?} failed: {e}", div);
                last_err = Some(e);
            }
        }
    }
    Err(last_err.unwrap_or(BgError::NoCandidates { n, k: 0 }))
}

impl BGForm {
    fn distinct_factors(&self) -> (Vec<Factor>, Vec<(usize, usize)>) {
        let mut list: Vec<Factor> = Vec::new();
        let mut idx: HashMap<Factor, usize> = HashMap::new();
        let mut pairs = Vec::new();
        for (_, p) in &self.combination {
            let mut get = |f: &Factor| {
                *idx.entry(f.clone()).or_insert_with(|| {
                    list.push(f.clone());
                    list.len() - 1
                })
            };
            let a = get(&p.left);
            let b = get(&p.right);
            pairs.push((a, b));
        }
        (list, pairs)
    }

    /// `f | gamma` for `gamma` in `SL2(Z)`, exponents below `horizon` (the divisor's leading
    /// exponent is added internally so the quotient reaches `horizon`).
    pub fn slash(&self, gamma: Mat2, horizon: Q) -> Result<FracQExp, BgError> {
        let work = self.prec + 64;
        let (div, extra) = match self.divisor {
            Some(d) => {
                let probe = d.slash(gamma, Q::from_integer(2), work)?;
                let lead = probe.leading_index().map(|i| probe.exponent(i)).unwrap_or(Q::from_integer(0));
                (Some(d.slash(gamma, horizon + lead + Q::new(1, 1000), work)?), lead)
            }
            None => (None, Q::from_integer(0)),
        };
        let h = horizon + extra + Q::new(1, 1000);
        let (factors, pairs) = self.distinct_factors();
        let slashed: Vec<FracQExp> = crate::par::map_slice(&factors, |f| f.slash(gamma, h, work)).into_iter().collect::<Result<_, _>>()?;
        let terms: Vec<FracQExp> = crate::par::map_indexed(pairs.len(), |i| {
            let (a, b) = pairs[i];
            slashed[a].mul(&slashed[b]).map(|p| p.scaled(&self.combination[i].0))
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
        let mut it = terms.into_iter();
        let mut num = it.next().ok_or(BgError::NoCandidates { n: self.level, k: 0 })?;
        for t in it {
            num = num.add(&t)?;
        }
        if num.anomalous_norm() > crate::qseries::zero_threshold(self.prec, 1.0) {
            return Err(BgError::Anomalous(num.anomalous_norm()));
        }
        let mut f = match div {
            Some(d) => num.div(&d)?,
            None => num,
        };
        f.anomalous.clear();
        let mut out = f;
        for c in out.coeffs.iter_mut() {
            *c = c.with_prec(self.prec);
        }
        out.prec = self.prec;
        Ok(out)
    }

    /// Expansion at infinity to `len` integral exponents (integral weight) or the natural grid.
    pub fn at_infinity(&self, horizon: Q) -> Result<FracQExp, BgError> {
        self.slash(Mat2::I, horizon)
    }

    pub fn to_json(&self) -> BGFormJson {
        BGFormJson {
            weight: crate::qseries::fmt_weight(self.weight),
            level: self.level,
            character: (self.character.modulus(), self.character.index()),
            divisor: self.divisor,
            residual: self.residual,
            oos_residual: self.oos_residual,
            oos_rows: self.oos_rows,
            coefficients_used: self.coefficients_used,
            prec: self.prec,
            combination: self
                .combination
                .iter()
                .map(|(c, p)| TermJson {
                    coeff: [crate::qseries::float_str(&c.re), crate::qseries::float_str(&c.im)],
                    left: p.left.to_json(),
                    right: p.right.to_json(),
                })
                .collect(),
        }
    }

    pub fn from_json(j: &BGFormJson) -> Result<Self, BgError> {
        let weight = crate::qseries::parse_q(&j.weight).map_err(|e| BgError::Parse(e.to_string()))?;
        let character = DirichletCharacter::conrey(j.character.0, j.character.1).map_err(|e| BgError::Parse(e.to_string()))?;
        let mut combination = Vec::new();
        for t in &j.combination {
            let re = crate::qseries::parse_float(&t.coeff[0], j.prec + 64).map_err(|e| BgError::Parse(e.to_string()))?;
            let im = crate::qseries::parse_float(&t.coeff[1], j.prec + 64).map_err(|e| BgError::Parse(e.to_string()))?;
            combination.push((ComplexBig::new(re, im), BGProduct { left: Factor::from_json(&t.left)?, right: Factor::from_json(&t.right)? }));
        }
        Ok(Self {
            weight,
            level: j.level,
            character,
            combination,
            divisor: j.divisor,
            residual: j.residual,
            oos_residual: j.oos_residual,
            oos_rows: j.oos_rows,
            coefficients_used: j.coefficients_used,
            prec: j.prec,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorJson {
    One,
    Eis(EisLabel),
    E2Diff(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub coeff: [String; 2],
    pub left: FactorJson,
    pub right: FactorJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BGFormJson {
    pub weight: String,
    pub level: u64,
    pub character: (u64, u64),
    pub divisor: Option<Divisor>,
    pub residual: f64,
    pub oos_residual: f64,
    pub oos_rows: usize,
    pub coefficients_used: usize,
    pub prec: Prec,
    pub combination: Vec<TermJson>,
}

/// Expansion of `f | gamma_c` at one cusp: exponents `alpha(c)/w(c) + n/w(c)`, `n < len`.
#[derive(Debug, Clone)]
pub struct CuspExpansion {
    pub cusp: String,
    /// `alpha(c)` in `[0, 1)`; the expansion starts at `alpha(c)/w(c)`.
    pub alpha: Q,
    pub width: u64,
    pub expansion: FracQExp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CuspExpansionJson {
    pub cusp: String,
    pub alpha: String,
    pub width: u64,
    pub expansion: QExpJson,
}

impl CuspExpansion {
    pub fn to_json(&self) -> CuspExpansionJson {
        CuspExpansionJson {
            cusp: self.cusp.clone(),
            alpha: format!("{}/{}", self.alpha.numer(), self.alpha.denom()),
            width: self.width,
            expansion: self.expansion.to_json(),
        }
    }
}

/// Offset of the grid `x0 + Z/w` through the leading exponent of `f`, reduced into `[0, 1/w)`.
fn grid_offset(f: &FracQExp, w: u64) -> Q {
    let x = f.leading_index().map(|i| f.exponent(i)).unwrap_or(Q::from_integer(0));
    let wq = Q::from_integer(w as i64);
    x - (x * wq).floor() / wq
}

/// Expansions of `f | gamma_c` for every cusp, `len(c)` coefficients each.
pub fn expand_at_cusps(form: &BGForm, sys: &CosetSystem, len: &(dyn Fn(usize) -> usize + Sync)) -> Result<Vec<CuspExpansion>, BgError> {
    let half = is_half_integral(form.weight);
    let res: Vec<Result<CuspExpansion, BgError>> = crate::par::map_indexed(sys.cusps.len(), |ci| {
        let c = &sys.cusps[ci];
        let w = c.width;
        let alpha_chi = c.alpha(&form.character);
        // exponents of an integral-weight form lie on alpha/w + Z/w
        let l = len(ci) as i64;
        let x0 = if half { None } else { Some(alpha_chi / Q::from_integer(w as i64)) };
        let probe_h = x0.unwrap_or(Q::from_integer(0)) + Q::new(l, w as i64);
        let raw = form.slash(c.gamma, probe_h + Q::from_integer(1))?;
        let x0 = x0.unwrap_or_else(|| grid_offset(&raw, w));
        let mut e = raw.coarsen(x0, w)?;
        e.truncate(l as usize);
        let alpha = crate::num::frac(x0 * Q::from_integer(w as i64));
        Ok(CuspExpansion { cusp: c.label(), alpha, width: w, expansion: e })
    });
    res.into_iter().collect()
}

/// Coset expansions `f | gamma_c T^m` from the cusp expansions by the phase twist.
pub fn expand_all_cosets(sys: &CosetSystem, cusp_exp: &[CuspExpansion]) -> Vec<FracQExp> {
    sys.cosets.iter().map(|&(ci, m)| cusp_exp[ci].expansion.t_twist(m)).collect()
}

/// Evaluate `sum_i x_i P_i / D` at infinity and compare with a target on `rows` coefficients.
pub fn reconstruct_residual(form: &BGForm, target: &FracQExp, rows: usize) -> Result<f64, BgError> {
    let h = Q::from_integer(rows as i64);
    let f = form.at_infinity(h)?;
    let a = f.coarsen(Q::from_integer(0), 1)?;
    let b = target.coarsen(Q::from_integer(0), 1)?;
    let n = rows.min(a.coeffs.len()).min(b.coeffs.len());
    Ok(rel_residual(&a.coeffs[..n], &b.coeffs[..n], form.prec))
}

/// `sqrt(y)`-weighted magnitude used to pick evaluation points; kept for diagnostics.
pub fn weight_as_float(k: Q, prec: Prec) -> rug::Float {
    float_from_q(k, prec)
}
