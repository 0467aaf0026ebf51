//! Eisenstein series `F_k(chi1, chi2)(e tau)` and their expansions under any
//! `gamma` in `SL2(Z)`, the quasimodular weight-2 series, and `theta | gamma`.
//!
//! `F_k(chi1, chi2) = delta_{N2,1} L(chi1, 1-k)/2 + sum_n sigma_{k-1}(chi1, chi2, n) q^n`
//! lies in `M_k(Gamma0(N1 N2), chi1 chi2)`.

use rug::ops::Pow;
use rug::{Float, Integer};
use serde::{Deserialize, Serialize};

use crate::arith::{divisors, egcd, gcd, lcm, modinv, Mat2};
use crate::arithchar::{l_value_negative, s_k_constant, CharLabel, DirichletCharacter};
use crate::num::{pi, root_of_unity, ComplexBig, Prec, RootsOfUnity, Q};
use crate::qseries::{Anomalous, FracQExp, QExpError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EisError {
    #[error("chi1 chi2 (-1) must equal (-1)^k")]
    Parity,
    #[error("characters must be primitive")]
    NotPrimitive,
    #[error("matrix {0:?} is not reduced for level {1} (need C | N, C > 0, N | B, det 1)")]
    NotReduced(Mat2, u64),
    #[error("weight 2 with trivial characters is quasimodular; use the E2 routines")]
    Quasimodular,
    #[error("matrix {0:?} must have determinant 1")]
    NotSl2(Mat2),
    #[error("matrix {0:?} must have positive determinant")]
    BadDet(Mat2),
    #[error("theta multiplier needs 4 | C, got {0:?}")]
    ThetaNeeds4(Mat2),
    #[error(transparent)]
    QExp(#[from] QExpError),
}

/// `F_k(chi1, chi2, e)(tau) = F_k(chi1, chi2)(e tau)`, level `e N1 N2`. `k = 0` is the constant 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EisParams {
    pub chi1: DirichletCharacter,
    pub chi2: DirichletCharacter,
    pub k: u32,
    pub e: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EisLabel {
    pub chi1: CharLabel,
    pub chi2: CharLabel,
    pub k: u32,
    pub e: u64,
}

impl EisParams {
    pub fn new(chi1: DirichletCharacter, chi2: DirichletCharacter, k: u32, e: u64) -> Result<Self, EisError> {
        if !chi1.is_primitive() || !chi2.is_primitive() {
            return Err(EisError::NotPrimitive);
        }
        let p = Self { chi1, chi2, k, e };
        if k > 0 && p.chi1.parity() * p.chi2.parity() != if k.is_multiple_of(2) { 1 } else { -1 } {
            return Err(EisError::Parity);
        }
        Ok(p)
    }

    pub fn one() -> Self {
        Self { chi1: DirichletCharacter::trivial(1), chi2: DirichletCharacter::trivial(1), k: 0, e: 1 }
    }

    pub fn from_label(l: &EisLabel) -> Result<Self, EisError> {
        let c1 = DirichletCharacter::conrey(l.chi1.modulus, l.chi1.index).map_err(|_| EisError::NotPrimitive)?;
        let c2 = DirichletCharacter::conrey(l.chi2.modulus, l.chi2.index).map_err(|_| EisError::NotPrimitive)?;
        if l.k == 0 {
            return Ok(Self::one());
        }
        Self::new(c1, c2, l.k, l.e)
    }

    pub fn label(&self) -> EisLabel {
        EisLabel { chi1: self.chi1.label(), chi2: self.chi2.label(), k: self.k, e: self.e }
    }

    pub fn level(&self) -> u64 {
        self.e * self.chi1.modulus() * self.chi2.modulus()
    }

    /// Nebentypus `chi1 chi2` modulo the level.
    pub fn character(&self) -> DirichletCharacter {
        self.chi1.mul(&self.chi2).extend_to(self.level()).expect("conductors divide the level")
    }

    pub fn is_quasimodular(&self) -> bool {
        self.k == 2 && self.chi1.modulus() == 1 && self.chi2.modulus() == 1
    }
}

/// `sigma_j(chi1, chi2, n) = sum_{d | n} d^j chi1(d) chi2(n/d)`.
pub fn sigma_twisted(chi1: &DirichletCharacter, chi2: &DirichletCharacter, j: u32, n: u64, prec: Prec) -> ComplexBig {
    let mut acc = ComplexBig::zero(prec);
    for d in divisors(n) {
        let v = &chi1.value(d as i64, prec) * &chi2.value((n / d) as i64, prec);
        if v.is_zero() {
            continue;
        }
        let dj = Float::with_val(prec, Integer::from(d).pow(j));
        acc += &v.scale(&dj);
    }
    acc
}

/// Constant term of `F_k(chi1, chi2)`; for `k = 1` both orderings contribute.
pub fn constant_term(p: &EisParams, prec: Prec) -> ComplexBig {
    let mut c = ComplexBig::zero(prec);
    if p.k == 0 {
        return ComplexBig::one(prec);
    }
    if p.chi2.modulus() == 1 {
        c += &l_value_negative(&p.chi1, p.k, prec).div_i64(2);
    }
    if p.k == 1 && p.chi1.modulus() == 1 {
        c += &l_value_negative(&p.chi2, p.k, prec).div_i64(2);
    }
    c
}

fn ceil_index(horizon: Q, step: Q) -> usize {
    if horizon <= Q::from_integer(0) {
        return 0;
    }
    (horizon / step).ceil().to_integer() as usize
}

/// Expansion of `F_k(chi1, chi2)(e tau)` at infinity, exponents below `horizon`.
pub fn f_expansion(p: &EisParams, horizon: Q, prec: Prec) -> FracQExp {
    let weight = Q::from_integer(p.k as i64);
    let len = ceil_index(horizon, Q::from_integer(1)).max(1);
    if p.k == 0 {
        return FracQExp::constant(ComplexBig::one(prec), weight, len);
    }
    let e = p.e as usize;
    let coeffs = crate::par::map_indexed(len, |m| {
        if m == 0 {
            constant_term(p, prec)
        } else if m % e == 0 {
            sigma_twisted(&p.chi1, &p.chi2, p.k - 1, (m / e) as u64, prec)
        } else {
            ComplexBig::zero(prec)
        }
    });
    FracQExp::new(Q::from_integer(0), 1, weight, coeffs, prec)
}

/// `M = gamma U` with `gamma` in `SL2(Z)` and `U = (g, *; 0, det/g)`, `g = gcd(A, C)`.
pub fn reduce_rational_matrix(m: Mat2) -> Result<(Mat2, Mat2), EisError> {
    let det = m.det();
    if det <= 0 {
        return Err(EisError::BadDet(m));
    }
    let (g, u, v) = egcd(m.a, m.c);
    let gamma = Mat2::new(m.a / g, -v, m.c / g, u);
    let up = Mat2::new(g, u * m.b + v * m.d, 0, det / g);
    debug_assert_eq!(gamma * up, m);
    Ok((gamma, up))
}

/// `gamma = beta gamma' T^m` with `beta` in `Gamma0(N)` and `gamma' = (A, B; C, D)`,
/// `C | N`, `C > 0`, `N | B`.
pub fn lemma1_reduce(gamma: Mat2, n: u64) -> Result<(Mat2, Mat2, i64), EisError> {
    if gamma.det() != 1 {
        return Err(EisError::NotSl2(gamma));
    }
    let n = n as i64;
    if is_reduced(gamma, n as u64) {
        return Ok((Mat2::I, gamma, 0));
    }
    let (c, d) = (gamma.c, gamma.d);
    let c0 = gcd(c, n);
    let (cp, np) = (c / c0, n / c0);
    let cp_inv = modinv(cp, np).expect("c/g is a unit mod N/g");
    let big = n * c0;
    for m in 0..n.max(1) {
        let d0 = (cp_inv * (d - c * m)).rem_euclid(np);
        for t in 0..4 * big.max(1) {
            let dd = d0 + t * np;
            if gcd(dd, big) != 1 {
                continue;
            }
            let a = modinv(dd, big).unwrap();
            let b = (a * dd - 1) / c0;
            let gp = Mat2::new(a, b, c0, dd);
            let beta = gamma * Mat2::t_pow(-m) * gp.adj();
            debug_assert!(beta.in_gamma0(n));
            debug_assert_eq!(beta * gp * Mat2::t_pow(m), gamma);
            return Ok((beta, gp, m));
        }
    }
    unreachable!("a suitable D exists by CRT")
}

pub fn is_reduced(g: Mat2, n: u64) -> bool {
    let n = n as i64;
    g.det() == 1 && g.c > 0 && n % g.c == 0 && g.b % n == 0
}

/// Expansion of `F_k(chi1, chi2, e) |_k gamma` for reduced `gamma`.
pub fn eis_slash(p: &EisParams, gamma: Mat2, horizon: Q, prec: Prec) -> Result<FracQExp, EisError> {
    if p.is_quasimodular() {
        return Err(EisError::Quasimodular);
    }
    let nlev = p.level();
    if !is_reduced(gamma, nlev) {
        return Err(EisError::NotReduced(gamma, nlev));
    }
    if p.k == 0 {
        return Ok(FracQExp::constant(ComplexBig::one(prec), Q::from_integer(0), ceil_index(horizon, Q::from_integer(1)).max(1)));
    }
    let work = prec + 20;
    let (a, _b, c, d) = (gamma.a, gamma.b, gamma.c, gamma.d);
    let (n1, n2, e, k) = (p.chi1.modulus() as i64, p.chi2.modulus() as i64, p.e as i64, p.k);
    let nn = nlev as i64;
    let g = gcd(e, c);
    let g1 = gcd(n1 * g, c);
    let g2 = gcd(n2 * g, c);
    let cg = c / g;

    let chi1b = p.chi1.conj();
    let chi2b = p.chi2.conj();
    // z_k = 2 (N2 e / g2)^{k-1} (e/g) g(chi1b) g(chi2b)
    let z = chi1b
        .gauss_sum(work)
        .scale(&Float::with_val(work, Integer::from(n2 * e / g2).pow(k - 1) * Integer::from(2 * (e / g))))
        * chi2b.gauss_sum(work);

    // Residue data for c(n, m).
    let u1 = n1 * g / g1;
    let m1 = c / g1;
    let u1_inv = modinv(u1, m1).expect("coprime");
    let u2 = n2 * g / g2;
    let m2 = c / g2;
    let u2_inv = modinv(u2, m2).expect("coprime");
    let inv_ae = modinv(a * e / g, cg).expect("A e/g is a unit mod C/g");
    let order = lcm(lcm(chi1b.order(), chi2b.order()), cg as u64) as i64;
    let (o1, o2) = (order / chi1b.order() as i64, order / chi2b.order() as i64);
    let oc = order / cg;

    // c(n, m) as an exponent histogram over `order`.
    let c_nm = |hist: &mut [Integer], x: i64, y: i64, weight: &Integer| {
        // x = n/m, y = m; s1 = u1^{-1} x mod m1, lifted over residues mod cg
        let s1_0 = (u1_inv * x).rem_euclid(m1.max(1));
        let s2_0 = (u2_inv * y).rem_euclid(m2.max(1));
        let mut s1 = s1_0;
        while s1 < cg {
            let r1 = x - u1 * s1;
            debug_assert_eq!(r1 % m1, 0);
            if let Some(t1) = chi1b.exp_over_order(r1 / m1) {
                let mut s2 = s2_0;
                while s2 < cg {
                    let r2 = y - u2 * s2;
                    if let Some(t2) = chi2b.exp_over_order(r2 / m2) {
                        let ph = (-(inv_ae as i128) * s1 as i128 * s2 as i128).rem_euclid(cg as i128) as i64;
                        let idx = (t1 as i64 * o1 + t2 as i64 * o2 + ph * oc).rem_euclid(order) as usize;
                        hist[idx] += weight;
                    }
                    s2 += m2;
                }
            }
            s1 += m1;
        }
    };

    let step = Q::new(g1 * g2, nn);
    let count = ceil_index(horizon, step).max(1);
    let zinv = z.recip();
    let roots = RootsOfUnity::get(order as u64, work);
    let coeffs: Vec<ComplexBig> = crate::par::map_indexed(count, |n| {
        if n == 0 {
            return a0_constant(p, gamma, g, g1, g2, work);
        }
        let n = n as i64;
        let mut hist = vec![Integer::new(); order as usize];
        for dv in divisors(n as u64) {
            let dv = dv as i64;
            let pw = Integer::from(dv).pow(k - 1);
            // m = d: weight d^{k-1}; m = -d: sign(m) m^{k-1} = (-1)^k d^{k-1}
            c_nm(&mut hist, n / dv, dv, &pw);
            let neg = if k % 2 == 0 { pw.clone() } else { -pw };
            c_nm(&mut hist, -n / dv, -dv, &neg);
        }
        let mut v = ComplexBig::zero(work);
        for (j, h) in hist.iter().enumerate() {
            if *h != 0 {
                v += &roots.pow(j as i64).scale(&Float::with_val(work, h));
            }
        }
        // phase zeta_N^{D (g1 g2 / C) n}
        let phase = root_of_unity(Q::new(d, 1) * Q::new(g1 * g2, c) * Q::new(n, nn), work);
        &v * &phase
    });
    let coeffs: Vec<ComplexBig> = coeffs.into_iter().map(|x| (&x * &zinv).with_prec(prec)).collect();
    // place index n at exponent n * step on the grid of width den(step)
    let w = *step.denom() as u64;
    let st = *step.numer() as usize;
    let mut grid = vec![ComplexBig::zero(prec); (count - 1) * st + 1];
    for (n, cf) in coeffs.into_iter().enumerate() {
        grid[n * st] = cf;
    }
    Ok(FracQExp::new(Q::from_integer(0), w, Q::from_integer(k as i64), grid, prec))
}

/// `a_gamma(0)` (before division by `z_k`).
fn a0_constant(p: &EisParams, gamma: Mat2, g: i64, g1: i64, g2: i64, prec: Prec) -> ComplexBig {
    let t = |c1: &DirichletCharacter, c2: &DirichletCharacter, g2_: i64| -> ComplexBig {
        let (n1, n2) = (c1.modulus() as i64, c2.modulus() as i64);
        if gamma.c / g != n1 {
            return ComplexBig::zero(prec);
        }
        let k = p.k;
        let e = p.e as i64;
        let m = p.chi1.modulus() * p.chi2.modulus();
        let chi = c1.conj().mul(c2).extend_to(m).expect("conductor divides N1 N2");
        let sk = s_k_constant(&chi, k, prec);
        let gs = c2.conj().gauss_sum(prec);
        let den = Float::with_val(prec, Integer::from(g2_ / g).pow(k - 1) * Integer::from(n2));
        let sign = if (k - 1).is_multiple_of(2) { 1 } else { -1 };
        let v = c1.conj().value(-gamma.a * e / g, prec);
        (gs * v * sk).scale(&den.recip()).scale_i64(sign)
    };
    let mut a0 = t(&p.chi1, &p.chi2, g2);
    if p.k == 1 {
        a0 += &t(&p.chi2, &p.chi1, g1);
    }
    a0
}

/// `F |_k gamma` for any `gamma` in `SL2(Z)`, via `gamma = beta gamma' T^m`.
pub fn eis_slash_any(p: &EisParams, gamma: Mat2, horizon: Q, prec: Prec) -> Result<FracQExp, EisError> {
    if p.k == 0 {
        return Ok(FracQExp::constant(ComplexBig::one(prec), Q::from_integer(0), ceil_index(horizon, Q::from_integer(1)).max(1)));
    }
    let (beta, gp, m) = lemma1_reduce(gamma, p.level())?;
    // slashing by T^m does not change the horizon of exponents
    let f = eis_slash(p, gp, horizon, prec)?;
    let chi = p.character();
    let v = chi.value(beta.d, prec);
    Ok(f.t_twist(m).scaled(&v))
}

/// `F_2 = -1/24 + sum sigma_1(n) q^n`, quasimodular.
fn f2_at_infinity(horizon: Q, prec: Prec) -> FracQExp {
    let len = ceil_index(horizon, Q::from_integer(1)).max(1);
    let coeffs = (0..len)
        .map(|n| {
            if n == 0 {
                ComplexBig::from_q(Q::new(-1, 24), prec)
            } else {
                let s: u64 = divisors(n as u64).iter().sum();
                ComplexBig::from_i64(s as i64, prec)
            }
        })
        .collect();
    FracQExp::new(Q::from_integer(0), 1, Q::from_integer(2), coeffs, prec)
}

/// `F_2 |_2 M` for an integer matrix with positive determinant.
/// For `gamma` in `SL2(Z)`: `F_2 | gamma = F_2 - (1/(4 pi i)) C/(C tau + D)`.
pub fn e2_slash_matrix(m: Mat2, horizon: Q, prec: Prec) -> Result<FracQExp, EisError> {
    let (gamma, up) = reduce_rational_matrix(m)?;
    // horizon of F_2 needed so that after U the requested horizon is covered
    let h0 = horizon * Q::new(up.d, up.a) + Q::from_integer(1);
    let mut f = f2_at_infinity(h0, prec);
    if gamma.c != 0 {
        let four_pi_i = ComplexBig::new(Float::new(prec), Float::with_val(prec, pi(prec) * 4u32));
        let lambda = -(ComplexBig::from_i64(gamma.c, prec) / four_pi_i);
        f.anomalous.push(Anomalous { lambda, c: gamma.c, d: gamma.d });
    }
    let mut out = f.slash_upper(up.a, up.b, up.d)?;
    let keep = ((horizon - out.alpha) * Q::from_integer(out.width as i64)).ceil().to_integer().max(1) as usize;
    out.truncate(keep);
    Ok(out)
}

/// `F_2(e tau) |_2 gamma = e^{-1} F_2 |_2 (eA, eB; C, D)`.
pub fn e2_slash(e: u64, gamma: Mat2, horizon: Q, prec: Prec) -> Result<FracQExp, EisError> {
    let e = e as i64;
    let m = Mat2::new(e * gamma.a, e * gamma.b, gamma.c, gamma.d);
    let f = e2_slash_matrix(m, horizon, prec)?;
    Ok(f.scaled(&ComplexBig::from_q(Q::new(1, e), prec)))
}

/// `F_2(tau) - e F_2(e tau)`, a holomorphic form of level `e`, slashed by `gamma`.
pub fn e2_diff_slash(e: u64, gamma: Mat2, horizon: Q, prec: Prec) -> Result<FracQExp, EisError> {
    let a = e2_slash(1, gamma, horizon, prec)?;
    let b = e2_slash(e, gamma, horizon, prec)?.scaled(&ComplexBig::from_i64(e as i64, prec));
    let mut out = a.sub(&b)?;
    let thr = crate::qseries::zero_threshold(prec, 1.0);
    if out.anomalous_norm() > thr {
        return Err(EisError::QExp(QExpError::AnomalousOperand));
    }
    out.anomalous.clear();
    Ok(out)
}

/// Expansion of `theta = sum_{n in Z} q^{n^2}` at infinity.
pub fn theta_expansion(horizon: Q, prec: Prec) -> FracQExp {
    let len = ceil_index(horizon, Q::from_integer(1)).max(1);
    let mut coeffs = vec![ComplexBig::zero(prec); len];
    let mut n = 0usize;
    while n * n < len {
        coeffs[n * n] = ComplexBig::from_i64(if n == 0 { 1 } else { 2 }, prec);
        n += 1;
    }
    FracQExp::new(Q::from_integer(0), 1, Q::new(1, 2), coeffs, prec)
}

/// `v_theta(gamma) = eps_D^{-1} (C/D)` for `gamma` in `Gamma0(4)`, as an exponent `x` with
/// `v = e^{2 pi i x}`.
pub fn theta_multiplier_q(gamma: Mat2) -> Result<Q, EisError> {
    if gamma.det() != 1 {
        return Err(EisError::NotSl2(gamma));
    }
    if gamma.c % 4 != 0 {
        return Err(EisError::ThetaNeeds4(gamma));
    }
    let d = gamma.d;
    // eps_D^{-1}: 1 if D = 1 mod 4, -i if D = 3 mod 4
    let eps_inv = if d.rem_euclid(4) == 1 { Q::from_integer(0) } else { Q::new(3, 4) };
    let kr = crate::arith::kronecker(gamma.c, d).expect("D odd");
    let kr_q = if kr == 1 { Q::from_integer(0) } else { Q::new(1, 2) };
    Ok(crate::num::frac(eps_inv + kr_q))
}

pub fn theta_multiplier(gamma: Mat2, prec: Prec) -> Result<ComplexBig, EisError> {
    Ok(root_of_unity(theta_multiplier_q(gamma)?, prec))
}

/// `theta |_{1/2} gamma = (C tau + D)^{-1/2} theta(gamma tau)`, principal branch.
pub fn theta_slash(gamma: Mat2, horizon: Q, prec: Prec) -> Result<FracQExp, EisError> {
    if gamma.det() != 1 {
        return Err(EisError::NotSl2(gamma));
    }
    if gamma.c < 0 || (gamma.c == 0 && gamma.d < 0) {
        let f = theta_slash(gamma.neg(), horizon, prec)?;
        let s = if gamma.c < 0 { Q::new(1, 4) } else { Q::new(3, 4) };
        return Ok(f.scaled(&root_of_unity(s, prec)));
    }
    let (a, b, c, d) = (gamma.a, gamma.b, gamma.c, gamma.d);
    if c % 4 == 0 {
        let v = theta_multiplier(gamma, prec)?;
        return Ok(theta_expansion(horizon, prec).scaled(&v));
    }
    let len4 = ceil_index(horizon, Q::new(1, 4)).max(1);
    let mut coeffs = vec![ComplexBig::zero(prec); len4];
    if c.rem_euclid(4) == 2 {
        let alpha_m = Mat2::new(a - 2 * b, b, c - 2 * d, d);
        let v = theta_multiplier(alpha_m, prec)?.scale_i64(2);
        let mut n = 0usize;
        while (2 * n + 1) * (2 * n + 1) < len4 {
            coeffs[(2 * n + 1) * (2 * n + 1)] = v.clone();
            n += 1;
        }
    } else {
        // gamma = alpha S T^lam with lam = D/C mod 4, alpha in Gamma0(4)
        let lam = (d * modinv(c.rem_euclid(4), 4).unwrap()).rem_euclid(4);
        let alpha_m = Mat2::new(lam * a - b, a, lam * c - d, c);
        let one_minus_i = ComplexBig::from_f64(0.5, -0.5, prec);
        let v = theta_multiplier(alpha_m, prec)? * one_minus_i;
        coeffs[0] = v.clone();
        let mut n = 1usize;
        while n * n < len4 {
            let ph = root_of_unity(Q::new(lam * (n * n) as i64, 4), prec);
            coeffs[n * n] = (&v * &ph).scale_i64(2);
            n += 1;
        }
    }
    Ok(FracQExp::new(Q::from_integer(0), 4, Q::new(1, 2), coeffs, prec))
}

/// Direct value of `det^{k/2} (C tau + D)^{-k} f(gamma tau)` given `f` at infinity.
pub fn slash_pointwise(f_inf: &FracQExp, gamma: Mat2, tau: &ComplexBig, tol: f64) -> Result<ComplexBig, QExpError> {
    let prec = f_inf.prec.max(tau.prec());
    let num = tau.scale_i64(gamma.a) + ComplexBig::from_i64(gamma.b, prec);
    let den = tau.scale_i64(gamma.c) + ComplexBig::from_i64(gamma.d, prec);
    let gt = &num / &den;
    let v = f_inf.eval(&gt, tol)?;
    let two_k = (f_inf.weight * Q::from_integer(2)).to_integer();
    let det = gamma.det();
    // det^{k/2} = det^{two_k/4}
    let detf = Float::with_val(prec, det).sqrt().sqrt();
    let factor = den.pow_half(-two_k).scale(&crate::num::powi_float(&detf, two_k));
    Ok(v * factor)
}
