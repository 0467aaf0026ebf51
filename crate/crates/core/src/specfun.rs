//! Lattice sums of K-Bessel functions: `U_k(x) = sum_m (mx)^k K_k(mx)` and
//! `W_k(x) = U_k(x) - (2k-1) U_{k-1}(x)`.

use std::sync::{Arc, Mutex, OnceLock};

use rug::ops::Pow;
use rug::{Float, Integer};

use crate::num::{pi, Prec, Q};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("argument must be positive, got {0}")]
    NonPositive(f64),
    #[error("order {0} is neither integral nor half-integral")]
    Order(Q),
    #[error("precision {0} bits is below the minimum of 10")]
    Bits(u32),
}

/// `P_k` with `P_0 = 1`, `P_{k+1} = x((k+1) P_k - (x-1) P_k')`; coefficients from `x^0`.
pub fn p_poly(k: usize) -> Arc<Vec<Integer>> {
    static CACHE: OnceLock<Mutex<Vec<Arc<Vec<Integer>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(vec![Arc::new(vec![Integer::from(1)])]));
    let mut c = cache.lock().unwrap();
    while c.len() <= k {
        let j = c.len() - 1;
        let p = &c[j];
        // (j+1) P - (x-1) P' = (j+1) P - x P' + P'
        let mut q = vec![Integer::new(); p.len() + 1];
        for (i, a) in p.iter().enumerate() {
            q[i] += Integer::from(a * (j as u64 + 1));
            q[i] -= Integer::from(a * i as u64);
            if i > 0 {
                q[i - 1] += Integer::from(a * i as u64);
            }
        }
        // times x
        let mut next = vec![Integer::new(); q.len() + 1];
        for (i, a) in q.into_iter().enumerate() {
            next[i + 1] = a;
        }
        while next.len() > 1 && next.last().is_some_and(|z| *z == 0) {
            next.pop();
        }
        c.push(Arc::new(next));
    }
    c[k].clone()
}

/// `S_k(e^u) = sum_{m>=1} m^k e^{-m u}`, given `y = e^{-u}` and `1 - y`.
fn s_k_from_y(k: usize, y: &Float, one_minus_y: &Float, prec: Prec) -> Float {
    let p = p_poly(k);
    // P_k(1/y) y^{k+1} = y^{k+1-deg} sum_i p_i y^{deg-i}
    let mut acc = Float::new(prec);
    for a in p.iter() {
        acc = Float::with_val(prec, &acc * y) + Float::with_val(prec, a);
    }
    let shift = k + 1 - (p.len() - 1);
    let num = acc * Float::with_val(prec, y.clone().pow(shift as u32));
    num / Float::with_val(prec, one_minus_y.clone().pow((k + 1) as u32))
}

/// `S_k(e^u)` for `u > 0`.
pub fn s_k_exp(k: usize, u: &Float, prec: Prec) -> Float {
    let y = Float::with_val(prec, -u.clone()).exp();
    let omy = -Float::with_val(prec, -u.clone()).exp_m1();
    s_k_from_y(k, &y, &omy, prec)
}

fn factorial(n: u32) -> Integer {
    Integer::factorial(n).into()
}

/// `U_{k+1/2}(x)` by the elementary closed form of `K_{k+1/2}`.
pub fn u_half_integral(k: u32, x: &Float, prec: Prec) -> Result<Float, SpecError> {
    if *x <= 0 {
        return Err(SpecError::NonPositive(x.to_f64()));
    }
    let work = prec + 16;
    let x = Float::with_val(work, x);
    let mut acc = Float::new(work);
    for j in 0..=k {
        let num = factorial(k + j);
        let den = factorial(j) * factorial(k - j) * (Integer::from(1) << j);
        let c = Float::with_val(work, num) / Float::with_val(work, den);
        let xp = Float::with_val(work, x.clone().pow(k - j));
        acc += c * xp * s_k_exp((k - j) as usize, &x, work);
    }
    let root = (pi(work) / 2u32).sqrt();
    Ok(Float::with_val(prec, acc * root))
}

/// Step and node count for the double-exponential Riemann sum at `B` bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeGrid {
    pub h: f64,
    pub n: usize,
}

///
/// The bit budget is relative to `U_k(x)`: `max(2, |log2 x|)` replaces `log2 x` (the pole
/// strength near `t = i pi/2` grows like `x^{-k-1}` for small `x`) and `x / log 2` bits are
/// added for `x > 1` to offset the `e^{-x}` decay of `U_k`.
pub fn de_grid(k: u32, x: f64, bits: u32) -> Option<DeGrid> {
    let ln2 = std::f64::consts::LN_2;
    let lnfact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    let decay = if x > 1.0 { x / ln2 } else { 0.0 };
    let c = 1.125 * bits as f64 + decay + k as f64 * (x.ln().abs() / ln2).max(2.0) + 1.0;
    let d = c * ln2 + 2.06;
    let e = 2.0 * ((c - 1.0) * ln2 + lnfact) / x;
    if e <= 1.0 {
        return None;
    }
    let t = e.ln() * (1.0 + (2.0 * k as f64 / x) / e);
    if !(t > 0.0) {
        return None;
    }
    let pi2 = std::f64::consts::PI.powi(2);
    let n = ((t / pi2) * (d + (d / pi2).ln())).ceil().max(1.0) as usize;
    Some(DeGrid { h: t / n as f64, n })
}

/// `(U_k(x), U_{k-1}(x))` by the Riemann sum on the grid from [`de_grid`]; `U_{-1}` is not
/// needed and is returned as zero for `k = 0`. Falls back to direct Bessel summation
/// when the grid parameters degenerate (large `x`).
pub fn u_integral_de(k: u32, x: &Float, bits: u32) -> Result<(Float, Float), SpecError> {
    if *x <= 0 {
        return Err(SpecError::NonPositive(x.to_f64()));
    }
    if bits < 10 {
        return Err(SpecError::Bits(bits));
    }
    let work = bits + 32 + 2 * k;
    let x = Float::with_val(work, x);
    let Some(grid) = de_grid(k, x.to_f64(), bits) else {
        let uk = u_direct(Q::from_integer(k as i64), &x, work);
        let uk1 = if k == 0 { Float::new(work) } else { u_direct(Q::from_integer(k as i64 - 1), &x, work) };
        return Ok((uk, uk1));
    };
    let h = Float::with_val(work, grid.h);
    let mut sk = Float::new(work);
    let mut sk1 = Float::new(work);
    for j in 0..=grid.n {
        let t = Float::with_val(work, &h * j as u32);
        let u = Float::with_val(work, &x * t.clone().cosh());
        let y = Float::with_val(work, -u.clone()).exp();
        let omy = -Float::with_val(work, -u.clone()).exp_m1();
        let wgt = if j == 0 { Float::with_val(work, 0.5) } else { Float::with_val(work, 1) };
        let a = s_k_from_y(k as usize, &y, &omy, work) * Float::with_val(work, &t * k).cosh();
        sk += Float::with_val(work, &a * &wgt);
        if k > 0 {
            let b = s_k_from_y(k as usize - 1, &y, &omy, work) * Float::with_val(work, &t * (k - 1)).cosh();
            sk1 += b * wgt;
        }
    }
    let xk = Float::with_val(work, x.clone().pow(k));
    let uk = Float::with_val(work, &xk * &h) * sk;
    let uk1 = if k > 0 { Float::with_val(work, x.clone().pow(k - 1)) * h * sk1 } else { Float::new(work) };
    Ok((uk, uk1))
}

/// `W_k(x)` for integral or half-integral `k >= 1/2`, at `bits` of accuracy.
pub fn w_k(k: Q, x: &Float, bits: u32) -> Result<Float, SpecError> {
    if *x <= 0 {
        return Err(SpecError::NonPositive(x.to_f64()));
    }
    let prec = bits + 32;
    let two_k = k * Q::from_integer(2);
    if !two_k.is_integer() || k < Q::new(1, 2) {
        return Err(SpecError::Order(k));
    }
    let coef = Float::with_val(prec, two_k.to_integer() - 1);
    if k.is_integer() {
        let (uk, uk1) = u_integral_de(k.to_integer() as u32, x, bits)?;
        Ok(uk - coef * uk1)
    } else {
        let j = (k - Q::new(1, 2)).to_integer() as u32;
        let uk = u_half_integral(j, x, prec)?;
        if j == 0 {
            return Ok(uk);
        }
        Ok(uk - coef * u_half_integral(j - 1, x, prec)?)
    }
}

/// `K_nu(z) = int_0^oo e^{-z cosh t} cosh(nu t) dt` by trapezoidal sums, halving the step
/// until two successive sums agree.
pub fn kbessel(nu: Q, z: &Float, prec: Prec) -> Float {
    let work = prec + 20;
    let z = Float::with_val(work, z);
    let nuf = crate::num::float_from_q(nu, work);
    let target = (work as f64) * std::f64::consts::LN_2;
    // e^{-z cosh T + |nu| T} below 2^{-work}
    let zf = z.to_f64();
    let nf = nuf.to_f64().abs();
    let mut t_max = 1.0f64;
    while zf * t_max.cosh() - nf * t_max - zf < target + 10.0 {
        t_max += 0.25;
    }
    let f = |t: &Float| -> Float {
        let e = Float::with_val(work, -Float::with_val(work, &z * t.clone().cosh())).exp();
        e * Float::with_val(work, &nuf * t).cosh()
    };
    let mut n = 16usize;
    let mut prev: Option<Float> = None;
    loop {
        let h = Float::with_val(work, t_max) / n as u32;
        let mut s = Float::with_val(work, f(&Float::new(work)) / 2u32);
        for j in 1..=n {
            s += f(&Float::with_val(work, &h * j as u32));
        }
        s *= &h;
        if let Some(p) = &prev {
            let d = Float::with_val(work, &s - p).abs();
            if d <= Float::with_val(work, s.clone().abs()) * Float::with_val(work, Float::i_exp(1, -(prec as i32) - 4)) || n > 1 << 16 {
                return Float::with_val(prec, s);
            }
        }
        prev = Some(s);
        n *= 2;
    }
}

/// `sum_m (mx)^nu K_nu(mx)` by direct summation of [`kbessel`].
pub fn u_direct(nu: Q, x: &Float, prec: Prec) -> Float {
    let mut acc = Float::new(prec);
    let nuf = crate::num::float_from_q(nu, prec);
    let eps = Float::with_val(prec, Float::i_exp(1, -(prec as i32) - 8));
    for m in 1u32.. {
        let z = Float::with_val(prec, x * m);
        let t = Float::with_val(prec, z.clone().pow(&nuf)) * kbessel(nu, &z, prec);
        acc += &t;
        if t.clone().abs() <= Float::with_val(prec, acc.clone().abs() * &eps) {
            break;
        }
    }
    acc
}

/// `W_k` by direct Bessel summation, as an independent oracle.
pub fn w_direct(k: Q, x: &Float, prec: Prec) -> Float {
    let uk = u_direct(k, x, prec);
    let uk1 = u_direct(k - Q::from_integer(1), x, prec);
    uk - Float::with_val(prec, (k * Q::from_integer(2)).to_integer() - 1) * uk1
}

/// Empirical constants `c_k` in `|U_k - DE sum| < c_k 2^{-B} U_k`, `k = 0..=20`, measured at
/// `B = 53` and `B = 100` over `x` in `[0.1, 90]` against [`u_direct`] and multiplied by 4.
pub const C_K: [f64; 21] = [
    1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 2.0, 3.0, 7.0, 4.0, 6.0, 5.0, 11.0, 16.0, 23.0, 15.0, 28.0,
];

/// `C_K[k]` for `k <= 20`, otherwise the largest tabulated value.
pub fn c_k(k: u32) -> f64 {
    C_K.get(k as usize).copied().unwrap_or_else(|| C_K.iter().copied().fold(0.0, f64::max))
}

/// Measured `max |U_k(x) - DE(x)| 2^B / U_k(x)` over a grid, for calibrating [`C_K`].
pub fn calibrate_c_k(k: u32, bits: u32, xs: &[f64]) -> f64 {
    let prec = bits + 64;
    xs.iter()
        .map(|&x| {
            let xf = Float::with_val(prec, x);
            let (de, _) = u_integral_de(k, &xf, bits).unwrap();
            let direct = u_direct(Q::from_integer(k as i64), &xf, prec);
            let err = Float::with_val(prec, &de - &direct).abs() / direct;
            (err * Float::with_val(prec, Float::i_exp(1, bits as i32))).to_f64()
        })
        .fold(0.0, f64::max)
}
