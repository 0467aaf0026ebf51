//! Column-pivoted Householder QR over `ComplexBig`, for small dense least-squares problems.

use rug::Float;

use crate::num::{ComplexBig, Prec};

/// Factorization of an `m x n` matrix given by columns. Columns are equilibrated to unit
/// norm before factoring; `scale[j]` records the original norms.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    /// `perm[i]` is the original column in position `i`.
    pub perm: Vec<usize>,
    scale: Vec<Float>,
    /// Reduced columns: upper triangle is `R`.
    cols: Vec<Vec<ComplexBig>>,
    reflectors: Vec<(Vec<ComplexBig>, Float)>,
    prec: Prec,
}

fn col_norm2(c: &[ComplexBig], prec: Prec) -> Float {
    let mut s = Float::new(prec);
    for x in c {
        s += x.norm_sqr();
    }
    s
}

impl PivotedQr {
    /// Rank is the number of pivots whose remaining column norm exceeds `rel_tol` times the
    /// largest equilibrated norm (which is 1).
    pub fn new(columns: &[Vec<ComplexBig>], rel_tol: f64, prec: Prec) -> Self {
        let n = columns.len();
        let m = columns.first().map_or(0, |c| c.len());
        let mut scale = Vec::with_capacity(n);
        let mut cols: Vec<Vec<ComplexBig>> = Vec::with_capacity(n);
        for c in columns {
            assert_eq!(c.len(), m);
            let nrm = col_norm2(c, prec).sqrt();
            let c: Vec<ComplexBig> = if nrm.is_zero() {
                c.iter().map(|x| x.with_prec(prec)).collect()
            } else {
                let inv = Float::with_val(prec, nrm.recip_ref());
                c.iter().map(|x| x.with_prec(prec).scale(&inv)).collect()
            };
            scale.push(nrm);
            cols.push(c);
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut reflectors = Vec::new();
        let mut rank = 0;
        for k in 0..n.min(m) {
            // pivot: largest remaining norm
            let (best, bn) = (k..n)
                .map(|j| (j, col_norm2(&cols[j][k..], prec)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            if bn.to_f64().sqrt() <= rel_tol {
                break;
            }
            cols.swap(k, best);
            perm.swap(k, best);
            let normx = bn.sqrt();
            let x0 = cols[k][k].clone();
            let ax0 = x0.abs();
            let alpha = if ax0.is_zero() {
                ComplexBig::from_real(-normx.clone())
            } else {
                x0.scale(&(-Float::with_val(prec, &normx / &ax0)))
            };
            let mut v: Vec<ComplexBig> = cols[k][k..].to_vec();
            v[0] = &v[0] - &alpha;
            let vn2 = col_norm2(&v, prec);
            if vn2.is_zero() {
                rank += 1;
                continue;
            }
            let two_over = Float::with_val(prec, 2u32) / &vn2;
            for col in cols.iter_mut().skip(k + 1) {
                let mut s = ComplexBig::zero(prec);
                for (vi, yi) in v.iter().zip(&col[k..]) {
                    s += &(&vi.conj() * yi);
                }
                let s = s.scale(&two_over);
                for (vi, yi) in v.iter().zip(col[k..].iter_mut()) {
                    *yi -= &(&s * vi);
                }
            }
            cols[k][k] = alpha;
            for y in cols[k][k + 1..].iter_mut() {
                *y = ComplexBig::zero(prec);
            }
            reflectors.push((v, two_over));
            rank += 1;
        }
        Self { m, n, rank, perm, scale, cols, reflectors, prec }
    }

    /// `Q^* b`.
    fn apply_qt(&self, b: &[ComplexBig]) -> Vec<ComplexBig> {
        let mut y: Vec<ComplexBig> = b.iter().map(|x| x.with_prec(self.prec)).collect();
        for (k, (v, two_over)) in self.reflectors.iter().enumerate() {
            let mut s = ComplexBig::zero(self.prec);
            for (vi, yi) in v.iter().zip(&y[k..]) {
                s += &(&vi.conj() * yi);
            }
            let s = s.scale(two_over);
            for (vi, yi) in v.iter().zip(y[k..].iter_mut()) {
                *yi -= &(&s * vi);
            }
        }
        y
    }

    /// Basic least-squares solution: the coefficients of the `rank` pivot columns solve the
    /// triangular system, the remaining ones are zero.
    pub fn solve(&self, b: &[ComplexBig]) -> Vec<ComplexBig> {
        assert_eq!(b.len(), self.m);
        let y = self.apply_qt(b);
        let r = self.rank;
        let mut z = vec![ComplexBig::zero(self.prec); r];
        for i in (0..r).rev() {
            let mut acc = y[i].clone();
            for j in i + 1..r {
                acc -= &(&self.cols[j][i] * &z[j]);
            }
            z[i] = &acc / &self.cols[i][i];
        }
        let mut x = vec![ComplexBig::zero(self.prec); self.n];
        for i in 0..r {
            let j = self.perm[i];
            x[j] = if self.scale[j].is_zero() {
                ComplexBig::zero(self.prec)
            } else {
                z[i].scale(&Float::with_val(self.prec, self.scale[j].recip_ref()))
            };
        }
        x
    }

    /// Original indices of the pivot columns, in pivot order.
    pub fn pivots(&self) -> &[usize] {
        &self.perm[..self.rank]
    }
}

/// `A x` for `A` given by columns.
pub fn mat_vec(columns: &[Vec<ComplexBig>], x: &[ComplexBig], prec: Prec) -> Vec<ComplexBig> {
    let m = columns.first().map_or(0, |c| c.len());
    let mut out = vec![ComplexBig::zero(prec); m];
    let mut tmp = Float::new(prec);
    for (c, xj) in columns.iter().zip(x) {
        if xj.is_zero() {
            continue;
        }
        for (o, a) in out.iter_mut().zip(c) {
            crate::num::fma_into(o, a, xj, &mut tmp);
        }
    }
    out
}

/// `||a - b|| / max(||b||, tiny)`.
pub fn rel_residual(a: &[ComplexBig], b: &[ComplexBig], prec: Prec) -> f64 {
    let mut num = Float::new(prec);
    let mut den = Float::new(prec);
    for (x, y) in a.iter().zip(b) {
        num += (x - y).norm_sqr();
        den += y.norm_sqr();
    }
    let d = den.to_f64().sqrt();
    num.to_f64().sqrt() / d.max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> ComplexBig {
        ComplexBig::from_f64(re, im, 128)
    }

    #[test]
    fn solves_square_complex_system() {
        let cols = vec![vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 2.0), c(1.0, 0.0), c(3.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 1.0), c(1.0, -1.0)]];
        let x = vec![c(0.5, -1.0), c(2.0, 0.25), c(-1.0, 0.0)];
        let b = mat_vec(&cols, &x, 128);
        let qr = PivotedQr::new(&cols, 1e-30, 128);
        assert_eq!(qr.rank, 3);
        let y = qr.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs_f64() < 1e-30);
        }
    }

    #[test]
    fn rank_deficient_basic_solution() {
        let a = vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 1.0)];
        let b2: Vec<_> = a.iter().map(|x| x.scale_i64(2)).collect();
        let e = vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(5.0, 0.0)];
        let cols = vec![a.clone(), b2, e.clone()];
        let qr = PivotedQr::new(&cols, 1e-25, 128);
        assert_eq!(qr.rank, 2);
        let rhs: Vec<_> = a.iter().zip(&e).map(|(x, y)| x.scale_i64(3) + y.clone()).collect();
        let x = qr.solve(&rhs);
        let back = mat_vec(&cols, &x, 128);
        assert!(rel_residual(&back, &rhs, 128) < 1e-30);
        assert_eq!(x.iter().filter(|v| v.is_zero()).count(), 1);
    }
}
