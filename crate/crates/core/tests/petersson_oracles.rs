use cuspidal::arith::Mat2;
use cuspidal::arithchar::DirichletCharacter;
use cuspidal::bgbasis::{represent, BGForm, CuspExpansion, RepresentOpts};
use cuspidal::fixtures::{bundled, eta_product};
use cuspidal::modcurve::CosetSystem;
use cuspidal::num::{pi, ComplexBig, Q};
use cuspidal::petersson::*;
use cuspidal::qseries::FracQExp;
use num_complex::Complex64;
use proptest::prelude::*;
use rug::ops::Pow;
use rug::{Float, Integer};

const DELTA_NORM: f64 = 1.035_362_056_804_321e-6;

/// Delta straight from the eta product, as the one cusp expansion at level 1.
fn delta_expansions(len: usize, prec: u32) -> (CosetSystem, CosetExpansions) {
    let sys = CosetSystem::new(1);
    let coeffs = eta_product(&[(1, 24)], len).iter().map(|z| ComplexBig::from_integer(z, prec)).collect();
    let e = FracQExp::new(Q::from_integer(0), 1, Q::from_integer(12), coeffs, prec);
    let c = CuspExpansion { cusp: "oo".into(), alpha: Q::from_integer(0), width: 1, expansion: e };
    let ex = CosetExpansions::new(&sys, Q::from_integer(12), DirichletCharacter::trivial(1), vec![c]);
    (sys, ex)
}

fn bg_from(coeffs: &[Integer], n: u64, k: Q, prec: u32) -> BGForm {
    let e = FracQExp::new(Q::from_integer(0), 1, k, coeffs.iter().map(|z| ComplexBig::from_integer(z, prec)).collect(), prec);
    represent(&e, n, &DirichletCharacter::trivial(n), &RepresentOpts::new(prec)).unwrap()
}

fn bg(id: &str, prec: u32) -> BGForm {
    let f = bundled(id).unwrap();
    represent(&f.expansion(prec), f.level, &f.character(), &RepresentOpts::new(prec)).unwrap()
}

fn c64(z: &ComplexBig) -> Complex64 {
    z.to_c64()
}

#[test]
fn delta_norm_all_methods() {
    let prec = 128;
    let (sys, ex) = delta_expansions(80, prec);
    let mut vals = Vec::new();
    for m in [Method::HaberlandCuspidal, Method::HaberlandGeneral, Method::NelsonCollins, Method::QuadratureOracle] {
        let r = run_method(m, &ex, &ex, &sys, prec).unwrap();
        assert_eq!(r.method, m);
        assert_eq!(r.normalization, "index-normalized");
        assert!(r.error_estimate > 0.0);
        let v = c64(&r.value);
        assert!((v.re - DELTA_NORM).abs() < 1e-6 * DELTA_NORM, "{m:?}: {}", r.value);
        assert!(v.im.abs() <= r.error_estimate.max(1e-40), "{m:?}: imaginary part {}", v.im);
        vals.push(r);
    }
    // the three exact methods agree within their combined error estimates
    for a in &vals[..3] {
        for b in &vals[..3] {
            let d = (&a.value - &b.value).abs_f64();
            assert!(d <= 10.0 * (a.error_estimate + b.error_estimate), "{:?} vs {:?}: {d:e}", a.method, b.method);
        }
    }
}

#[test]
fn delta_from_bg_form() {
    let f = bg("delta", 128);
    let sys = CosetSystem::new(1);
    let r = petersson_haberland_cuspidal(&f, &f, &sys, 96).unwrap();
    assert!((r.value.to_c64().re - DELTA_NORM).abs() < 1e-12 * DELTA_NORM);
    let o = petersson_quadrature_oracle(&f, &f, &sys, 1e-6).unwrap();
    assert!((o.value.to_c64().re - DELTA_NORM).abs() < 1e-4 * DELTA_NORM);
}

#[test]
fn eleven_a_cross_method() {
    let prec = 96;
    let f = bg("11a", 128);
    let sys = CosetSystem::new(11);
    let mut vals = Vec::new();
    for m in [Method::HaberlandCuspidal, Method::HaberlandGeneral, Method::NelsonCollins] {
        let ex = CosetExpansions::from_form(&f, &sys, &lengths_for(m, &sys, f.weight, prec)).unwrap();
        vals.push(run_method(m, &ex, &ex, &sys, prec).unwrap());
    }
    let o = petersson_quadrature_oracle(&f, &f, &sys, 1e-6).unwrap();
    let v0 = c64(&vals[0].value);
    assert!(v0.re > 0.0);
    for r in &vals {
        assert!((c64(&r.value) - v0).norm() < 1e-20 * v0.norm(), "{:?}", r.method);
        assert!((c64(&r.value) - c64(&o.value)).norm() < 1e-6 * v0.norm(), "{:?} vs oracle", r.method);
    }
}

#[test]
fn theta_nelson_vs_oracle() {
    let f = bg("theta", 128);
    let sys = CosetSystem::new(4);
    let r = petersson_nelson_collins(&f, &f, &sys, 96).unwrap();
    let o = petersson_quadrature_oracle(&f, &f, &sys, 1e-6).unwrap();
    assert!((c64(&r.value) - c64(&o.value)).norm() < 1e-4 * o.value.abs_f64());
    // theta is not a cusp form, so Haberland does not apply
    assert!(matches!(petersson_haberland_cuspidal(&f, &f, &sys, 96), Err(PeterssonError::Weight(_))));
}

/// `E2(tau) - 11 E2(11 tau)`, the Eisenstein series of weight 2 on `Gamma0(11)`.
fn eis11(len: usize) -> Vec<Integer> {
    let sigma = |n: usize| -> i64 { (1..=n).filter(|d| n.is_multiple_of(*d)).map(|d| d as i64).sum() };
    (0..len)
        .map(|n| {
            if n == 0 {
                Integer::from(-10)
            } else {
                let mut c = -24 * sigma(n);
                if n % 11 == 0 {
                    c += 264 * sigma(n / 11);
                }
                Integer::from(c)
            }
        })
        .collect()
}

struct Level11 {
    sys: CosetSystem,
    f: CosetExpansions,
    e: CosetExpansions,
}

fn level11(prec: u32) -> Level11 {
    let sys = CosetSystem::new(11);
    let f = bg("11a", 128);
    let e = bg_from(&eis11(60), 11, Q::from_integer(2), 128);
    let len = lengths_for(Method::NelsonCollins, &sys, Q::from_integer(2), prec);
    let f = CosetExpansions::from_form(&f, &sys, &len).unwrap();
    let e = CosetExpansions::from_form(&e, &sys, &len).unwrap();
    Level11 { sys, f, e }
}

#[test]
fn eisenstein_is_orthogonal_to_cusp_form() {
    let prec = 96;
    let l = level11(prec);
    let ff = haberland_cuspidal(&l.f, &l.f, &l.sys, prec).unwrap().value.abs_f64();
    let ee_scale = l.e.cusps[0].expansion.coeffs[0].abs_f64();
    for r in [
        haberland_general(&l.f, &l.e, &l.sys, prec).unwrap(),
        haberland_general(&l.e, &l.f, &l.sys, prec).unwrap(),
        nelson_collins(&l.f, &l.e, &l.sys, prec).unwrap(),
    ] {
        assert!(r.value.abs_f64() < 1e-20 * ff * ee_scale, "{:?}: {}", r.method, r.value);
    }
    let o = quadrature_oracle(&l.f, &l.e, &l.sys, 1e-4);
    // the exact value is zero, so only the absolute size of the oracle is meaningful
    match o {
        Ok(o) => assert!(o.value.abs_f64() < 1e-5 * ff * ee_scale, "{}", o.value),
        Err(PeterssonError::Budget { .. }) => {}
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn noncuspidal_pair_uses_all_three_sums() {
    let prec = 96;
    let l = level11(prec);
    // f + E vanishes at no cusp, so the general route takes S_2 and S_3
    let fe = l.e.combine(&ComplexBig::one(prec), &l.f, &l.sys).unwrap();
    let want = haberland_cuspidal(&l.f, &l.f, &l.sys, prec).unwrap();
    let a = haberland_general(&fe, &l.f, &l.sys, prec).unwrap();
    let b = haberland_general(&l.f, &fe, &l.sys, prec).unwrap();
    let c = nelson_collins(&fe, &l.f, &l.sys, prec).unwrap();
    let w = c64(&want.value);
    for r in [&a, &b, &c] {
        assert!((c64(&r.value) - w).norm() < 1e-20 * w.norm(), "{:?}: {}", r.method, r.value);
    }
    // Hermitian symmetry of the general route with the roles swapped
    assert!((c64(&a.value) - c64(&b.value).conj()).norm() <= 3.0 * (a.error_estimate + b.error_estimate));
    let o = quadrature_oracle(&fe, &l.f, &l.sys, 1e-6).unwrap();
    assert!((c64(&o.value) - w).norm() < 1e-5 * w.norm());
}

#[test]
fn divergent_pairs_are_rejected() {
    let prec = 96;
    let l = level11(prec);
    assert!(matches!(haberland_general(&l.e, &l.e, &l.sys, prec), Err(PeterssonError::Divergent(_))));
    assert!(matches!(nelson_collins(&l.e, &l.e, &l.sys, prec), Err(PeterssonError::Divergent(_))));
    assert!(matches!(haberland_cuspidal(&l.e, &l.f, &l.sys, prec), Err(PeterssonError::NotCuspidal { .. })));
    assert!(matches!(quadrature_oracle(&l.e, &l.e, &l.sys, 1e-6), Err(PeterssonError::Divergent(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]
    #[test]
    fn sesquilinear(re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let prec = 96;
        let l = level11(prec);
        let a = ComplexBig::from_f64(re, im, prec);
        let fe = l.f.combine(&a, &l.e, &l.sys).unwrap();
        for m in [Method::HaberlandGeneral, Method::NelsonCollins] {
            let lhs = run_method(m, &fe, &l.f, &l.sys, prec).unwrap();
            let x = run_method(m, &l.f, &l.f, &l.sys, prec).unwrap();
            let y = run_method(m, &l.e, &l.f, &l.sys, prec).unwrap();
            let rhs = &(&a * &x.value) + &y.value;
            let tol = lhs.error_estimate + a.abs_f64() * x.error_estimate + y.error_estimate;
            prop_assert!((&lhs.value - &rhs).abs_f64() <= 10.0 * tol, "{:?}", m);
        }
    }
}

/// Representation numbers of the binary form `a x^2 + b x y + c y^2` as a q-series.
fn binary_theta(a: i64, b: i64, c: i64, len: usize) -> Vec<Integer> {
    let mut out = vec![Integer::new(); len];
    let r = (len as f64).sqrt() as i64 * 2 + 4;
    for x in -r..=r {
        for y in -r..=r {
            let v = a * x * x + b * x * y + c * y * y;
            if (v as usize) < len {
                out[v as usize] += 1;
            }
        }
    }
    out
}

fn mul(a: &[Integer], b: &[Integer]) -> Vec<Integer> {
    let mut o = vec![Integer::new(); a.len()];
    for i in 0..a.len() {
        for j in 0..a.len() - i {
            o[i + j] += Integer::from(&a[i] * &b[j]);
        }
    }
    o
}

/// `S_2(Gamma0(23))` is spanned by `t1 (t1 - t2)` and `t2 (t1 - t2)` with `t1, t2` the theta
/// series of the two reduced forms of discriminant -23. The Gram matrix is Hermitian
/// positive definite and Nelson-Collins reproduces it.
#[test]
fn level23_gram_matrix() {
    let prec = 96;
    let len = 60;
    let t1 = binary_theta(1, 1, 6, len);
    let t2 = binary_theta(2, 1, 3, len);
    let d: Vec<Integer> = t1.iter().zip(&t2).map(|(a, b)| Integer::from(a - b)).collect();
    let sys = CosetSystem::new(23);
    let k = Q::from_integer(2);
    let len_h = lengths_for(Method::HaberlandCuspidal, &sys, k, prec);
    let len_n = lengths_for(Method::NelsonCollins, &sys, k, prec);
    let basis: Vec<BGForm> = [mul(&t1, &d), mul(&t2, &d)].iter().map(|c| bg_from(c, 23, k, 128)).collect();
    let hab: Vec<CosetExpansions> = basis.iter().map(|b| CosetExpansions::from_form(b, &sys, &len_h).unwrap()).collect();
    let nel: Vec<CosetExpansions> = basis.iter().map(|b| CosetExpansions::from_form(b, &sys, &len_n).unwrap()).collect();
    let mut g = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let r = haberland_cuspidal(&hab[i], &hab[j], &sys, prec).unwrap();
            let n = nelson_collins(&nel[i], &nel[j], &sys, prec).unwrap();
            g[i][j] = c64(&r.value);
            assert!((g[i][j] - c64(&n.value)).norm() < 1e-18 * g[i][j].norm().max(1e-3));
        }
    }
    assert!((g[0][1] - g[1][0].conj()).norm() < 1e-20);
    assert!(g[0][0].re > 0.0 && g[1][1].re > 0.0);
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    assert!(det.re > 0.0 && det.im.abs() < 1e-20, "{det}");
}

// ---------------------------------------------------------------------------
// Period integrals against direct quadrature

/// `int_0^oo h(t) dt` by the exp-sinh rule `t = e^{(pi/2) sinh s}`, trapezoid in `s`.
fn de_half_line(h: &dyn Fn(&Float) -> Vec<ComplexBig>, prec: u32, step: f64) -> Vec<ComplexBig> {
    let half_pi = Float::with_val(prec, pi(prec) / 2u32);
    let mut acc: Option<Vec<ComplexBig>> = None;
    let n = (5.0 / step) as i64;
    for j in -n..=n {
        let s = Float::with_val(prec, j as f64 * step);
        let e = Float::with_val(prec, &half_pi * s.clone().sinh()).exp();
        let wt = Float::with_val(prec, &half_pi * s.cosh()) * &e * step;
        let v = h(&e);
        let acc = acc.get_or_insert_with(|| vec![ComplexBig::zero(prec); v.len()]);
        for (a, x) in acc.iter_mut().zip(v) {
            *a += &x.scale(&wt);
        }
    }
    acc.unwrap()
}

/// Coefficients of `(X - tau)^m` in `X^0 .. X^m`.
fn shifted_power(tau: &ComplexBig, m: u32) -> Vec<ComplexBig> {
    let prec = tau.prec();
    (0..=m)
        .map(|j| {
            let b = Float::with_val(prec, Integer::from(Integer::binomial_u(m, j)));
            let p = (-tau.clone()).powi((m - j) as i64);
            p.scale(&b)
        })
        .collect()
}

#[test]
fn exp_period_matches_vertical_ray() {
    let prec = 128;
    let a = ComplexBig::i(prec);
    let got = exp_period_integral(Q::from_integer(1), &a, 4, prec).unwrap();
    let two_pi_i = ComplexBig::i(prec).scale(&Float::with_val(prec, pi(prec) * 2u32));
    let h = |t: &Float| -> Vec<ComplexBig> {
        let tau = &a + &ComplexBig::new(Float::new(prec), t.clone());
        let e = (&two_pi_i * &tau).exp().mul_i();
        shifted_power(&tau, 2).iter().map(|c| c * &e).collect()
    };
    let want = de_half_line(&h, prec, 1.0 / 64.0);
    for (x, y) in got.iter().zip(&want) {
        assert!((x - y).abs_f64() < 2f64.powi(-64), "{x} vs {y}");
    }
    // decays like e^{-2 pi m Im a}
    let far = exp_period_integral(Q::from_integer(3), &a, 4, prec).unwrap();
    assert!(far[2].abs_f64() < got[2].abs_f64() * (-4.0 * std::f64::consts::PI).exp() * 1.01);
}

#[test]
fn delta_zero_to_infinity_matches_quadrature() {
    let prec = 128;
    let (sys, ex) = delta_expansions(80, prec);
    let periods = Periods::new(&ex, &sys, prec).unwrap();
    let got = periods.zero_to_infinity(0).clone();
    // Delta(i t) by its q-expansion; on (0, 1) use Delta(i t) = t^{-12} Delta(i / t)
    let f = &ex.cosets[0];
    let delta_it = |t: &Float| -> ComplexBig { f.eval(&ComplexBig::new(Float::new(prec), t.clone()), 1e-45).unwrap() };
    let h = |t: &Float| -> Vec<ComplexBig> {
        let one = Float::with_val(prec, 1);
        let u = Float::with_val(prec, &one + t);
        // [1, oo): tau = i u
        let tau = ComplexBig::new(Float::new(prec), u.clone());
        let d = delta_it(&u).mul_i();
        let hi: Vec<ComplexBig> = shifted_power(&tau, 10).iter().map(|c| c * &d).collect();
        // (0, 1] mapped to [1, oo) by t = 1/u: Delta(i/u) = u^{12} Delta(i u), dt = du / u^2
        let tau_lo = ComplexBig::new(Float::new(prec), Float::with_val(prec, &one / &u));
        let dl = d.scale(&Float::with_val(prec, u.clone().pow(10u32)));
        let lo: Vec<ComplexBig> = shifted_power(&tau_lo, 10).iter().map(|c| c * &dl).collect();
        hi.iter().zip(&lo).map(|(a, b)| a + b).collect()
    };
    let want = de_half_line(&h, prec, 1.0 / 64.0);
    for (x, y) in got.coeffs.iter().zip(&want) {
        assert!((x - y).abs_f64() < 2f64.powi(-54), "{x} vs {y}");
    }
}

#[test]
fn manin_split_and_slash_lemma() {
    let prec = 96;
    let sys = CosetSystem::new(11);
    // gamma sends the test points down to Im ~ 0.2, so the budget for Im >= sqrt(3)/2 is scaled up
    let len: Vec<usize> = lengths_for(Method::HaberlandCuspidal, &sys, Q::from_integer(2), prec).iter().map(|n| 6 * n).collect();
    let f = CosetExpansions::from_form(&bg("11a", 128), &sys, &len).unwrap();
    let p = Periods::new(&f, &sys, prec).unwrap();
    for j in 0..sys.len() {
        let whole = p.between_cusps(j, (-1, 1), (1, 1));
        let split = p.between_cusps(j, (-1, 1), (0, 1)).add(&p.between_cusps(j, (0, 1), (1, 1)));
        assert!((&whole.coeffs[0] - &split.coeffs[0]).abs_f64() < 1e-22);
        assert!(p.between_cusps(j, (2, 5), (2, 5)).coeffs[0].is_zero());
        // P(a, b, f_j | gamma) = P(gamma a, gamma b, f_j) | gamma with interior endpoints
        let gamma = Mat2::new(1, 1, 1, 2);
        let (jp, delta) = sys.locate(sys.reps[j] * gamma);
        let chi = f.character.value(delta.d, prec);
        let x = ComplexBig::from_f64(0.2, 1.3, prec);
        let y = ComplexBig::from_f64(-0.4, 0.9, prec);
        let mob = |z: &ComplexBig| -> ComplexBig {
            let num = z.scale_i64(gamma.a) + ComplexBig::from_i64(gamma.b, prec);
            let den = z.scale_i64(gamma.c) + ComplexBig::from_i64(gamma.d, prec);
            &num / &den
        };
        let lhs = p.interior(jp, &x, &y).scale(&chi);
        let rhs = p.interior(j, &mob(&x), &mob(&y)).slash(gamma);
        assert!((&lhs.coeffs[0] - &rhs.coeffs[0]).abs_f64() < 1e-20, "coset {j}");
    }
}

#[test]
fn budget_grows_linearly_and_quadratically() {
    let sys = CosetSystem::new(24);
    let h = |p| lengths_for(Method::HaberlandCuspidal, &sys, Q::from_integer(4), p).iter().sum::<usize>() as f64;
    let n = |p| lengths_for(Method::NelsonCollins, &sys, Q::new(5, 2), p).iter().sum::<usize>() as f64;
    let (lo, hi) = (cuspidal::num::digits_to_bits(19), cuspidal::num::digits_to_bits(38));
    let rh = h(hi) / h(lo);
    let rn = n(hi) / n(lo);
    assert!((1.0..=3.0).contains(&rh), "{rh}");
    assert!((2.0..=6.0).contains(&rn), "{rn}");
    assert!(rn > rh);
}

#[test]
fn eta_identity_is_one_twelfth() {
    let s = eta_lattice_sum(96).unwrap();
    assert!((s.to_f64() - 1.0 / 12.0).abs() < 1e-15);
}
