use cuspidal::num::Q;
use cuspidal::specfun::*;
use proptest::prelude::*;
use rug::ops::Pow;
use rug::Float;

fn rel(a: &Float, b: &Float) -> f64 {
    (Float::with_val(a.prec().max(b.prec()), a - b).abs() / b.clone().abs()).to_f64()
}

#[test]
fn u_half_closed_form_at_one() {
    let prec = 128;
    let x = Float::with_val(prec, 1);
    let got = u_half_integral(0, &x, prec).unwrap();
    let want = (Float::with_val(prec, cuspidal::num::pi(prec) / 2u32).sqrt()) / Float::with_val(prec, x.clone().exp_m1());
    assert!(rel(&got, &want) < 1e-30);
    let direct = u_direct(Q::new(1, 2), &x, prec);
    assert!(rel(&got, &direct) < 1e-15);
}

#[test]
fn u_half_matches_direct_sum() {
    let prec = 96;
    for j in 0..=4u32 {
        for x in [0.5, 1.0, 3.0, 10.0] {
            let xf = Float::with_val(prec, x);
            let got = u_half_integral(j, &xf, prec).unwrap();
            let want = u_direct(Q::new(2 * j as i64 + 1, 2), &xf, prec);
            assert!(rel(&got, &want) < 1e-14, "order {j}+1/2, x = {x}");
        }
    }
}

#[test]
fn u_half_large_x_leading_term() {
    let prec = 96;
    let x = Float::with_val(prec, 50);
    for j in 0..=3u32 {
        let got = u_half_integral(j, &x, prec).unwrap();
        let lead = Float::with_val(prec, cuspidal::num::pi(prec) / 2u32).sqrt() * Float::with_val(prec, x.clone().pow(j)) * Float::with_val(prec, -x.clone()).exp();
        let r = (got / lead).to_f64();
        assert!((r - 1.0).abs() < 0.2, "order {j}+1/2: {r}");
    }
}

#[test]
fn de_matches_direct_sum() {
    for bits in [53u32, 100] {
        for k in 0..=8u32 {
            for x in [0.5, 1.0, 3.0, 10.0, 30.0] {
                let xf = Float::with_val(bits + 64, x);
                let (uk, _) = u_integral_de(k, &xf, bits).unwrap();
                let want = u_direct(Q::from_integer(k as i64), &xf, bits + 64);
                let e = rel(&uk, &want);
                assert!(e < 2f64.powi(-(bits as i32) + 6), "k={k} x={x} B={bits}: {e:e}");
            }
        }
    }
}

#[test]
fn de_weight_one_at_three() {
    let x = Float::with_val(120, 3);
    let (u1, u0) = u_integral_de(1, &x, 53).unwrap();
    assert!(rel(&u1, &u_direct(Q::from_integer(1), &x, 120)) < 2f64.powi(-50));
    assert!(rel(&u0, &u_direct(Q::from_integer(0), &x, 120)) < 2f64.powi(-50));
}

#[test]
fn de_precision_monotone() {
    for k in [1u32, 4, 7] {
        for x in [0.7, 5.0] {
            let xf = Float::with_val(160, x);
            let (a, _) = u_integral_de(k, &xf, 53).unwrap();
            let (b, _) = u_integral_de(k, &xf, 100).unwrap();
            assert!(rel(&a, &b) < 2f64.powi(-50), "k={k} x={x}");
        }
    }
}

#[test]
fn w4_asymptotic() {
    // the leading term alone is 3.4% off at x = 20; the first correction is 1 + 7/(8x)
    let x = Float::with_val(96, 20);
    let w = w_k(Q::from_integer(4), &x, 80).unwrap();
    let lead = Float::with_val(96, cuspidal::num::pi(96) / 2u32).sqrt() * Float::with_val(96, x.clone().pow(3.5f64)) * Float::with_val(96, -x.clone()).exp();
    let r = (w / lead).to_f64();
    assert!((r - 1.0).abs() < 0.05, "{r}");
    assert!((r - (1.0 + 7.0 / 160.0)).abs() < 0.015, "{r}");
    let big = Float::with_val(96, 200);
    let w = w_k(Q::from_integer(4), &big, 80).unwrap();
    let lead = Float::with_val(96, cuspidal::num::pi(96) / 2u32).sqrt() * Float::with_val(96, big.clone().pow(3.5f64)) * Float::with_val(96, -big).exp();
    assert!(((w / lead).to_f64() - 1.0).abs() < 0.005);
}

#[test]
fn w_half_closed_form() {
    let prec = 96;
    let x = Float::with_val(prec, 2);
    let got = w_k(Q::new(1, 2), &x, 80).unwrap();
    let want = w_direct(Q::new(1, 2), &x, prec);
    assert!(rel(&got, &want) < 1e-14);
}

#[test]
fn w_positive_for_large_x() {
    for two_k in 1..=16i64 {
        let k = Q::new(two_k, 2);
        let x = 5.0 * (two_k as f64 / 2.0).max(1.0);
        for s in [1.0, 1.5, 3.0] {
            let w = w_k(k, &Float::with_val(96, x * s), 60).unwrap();
            assert!(w > 0, "k={k} x={}", x * s);
        }
    }
}

#[test]
fn argument_checks() {
    let z = Float::with_val(64, 0);
    assert!(matches!(w_k(Q::from_integer(2), &z, 53), Err(SpecError::NonPositive(_))));
    assert!(matches!(u_half_integral(1, &z, 64), Err(SpecError::NonPositive(_))));
    assert!(matches!(u_integral_de(1, &Float::with_val(64, 1), 5), Err(SpecError::Bits(5))));
    assert!(matches!(w_k(Q::new(1, 3), &Float::with_val(64, 1), 53), Err(SpecError::Order(_))));
    // tiny x with a large budget degenerates the grid; the direct sum takes over
    let (u, _) = u_integral_de(2, &Float::with_val(200, 1e-3), 150).unwrap();
    assert!(u > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn w_identity_against_bessel_sum(two_k in 1i64..=12, x in 0.3f64..25.0) {
        let k = Q::new(two_k, 2);
        let bits = 60;
        let xf = Float::with_val(bits + 64, x);
        let got = w_k(k, &xf, bits).unwrap();
        let want = w_direct(k, &xf, bits + 64);
        // W_k is a difference, so measure against the larger of its two parts
        let scale = u_direct(k, &xf, bits + 64);
        let err = (Float::with_val(bits + 64, &got - &want).abs() / scale).to_f64();
        prop_assert!(err <= 2f64.powi(-(bits as i32) + 4), "k={} x={} err={:e}", k, x, err);
    }
}
