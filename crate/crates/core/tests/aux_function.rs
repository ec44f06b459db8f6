use ivdf_core::implied::{aux_f, aux_f_inv, f_eval, SpecializationPoint};
use ivdf_core::{PrecisionConfig, XReal};
use proptest::prelude::*;
use rug::Float;

const BITS: u32 = 256;
const ORACLE_BITS: u32 = 1024;

/// `F(x) = N(-d2)/e - N(-d1)` with `d1,2 = 1/x ± x/2`: differentiating
/// gives `N'(d1)` because `N'(d2) = e N'(d1)`, and both sides vanish at 0.
fn oracle_f(x: f64) -> XReal {
    let p = ORACLE_BITS;
    let x = Float::with_val(p, x);
    let inv = Float::with_val(p, x.recip_ref());
    let half = Float::with_val(p, &x / 2u32);
    let d1 = Float::with_val(p, &inv + &half);
    let d2 = Float::with_val(p, &inv - &half);
    let tail = |z: &Float| Float::with_val(p, z / Float::with_val(p, 2).sqrt()).erfc() / 2u32;
    let e = Float::with_val(p, 1).exp();
    Float::with_val(p, tail(&d2) / e) - tail(&d1)
}

fn rel(a: &XReal, b: &XReal) -> f64 {
    let p = a.prec().max(b.prec());
    (Float::with_val(p, a - b).abs() / Float::with_val(p, b.abs_ref())).to_f64()
}

#[test]
fn quadrature_matches_closed_form() {
    let cfg = PrecisionConfig::new(BITS).unwrap();
    for x in [0.05, 0.1, 0.3, 1.0, 2.5, 10.0, 45.0] {
        let got = aux_f(&Float::with_val(BITS, x), &cfg).unwrap();
        let e = rel(&got, &oracle_f(x));
        assert!(e < 1e-60, "x = {x}: relative error {e:e}");
    }
}

#[test]
fn f_tends_to_inverse_e() {
    let cfg = PrecisionConfig::new(BITS).unwrap();
    let inv_e = Float::with_val(BITS, Float::with_val(BITS, 1).exp().recip_ref());
    let mut prev = Float::with_val(BITS, 0);
    for x in [1.0, 5.0, 10.0, 20.0] {
        let v = aux_f(&Float::with_val(BITS, x), &cfg).unwrap();
        assert!(v > prev && v < inv_e, "x = {x}");
        prev = v;
    }
    // Beyond x ≈ 25 the gap to 1/e is below one ulp at 256 bits.
    for x in [60.0, 200.0] {
        let v = aux_f(&Float::with_val(BITS, x), &cfg).unwrap();
        assert!(v >= prev && v <= inv_e, "x = {x}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn inverse_recovers_abscissa(x in 0.08f64..6.0) {
        let cfg = PrecisionConfig::new(BITS).unwrap();
        let y = Float::with_val(BITS, oracle_f(x));
        let got = aux_f_inv(&y, &cfg).unwrap();
        prop_assert!(rel(&got, &Float::with_val(BITS, x)) < 1e-50);
    }

    #[test]
    fn two_paths_agree_on_the_specialization_curve(x in 0.1f64..4.0, t in 0.25f64..4.0) {
        // K = F(x) makes f(K, T) = x / √T.
        let cfg = PrecisionConfig::new(BITS).unwrap();
        let strike = Float::with_val(BITS, oracle_f(x));
        let p = SpecializationPoint::new(strike, Float::with_val(BITS, t)).unwrap();
        let f = f_eval(&p, &cfg).unwrap();
        let want = Float::with_val(BITS, x) / Float::with_val(BITS, t).sqrt();
        prop_assert!(rel(&f, &want) < 1e-50);
    }

    #[test]
    fn f_is_increasing(a in 0.06f64..8.0, gap in 1e-3f64..1.0) {
        let cfg = PrecisionConfig::new(BITS).unwrap();
        let lo = aux_f(&Float::with_val(BITS, a), &cfg).unwrap();
        let hi = aux_f(&Float::with_val(BITS, a + gap), &cfg).unwrap();
        prop_assert!(hi > lo);
    }
}
