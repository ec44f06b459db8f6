use ivdf_core::series::{series_f_direct, series_f_inv_center, PowerSeries};
use ivdf_core::{PrecisionConfig, XReal};
use proptest::prelude::*;
use rug::Float;

const BITS: u32 = 256;

fn series(coeffs: &[f64]) -> PowerSeries {
    let c = coeffs.iter().map(|v| Float::with_val(BITS, *v)).collect();
    PowerSeries::new(Float::with_val(BITS, 0), c).unwrap()
}

fn max_diff(a: &PowerSeries, b: &[XReal]) -> XReal {
    let mut m = Float::with_val(BITS, 0);
    for (x, y) in a.coeffs().iter().zip(b) {
        m = m.max(&Float::with_val(BITS, x - y).abs());
    }
    m
}

fn coeff_vec() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-2.0f64..2.0, 8), 0.2f64..3.0).prop_map(|(mut v, lin)| {
        v[0] = 0.0;
        v[1] = lin;
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reversion_composes_to_identity(c in coeff_vec()) {
        let s = series(&c);
        let r = s.reverse().unwrap();
        let id = s.compose(&r).unwrap();
        let mut want = vec![Float::with_val(BITS, 0); c.len()];
        want[1] = Float::with_val(BITS, 1);
        prop_assert!(max_diff(&id, &want) < 1e-60);
    }

    #[test]
    fn exp_and_ln_are_inverse(c in coeff_vec()) {
        let s = series(&c);
        let back = s.exp().unwrap().ln().unwrap();
        let want: Vec<XReal> = c.iter().map(|v| Float::with_val(BITS, *v)).collect();
        prop_assert!(max_diff(&back, &want) < 1e-60);
    }

    #[test]
    fn derivative_undoes_antiderivative(c in coeff_vec(), k in -3.0f64..3.0) {
        let s = series(&c);
        let d = s.antiderivative(&Float::with_val(BITS, k)).derivative();
        let want: Vec<XReal> = c.iter().map(|v| Float::with_val(BITS, *v)).collect();
        prop_assert!(max_diff(&d, &want) < 1e-70);
    }

    #[test]
    fn sqrt_squares_back(mut c in coeff_vec(), a0 in 0.5f64..4.0) {
        c[0] = a0;
        let s = series(&c);
        let q = s.sqrt().unwrap();
        let sq = q.mul(&q).unwrap();
        let want: Vec<XReal> = c.iter().map(|v| Float::with_val(BITS, *v)).collect();
        prop_assert!(max_diff(&sq, &want) < 1e-60);
    }
}

#[test]
fn f_and_inverse_aux_share_one_expansion_at_unit_maturity() {
    let cfg = PrecisionConfig::new(BITS).unwrap();
    let f = series_f_direct(10, &Float::with_val(BITS, 1), &cfg).unwrap();
    let inv = series_f_inv_center(10, &cfg).unwrap();
    assert_eq!(f.center(), inv.center());
    assert!(max_diff(&f, inv.coeffs()) < 1e-60);
}

#[test]
fn maturity_scales_f_series_by_inverse_root() {
    let cfg = PrecisionConfig::new(BITS).unwrap();
    let one = series_f_direct(6, &Float::with_val(BITS, 1), &cfg).unwrap();
    let four = series_f_direct(6, &Float::with_val(BITS, 4), &cfg).unwrap();
    let halved: Vec<XReal> = one.coeffs().iter().map(|c| Float::with_val(BITS, c / 2u32)).collect();
    assert!(max_diff(&four, &halved) < 1e-60);
}
