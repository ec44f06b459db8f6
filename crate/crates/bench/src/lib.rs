//! Fixed inputs shared by the benchmarks, so each bench measures only the
//! kernel under test.

use ivdf_core::black_scholes::{bs_price, Quote, VolPoint};
use ivdf_core::guess::linalg::Matrix;
use ivdf_core::{PrecisionConfig, XReal};
use rug::ops::Pow;
use rug::Float;

pub fn config(bits: u32) -> PrecisionConfig {
    PrecisionConfig::new(bits).expect("bench precision is valid")
}

/// A slightly in-the-money one-year point, `S/K = e^0.1`, `σ = 0.3`.
pub fn vol_point(bits: u32) -> VolPoint {
    let spot = Float::with_val(bits, 0.1).exp();
    let one = Float::with_val(bits, 1);
    VolPoint::new(spot, one.clone(), one, Float::with_val(bits, 0.3)).expect("valid point")
}

/// The quote priced from [`vol_point`].
pub fn quote(bits: u32) -> Quote {
    let p = vol_point(bits);
    let c = bs_price(&p).expect("price");
    Quote::new(p.spot, p.strike, p.maturity, c).expect("valid quote")
}

/// `y = 10^-6`, deep in the left tail of `F`.
pub fn tail_level(bits: u32) -> XReal {
    Float::with_val(bits, 10u32).pow(-6i32)
}

/// `n x n` Hilbert matrix, a standard ill-conditioned input for the SVD.
pub fn hilbert(n: usize, bits: u32) -> Matrix {
    let mut m = Matrix::zeros(n, n, bits);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, Float::with_val(bits, 1) / (i + j + 1) as u32);
        }
    }
    m
}
