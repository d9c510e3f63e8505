#![allow(dead_code)]

use std::io::Write;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use decspin::bench::{random_problem, spin_problem};
use decspin::oracle::dense_eig;
use decspin::run::Problem;
use decspin::spin::{RandomSpinParams, SpinSystemSpec};
use decspin::{SparseMatrix, StateVector, C64};

/// Fractional bits of the fixed-point Bessel oracle.
const FRAC_BITS: u32 = 400;

/// Writes straight to the process stderr so the line survives output capture.
pub fn report(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn fixed_from_f64(t: f64) -> BigInt {
    let scaled = t * 2f64.powi(60);
    assert!(scaled.fract() == 0.0 && scaled < 2f64.powi(100), "{t} is not representable at 60 bits");
    BigInt::from(scaled as u128) << (FRAC_BITS - 60)
}

fn fixed_mul(a: &BigInt, b: &BigInt) -> BigInt {
    (a * b) >> FRAC_BITS
}

/// `J_k(t)` from the power series `Σ (−1)^m (t/2)^{2m+k} / (m! (m+k)!)` in
/// 400-bit fixed point; absolute accuracy far below `1e−30` for `t ≤ 64`.
pub fn bessel_series(t: f64, k: usize) -> f64 {
    let half = fixed_from_f64(t) >> 1;
    let half_sq = fixed_mul(&half, &half);
    let mut term = BigInt::from(1) << FRAC_BITS;
    for i in 1..=k {
        term = fixed_mul(&term, &half) / i;
    }
    let floor = BigInt::from(1) << (FRAC_BITS - 300);
    let mut sum = BigInt::zero();
    let mut m = 0usize;
    loop {
        sum += &term;
        m += 1;
        term = -fixed_mul(&term, &half_sq) / (m * (m + k));
        if term.abs() < floor && m as f64 > t {
            break;
        }
    }
    sum.to_f64().expect("finite") * 2f64.powi(-(FRAC_BITS as i32))
}

/// Bounds used throughout the acceptance suite, with time in milliseconds.
pub fn ms_params() -> RandomSpinParams {
    RandomSpinParams { time_unit: 1e-3, ..Default::default() }
}

pub fn random_ms_problem(n: usize, seed: u64) -> Problem {
    random_problem(n, &ms_params(), seed).expect("valid spec")
}

pub fn single_spin_problem(omega: f64) -> Problem {
    spin_problem(&SpinSystemSpec::uncoupled(vec![omega]).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random Hermitian matrix with entries of modulus at most one.
pub fn random_hermitian(dim: usize, seed: u64) -> SparseMatrix {
    let mut r = rng(seed);
    let mut rows = vec![vec![C64::new(0.0, 0.0); dim]; dim];
    for i in 0..dim {
        rows[i][i] = C64::new(r.random_range(-1.0..1.0), 0.0);
        for j in 0..i {
            let z = C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)) * std::f64::consts::FRAC_1_SQRT_2;
            rows[i][j] = z;
            rows[j][i] = z.conj();
        }
    }
    SparseMatrix::from_dense(&rows).unwrap()
}

pub fn random_unit_vector(dim: usize, seed: u64) -> StateVector {
    let mut r = rng(seed);
    let mut v = StateVector((0..dim).map(|_| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect());
    let n = v.norm();
    v.scale(C64::new(1.0 / n, 0.0));
    v
}

/// `e^{−iLt} v` through the dense eigendecomposition.
pub fn dense_expv(l: &SparseMatrix, v: &[C64], t: f64) -> StateVector {
    let d = dense_eig(l).unwrap();
    let mu = d.amplitudes(v).unwrap();
    d.state_at(&mu, t).unwrap()
}

pub fn grid(dt: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 * dt).collect()
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
