//! Small numeric utilities shared across the crate: compensated summation,
//! half-integer gamma values, and angle normalization.

use std::f64::consts::{PI, TAU};

/// Neumaier-compensated sum. Used on every exact accumulation path so that
/// partition identities and residual checks hold to ~1e-15 regardless of
/// term count or ordering.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Gamma(k/2) for integer k >= 1, in closed form.
///
/// Even k: ordinary factorial. Odd k: sqrt(pi) * (k-2)!! / 2^((k-1)/2).
pub fn gamma_half(k: u32) -> f64 {
    assert!(k >= 1, "gamma_half requires k >= 1");
    if k % 2 == 0 {
        // Gamma(m) = (m-1)!
        let m = k / 2;
        let mut acc = 1.0_f64;
        for i in 2..m {
            acc *= i as f64;
        }
        acc
    } else {
        // Gamma(k/2) = sqrt(pi) * (k-2)!! / 2^((k-1)/2)
        let mut acc = PI.sqrt();
        let mut i = k as i64 - 2;
        while i >= 1 {
            acc *= i as f64;
            i -= 2;
        }
        acc / 2.0_f64.powi((k as i32 - 1) / 2)
    }
}

/// Normalize an angle into [0, 2*pi).
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a % TAU;
    if r < 0.0 {
        r += TAU;
    }
    if r >= TAU {
        r = 0.0;
    }
    r
}

/// Relative scale used by residual checks: max(1, |values...|).
pub fn residual_scale(values: &[f64]) -> f64 {
    values.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}
