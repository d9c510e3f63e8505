//! Integer-order Bessel functions of the first kind by Miller's backward
//! recurrence.

use crate::error::{Error, Result};

use super::error_bound_value;

/// Magnitude at which the backward recurrence is rescaled.
const RESCALE_AT: f64 = 1e250;

/// Truncation level used to pick the recurrence start when no larger order
/// is requested.
const START_TOL: f64 = 1e-17;

/// Extra backward terms beyond the highest requested order.
pub fn miller_buffer(n_max: usize) -> usize {
    10.max(n_max.div_ceil(10))
}

/// Order beyond which `J_k(t)` is negligible: the first `m > t` where the
/// a-priori Chebyshev truncation bound drops below `1e-17`, capped by the
/// Airy-regime estimate `t + 16 t^{1/3} + 20`.
pub fn miller_start_guess(t: f64) -> usize {
    let cap = (t + 16.0 * t.cbrt() + 20.0).ceil() as usize;
    let mut m = t.floor() as usize + 1;
    while m < cap {
        if error_bound_value(t, m) <= START_TOL {
            return m;
        }
        m += 1;
    }
    cap
}

/// `J_0(t) … J_{n_max}(t)` by backward recurrence from
/// `max(n_max, miller_start_guess(t)) + miller_buffer(n_max)`, normalized with
/// `J_0 + 2 Σ_k J_{2k} = 1`.
pub fn bessel_sequence(t: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("Bessel argument must be finite and non-negative, got {t}")));
    }
    let mut out = vec![0.0; n_max + 1];
    if t == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    let top = n_max.max(miller_start_guess(t)) + miller_buffer(n_max);
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1.0; // J_k
    let mut norm = 0.0;
    for k in (1..=top).rev() {
        if k <= n_max {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        let prev = (2.0 * k as f64 / t) * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > RESCALE_AT {
            let s = 1.0 / RESCALE_AT;
            cur *= s;
            next *= s;
            norm *= s;
            if k <= n_max {
                for v in &mut out[k..] {
                    *v *= s;
                }
            }
        }
    }
    out[0] = cur;
    norm += cur;
    for v in &mut out {
        *v /= norm;
    }
    Ok(out)
}

/// Forward recurrence `J_{k+1} = (2k/t) J_k − J_{k−1}` from given `J_0`, `J_1`.
/// Unstable once `k > t`; kept to demonstrate why the backward form is used.
pub fn forward_recurrence(t: f64, j0: f64, j1: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(j0);
    if n_max >= 1 {
        out.push(j1);
    }
    for k in 1..n_max {
        let v = (2.0 * k as f64 / t) * out[k] - out[k - 1];
        out.push(v);
    }
    out
}
