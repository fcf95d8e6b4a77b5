//! Small log-space helpers shared by every solver.
//!
//! Probabilities that reach exact zero are represented by `f64::NEG_INFINITY`
//! and all helpers here treat that value as the additive identity.

/// `log(exp(a) + exp(b))` without overflow; `-inf` is the neutral element.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log(sum(exp(v)))` over a slice. Returns `-inf` for an empty slice or when
/// every entry is `-inf`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY || !hi.is_finite() {
        return hi;
    }
    let s: f64 = v.iter().map(|&x| (x - hi).exp()).sum();
    hi + s.ln()
}

/// `log(1 - exp(x))` for `x <= 0`, accurate near both ends.
#[inline]
pub fn log1m_exp(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Shift a row of log-weights so that it represents a probability vector.
pub fn normalize_log_row(row: &mut [f64]) {
    let z = log_sum_exp(row);
    for v in row.iter_mut() {
        *v -= z;
    }
}

/// Logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Row-wise `x * y` where `0 * anything` is 0; used when coefficients may
/// multiply `-inf` log-probabilities.
#[inline]
pub fn scaled(coef: f64, log_p: f64) -> f64 {
    if coef == 0.0 {
        0.0
    } else {
        coef * log_p
    }
}

/// Median of a slice (average of the two central values for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
