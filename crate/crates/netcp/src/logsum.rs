//! Log-domain accumulation primitives shared by the belief propagation and
//! brute-force enumeration paths.
//!
//! All posterior and likelihood arithmetic in this crate happens on log
//! weights; a weight of zero is represented by `f64::NEG_INFINITY` and every
//! helper here treats it as absent mass rather than as a NaN source.

/// log(exp(a) + exp(b)) without overflow.
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

/// log of the summed exponentials of a slice; empty slices carry zero mass.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|x| (x - hi).exp()).sum();
    hi + sum.ln()
}

/// Streaming log-sum-exp with running rescaling, for sums too large to
/// materialize as a slice.
#[derive(Debug, Clone)]
pub struct LogSumAccumulator {
    hi: f64,
    scaled_sum: f64,
}

impl LogSumAccumulator {
    pub fn new() -> Self {
        Self {
            hi: f64::NEG_INFINITY,
            scaled_sum: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.hi {
            self.scaled_sum += (x - self.hi).exp();
        } else {
            // Rescale the running sum so the new term becomes the unit.
            self.scaled_sum = self.scaled_sum * (self.hi - x).exp() + 1.0;
            self.hi = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.hi == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.hi + self.scaled_sum.ln()
        }
    }
}

impl Default for LogSumAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

/// out[i] = log sum exp of xs[0..=i].
pub fn prefix_log_sums(xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = f64::NEG_INFINITY;
    for &x in xs {
        acc = log_add_exp(acc, x);
        out.push(acc);
    }
    out
}

/// out[i] = log sum exp of xs[i+1..]; the last entry carries zero mass.
pub fn suffix_log_sums_exclusive(xs: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; xs.len()];
    let mut acc = f64::NEG_INFINITY;
    for i in (0..xs.len()).rev() {
        out[i] = acc;
        acc = log_add_exp(acc, xs[i]);
    }
    out
}

/// Exponentiates log weights into a probability vector summing to one.
pub fn normalize_log_weights(log_weights: &[f64]) -> Vec<f64> {
    let total = log_sum_exp(log_weights);
    log_weights.iter().map(|w| (w - total).exp()).collect()
}
