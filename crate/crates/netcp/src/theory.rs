//! Information quantities that govern detection delay.
//!
//! Once the earliest change in a monitored subset has happened, every
//! stream it touches drifts at its KL rate and the posterior odds grow
//! linearly; the expected stopping delay of the threshold rule scales like
//! |ln alpha| divided by (prior exponent + summed information rate). The
//! functions here compute those constants for a model and subset, so
//! simulations can be compared against the predicted slope.

use crate::model::{normalize_subset, ModelError, NetworkModel, TwoPhaseDensity};
use std::fmt;
use std::io::Write;

/// KL divergence of the post-change distribution from the pre-change one,
/// in nats per observation. Closed form per family.
pub fn kl_divergence(density: &TwoPhaseDensity) -> f64 {
    match *density {
        TwoPhaseDensity::Gaussian {
            mean_pre,
            mean_post,
            variance,
        } => {
            let delta = mean_post - mean_pre;
            delta * delta / (2.0 * variance)
        }
        TwoPhaseDensity::Bernoulli { p_pre, p_post } => {
            p_post * (p_post / p_pre).ln()
                + (1.0 - p_post) * ((1.0 - p_post) / (1.0 - p_pre)).ln()
        }
    }
}

/// The same divergence by numerical integration of the log likelihood
/// ratio under the post-change law: Gauss-Hermite quadrature for the
/// Gaussian family, the exact two-point sum for Bernoulli. Exists purely to
/// cross-check the closed forms.
pub fn kl_divergence_quadrature(density: &TwoPhaseDensity) -> f64 {
    match *density {
        TwoPhaseDensity::Gaussian {
            mean_post, variance, ..
        } => {
            let (nodes, weights) = gauss_hermite(40);
            let sigma = variance.sqrt();
            let scale = std::f64::consts::PI.sqrt().recip();
            nodes
                .iter()
                .zip(&weights)
                .map(|(&t, &w)| {
                    let x = mean_post + std::f64::consts::SQRT_2 * sigma * t;
                    w * density
                        .log_lr(x)
                        .expect("gaussian log ratios are defined everywhere")
                })
                .sum::<f64>()
                * scale
        }
        TwoPhaseDensity::Bernoulli { p_post, .. } => {
            let at = |x: f64| density.log_lr(x).expect("0/1 are in support");
            p_post * at(1.0) + (1.0 - p_post) * at(0.0)
        }
    }
}

/// Nodes and weights of m-point Gauss-Hermite quadrature for the weight
/// exp(-t^2): Newton iteration on the orthonormal Hermite recurrence,
/// walking roots from the outermost in. Standard initial guesses keep every
/// start inside the basin of its root.
fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 2);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mut upper: Vec<f64> = Vec::new(); // positive roots, descending
    let fm = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut z = match i {
            0 => (2.0 * fm + 1.0).sqrt() - 1.85575 * (2.0 * fm + 1.0).powf(-1.0 / 6.0),
            1 => upper[0] - 1.14 * fm.powf(0.426) / upper[0],
            2 => 1.86 * upper[1] - 0.86 * upper[0],
            3 => 1.91 * upper[2] - 0.91 * upper[1],
            _ => 2.0 * upper[i - 1] - upper[i - 2],
        };
        for _ in 0..200 {
            let (value, derivative) = hermite_orthonormal(m, z);
            let step = value / derivative;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, derivative) = hermite_orthonormal(m, z);
        upper.push(z);
        nodes[i] = z;
        nodes[m - 1 - i] = -z;
        let w = 2.0 / (derivative * derivative);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Value and derivative at x of the degree-m Hermite polynomial,
/// orthonormal under exp(-t^2).
fn hermite_orthonormal(m: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut current = std::f64::consts::PI.powf(-0.25);
    for j in 1..=m {
        let next = x * (2.0 / j as f64).sqrt() * current
            - ((j as f64 - 1.0) / j as f64).sqrt() * prev;
        prev = current;
        current = next;
    }
    (current, (2.0 * m as f64).sqrt() * prev)
}

/// Total information rate of a monitored subset: KL rates of its node
/// streams plus those of every edge stream with both endpoints inside.
/// Edges reaching outside are excluded; their switch time is not pinned
/// down by the subset's earliest change.
pub fn info_functional(model: &NetworkModel, subset: &[usize]) -> Result<f64, ModelError> {
    let subset = normalize_subset(model.node_count(), subset)?;
    let inside = |v: usize| subset.binary_search(&v).is_ok();
    let node_part: f64 = subset
        .iter()
        .map(|&j| kl_divergence(model.node_density(j)))
        .sum();
    let edge_part: f64 = model
        .graph()
        .edges()
        .iter()
        .enumerate()
        .filter(|&(_, &(a, b))| inside(a) && inside(b))
        .map(|(e, _)| kl_divergence(model.edge_density(e)))
        .sum();
    Ok(node_part + edge_part)
}

/// Log rate at which prior mass for "no change in the subset yet" decays:
/// the sum of -ln(1 - rho) over the subset. Always positive.
pub fn prior_exponent(model: &NetworkModel, subset: &[usize]) -> Result<f64, ModelError> {
    let subset = normalize_subset(model.node_count(), subset)?;
    Ok(subset
        .iter()
        .map(|&j| -(1.0 - model.node_prior(j).rho()).ln())
        .sum())
}

/// Predicted slope of mean detection delay against |ln alpha|:
/// 1 / (prior exponent + information rate).
pub fn asymptotic_slope(model: &NetworkModel, subset: &[usize]) -> Result<f64, ModelError> {
    Ok(1.0 / (prior_exponent(model, subset)? + info_functional(model, subset)?))
}

/// One subset's constants, labeled for reporting.
#[derive(Debug, Clone)]
pub struct InformationRow {
    pub label: String,
    pub subset: Vec<usize>,
    pub info: f64,
    pub prior_exponent: f64,
    pub slope: f64,
}

/// Delay constants for a batch of monitored subsets.
#[derive(Debug, Clone)]
pub struct InformationSummary {
    pub rows: Vec<InformationRow>,
}

impl InformationSummary {
    pub fn compute(
        model: &NetworkModel,
        entries: &[(String, Vec<usize>)],
    ) -> Result<Self, ModelError> {
        let rows = entries
            .iter()
            .map(|(label, subset)| {
                let subset = normalize_subset(model.node_count(), subset)?;
                Ok(InformationRow {
                    label: label.clone(),
                    info: info_functional(model, &subset)?,
                    prior_exponent: prior_exponent(model, &subset)?,
                    slope: asymptotic_slope(model, &subset)?,
                    subset,
                })
            })
            .collect::<Result<_, ModelError>>()?;
        Ok(Self { rows })
    }

    /// CSV with one row per subset; node labels are 1-based and joined
    /// with '+'.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "label,subset,info_nats,prior_exponent_nats,slope_steps_per_nat")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                row.label,
                subset_label(&row.subset),
                row.info,
                row.prior_exponent,
                row.slope
            )?;
        }
        Ok(())
    }
}

pub(crate) fn subset_label(subset: &[usize]) -> String {
    subset
        .iter()
        .map(|&j| (j + 1).to_string())
        .collect::<Vec<_>>()
        .join("+")
}

impl fmt::Display for InformationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:<12} {:>12} {:>12} {:>12}",
            "label", "subset", "info", "q", "slope"
        )?;
        for row in &self.rows {
            writeln!(
                f,
                "{:<16} {:<12} {:>12.6} {:>12.6} {:>12.6}",
                row.label,
                subset_label(&row.subset),
                row.info,
                row.prior_exponent,
                row.slope
            )?;
        }
        Ok(())
    }
}
