//! Risk metrics over execution-time samples and plan selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssessError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("invalid metric configuration: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    /// Entropy bin width in seconds; bins are anchored at 0.
    pub bin_width: f64,
    /// Level of the value at risk / expected shortfall.
    pub alpha: f64,
    /// Execution times above this bound count towards `bounded_prob`;
    /// no bound when absent.
    pub time_bound: Option<f64>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { bin_width: 5.0, alpha: 0.9, time_bound: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskMetrics {
    pub samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub entropy_bits: f64,
    pub bin_width: f64,
    pub alpha: f64,
    pub value_at_risk: f64,
    pub expected_shortfall: f64,
    pub time_bound: Option<f64>,
    pub bounded_prob: f64,
}

/// Sample mean, unbiased variance, binned entropy, VaR/ES and the fraction of
/// samples above the configured bound.
///
/// VaR is the order statistic at 1-based index `ceil(alpha * n)`; ES is the
/// mean of the samples strictly above VaR, or VaR itself when none are.
pub fn compute_metrics(samples: &[f64], cfg: &MetricConfig) -> Result<RiskMetrics, AssessError> {
    if samples.len() < 2 {
        return Err(AssessError::InsufficientSamples { needed: 2, got: samples.len() });
    }
    if !(cfg.bin_width > 0.0) {
        return Err(AssessError::BadConfig("bin width must be positive"));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(AssessError::BadConfig("alpha must lie in (0, 1)"));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;

    let entropy_bits = binned_entropy(samples, cfg.bin_width);

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((cfg.alpha * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let value_at_risk = sorted[rank - 1];
    let tail: Vec<f64> = sorted.iter().copied().filter(|&x| x > value_at_risk).collect();
    let expected_shortfall = if tail.is_empty() {
        value_at_risk
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    let bounded_prob = samples.iter().filter(|&&x| cfg.time_bound.is_some_and(|b| x > b)).count() as f64 / n as f64;

    Ok(RiskMetrics {
        samples: n,
        mean,
        variance,
        entropy_bits,
        bin_width: cfg.bin_width,
        alpha: cfg.alpha,
        value_at_risk,
        expected_shortfall,
        time_bound: cfg.time_bound,
        bounded_prob,
    })
}

fn binned_entropy(samples: &[f64], width: f64) -> f64 {
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for &x in samples {
        *bins.entry((x / width).floor() as i64).or_default() += 1;
    }
    let n = samples.len() as f64;
    let h: f64 = bins
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    // a single occupied bin gives -1 * log2(1) = -0.0
    h.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case", deny_unknown_fields)]
pub enum Elimination {
    /// Mean above `(1 + alpha_mean) * min mean`.
    MeanFilter { mean: f64, threshold: f64 },
    /// Passed the mean filter but another plan has lower variance.
    Variance { variance: f64, best: f64 },
    /// Same variance as the winner, higher entropy.
    Entropy { entropy_bits: f64, best: f64 },
    /// Same variance and entropy, higher mean.
    Mean { mean: f64, best: f64 },
    /// Identical metrics, lexicographically larger id.
    PlanId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selection {
    pub selected: String,
    pub min_mean: f64,
    pub alpha_mean: f64,
    pub mean_threshold: f64,
    pub eliminated: Vec<(String, Elimination)>,
}

/// Keeps plans whose mean is within `(1 + alpha_mean)` of the best mean and
/// picks the smallest variance among them; ties go to smaller entropy, then
/// smaller mean, then the lexicographically smaller plan id.
///
/// Panics on an empty table.
pub fn select(table: &[(String, RiskMetrics)], alpha_mean: f64) -> Selection {
    assert!(!table.is_empty(), "select needs at least one plan");
    let min_mean = table.iter().map(|(_, m)| m.mean).fold(f64::INFINITY, f64::min);
    let threshold = (1.0 + alpha_mean) * min_mean;

    let mut eliminated = Vec::new();
    let mut kept: Vec<&(String, RiskMetrics)> = Vec::new();
    for row in table {
        if row.1.mean > threshold {
            eliminated.push((row.0.clone(), Elimination::MeanFilter { mean: row.1.mean, threshold }));
        } else {
            kept.push(row);
        }
    }
    kept.sort_by(|a, b| {
        a.1.variance
            .total_cmp(&b.1.variance)
            .then(a.1.entropy_bits.total_cmp(&b.1.entropy_bits))
            .then(a.1.mean.total_cmp(&b.1.mean))
            .then(a.0.cmp(&b.0))
    });
    let (winner_id, best) = kept[0];
    for (id, m) in &kept[1..] {
        let reason = if m.variance != best.variance {
            Elimination::Variance { variance: m.variance, best: best.variance }
        } else if m.entropy_bits != best.entropy_bits {
            Elimination::Entropy { entropy_bits: m.entropy_bits, best: best.entropy_bits }
        } else if m.mean != best.mean {
            Elimination::Mean { mean: m.mean, best: best.mean }
        } else {
            Elimination::PlanId
        };
        eliminated.push((id.clone(), reason));
    }
    eliminated.sort_by(|a, b| a.0.cmp(&b.0));
    Selection {
        selected: winner_id.clone(),
        min_mean,
        alpha_mean,
        mean_threshold: threshold,
        eliminated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Welch's unequal-variance t-test, two-sided.
pub fn compare_means(a: &[f64], b: &[f64]) -> Result<WelchTest, AssessError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(AssessError::InsufficientSamples { needed: 2, got: s.len() });
        }
    }
    let stats = |s: &[f64]| {
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (n, mean, var)
    };
    let (na, ma, va) = stats(a);
    let (nb, mb, vb) = stats(b);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            WelchTest { t: 0.0, df: na + nb - 2.0, p_value: 1.0 }
        } else {
            WelchTest { t: (ma - mb).signum() * f64::INFINITY, df: na + nb - 2.0, p_value: 0.0 }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p_value = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(WelchTest { t, df, p_value })
}
