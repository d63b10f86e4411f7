use serde::{Deserialize, Serialize};

/// Highest quality level whose packet threshold is met; 0 if none.
pub fn achieved_quality(delivered: u64, thresholds: &[u64]) -> usize {
    thresholds.iter().take_while(|&&t| delivered >= t).count()
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n-1)p`). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub count: usize,
    /// `(probability, value)` in the order requested.
    pub quantiles: Vec<(f64, f64)>,
}

impl QuantileTable {
    pub fn at(&self, p: f64) -> Option<f64> {
        self.quantiles.iter().find(|(q, _)| (q - p).abs() < 1e-12).map(|(_, v)| *v)
    }
}

/// Quantiles of `samples` at each probability in `grid`; `None` when there
/// are no samples.
pub fn aggregate_cdf(samples: &[f64], grid: &[f64]) -> Option<QuantileTable> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(QuantileTable {
        count: sorted.len(),
        quantiles: grid.iter().map(|&p| (p, quantile(&sorted, p))).collect(),
    })
}
