//! Small statistics helpers for Monte Carlo reports.

use serde::Serialize;

/// Frequency estimate of a Bernoulli event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub hits: u64,
    pub trials: u64,
    pub freq: f64,
    pub sigma: f64,
}

impl Proportion {
    pub fn new(hits: u64, trials: u64) -> Self {
        let p = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
        let sigma = if trials == 0 { 0.0 } else { (p * (1.0 - p) / trials as f64).sqrt() };
        Self { hits, trials, freq: p, sigma }
    }

    /// Half width of the 95% interval relative to the estimate.
    pub fn relative_ci(&self) -> f64 {
        if self.freq == 0.0 {
            f64::INFINITY
        } else {
            Z95 * self.sigma / self.freq
        }
    }
}

pub const Z95: f64 = 1.959_963_984_540_054;

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

pub fn mean_estimate(xs: &[f64]) -> MeanEstimate {
    let n = xs.len();
    if n == 0 {
        return MeanEstimate { mean: 0.0, std_error: 0.0, n };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    MeanEstimate { mean, std_error: (var / n as f64).sqrt(), n }
}

/// Weighted least squares line `y = a + b x` with known per-point variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_std_error: f64,
}

impl LineFit {
    pub fn slope_ci95(&self) -> (f64, f64) {
        (self.slope - Z95 * self.slope_std_error, self.slope + Z95 * self.slope_std_error)
    }
}

/// Returns `None` with fewer than two usable points.
pub fn weighted_line_fit(xs: &[f64], ys: &[f64], variances: &[f64]) -> Option<LineFit> {
    let pts: Vec<(f64, f64, f64)> = xs
        .iter()
        .zip(ys)
        .zip(variances)
        .filter(|((x, y), v)| x.is_finite() && y.is_finite() && **v > 0.0 && v.is_finite())
        .map(|((x, y), v)| (*x, *y, 1.0 / *v))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(LineFit { intercept: my - slope * mx, slope, slope_std_error: (1.0 / sxx).sqrt() })
}
