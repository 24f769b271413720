use crate::error::{Error, Result};

/// Minimum number of points in each segment.
pub const MIN_SEGMENT: usize = 3;

/// Two power laws `value ≈ a_i · rank^(−b_i)` joined at `breakpoint`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    /// Last rank (1-based) of the first segment.
    pub breakpoint: usize,
    pub b1: f64,
    pub b2: f64,
    pub prefactor1: f64,
    pub prefactor2: f64,
    /// Residual sums of squares in `(ln rank, ln value)`.
    pub rss1: f64,
    pub rss2: f64,
}

impl PowerLawFit {
    pub fn rss(&self) -> f64 {
        self.rss1 + self.rss2
    }
}

struct Line {
    slope: f64,
    intercept: f64,
    rss: f64,
}

fn fit_line(x: &[f64], y: &[f64]) -> Line {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Line { slope, intercept, rss }
}

/// Exhaustive two-segment least-squares fit in log–log space. Ties in total
/// residual go to the smallest breakpoint.
pub fn fit_piecewise_powerlaw(values: &[f64]) -> Result<PowerLawFit> {
    let n = values.len();
    if n < 2 * MIN_SEGMENT {
        return Err(Error::validation(format!(
            "piecewise power-law fit needs at least {} values, got {n}",
            2 * MIN_SEGMENT
        )));
    }
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::validation(format!("power-law fit needs positive finite values, got {bad}")));
    }
    let x: Vec<f64> = (1..=n).map(|r| (r as f64).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let my = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let tol = 1e-12 * (1.0 + sst);

    let mut best: Option<PowerLawFit> = None;
    for b in MIN_SEGMENT..=n - MIN_SEGMENT {
        let l1 = fit_line(&x[..b], &y[..b]);
        let l2 = fit_line(&x[b..], &y[b..]);
        let fit = PowerLawFit {
            breakpoint: b,
            b1: -l1.slope,
            b2: -l2.slope,
            prefactor1: l1.intercept.exp(),
            prefactor2: l2.intercept.exp(),
            rss1: l1.rss,
            rss2: l2.rss,
        };
        if best.is_none_or(|cur| fit.rss() < cur.rss() - tol) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one breakpoint"))
}
