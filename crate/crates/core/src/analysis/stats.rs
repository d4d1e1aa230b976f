use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean with a two-sided 95% Student-t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary { n, mean: f64::NAN, std_dev: f64::NAN, ci_low: f64::NAN, ci_high: f64::NAN };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Summary { n, mean, std_dev: 0.0, ci_low: mean, ci_high: mean };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("n > 1").inverse_cdf(0.975);
    let half = t * sd / (n as f64).sqrt();
    Summary { n, mean, std_dev: sd, ci_low: mean - half, ci_high: mean + half }
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination.
    pub r_squared: f64,
    /// Largest `|y - fit| / |y|` over the points with non-zero `y`.
    pub max_relative_residual: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - (slope * x + intercept)).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    let max_relative_residual = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y != 0.0)
        .map(|(x, y)| ((y - (slope * x + intercept)) / y).abs())
        .fold(0.0, f64::max);
    Some(LinearFit { slope, intercept, r_squared, max_relative_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_matches_t_table() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(s.mean, 3.0);
        // t(0.975, 4) = 2.776; sd = 1.5811
        let half = 2.776445 * 1.581139 / 5f64.sqrt();
        assert!((s.ci_high - 3.0 - half).abs() < 1e-4);
    }

    #[test]
    fn degenerate_samples() {
        let s = summarize(&[7.0]);
        assert_eq!((s.ci_low, s.ci_high), (7.0, 7.0));
        let s = summarize(&[2.0; 10]);
        assert_eq!(s.std_dev, 0.0);
        assert!(summarize(&[]).mean.is_nan());
    }

    #[test]
    fn exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.max_relative_residual < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn noisy_line_has_lower_r2() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.0, 3.0, 2.0, 5.0, 4.0];
        let f = linear_fit(&xs, &ys).unwrap();
        assert!(f.r_squared < 0.9 && f.r_squared > 0.0);
    }
}
