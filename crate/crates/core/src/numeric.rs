//! Small numerical helpers shared across modules.

/// Neumaier-compensated running sum. Results depend only on the order of
/// `add` calls, which callers keep fixed (path-index order).
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = NeumaierSum::default();
    xs.into_iter().for_each(|x| acc.add(x));
    acc.value()
}

/// Mean, unbiased variance and sample skewness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
}

impl Moments {
    pub fn of(sample: &[f64]) -> Self {
        let n = sample.len();
        if n == 0 {
            return Self {
                count: 0,
                mean: f64::NAN,
                variance: f64::NAN,
                skewness: f64::NAN,
            };
        }
        let mean = compensated_sum(sample.iter().copied()) / n as f64;
        let m2 = compensated_sum(sample.iter().map(|x| (x - mean).powi(2))) / n as f64;
        let m3 = compensated_sum(sample.iter().map(|x| (x - mean).powi(3))) / n as f64;
        let variance = if n > 1 { m2 * n as f64 / (n - 1) as f64 } else { 0.0 };
        let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
        Self {
            count: n,
            mean,
            variance,
            skewness,
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

pub fn rms(sample: &[f64]) -> f64 {
    if sample.is_empty() {
        return f64::NAN;
    }
    (compensated_sum(sample.iter().map(|x| x * x)) / sample.len() as f64).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(sample: &[f64]) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn compensation_recovers_small_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn moments_of_small_sample() {
        let m = Moments::of(&[1.0, 2.0, 3.0, 10.0]);
        assert_eq!(m.mean, 4.0);
        assert_abs_diff_eq!(m.variance, 50.0 / 3.0, epsilon = 1e-12);
        assert!(m.skewness > 0.0);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [0.02, 0.05, 0.1, 0.2];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.5)).collect();
        assert_abs_diff_eq!(log_log_slope(&xs, &ys), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
