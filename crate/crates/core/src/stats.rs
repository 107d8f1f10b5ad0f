//! Streaming statistics and confidence bounds.

/// Running count, sum and sum of squares.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, other: Moments) -> Moments {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// One-sided 99.9% normal quantile.
pub const Z_999: f64 = 3.0902;

/// Wilson score interval `(lower, upper)` for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Paired sums for a ratio of means `E[X]/E[Y]` with a delta-method error.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RatioMoments {
    pub x: Moments,
    pub y: Moments,
    pub sum_xy: f64,
}

impl RatioMoments {
    pub fn push(&mut self, x: f64, y: f64) {
        self.x.push(x);
        self.y.push(y);
        self.sum_xy += x * y;
    }

    pub fn merge(self, other: RatioMoments) -> RatioMoments {
        RatioMoments { x: self.x.merge(other.x), y: self.y.merge(other.y), sum_xy: self.sum_xy + other.sum_xy }
    }

    pub fn ratio(&self) -> f64 {
        self.x.mean() / self.y.mean()
    }

    /// Delta-method standard error of the ratio of means.
    pub fn ratio_std_error(&self) -> f64 {
        let n = self.x.count as f64;
        if n < 2.0 {
            return 0.0;
        }
        let (mx, my) = (self.x.mean(), self.y.mean());
        let cov = (self.sum_xy - n * mx * my) / (n - 1.0);
        let r = mx / my;
        let var = (self.x.variance() - 2.0 * r * cov + r * r * self.y.variance()) / (my * my * n);
        var.max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_constant() {
        let mut m = Moments::default();
        for _ in 0..10 {
            m.push(2.0);
        }
        assert_eq!(m.mean(), 2.0);
        assert_eq!(m.std_error(), 0.0);
    }

    #[test]
    fn wilson_brackets_the_estimate() {
        let (lo, hi) = wilson(30, 100, Z_999);
        assert!(lo < 0.3 && 0.3 < hi);
        assert_eq!(wilson(0, 100, Z_999).0, 0.0);
        assert!(wilson(0, 100, Z_999).1 > 0.0);
    }

    #[test]
    fn ratio_of_proportional_samples_has_no_error() {
        let mut r = RatioMoments::default();
        for i in 1..100 {
            r.push(2.0 * i as f64, i as f64);
        }
        assert!((r.ratio() - 2.0).abs() < 1e-15);
        assert!(r.ratio_std_error() < 1e-9);
    }
}
