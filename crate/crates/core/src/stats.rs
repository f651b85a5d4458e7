//! Sample statistics used when aggregating trials.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean with a two-sided Student-t confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// `None` with fewer than two rows.
    pub half_width: Option<f64>,
    pub n: usize,
}

impl Summary {
    pub fn lower(&self) -> Option<f64> {
        self.half_width.map(|h| self.mean - h)
    }

    pub fn upper(&self) -> Option<f64> {
        self.half_width.map(|h| self.mean + h)
    }

    /// True when both intervals exist and do not intersect.
    pub fn disjoint(&self, other: &Summary) -> bool {
        match (self.lower(), self.upper(), other.lower(), other.upper()) {
            (Some(a0), Some(a1), Some(b0), Some(b1)) => a1 < b0 || b1 < a0,
            _ => false,
        }
    }
}

/// Two-sided Student-t quantile `t_{(1+confidence)/2, dof}`.
pub fn t_quantile(confidence: f64, dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("dof >= 1")
        .inverse_cdf(0.5 + confidence / 2.0)
}

pub fn aggregate(rows: &[f64], confidence: f64) -> Summary {
    let n = rows.len();
    let mean = if n == 0 {
        f64::NAN
    } else {
        rows.iter().sum::<f64>() / n as f64
    };
    let half_width = (n >= 2).then(|| {
        let var = rows.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        t_quantile(confidence, n - 1) * (var / n as f64).sqrt()
    });
    Summary {
        mean,
        half_width,
        n,
    }
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;

    #[test]
    fn constant_rows_have_zero_width() {
        let s = aggregate(&[1.0; 4], 0.95);
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.half_width, Some(0.0));
    }

    #[test]
    fn two_rows_use_one_dof() {
        let s = aggregate(&[0.0, 2.0], 0.95);
        assert_eq!(s.mean, 1.0);
        // t_{0.975,1} = 12.7062; s = sqrt(2), n = 2.
        assert!((s.half_width.unwrap() - 12.7062).abs() < 1e-3);
    }

    #[test]
    fn single_row_has_no_interval() {
        let s = aggregate(&[3.0], 0.95);
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.half_width, None);
    }

    #[test]
    fn coverage_is_near_nominal() {
        let mut rng = stream_rng(5, Stream::Trial, 0);
        let reps = 2000;
        let hits = (0..reps)
            .filter(|_| {
                let rows: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
                let s = aggregate(&rows, 0.95);
                s.lower().unwrap() <= 0.5 && 0.5 <= s.upper().unwrap()
            })
            .count();
        let cover = hits as f64 / reps as f64;
        // Binomial sd at p = 0.95 and 2000 reps is ~0.005.
        assert!((cover - 0.95).abs() < 0.02, "coverage {cover}");
    }

    #[test]
    fn correlation_and_median() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn disjoint_intervals() {
        let a = Summary { mean: 1.0, half_width: Some(0.5), n: 3 };
        let b = Summary { mean: 2.0, half_width: Some(0.4), n: 3 };
        let c = Summary { mean: 1.8, half_width: Some(0.4), n: 3 };
        assert!(a.disjoint(&b));
        assert!(!a.disjoint(&c));
    }
}
