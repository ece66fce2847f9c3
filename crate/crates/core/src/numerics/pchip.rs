//! Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson slopes
//! with the weighted harmonic mean of Fritsch-Butland, as in SciPy's
//! `PchipInterpolator`).
//!
//! Between two samples the interpolant never leaves the interval spanned by
//! the sample values, so monotone data stay monotone.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PchipError {
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("abscissae must be strictly increasing (violated at index {index})")]
    NotIncreasing { index: usize },
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("x = {x} outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, PchipError> {
        let n = xs.len().min(ys.len());
        if n < 2 || xs.len() != ys.len() {
            return Err(PchipError::TooFewSamples { min: 2, got: n });
        }
        for i in 0..n {
            if !xs[i].is_finite() || !ys[i].is_finite() {
                return Err(PchipError::NonFinite { index: i });
            }
            if i > 0 && xs[i] <= xs[i - 1] {
                return Err(PchipError::NotIncreasing { index: i });
            }
        }
        let slopes = pchip_slopes(&xs, &ys);
        Ok(Self { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn eval(&self, x: f64) -> Result<f64, PchipError> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return Err(PchipError::OutOfRange { x, lo, hi });
        }
        // last interval is closed on the right
        let i = match self.xs.partition_point(|&xi| xi <= x) {
            0 => 0,
            p => (p - 1).min(self.xs.len() - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1])
    }
}

fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }

    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 == 0.0 || d1 == 0.0 || d0.signum() != d1.signum() {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// One-sided three-point slope, clipped to keep the end intervals monotone.
fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_nodes_and_lines() {
        let xs = vec![0.0, 1.0, 2.5, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let p = Pchip::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((p.eval(*x).unwrap() - y).abs() < 1e-14);
        }
        assert!((p.eval(1.7).unwrap() - (3.0 * 1.7 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn step_data_does_not_overshoot() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let p = Pchip::new(xs, ys).unwrap();
        for i in 0..=500 {
            let y = p.eval(5.0 * i as f64 / 500.0).unwrap();
            assert!((-1e-15..=1.0 + 1e-15).contains(&y), "overshoot {y}");
        }
    }

    #[test]
    fn rejects_extrapolation_and_bad_tables() {
        let p = Pchip::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 4.0]).unwrap();
        assert!(matches!(p.eval(2.0 + 1e-9), Err(PchipError::OutOfRange { .. })));
        assert!(matches!(p.eval(-1e-9), Err(PchipError::OutOfRange { .. })));
        assert!(matches!(
            Pchip::new(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]),
            Err(PchipError::NotIncreasing { index: 2 })
        ));
        assert!(matches!(Pchip::new(vec![0.0], vec![0.0]), Err(PchipError::TooFewSamples { .. })));
    }

    proptest! {
        #[test]
        fn increasing_samples_give_increasing_interpolant(
            steps in proptest::collection::vec((0.01f64..2.0, 0.0f64..5.0), 4..20),
            probes in proptest::collection::vec(0.0f64..1.0, 2..40),
        ) {
            let mut xs = vec![0.0];
            let mut ys = vec![0.0];
            for (dx, dy) in &steps {
                xs.push(xs.last().unwrap() + dx);
                ys.push(ys.last().unwrap() + dy);
            }
            let span = *xs.last().unwrap();
            let p = Pchip::new(xs.clone(), ys.clone()).unwrap();
            let mut probes: Vec<f64> = probes.iter().map(|t| t * span).collect();
            probes.sort_by(f64::total_cmp);
            let vals: Vec<f64> = probes.iter().map(|&x| p.eval(x).unwrap()).collect();
            for w in vals.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
            for v in vals {
                prop_assert!(v >= -1e-12 && v <= ys.last().unwrap() + 1e-12);
            }
        }
    }
}
