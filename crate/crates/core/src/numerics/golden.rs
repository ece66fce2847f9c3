//! Golden-section search for the minimum of a unimodal scalar function.
//!
//! Each iteration shrinks the bracket by 1/φ and costs one new function
//! evaluation; the two interior points are reused across iterations.

/// 1/φ
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// A single objective evaluation made during the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenOutcome {
    /// Best evaluated point.
    pub best: Sample,
    /// Width of the final bracket.
    pub width: f64,
    pub iterations: usize,
    /// Every evaluation in call order.
    pub samples: Vec<Sample>,
}

/// Minimize `f` on `[lo, hi]` until the bracket is narrower than `xtol`.
///
/// Non-finite objective values are treated as `+inf`.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> GoldenOutcome
where
    F: FnMut(f64) -> f64,
{
    let mut samples = Vec::new();
    let mut eval = |x: f64, samples: &mut Vec<Sample>| {
        let v = f(x);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        samples.push(Sample { x, value: v });
        v
    };

    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut samples);
    let mut fd = eval(d, &mut samples);
    let mut iterations = 0;

    while (b - a) > xtol && iterations < max_iter {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut samples);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut samples);
        }
        iterations += 1;
    }

    let best = samples.iter().copied().min_by(|p, q| p.value.total_cmp(&q.value)).expect("at least two evaluations");
    GoldenOutcome { best, width: b - a, iterations, samples }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola() {
        let out = golden_section(|x| (x - 1.3).powi(2) + 2.0, -5.0, 5.0, 1e-9, 500);
        // a smooth minimum is only resolved to ~sqrt(eps)
        assert!((out.best.x - 1.3).abs() < 1e-6);
        assert!(out.width <= 1e-9);
        assert_eq!(out.samples.len(), out.iterations + 2);
    }

    #[test]
    fn v_shaped_minimum() {
        let out = golden_section(|x| (x - 0.25).abs(), 0.0, 1.0, 1e-10, 500);
        assert!((out.best.x - 0.25).abs() < 1e-9);
    }

    #[test]
    fn minimum_at_edge() {
        let out = golden_section(|x| x, 2.0, 3.0, 1e-8, 500);
        assert!((out.best.x - 2.0).abs() < 1e-7);
    }

    #[test]
    fn nan_is_avoided() {
        let out = golden_section(|x| if x > 0.5 { f64::NAN } else { (x - 0.4).powi(2) }, 0.0, 1.0, 1e-8, 500);
        assert!((out.best.x - 0.4).abs() < 1e-6);
    }
}
