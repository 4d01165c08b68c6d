//! Uniform-grid resampling: not-a-knot cubic splines for upsampling,
//! interval means for decimation.

/// Cubic spline through uniformly spaced samples with not-a-knot end
/// conditions (natural/linear for fewer than four samples).
#[derive(Debug, Clone)]
pub struct UniformSpline {
    values: Vec<f64>,
    /// Second derivatives at the knots.
    second: Vec<f64>,
    rate: f64,
}

impl UniformSpline {
    /// `values[i]` is the sample at time `i / rate`. Needs at least two samples.
    pub fn new(values: &[f64], rate: f64) -> Self {
        let n = values.len();
        assert!(n >= 2, "spline needs at least two samples");
        let h = 1.0 / rate;
        let mut second = vec![0.0; n];
        match n {
            2 => {}
            3 => {
                let m = (values[0] - 2.0 * values[1] + values[2]) / (h * h);
                second.fill(m);
            }
            _ => {
                // Interior rows M[i-1] + 4 M[i] + M[i+1] = r[i]; not-a-knot
                // collapses the first and last interior rows to 6 M = r.
                let r: Vec<f64> = (1..n - 1)
                    .map(|i| 6.0 * (values[i - 1] - 2.0 * values[i] + values[i + 1]) / (h * h))
                    .collect();
                let m = r.len();
                let mut diag = vec![4.0; m];
                let mut lower = vec![1.0; m];
                let mut upper = vec![1.0; m];
                diag[0] = 6.0;
                upper[0] = 0.0;
                diag[m - 1] = 6.0;
                lower[m - 1] = 0.0;
                let interior = solve_tridiagonal(&lower, &diag, &upper, &r);
                second[1..n - 1].copy_from_slice(&interior);
                second[0] = 2.0 * second[1] - second[2];
                second[n - 1] = 2.0 * second[n - 2] - second[n - 3];
            }
        }
        UniformSpline {
            values: values.to_vec(),
            second,
            rate,
        }
    }

    /// Evaluates at time `t` (seconds), clamped to the sampled span.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let u = (t * self.rate).clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        let s = u - i as f64;
        let h = 1.0 / self.rate;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let a = 1.0 - s;
        y0 + s * (y1 - y0) + h * h / 6.0 * (m0 * (a * a * a - a) + m1 * (s * s * s - s))
    }
}

/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Number of output samples when decimating `n` samples from `src_rate` to
/// `dst_rate`: `floor(n * dst / src)`.
pub fn decimated_len(n: usize, src_rate: f64, dst_rate: f64) -> usize {
    (n as f64 * dst_rate / src_rate + 1e-9).floor() as usize
}

/// Input index range averaged into output sample `m`.
fn interval(m: usize, n: usize, ratio: f64) -> std::ops::Range<usize> {
    let start = ((m as f64 * ratio) - 1e-9).ceil().max(0.0) as usize;
    let end = (((m + 1) as f64 * ratio) - 1e-9).ceil() as usize;
    start.min(n)..end.min(n)
}

/// Interval-mean decimation: output sample `m` is the mean of the inputs
/// whose timestamps fall in `[m / dst, (m + 1) / dst)`.
pub fn interval_mean<const D: usize>(values: &[[f64; D]], src_rate: f64, dst_rate: f64) -> Vec<[f64; D]> {
    let n = values.len();
    let ratio = src_rate / dst_rate;
    (0..decimated_len(n, src_rate, dst_rate))
        .map(|m| {
            let range = interval(m, n, ratio);
            let count = range.len() as f64;
            let mut acc = [0.0; D];
            for v in &values[range] {
                for k in 0..D {
                    acc[k] += v[k];
                }
            }
            acc.map(|a| a / count)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_cubics_exactly() {
        let f = |t: f64| 0.5 - 1.5 * t + 2.0 * t * t - 0.75 * t * t * t;
        let rate = 10.0;
        let vals: Vec<f64> = (0..12).map(|i| f(i as f64 / rate)).collect();
        let s = UniformSpline::new(&vals, rate);
        for k in 0..110 {
            let t = k as f64 / 100.0;
            assert!((s.eval(t) - f(t)).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn spline_constant_is_exact() {
        let s = UniformSpline::new(&[0.3; 7], 20.0);
        for k in 0..31 {
            assert_eq!(s.eval(k as f64 / 100.0), 0.3);
        }
    }

    #[test]
    fn short_inputs() {
        let s = UniformSpline::new(&[1.0, 3.0], 1.0);
        assert!((s.eval(0.5) - 2.0).abs() < 1e-15);
        let s = UniformSpline::new(&[0.0, 1.0, 4.0], 1.0);
        assert!((s.eval(1.5) - 2.25).abs() < 1e-12);
    }

    #[test]
    fn tridiagonal_matches_direct_solution() {
        // [4 1 0; 1 4 1; 0 1 4] x = [5, 6, 5] -> x = [1, 1, 1]
        let x = solve_tridiagonal(&[0.0, 1.0, 1.0], &[4.0; 3], &[1.0, 1.0, 0.0], &[5.0, 6.0, 5.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn interval_mean_examples() {
        let same: Vec<[f64; 1]> = (0..10).map(|i| [i as f64 * 0.1]).collect();
        assert_eq!(interval_mean(&same, 20.0, 20.0), same);

        let ramp: Vec<[f64; 1]> = (0..100).map(|i| [i as f64]).collect();
        let out = interval_mean(&ramp, 100.0, 20.0);
        assert_eq!(out.len(), 20);
        for (m, v) in out.iter().enumerate() {
            let oracle: f64 = (5 * m..5 * m + 5).map(|k| k as f64).sum::<f64>() / 5.0;
            assert_eq!(v[0], oracle);
        }
    }

    #[test]
    fn interval_mean_non_integer_ratio_covers_all_inputs_once() {
        let vals: Vec<[f64; 1]> = (0..50).map(|i| [i as f64]).collect();
        let n_out = decimated_len(50, 50.0, 20.0);
        assert_eq!(n_out, 20);
        let mut covered = 0;
        for m in 0..n_out {
            let r = interval(m, 50, 2.5);
            assert!(!r.is_empty());
            covered += r.len();
        }
        assert_eq!(covered, 50);
        assert_eq!(interval_mean(&vals, 50.0, 20.0).len(), 20);
    }
}
