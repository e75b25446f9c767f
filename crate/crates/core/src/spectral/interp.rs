use num_complex::Complex64;

/// Four-point Lagrange (cubic) interpolation of uniformly spaced samples.
///
/// `origin` is the coordinate of `values[0]`. Returns `None` for points
/// outside `[origin, origin + (n−1)·spacing]`; near the ends the stencil is
/// shifted inward so every interior query uses four real samples.
pub fn cubic(values: &[Complex64], origin: f64, spacing: f64, q: f64) -> Option<Complex64> {
    let n = values.len();
    if n < 4 {
        return None;
    }
    let u = (q - origin) / spacing;
    let last = (n - 1) as f64;
    if !(0.0..=last).contains(&u) {
        return None;
    }
    // Left node of the stencil [i0, i0 + 3].
    let cell = (u.floor() as usize).min(n - 2);
    let i0 = cell.saturating_sub(1).min(n - 4);
    let s = u - i0 as f64;
    let w0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
    let w1 = s * (s - 2.0) * (s - 3.0) / 2.0;
    let w2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
    let w3 = s * (s - 1.0) * (s - 2.0) / 6.0;
    Some(values[i0] * w0 + values[i0 + 1] * w1 + values[i0 + 2] * w2 + values[i0 + 3] * w3)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(f: impl Fn(f64) -> f64, origin: f64, h: f64, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|k| Complex64::new(f(origin + k as f64 * h), 0.0))
            .collect()
    }

    #[test]
    fn reproduces_cubics_exactly() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 0.25 * x * x * x;
        let v = samples(f, -1.0, 0.3, 12);
        for &q in &[-1.0, -0.95, -0.1, 0.77, 2.0, 2.3] {
            let got = cubic(&v, -1.0, 0.3, q).unwrap();
            assert!((got.re - f(q)).abs() < 1e-12, "q = {q}");
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |h: f64| {
            let n = (4.0 / h) as usize + 1;
            let v = samples(f64::sin, 0.0, h, n);
            (0..200)
                .map(|k| {
                    let q = 0.5 + k as f64 * 0.01;
                    (cubic(&v, 0.0, h, q).unwrap().re - q.sin()).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn outside_range_is_none() {
        let v = samples(|x| x, 0.0, 1.0, 5);
        assert!(cubic(&v, 0.0, 1.0, -0.01).is_none());
        assert!(cubic(&v, 0.0, 1.0, 4.01).is_none());
        assert!(cubic(&v, 0.0, 1.0, 4.0).is_some());
    }
}
