//! Degree-1 loess with tricube weights, no robustness iterations.

/// Smooths `points` (sorted by strictly increasing x) with local linear fits.
///
/// Each fit uses the `floor(n * span)` nearest points (at least 2); weights
/// are tricube in `d / h` where `h` is the distance to the farthest of them.
/// Fewer than three points are returned unchanged.
pub fn loess(points: &[(f64, f64)], span: f64) -> Vec<(f64, f64)> {
    let n = points.len();
    if n < 3 {
        return points.to_vec();
    }
    let span = span.clamp(f64::MIN_POSITIVE, 1.0);
    let q = ((n as f64 * span + 1e-9).floor() as usize).clamp(2, n);

    let mut out = Vec::with_capacity(n);
    let mut lo = 0usize;
    for i in 0..n {
        let x0 = points[i].0;
        while lo + q < n && points[lo + q].0 - x0 < x0 - points[lo].0 {
            lo += 1;
        }
        let hood = &points[lo..lo + q];
        let h = (x0 - hood[0].0).max(hood[q - 1].0 - x0);
        out.push((x0, local_linear(hood, x0, h)));
    }
    out
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

fn local_linear(hood: &[(f64, f64)], x0: f64, h: f64) -> f64 {
    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut swy = 0.0;
    let weights: Vec<f64> = hood.iter().map(|&(x, _)| tricube((x - x0).abs() / h)).collect();
    for (&(x, y), &w) in hood.iter().zip(&weights) {
        sw += w;
        swx += w * x;
        swy += w * y;
    }
    let xm = swx / sw;
    let ym = swy / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&(x, y), &w) in hood.iter().zip(&weights) {
        sxx += w * (x - xm) * (x - xm);
        sxy += w * (x - xm) * (y - ym);
    }
    // Only one point carries weight: the local fit degenerates to a constant.
    if sxx <= 1e-12 * h * h * sw {
        return ym;
    }
    ym + sxy / sxx * (x0 - xm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// Independent reference: neighbourhood by full sort of distances,
    /// weighted least squares by SVD of the sqrt-weighted design matrix.
    fn reference(points: &[(f64, f64)], span: f64) -> Vec<f64> {
        let n = points.len();
        let q = ((n as f64 * span).floor() as usize).clamp(2, n);
        points
            .iter()
            .map(|&(x0, _)| {
                let mut d: Vec<f64> = points.iter().map(|p| (p.0 - x0).abs()).collect();
                d.sort_by(f64::total_cmp);
                let h = d[q - 1];
                let rows: Vec<(f64, f64, f64)> = points
                    .iter()
                    .filter_map(|&(x, y)| {
                        let u = (x - x0).abs() / h;
                        (u < 1.0).then(|| ((1.0 - u.powi(3)).powi(3), x, y))
                    })
                    .collect();
                if rows.len() == 1 {
                    return rows[0].2;
                }
                let a = DMatrix::from_fn(rows.len(), 2, |r, c| {
                    rows[r].0.sqrt() * if c == 0 { 1.0 } else { rows[r].1 - x0 }
                });
                let b = DVector::from_fn(rows.len(), |r, _| rows[r].0.sqrt() * rows[r].2);
                let beta = a.svd(true, true).solve(&b, 1e-14).unwrap();
                beta[0]
            })
            .collect()
    }

    #[test]
    fn constant_is_preserved() {
        let pts: Vec<_> = (1..=12).map(|x| (x as f64 * 1.5, 7.0)).collect();
        for (_, y) in loess(&pts, 0.75) {
            assert!((y - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_is_exact() {
        let pts: Vec<_> = [1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0]
            .iter()
            .map(|&x| (x, -2.5 * x + 40.0))
            .collect();
        for (x, y) in loess(&pts, 0.75) {
            assert!((y - (-2.5 * x + 40.0)).abs() < 1e-9, "{x} {y}");
        }
    }

    #[test]
    fn tiny_inputs_pass_through() {
        let pts = vec![(1.0, 10.0), (4.0, 2.0)];
        assert_eq!(loess(&pts, 0.75), pts);
    }

    #[test]
    fn matches_reference_on_histogram_shape() {
        // 20-point occurrence histogram shape: spike at low X, long sparse tail.
        let xs = [1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 15, 19, 24, 30, 41, 55, 80, 120, 200, 350];
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| (x as f64, (5000.0 / (x as f64).powf(1.7)).round() + (i % 3) as f64))
            .collect();
        for span in [0.3, 0.5, 0.75, 1.0] {
            let got = loess(&pts, span);
            let want = reference(&pts, span);
            for ((_, g), w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-6 * w.abs().max(1.0), "span {span}: {g} vs {w}");
            }
        }
    }
}
