//! Small numerical kernels shared by the solvers.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("tridiagonal system is singular at row {row} (pivot {pivot:e})")]
pub struct SingularSystem {
    pub row: usize,
    pub pivot: f64,
}

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
///
/// `lower[0]` and `upper[n-1]` are ignored. The solution overwrites `rhs`.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
) -> Result<(), SingularSystem> {
    let n = rhs.len();
    assert!(lower.len() == n && diag.len() == n && upper.len() == n);
    if n == 0 {
        return Ok(());
    }
    let mut c = vec![0.0; n];
    let mut pivot = diag[0];
    check_pivot(0, pivot, diag[0])?;
    c[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        check_pivot(i, pivot, diag[i])?;
        c[i] = upper[i] / pivot;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

fn check_pivot(row: usize, pivot: f64, scale: f64) -> Result<(), SingularSystem> {
    if !pivot.is_finite() || pivot.abs() <= 1e-300 || pivot.abs() < 1e-14 * scale.abs() {
        Err(SingularSystem { row, pivot })
    } else {
        Ok(())
    }
}

/// Overlap-weighted average of piecewise-constant `values` on `src_faces`
/// onto cells bounded by `dst_faces`.
///
/// Integrals are preserved wherever the destination lies inside the source
/// range. A destination cell whose faces match a source cell (to `1e-12` of its
/// width) takes that value unchanged.
pub fn remap_average(src_faces: &[f64], values: &[f64], dst_faces: &[f64]) -> Vec<f64> {
    assert_eq!(src_faces.len(), values.len() + 1);
    let n_dst = dst_faces.len().saturating_sub(1);
    let mut out = Vec::with_capacity(n_dst);
    let mut k = 0usize;
    for j in 0..n_dst {
        let (a, b) = (dst_faces[j], dst_faces[j + 1]);
        let width = b - a;
        while k + 1 < values.len() && src_faces[k + 1] <= a {
            k += 1;
        }
        let tol = 1e-12 * width.abs().max(f64::MIN_POSITIVE);
        if (src_faces[k] - a).abs() <= tol && (src_faces[k + 1] - b).abs() <= tol {
            out.push(values[k]);
            continue;
        }
        let mut acc = 0.0;
        let mut covered = 0.0;
        let mut i = k;
        while i < values.len() && src_faces[i] < b {
            let lo = src_faces[i].max(a);
            let hi = src_faces[i + 1].min(b);
            if hi > lo {
                acc += values[i] * (hi - lo);
                covered += hi - lo;
            }
            i += 1;
        }
        out.push(if covered > 0.0 {
            acc / covered
        } else if a < src_faces[0] {
            values[0]
        } else {
            values[values.len() - 1]
        });
    }
    out
}

/// Piecewise-linear interpolation of `(xs, ys)` at `x`, constant beyond the ends.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&p| p <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (x - x0) / (x1 - x0);
    ys[k - 1] + w * (ys[k] - ys[k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_solution() {
        // [2 -1 0; -1 2 -1; 0 -1 2] x = [1 0 1]  ->  x = [1 1 1]
        let mut rhs = vec![1.0, 0.0, 1.0];
        solve_tridiagonal(&[0.0, -1.0, -1.0], &[2.0; 3], &[-1.0, -1.0, 0.0], &mut rhs).unwrap();
        for x in rhs {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn thomas_reports_singular_rows() {
        let mut rhs = vec![1.0, 1.0];
        let err = solve_tridiagonal(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], &mut rhs).unwrap_err();
        assert_eq!(err.row, 1);
    }

    #[test]
    fn remap_preserves_integral() {
        let src = [0.0, 1.0, 2.0, 3.0, 4.0];
        let vals = [1.0, 3.0, 2.0, 5.0];
        let dst = [0.0, 0.7, 1.9, 2.2, 4.0];
        let out = remap_average(&src, &vals, &dst);
        let total: f64 = out
            .iter()
            .zip(dst.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum();
        assert!((total - 11.0).abs() < 1e-13);
        assert_eq!(out[0], 1.0);
    }

    #[test]
    fn remap_copies_matching_cells() {
        let src = [0.0, 0.1, 0.2, 0.30000000000000004];
        let vals = [0.123456789, 0.2, 0.3];
        let dst = [0.0, 0.1, 0.2, 0.3];
        assert_eq!(remap_average(&src, &vals, &dst), vals.to_vec());
    }

    #[test]
    fn interp_clamps() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [0.0, 2.0, 4.0];
        assert_eq!(interp_linear(&xs, &ys, -1.0), 0.0);
        assert_eq!(interp_linear(&xs, &ys, 2.0), 3.0);
        assert_eq!(interp_linear(&xs, &ys, 5.0), 4.0);
    }
}
