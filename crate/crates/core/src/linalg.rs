use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative singular-value cut-off below which a design matrix counts as
/// rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Least-squares solution of `design * beta ~= target`.
///
/// `design` is row-major with `cols` columns. Columns are scaled to unit
/// norm before the SVD so that badly scaled polynomial columns do not
/// masquerade as rank deficiency.
pub(crate) fn lstsq(design: &[f64], cols: usize, target: &[f64]) -> Result<Vec<f64>> {
    let rows = target.len();
    if rows == 0 || design.len() != rows * cols {
        return Err(Error::invalid("least squares: inconsistent design matrix"));
    }
    if rows < cols {
        return Err(Error::SingularFit(format!(
            "{rows} observations for {cols} unknowns"
        )));
    }
    let mut a = DMatrix::from_row_slice(rows, cols, design);
    let mut scale = vec![1.0; cols];
    for (j, s) in scale.iter_mut().enumerate() {
        let n = a.column(j).norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::SingularFit(format!(
                "column {j} is zero or non-finite"
            )));
        }
        *s = n;
        a.column_mut(j).unscale_mut(n);
    }
    let b = DVector::from_column_slice(target);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOL * smax) {
        return Err(Error::SingularFit(format!(
            "condition exceeds 1/{RANK_TOL:e}"
        )));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::SingularFit(e.to_string()))?;
    Ok(x.iter().zip(&scale).map(|(v, s)| v / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let design: Vec<f64> = xs.iter().flat_map(|&x| [1.0, x]).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let beta = lstsq(&design, 2, &y).unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-12 && (beta[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_rejected() {
        let design = [1.0, 2.0, 2.0, 4.0, 3.0, 6.0];
        assert!(matches!(
            lstsq(&design, 2, &[1.0, 2.0, 3.0]),
            Err(Error::SingularFit(_))
        ));
    }
}
