//! Small dense linear-algebra helpers shared across modules.

use nalgebra::DMatrix;

/// Relative singular-value threshold used for all numerical ranks.
pub const RANK_REL_TOL: f64 = 1e-8;

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Numerical rank: singular values above `RANK_REL_TOL * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        None => 0,
        Some(&smax) if smax == 0.0 => 0,
        Some(&smax) => sv.iter().filter(|&&s| s > RANK_REL_TOL * smax).count(),
    }
}

/// Smallest singular value (0 for empty matrices).
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Moore-Penrose pseudo-inverse with a relative cutoff.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let smax = singular_values(m).first().copied().unwrap_or(0.0);
    let eps = if smax > 0.0 { RANK_REL_TOL * smax } else { 1e-300 };
    m.clone()
        .svd(true, true)
        .pseudo_inverse(eps)
        .expect("svd computed with u/v")
}

/// `||M||_{1->1}`: the maximum absolute column sum.
pub fn norm_1_to_1(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_pinv_on_simple_matrices() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(numerical_rank(&id), 3);
        let mut low = DMatrix::<f64>::zeros(3, 3);
        low[(0, 0)] = 2.0;
        low[(1, 0)] = 1.0;
        assert_eq!(numerical_rank(&low), 1);
        let p = pinv(&low);
        let back = &low * &p * &low;
        assert!((back - &low).abs().max() < 1e-12);
    }

    #[test]
    fn one_one_norm_is_max_column_sum() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -3.0, 2.0, 0.5]);
        assert_eq!(norm_1_to_1(&m), 3.5);
    }
}
