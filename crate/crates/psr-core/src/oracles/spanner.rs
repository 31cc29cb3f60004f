//! Approximate barycentric spanner via determinant-swap iterations.

use nalgebra::{DMatrix, DVector};

use crate::la;
use crate::{Error, Result};

/// A factorization `x_i = F v_i` where the columns of `F` are members of the
/// input family and every coefficient vector satisfies `||v||_inf <= 2`
/// (the classical factor-2 approximate spanner).
#[derive(Debug, Clone)]
pub struct Spanner {
    /// Indices of the chosen spanner members.
    pub chosen: Vec<usize>,
    /// `F`: one column per spanner member, in the original space.
    pub f: DMatrix<f64>,
    /// Coefficients `v_i` with `x_i = F v_i`.
    pub coeffs: Vec<DVector<f64>>,
}

impl Spanner {
    /// `||F||_{1->1}`; at most `max_i ||x_i||_1` since columns are members.
    pub fn f_norm_1(&self) -> f64 {
        la::norm_1_to_1(&self.f)
    }

    /// Maximum reconstruction residual `max_i ||x_i - F v_i||_inf`.
    pub fn residual(&self, xs: &[DVector<f64>]) -> f64 {
        xs.iter()
            .zip(&self.coeffs)
            .map(|(x, v)| (x - &self.f * v).abs().max())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient magnitude across the family (≤ 2 + fp slack).
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|v| v.abs().max()).fold(0.0, f64::max)
    }
}

/// Computes a factor-2 approximate barycentric spanner of `xs` (span
/// dimension must not exceed `d`): determinant-swap iterations on the
/// coordinates of the family within its own span, swapping while some member
/// more than doubles the basis determinant.
pub fn barycentric_spanner(xs: &[DVector<f64>], d: usize) -> Result<Spanner> {
    if xs.is_empty() {
        return Err(Error::DimensionMismatch("empty vector family".into()));
    }
    let n = xs[0].len();
    let m = DMatrix::from_columns(&xs.iter().cloned().collect::<Vec<_>>());
    let rank = la::numerical_rank(&m);
    if rank > d {
        return Err(Error::RankExceeded {
            found: rank,
            requested: d,
        });
    }
    if rank == 0 {
        return Ok(Spanner {
            chosen: vec![],
            f: DMatrix::zeros(n, 0),
            coeffs: xs.iter().map(|_| DVector::zeros(0)).collect(),
        });
    }

    // Coordinates within the span: U^T x for the top singular directions.
    let svd = m.clone().svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let basis = u.columns(0, rank).into_owned();
    let coords: Vec<DVector<f64>> = xs.iter().map(|x| basis.transpose() * x).collect();

    // Phase 1: replace each identity column by the determinant maximizer.
    let mut b = DMatrix::<f64>::identity(rank, rank);
    let mut chosen = vec![usize::MAX; rank];
    for col in 0..rank {
        let (best, _) = argmax_det(&b, col, &coords);
        b.set_column(col, &coords[best]);
        chosen[col] = best;
    }
    // Phase 2: swap while some member doubles the determinant.
    let mut det = b.determinant().abs();
    let mut sweeps = 0;
    'outer: loop {
        sweeps += 1;
        if sweeps > 10_000 {
            break;
        }
        for col in 0..rank {
            let (best, best_det) = argmax_det(&b, col, &coords);
            if best_det > 2.0 * det {
                b.set_column(col, &coords[best]);
                chosen[col] = best;
                det = best_det;
                continue 'outer;
            }
        }
        break;
    }

    let lu = b.clone().lu();
    let coeffs: Vec<DVector<f64>> = coords
        .iter()
        .map(|c| lu.solve(c).expect("basis is nonsingular"))
        .collect();
    let f = DMatrix::from_columns(&chosen.iter().map(|&i| xs[i].clone()).collect::<Vec<_>>());
    Ok(Spanner { chosen, f, coeffs })
}

fn argmax_det(b: &DMatrix<f64>, col: usize, coords: &[DVector<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_det = -1.0;
    let mut trial = b.clone();
    for (i, c) in coords.iter().enumerate() {
        trial.set_column(col, c);
        let d = trial.determinant().abs();
        if d > best_det {
            best_det = d;
            best = i;
        }
    }
    (best, best_det)
}
