use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::vectors::{QueryVectors, VectorSource};
use crate::error::{fail, ErrorCode, Result};

/// Low-dimensional coordinates of query vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub qids: Vec<String>,
    pub dims: usize,
    pub coordinates: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    pub source: VectorSource,
}

// singular values below this fraction of the largest are treated as zero
const RANK_TOLERANCE: f64 = 1e-10;

/// Principal component projection to 2 or 3 dimensions.
///
/// Rows are column-centred and decomposed with a thin SVD. Each axis is
/// flipped so that its largest-magnitude loading is positive. Axes beyond the
/// rank of the data have zero coordinates and zero explained variance.
pub fn pca_project(vectors: &QueryVectors, dims: usize) -> Result<Projection> {
    if !(2..=3).contains(&dims) {
        return fail(ErrorCode::InvalidParameter, format!("dims must be 2 or 3, got {dims}"));
    }
    let n = vectors.vectors.len();
    if n < 2 {
        return fail(ErrorCode::InsufficientData, "need at least 2 vectors to project");
    }
    let d = vectors.dimension;
    let first = &vectors.vectors[0];
    if d == 0 || vectors.vectors.iter().all(|v| v == first) {
        return fail(ErrorCode::DegenerateVariance, "all vectors are identical");
    }

    let mut x = DMatrix::from_fn(n, d, |i, j| vectors.vectors[i][j]);
    for j in 0..d {
        let mean = x.column(j).sum() / n as f64;
        x.column_mut(j).add_scalar_mut(-mean);
    }
    let total: f64 = x.iter().map(|v| v * v).sum();
    if total <= f64::EPSILON * f64::EPSILON {
        return fail(ErrorCode::DegenerateVariance, "total variance is zero");
    }

    let mut svd = x.clone().svd(false, true);
    svd.sort_by_singular_values();
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let s = &svd.singular_values;
    let s_max = s.iter().copied().fold(0.0, f64::max);

    let mut coordinates = vec![vec![0.0; dims]; n];
    let mut explained_variance_ratio = vec![0.0; dims];
    for axis in 0..dims.min(s.len()) {
        if s[axis] <= s_max * RANK_TOLERANCE {
            continue;
        }
        let mut loading: Vec<f64> = v_t.row(axis).iter().copied().collect();
        let pivot = loading
            .iter()
            .enumerate()
            .fold(0, |best, (j, v)| if v.abs() > loading[best].abs() { j } else { best });
        if loading[pivot] < 0.0 {
            loading.iter_mut().for_each(|v| *v = -*v);
        }
        for (i, row) in coordinates.iter_mut().enumerate() {
            row[axis] = x.row(i).iter().zip(&loading).map(|(a, b)| a * b).sum();
        }
        explained_variance_ratio[axis] = (s[axis] * s[axis] / total).min(1.0);
    }

    Ok(Projection {
        qids: vectors.qids.clone(),
        dims,
        coordinates,
        explained_variance_ratio,
        source: vectors.source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vectors(rows: &[&[f64]]) -> QueryVectors {
        QueryVectors {
            qids: (0..rows.len()).map(|i| format!("q{i}")).collect(),
            vocabulary: vec![],
            dimension: rows[0].len(),
            vectors: rows.iter().map(|r| r.to_vec()).collect(),
            source: VectorSource::External,
        }
    }

    #[test]
    fn two_antipodal_points() {
        let p = pca_project(&vectors(&[&[1.0, 1.0], &[-1.0, -1.0]]), 2).unwrap();
        let s2 = 2f64.sqrt();
        assert_abs_diff_eq!(p.coordinates[0][0].abs(), s2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.coordinates[0][0], -p.coordinates[1][0], epsilon = 1e-12);
        assert_eq!(p.coordinates[0][1], 0.0);
        assert_eq!(p.explained_variance_ratio[1], 0.0);
        assert_abs_diff_eq!(p.explained_variance_ratio[0], 1.0, epsilon = 1e-12);
        // loading (1, 1)/sqrt(2) after the sign flip, so (1, 1) maps to +sqrt(2)
        assert!(p.coordinates[0][0] > 0.0);
    }

    #[test]
    fn identical_rows() {
        let err = pca_project(&vectors(&[&[0.1, 0.2], &[0.1, 0.2], &[0.1, 0.2]]), 2).unwrap_err();
        assert_eq!(err.code, ErrorCode::DegenerateVariance);
    }

    #[test]
    fn centroid_and_ordering() {
        let p = pca_project(
            &vectors(&[&[1.0, 0.0, 2.0], &[0.0, 1.0, 0.5], &[3.0, 1.0, 0.0], &[0.5, 0.5, 0.5], &[2.0, 2.0, 1.0]]),
            3,
        )
        .unwrap();
        for axis in 0..3 {
            let c: f64 = p.coordinates.iter().map(|r| r[axis]).sum::<f64>() / 5.0;
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-9);
        }
        let r = &p.explained_variance_ratio;
        assert!(r[0] >= r[1] && r[1] >= r[2]);
        assert_abs_diff_eq!(r.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn bad_dims() {
        let v = vectors(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(pca_project(&v, 4).unwrap_err().code, ErrorCode::InvalidParameter);
        let one = vectors(&[&[1.0, 0.0]]);
        assert_eq!(pca_project(&one, 2).unwrap_err().code, ErrorCode::InsufficientData);
    }
}
