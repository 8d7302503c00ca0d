//! Small dense linear-algebra helpers shared by the model builders, the
//! solver and the analysis code.

use faer::Mat;
use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Orthonormal basis of the column space of `m` via Householder thin QR.
///
/// Column signs are fixed so that the first entry of each column whose
/// magnitude exceeds `1e-12` is positive, which makes the result independent
/// of the QR sign conventions.
pub fn orthonormal_columns(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    if cols > rows {
        return Err(Error::dims(format!(
            "cannot orthonormalize {cols} columns in R^{rows}"
        )));
    }
    let qr = m.clone().qr();
    let r = qr.r();
    let scale = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if let Some(i) = (0..cols).find(|&i| r[(i, i)].abs() <= 1e-12 * scale) {
        return Err(Error::RankDeficient(format!(
            "column {i} is linearly dependent on the previous ones"
        )));
    }
    let mut q = qr.q();
    fix_column_signs(&mut q);
    Ok(q)
}

pub(crate) fn fix_column_signs(q: &mut DMatrix<f64>) {
    for mut col in q.column_iter_mut() {
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-12) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Scalars whose matrices can be handed to the SVD backend.
///
/// nalgebra's bidiagonal SVD occasionally stops before convergence and
/// returns factors that do not reproduce the input, so every SVD goes
/// through faer instead.
pub trait SvdField: ComplexField<RealField = f64> + Copy {
    fn raw_singular_values(m: &DMatrix<Self>) -> Vec<f64>;
}

impl SvdField for f64 {
    fn raw_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
        to_faer(m).singular_values().expect("SVD did not converge")
    }
}

impl SvdField for Complex64 {
    fn raw_singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
        Mat::<Complex64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
            .singular_values()
            .expect("SVD did not converge")
    }
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `m = U diag(σ) Vᵀ` with `σ` non-increasing.
fn thin_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = to_faer(m).thin_svd().expect("SVD did not converge");
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let k = s.nrows();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let u_sorted = DMatrix::from_fn(m.nrows(), k, |r, c| u[(r, order[c])]);
    let v_sorted = DMatrix::from_fn(m.ncols(), k, |r, c| v[(r, order[c])]);
    (u_sorted, order.iter().map(|&i| s[i]).collect(), v_sorted)
}

/// Singular values in non-increasing order.
pub fn singular_values<T: SvdField>(m: &DMatrix<T>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv = T::raw_singular_values(m);
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// σ₁/σ_min over the `min(rows, cols)` singular values; `+∞` when the
/// smallest one underflows.
pub fn condition_from_singular_values(sv: &[f64]) -> f64 {
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 1e-300 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Draw a `rows × cols` matrix uniformly (Haar) from the Stiefel manifold:
/// the Q factor of a Gaussian matrix with the signs of diag(R) absorbed.
pub fn random_stiefel<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(rows, cols, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // Fill column by column so the draw order is tied to the storage order.
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    DMatrix::from_vec(rows, cols, data)
}

/// Orthogonal polar factor `U Vᵀ` of `m = U Σ Vᵀ`.
pub fn polar_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (u, _, v) = thin_svd(m);
    u * v.transpose()
}

/// ‖MᵀM − I‖_F.
pub fn orthonormality_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    (m.transpose() * m - DMatrix::<f64>::identity(n, n)).norm()
}

/// Largest principal angle (radians) between the column spans of `a` and `b`.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let (wide, narrow) = if a.ncols() >= b.ncols() {
        (a, b)
    } else {
        (b, a)
    };
    let qa = orthonormal_columns(wide)?;
    let qb = orthonormal_columns(narrow)?;
    // Sines of the principal angles are the singular values of the part of
    // `qb` outside span(qa); this stays accurate for tiny angles.
    let outside = &qb - &qa * (qa.transpose() * &qb);
    let sine = singular_values(&outside).first().copied().unwrap_or(0.0);
    Ok(sine.clamp(0.0, 1.0).asin())
}

/// Truncated SVD used for minimum-norm least squares.
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

impl TruncatedSvd {
    /// Keeps the singular triplets with `σ > rtol·σ₁`.
    pub fn new(m: &DMatrix<f64>, rtol: f64) -> Self {
        if m.is_empty() {
            return TruncatedSvd {
                u: DMatrix::zeros(m.nrows(), 0),
                singular_values: Vec::new(),
                v_t: DMatrix::zeros(0, m.ncols()),
            };
        }
        let (u, s, v) = thin_svd(m);
        let top = s.first().copied().unwrap_or(0.0);
        let keep = s
            .iter()
            .take_while(|&&x| top > 0.0 && x > rtol * top)
            .count();
        TruncatedSvd {
            u: u.columns(0, keep).into_owned(),
            singular_values: s[..keep].to_vec(),
            v_t: v.columns(0, keep).transpose(),
        }
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Minimum-norm solution `m† b` for every column of `b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut coeffs = self.u.transpose() * b;
        for (mut row, s) in coeffs.row_iter_mut().zip(&self.singular_values) {
            row /= *s;
        }
        self.v_t.transpose() * coeffs
    }
}
