//! Matrix objects of the projection-domain partially separable model:
//! harmonic sampling matrices, temporal bases, face-splitting products and
//! the two linearized operators `L1(Z)` and `L2(β)`.
//!
//! Index conventions used throughout:
//! * harmonic index `n ∈ −N..=N` is stored at column `n + N`;
//! * `β` vectors are harmonic-major: entry `h·(K+1) + k`;
//! * `vec(Z)` is column-major: entry `k·d + a` holds `Z[a, k]`.

use nalgebra::{ComplexField, DMatrix, Scalar};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::orthonormal_columns;

/// Model sizes: harmonics `−N..=N`, `K+1` temporal functions drawn from a
/// `d`-dimensional temporal subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarmonicOrder {
    pub max_harmonic: usize,
    pub psm_order: usize,
    pub subspace_dim: usize,
}

impl HarmonicOrder {
    pub fn new(max_harmonic: usize, psm_order: usize, subspace_dim: usize) -> Result<Self> {
        if subspace_dim < psm_order + 1 {
            return Err(Error::invalid(
                "d",
                format!(
                    "subspace dimension {subspace_dim} is below K+1 = {}",
                    psm_order + 1
                ),
            ));
        }
        Ok(HarmonicOrder {
            max_harmonic,
            psm_order,
            subspace_dim,
        })
    }

    /// `2N+1`.
    pub fn harmonics(&self) -> usize {
        2 * self.max_harmonic + 1
    }

    /// `K+1`.
    pub fn functions(&self) -> usize {
        self.psm_order + 1
    }

    /// Length of `β(s)`: `(2N+1)(K+1)`.
    pub fn coefficients(&self) -> usize {
        self.harmonics() * self.functions()
    }

    /// Whether the number of equations (`2P` with π-symmetry, `P` without)
    /// is at least the number of unknowns in `β(s)`.
    pub fn is_solvable(&self, views: usize, symmetric: bool) -> bool {
        let rows = if symmetric { 2 * views } else { views };
        rows >= self.coefficients()
    }

    /// `Z` is square, so `range(UZ) = range(U)` for every invertible `Z`.
    pub fn is_degenerate(&self) -> bool {
        self.subspace_dim == self.functions()
    }
}

/// Complex harmonic sampling matrix `Θ[p, n+N] = e^{jnθ_p}` and its
/// π-symmetric companion `Θ̄ = Θ·diag((−1)ⁿ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSamplingMatrix {
    pub theta: DMatrix<Complex64>,
    pub theta_bar: DMatrix<Complex64>,
    /// `[Θ; Θ̄]`.
    pub theta_hat: DMatrix<Complex64>,
}

impl HarmonicSamplingMatrix {
    /// `Θ̂` when `symmetric`, otherwise `Θ`.
    pub fn stacked(&self, symmetric: bool) -> &DMatrix<Complex64> {
        if symmetric {
            &self.theta_hat
        } else {
            &self.theta
        }
    }
}

fn harmonic_sign(n: i64) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn build_theta(angles: &[f64], max_harmonic: usize) -> HarmonicSamplingMatrix {
    let big_n = max_harmonic as i64;
    let views = angles.len();
    let cols = 2 * max_harmonic + 1;
    let theta = DMatrix::from_fn(views, cols, |p, c| {
        Complex64::from_polar(1.0, (c as i64 - big_n) as f64 * angles[p])
    });
    let theta_bar = DMatrix::from_fn(views, cols, |p, c| {
        theta[(p, c)] * harmonic_sign(c as i64 - big_n)
    });
    let mut theta_hat = DMatrix::zeros(2 * views, cols);
    theta_hat.rows_mut(0, views).copy_from(&theta);
    theta_hat.rows_mut(views, views).copy_from(&theta_bar);
    HarmonicSamplingMatrix {
        theta,
        theta_bar,
        theta_hat,
    }
}

/// Real trigonometric form of `Θ`: columns
/// `[1, √2cos θ, √2sin θ, …, √2cos Nθ, √2sin Nθ]`.
pub fn real_trig_theta(angles: &[f64], max_harmonic: usize) -> DMatrix<f64> {
    let sqrt2 = std::f64::consts::SQRT_2;
    DMatrix::from_fn(angles.len(), 2 * max_harmonic + 1, |p, c| {
        if c == 0 {
            return 1.0;
        }
        let n = c.div_ceil(2) as f64;
        if c % 2 == 1 {
            sqrt2 * (n * angles[p]).cos()
        } else {
            sqrt2 * (n * angles[p]).sin()
        }
    })
}

/// Per-column factors relating the real trigonometric `Θ` at `θ` and at
/// `θ + π`: `+1` for the constant column, `(−1)ⁿ` for both columns of
/// harmonic `n`.
pub fn real_trig_symmetry_signs(max_harmonic: usize) -> Vec<f64> {
    (0..2 * max_harmonic + 1)
        .map(|c| harmonic_sign(c.div_ceil(2) as i64))
        .collect()
}

/// `[Θ; Θ·diag(signs)]` in the real trigonometric form when `symmetric`,
/// otherwise the plain real `Θ`.
pub fn real_trig_stacked(angles: &[f64], max_harmonic: usize, symmetric: bool) -> DMatrix<f64> {
    let theta = real_trig_theta(angles, max_harmonic);
    if !symmetric {
        return theta;
    }
    let signs = real_trig_symmetry_signs(max_harmonic);
    let views = angles.len();
    let mut out = DMatrix::zeros(2 * views, theta.ncols());
    out.rows_mut(0, views).copy_from(&theta);
    for (c, s) in signs.iter().enumerate() {
        for p in 0..views {
            out[(views + p, c)] = theta[(p, c)] * s;
        }
    }
    out
}

/// The unitary column transform `C` with `Θ_real = Θ_complex · C`.
pub fn real_trig_transform(max_harmonic: usize) -> DMatrix<Complex64> {
    let big_n = max_harmonic;
    let cols = 2 * big_n + 1;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut c = DMatrix::zeros(cols, cols);
    c[(big_n, 0)] = Complex64::new(1.0, 0.0);
    for n in 1..=big_n {
        let (plus, minus) = (big_n + n, big_n - n);
        // √2 cos nθ = (e^{jnθ} + e^{−jnθ})/√2, √2 sin nθ = (e^{jnθ} − e^{−jnθ})/(j√2).
        c[(plus, 2 * n - 1)] = Complex64::new(inv_sqrt2, 0.0);
        c[(minus, 2 * n - 1)] = Complex64::new(inv_sqrt2, 0.0);
        c[(plus, 2 * n)] = Complex64::new(0.0, -inv_sqrt2);
        c[(minus, 2 * n)] = Complex64::new(0.0, inv_sqrt2);
    }
    c
}

/// Row-wise Kronecker product: row `p` of the result is `A_p ⊗ B_p`.
pub fn face_split<T>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>>
where
    T: Scalar + Copy + std::ops::Mul<Output = T>,
{
    if a.nrows() != b.nrows() {
        return Err(Error::dims(format!(
            "face-splitting needs equal row counts, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let bc = b.ncols();
    Ok(DMatrix::from_fn(a.nrows(), a.ncols() * bc, |p, c| {
        a[(p, c / bc)] * b[(p, c % bc)]
    }))
}

fn bspline_basis(x: f64, degree: usize, knots: &[f64], count: usize) -> Vec<f64> {
    // Cox–de Boor; the right end of the domain belongs to the last span.
    let last = knots[knots.len() - 1];
    let mut values: Vec<f64> = (0..knots.len() - 1)
        .map(|i| {
            let inside = knots[i] <= x && x < knots[i + 1];
            let at_end = x >= last && knots[i] < knots[i + 1] && knots[i + 1] == last;
            if inside || at_end {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for q in 1..=degree {
        for i in 0..knots.len() - 1 - q {
            let left_den = knots[i + q] - knots[i];
            let right_den = knots[i + q + 1] - knots[i + 1];
            let left = if left_den > 0.0 {
                (x - knots[i]) / left_den * values[i]
            } else {
                0.0
            };
            let right = if right_den > 0.0 {
                (knots[i + q + 1] - x) / right_den * values[i + 1]
            } else {
                0.0
            };
            values[i] = left + right;
        }
    }
    values.truncate(count);
    values
}

/// Orthonormalized clamped B-spline basis (cubic when `d ≥ 4`) with `d`
/// uniformly spaced knots, sampled at `t_p = p/P`.
pub fn spline_interpolator(views: usize, dim: usize) -> Result<DMatrix<f64>> {
    if dim == 0 || dim > views {
        return Err(Error::invalid(
            "d",
            format!("need 1 ≤ d ≤ P, got d = {dim}, P = {views}"),
        ));
    }
    let degree = 3.min(dim - 1);
    let times: Vec<f64> = (0..views).map(|p| p as f64 / views as f64).collect();
    let (lo, hi) = (times[0], times[views - 1].max(times[0] + f64::EPSILON));
    let interior = dim - degree - 1;
    let mut knots = vec![lo; degree + 1];
    knots.extend((1..=interior).map(|i| lo + (hi - lo) * i as f64 / (interior + 1) as f64));
    knots.extend(std::iter::repeat_n(hi, degree + 1));
    let mut basis = DMatrix::zeros(views, dim);
    for (p, &t) in times.iter().enumerate() {
        for (a, v) in bspline_basis(t, degree, &knots, dim)
            .into_iter()
            .enumerate()
        {
            basis[(p, a)] = v;
        }
    }
    orthonormal_columns(&basis)
}

/// Legendre polynomials of degree `0..=K` sampled at `P` uniform midpoints
/// of `[−1, 1]`, orthonormalized.
pub fn legendre_basis(views: usize, psm_order: usize) -> Result<DMatrix<f64>> {
    let cols = psm_order + 1;
    if cols > views {
        return Err(Error::invalid(
            "K",
            format!("K+1 = {cols} exceeds P = {views}"),
        ));
    }
    let mut basis = DMatrix::zeros(views, cols);
    for p in 0..views {
        let x = 2.0 * (p as f64 + 0.5) / views as f64 - 1.0;
        let (mut prev, mut cur) = (1.0, x);
        basis[(p, 0)] = 1.0;
        if cols > 1 {
            basis[(p, 1)] = x;
        }
        for k in 2..cols {
            let next = ((2 * k - 1) as f64 * x * cur - (k - 1) as f64 * prev) / k as f64;
            prev = cur;
            cur = next;
            basis[(p, k)] = next;
        }
    }
    orthonormal_columns(&basis)
}

/// `[U; U]` when `symmetric`.
pub fn double_rows(m: &DMatrix<f64>, symmetric: bool) -> DMatrix<f64> {
    if !symmetric {
        return m.clone();
    }
    let rows = m.nrows();
    let mut out = DMatrix::zeros(2 * rows, m.ncols());
    out.rows_mut(0, rows).copy_from(m);
    out.rows_mut(rows, rows).copy_from(m);
    out
}

/// Temporal model `Ψ = UZ` with a fixed interpolator `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalModel {
    pub u: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

impl TemporalModel {
    pub fn new(u: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != z.nrows() {
            return Err(Error::dims(format!(
                "U has {} columns but Z has {} rows",
                u.ncols(),
                z.nrows()
            )));
        }
        Ok(TemporalModel { u, z })
    }

    pub fn psi(&self) -> DMatrix<f64> {
        &self.u * &self.z
    }

    pub fn u_hat(&self, symmetric: bool) -> DMatrix<f64> {
        double_rows(&self.u, symmetric)
    }

    pub fn psi_hat(&self, symmetric: bool) -> DMatrix<f64> {
        double_rows(&self.psi(), symmetric)
    }
}

/// Real trigonometric coefficients `β(s_j)`, one column per detector bin.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoefficients {
    pub beta: DMatrix<f64>,
    pub order: HarmonicOrder,
}

impl HarmonicCoefficients {
    pub fn new(beta: DMatrix<f64>, order: HarmonicOrder) -> Result<Self> {
        if beta.nrows() != order.coefficients() {
            return Err(Error::dims(format!(
                "β has {} rows, expected (2N+1)(K+1) = {}",
                beta.nrows(),
                order.coefficients()
            )));
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("beta", "non-finite coefficient"));
        }
        Ok(HarmonicCoefficients { beta, order })
    }

    pub fn bins(&self) -> usize {
        self.beta.ncols()
    }

    /// `β_{h,k}(s_j)` for real trigonometric column `h`.
    pub fn get(&self, bin: usize, harmonic: usize, function: usize) -> f64 {
        self.beta[(harmonic * self.order.functions() + function, bin)]
    }
}

fn to_field<T: ComplexField<RealField = f64>>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(T::from_real)
}

/// `L1(Z) = Θ̂ • Ψ̂`.
pub fn build_l1<T>(theta_hat: &DMatrix<T>, psi_hat: &DMatrix<f64>) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    face_split(theta_hat, &to_field(psi_hat))
}

/// `A_i = Θ̂_{i:} ⊗ I_{K+1}` for 0-based row `i`.
pub fn build_a<T>(theta_hat: &DMatrix<T>, row: usize, psm_order: usize) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    if row >= theta_hat.nrows() {
        return Err(Error::IndexOutOfRange {
            index: row,
            len: theta_hat.nrows(),
        });
    }
    let f = psm_order + 1;
    Ok(DMatrix::from_fn(f, theta_hat.ncols() * f, |k, c| {
        if c % f == k {
            theta_hat[(row, c / f)]
        } else {
            T::zero()
        }
    }))
}

/// `L2(β)`: row `i·J + j` maps `vec(Z)` to the model value `ĝ_i(s_j)`.
/// `beta` holds one column per bin in the parameterization matching
/// `theta_hat`.
pub fn build_l2<T>(
    beta: &DMatrix<T>,
    theta_hat: &DMatrix<T>,
    u_hat: &DMatrix<f64>,
) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let rows = theta_hat.nrows();
    let harmonics = theta_hat.ncols();
    if u_hat.nrows() != rows {
        return Err(Error::dims(format!(
            "Û has {} rows, Θ̂ has {rows}",
            u_hat.nrows()
        )));
    }
    if beta.nrows() % harmonics != 0 || beta.nrows() == 0 {
        return Err(Error::dims(format!(
            "β length {} is not a multiple of 2N+1 = {harmonics}",
            beta.nrows()
        )));
    }
    let functions = beta.nrows() / harmonics;
    let bins = beta.ncols();
    let dim = u_hat.ncols();
    let mut l2 = DMatrix::zeros(rows * bins, dim * functions);
    for i in 0..rows {
        for j in 0..bins {
            for k in 0..functions {
                let mut ck = T::zero();
                for n in 0..harmonics {
                    ck += theta_hat[(i, n)] * beta[(n * functions + k, j)];
                }
                for a in 0..dim {
                    l2[(i * bins + j, k * dim + a)] = ck * T::from_real(u_hat[(i, a)]);
                }
            }
        }
    }
    Ok(l2)
}

/// Column-major `vec(Z)`.
pub fn vec_z(z: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(z.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_stiefel, singular_values};
    use crate::sampling::{bit_reversed, random_scheme};
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        crate::linalg::gaussian_matrix(rows, cols, &mut rng(seed))
    }

    fn complex_gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<Complex64> {
        let re = gaussian(rows, cols, seed);
        let im = gaussian(rows, cols, seed + 1000);
        DMatrix::from_fn(rows, cols, |r, c| Complex64::new(re[(r, c)], im[(r, c)]))
    }

    fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn theta_single_view() {
        let t = build_theta(&[0.0], 1);
        assert!(t
            .theta
            .iter()
            .all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn theta_bar_signs() {
        let angles = random_scheme(9, 2.0 * PI, 1).unwrap().angles;
        let t = build_theta(&angles, 1);
        for (c, s) in [-1.0, 1.0, -1.0].iter().enumerate() {
            for p in 0..9 {
                assert_eq!(t.theta_bar[(p, c)], t.theta[(p, c)] * *s);
            }
        }
    }

    #[test]
    fn theta_rows_have_unit_modulus_and_norm() {
        let angles = random_scheme(40, PI, 3).unwrap().angles;
        let t = build_theta(&angles, 7);
        assert!(t.theta_hat.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        for row in t.theta_hat.row_iter() {
            assert!((row.norm_squared() - 15.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_rows_match_shifted_angles() {
        let angles = random_scheme(12, PI, 5).unwrap().angles;
        let shifted: Vec<f64> = angles.iter().map(|t| t + PI).collect();
        let t = build_theta(&angles, 6);
        let s = build_theta(&shifted, 6);
        assert!(max_abs_diff(&t.theta_bar, &s.theta) < 1e-12);
        let r = real_trig_stacked(&angles, 6, true);
        let rs = real_trig_theta(&shifted, 6);
        assert!((r.rows(12, 12) - rs).abs().max() < 1e-12);
    }

    #[test]
    fn face_split_examples() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let b = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        assert_eq!(
            face_split(&a, &b).unwrap(),
            DMatrix::from_row_slice(1, 4, &[3.0, 4.0, 6.0, 8.0])
        );
        let a = gaussian(5, 3, 2);
        assert_eq!(
            face_split(&a, &DMatrix::from_element(5, 1, 1.0)).unwrap(),
            a
        );
        assert!(face_split(&a, &gaussian(4, 2, 1)).is_err());
    }

    #[test]
    fn face_split_gram_identity() {
        let a = complex_gaussian(5, 3, 7);
        let b = complex_gaussian(5, 2, 8);
        let ab = face_split(&a, &b).unwrap();
        let lhs = &ab * ab.adjoint();
        let rhs = (&a * a.adjoint()).component_mul(&(&b * b.adjoint()));
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn spline_examples() {
        let u = spline_interpolator(12, 12).unwrap();
        let sv = singular_values(&u);
        assert!((sv[11] - 1.0).abs() < 1e-10);
        let u = spline_interpolator(50, 1).unwrap();
        assert!(u.iter().all(|v| (v - 1.0 / 50f64.sqrt()).abs() < 1e-12));
        assert!(spline_interpolator(4, 5).is_err());
    }

    #[test]
    fn spline_spans_cubics() {
        let views = 256;
        let u = spline_interpolator(views, 4).unwrap();
        assert!((u.transpose() * &u - DMatrix::identity(4, 4)).norm() < 1e-12);
        let cubic = DVector::from_fn(views, |p, _| {
            let t = p as f64 / views as f64;
            1.0 - 2.0 * t + 0.5 * t * t + 3.0 * t * t * t
        });
        let residual = &cubic - &u * (u.transpose() * &cubic);
        assert!(residual.norm() < 1e-8);
    }

    #[test]
    fn spline_is_orthonormal_for_many_sizes() {
        for (views, dim) in [(128, 4), (256, 6), (512, 8), (64, 13)] {
            let u = spline_interpolator(views, dim).unwrap();
            assert!((u.transpose() * &u - DMatrix::identity(dim, dim)).norm() < 1e-12);
        }
    }

    #[test]
    fn legendre_examples() {
        let psi = legendre_basis(10, 0).unwrap();
        assert!(psi.iter().all(|v| (v - 1.0 / 10f64.sqrt()).abs() < 1e-12));
        let psi = legendre_basis(10, 1).unwrap();
        let col = psi.column(1);
        assert!(col.sum().abs() < 1e-12);
        let steps: Vec<f64> = (1..10).map(|p| col[p] - col[p - 1]).collect();
        assert!(steps.iter().all(|s| (s - steps[0]).abs() < 1e-12));
        let psi = legendre_basis(512, 5).unwrap();
        assert!((psi.transpose() * &psi - DMatrix::identity(6, 6)).norm() < 1e-12);
    }

    #[test]
    fn l1_row_identity() {
        let (views, order) = (16, HarmonicOrder::new(3, 2, 4).unwrap());
        let angles = bit_reversed(views, PI).unwrap().angles;
        let theta_hat = build_theta(&angles, 3).theta_hat;
        let u_hat = double_rows(&spline_interpolator(views, 4).unwrap(), true);
        let z = gaussian(4, 3, 9);
        let l1 = build_l1(&theta_hat, &(&u_hat * &z)).unwrap();
        assert_eq!(l1.shape(), (2 * views, order.coefficients()));
        let zc: DVector<Complex64> = vec_z(&z).map(Complex64::from);
        for i in (0..2 * views).step_by(2).take(20) {
            let a = build_a(&theta_hat, i, 2).unwrap();
            let u_row = u_hat.row(i).transpose().map(Complex64::from);
            let kron = a.kronecker(&u_row);
            let row = zc.transpose() * kron;
            let err = (row - l1.row(i)).norm() / l1.row(i).norm();
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn l1_with_constant_psi_spans_theta() {
        let angles = random_scheme(20, PI, 2).unwrap().angles;
        let theta = build_theta(&angles, 3).theta;
        let psi = DMatrix::from_element(20, 1, 0.5);
        let l1 = build_l1(&theta, &psi).unwrap();
        assert!(max_abs_diff(&l1, &(theta * Complex64::from(0.5))) < 1e-15);
    }

    #[test]
    fn a_matrix_examples() {
        let angles = random_scheme(6, PI, 4).unwrap().angles;
        let theta_hat = build_theta(&angles, 5).theta_hat;
        for i in 0..12 {
            let a = build_a(&theta_hat, i, 3).unwrap();
            let gram = &a * a.adjoint();
            let expect = DMatrix::<Complex64>::identity(4, 4) * Complex64::from(11.0);
            assert!(max_abs_diff(&gram, &expect) < 1e-12);
        }
        assert!(matches!(
            build_a(&theta_hat, 12, 3),
            Err(Error::IndexOutOfRange { .. })
        ));
        let t0 = build_theta(&angles, 0).theta_hat;
        assert!(max_abs_diff(&build_a(&t0, 3, 2).unwrap(), &DMatrix::identity(3, 3)) < 1e-15);
        let a = build_a(&theta_hat, 2, 0).unwrap();
        assert_eq!(a, theta_hat.rows(2, 1).into_owned());
    }

    #[test]
    fn l1_and_l2_routes_agree() {
        let (views, big_n, big_k, dim, bins) = (8, 2, 1, 3, 5);
        let angles = random_scheme(views, PI, 11).unwrap().angles;
        let theta_hat = build_theta(&angles, big_n).theta_hat;
        let u_hat = double_rows(&spline_interpolator(views, dim).unwrap(), true);
        let z = gaussian(dim, big_k + 1, 12);
        let beta = complex_gaussian((2 * big_n + 1) * (big_k + 1), bins, 13);
        let l1 = build_l1(&theta_hat, &(&u_hat * &z)).unwrap();
        let predicted = &l1 * &beta;
        let stacked = DVector::from_fn(2 * views * bins, |r, _| predicted[(r / bins, r % bins)]);
        let l2 = build_l2(&beta, &theta_hat, &u_hat).unwrap();
        assert_eq!(l2.shape(), (2 * views * bins, dim * (big_k + 1)));
        let via_l2 = &l2 * vec_z(&z).map(Complex64::from);
        assert!((&via_l2 - &stacked).norm() / stacked.norm() < 1e-12);
        let zero = DMatrix::<Complex64>::zeros(beta.nrows(), bins);
        assert!(build_l2(&zero, &theta_hat, &u_hat)
            .unwrap()
            .iter()
            .all(|v| *v == Complex64::from(0.0)));
    }

    #[test]
    fn real_trig_examples() {
        let angles = random_scheme(30, 2.0 * PI, 6).unwrap().angles;
        assert!(real_trig_theta(&angles, 0).iter().all(|&v| v == 1.0));
        let r = real_trig_theta(&angles, 4);
        for row in r.row_iter() {
            assert!((row.norm_squared() - 9.0).abs() < 1e-12);
        }
        let c = real_trig_transform(4);
        assert!(max_abs_diff(&(c.adjoint() * &c), &DMatrix::identity(9, 9)) < 1e-14);
        let via = build_theta(&angles, 4).theta * c;
        assert!(max_abs_diff(&via, &r.map(Complex64::from)) < 1e-12);
    }

    #[test]
    fn real_and_complex_spectra_match() {
        let angles = random_scheme(40, 2.0 * PI, 8).unwrap().angles;
        let psi = random_stiefel(40, 3, &mut rng(9));
        let complex = build_l1(&build_theta(&angles, 4).theta, &psi).unwrap();
        let real = build_l1(&real_trig_theta(&angles, 4), &psi).unwrap();
        let (a, b) = (singular_values(&complex), singular_values(&real));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * a[0]);
        }
    }

    #[test]
    fn order_validation() {
        assert!(HarmonicOrder::new(3, 2, 2).is_err());
        let o = HarmonicOrder::new(28, 5, 8).unwrap();
        assert_eq!(o.coefficients(), 57 * 6);
        assert!(o.is_solvable(512, false));
        assert!(!o.is_solvable(128, true));
        assert!(HarmonicOrder::new(30, 5, 6).unwrap().is_degenerate());
    }

    proptest! {
        #[test]
        fn theta_hat_row_norms(views in 1usize..40, big_n in 0usize..12, seed: u64) {
            let angles = random_scheme(views, PI, seed).unwrap().angles;
            let t = build_theta(&angles, big_n);
            for row in t.theta_hat.row_iter() {
                prop_assert!((row.norm_squared() - (2 * big_n + 1) as f64).abs() < 1e-12);
            }
        }

        #[test]
        fn face_split_gram(rows in 1usize..8, ac in 1usize..4, bc in 1usize..4, seed in 0u64..1000) {
            let a = complex_gaussian(rows, ac, seed);
            let b = complex_gaussian(rows, bc, seed + 1);
            let ab = face_split(&a, &b).unwrap();
            let lhs = &ab * ab.adjoint();
            let rhs = (&a * a.adjoint()).component_mul(&(&b * b.adjoint()));
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-10 * (1.0 + lhs.norm()));
        }
    }
}
