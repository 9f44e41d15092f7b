//! Small dense real matrices and the matrix exponential.
//!
//! Every matrix in this crate is at most 8×8, so everything is built on
//! nalgebra's statically sized types and the exponential uses the
//! scaling-and-squaring Padé scheme (degrees 3, 5, 7, 9 and 13, selected by
//! the 1-norm of the argument).

use nalgebra::{Const, Matrix3, Matrix4, SMatrix, ToTypenum, Vector3};

use crate::error::{Error, Result};

pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;
pub type Vec3 = Vector3<f64>;

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Maximum absolute column sum.
pub fn norm1<const N: usize>(x: &SMatrix<f64, N, N>) -> f64 {
    x.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number, or `None` when the matrix cannot be inverted.
pub fn condition_1<const N: usize>(x: &SMatrix<f64, N, N>) -> Option<f64>
where
    Const<N>: ToTypenum,
{
    let inv = x.try_inverse()?;
    Some(norm1(x) * norm1(&inv))
}

/// Matrix exponential `e^X` by scaling and squaring with a diagonal Padé
/// approximant.
pub fn matrix_exp<const N: usize>(x: &SMatrix<f64, N, N>) -> Result<SMatrix<f64, N, N>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential argument"));
    }
    let norm = norm1(x);
    let id = SMatrix::<f64, N, N>::identity();

    if norm <= THETA_9 {
        let x2 = x * x;
        let (u, v) = if norm <= THETA_3 {
            odd_even(x, &x2, &PADE_3)
        } else if norm <= THETA_5 {
            odd_even(x, &x2, &PADE_5)
        } else if norm <= THETA_7 {
            odd_even(x, &x2, &PADE_7)
        } else {
            odd_even(x, &x2, &PADE_9)
        };
        return pade_solve(&u, &v);
    }

    let s = libm::ceil(libm::log2(norm / THETA_13)).max(0.0) as i32;
    let a = x * libm::exp2(-(s as f64));
    let b = &PADE_13;
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u_inner =
        a6 * (a6 * b[13] + a4 * b[11] + a2 * b[9]) + a6 * b[7] + a4 * b[5] + a2 * b[3] + id * b[1];
    let u = a * u_inner;
    let v =
        a6 * (a6 * b[12] + a4 * b[10] + a2 * b[8]) + a6 * b[6] + a4 * b[4] + a2 * b[2] + id * b[0];
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = r * r;
    }
    Ok(r)
}

/// Odd part `U` and even part `V` of a low-degree Padé numerator.
fn odd_even<const N: usize>(
    x: &SMatrix<f64, N, N>,
    x2: &SMatrix<f64, N, N>,
    coeffs: &[f64],
) -> (SMatrix<f64, N, N>, SMatrix<f64, N, N>) {
    let id = SMatrix::<f64, N, N>::identity();
    let mut odd = id * coeffs[1];
    let mut even = id * coeffs[0];
    let mut power = id;
    for pair in coeffs[2..].chunks(2) {
        power *= x2;
        even += power * pair[0];
        if let Some(c) = pair.get(1) {
            odd += power * *c;
        }
    }
    (x * odd, even)
}

/// Solves `(V − U) R = V + U` by Gaussian elimination with partial pivoting.
fn pade_solve<const N: usize>(
    u: &SMatrix<f64, N, N>,
    v: &SMatrix<f64, N, N>,
) -> Result<SMatrix<f64, N, N>> {
    let mut a = v - u;
    let mut r = v + u;
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .unwrap_or(col);
        let p = a[(pivot, col)];
        if p == 0.0 || !p.is_finite() {
            return Err(Error::Singular("Padé denominator"));
        }
        a.swap_rows(col, pivot);
        r.swap_rows(col, pivot);
        for row in col + 1..N {
            let f = a[(row, col)] / p;
            if f != 0.0 {
                for k in col..N {
                    a[(row, k)] -= f * a[(col, k)];
                }
                for k in 0..N {
                    r[(row, k)] -= f * r[(col, k)];
                }
            }
        }
    }
    for col in (0..N).rev() {
        for k in 0..N {
            let mut acc = r[(col, k)];
            for j in col + 1..N {
                acc -= a[(col, j)] * r[(j, k)];
            }
            r[(col, k)] = acc / a[(col, col)];
        }
    }
    Ok(r)
}

/// Exact Fréchet derivative `∫₀^dt e^{A t} X e^{A (dt − t)} dt` of the map
/// `s ↦ e^{(A + sX) dt}`, read off the upper-right block of the exponential
/// of the block-triangular matrix `[[A, X], [0, A]]·dt`.
pub fn exp_frechet_3(a: &Mat3, x: &Mat3, dt: f64) -> Result<Mat3> {
    let mut block = SMatrix::<f64, 6, 6>::zeros();
    block.fixed_view_mut::<3, 3>(0, 0).copy_from(&(a * dt));
    block.fixed_view_mut::<3, 3>(3, 3).copy_from(&(a * dt));
    block.fixed_view_mut::<3, 3>(0, 3).copy_from(&(x * dt));
    let e = matrix_exp(&block)?;
    Ok(e.fixed_view::<3, 3>(0, 3).into_owned())
}

/// 4×4 counterpart of [`exp_frechet_3`], used for the augmented
/// `[[A, b], [0, 0]]` exponential.
pub fn exp_frechet_4(a: &Mat4, x: &Mat4, dt: f64) -> Result<Mat4> {
    let mut block = SMatrix::<f64, 8, 8>::zeros();
    block.fixed_view_mut::<4, 4>(0, 0).copy_from(&(a * dt));
    block.fixed_view_mut::<4, 4>(4, 4).copy_from(&(a * dt));
    block.fixed_view_mut::<4, 4>(0, 4).copy_from(&(x * dt));
    let e = matrix_exp(&block)?;
    Ok(e.fixed_view::<4, 4>(0, 4).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix2, Matrix5};

    /// Truncated Taylor series evaluated after scaling by 2^-8, then squared
    /// back: an independent reference for moderate norms.
    fn taylor_exp<const N: usize>(x: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
        let scale = 8;
        let a = x / f64::powi(2.0, scale);
        let mut term = SMatrix::<f64, N, N>::identity();
        let mut sum = term;
        for k in 1..30 {
            term = term * a / k as f64;
            sum += term;
        }
        for _ in 0..scale {
            sum = sum * sum;
        }
        sum
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let e = matrix_exp(&Mat4::zeros()).unwrap();
        assert_eq!(e, Mat4::identity());
    }

    #[test]
    fn diagonal_matrix() {
        let d = Mat3::from_diagonal(&Vec3::new(-0.3, 1.7, 4.0));
        let e = matrix_exp(&d).unwrap();
        for (i, v) in [-0.3f64, 1.7, 4.0].iter().enumerate() {
            assert_relative_eq!(e[(i, i)], v.exp(), max_relative = 1e-14);
        }
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn planar_rotation() {
        for theta in [0.01, 0.5, 2.0, 7.5, 30.0] {
            let mut x = Mat3::zeros();
            x[(0, 1)] = theta;
            x[(1, 0)] = -theta;
            let e = matrix_exp(&x).unwrap();
            assert_relative_eq!(e[(0, 0)], theta.cos(), epsilon = 1e-13);
            assert_relative_eq!(e[(0, 1)], theta.sin(), epsilon = 1e-13);
            assert_relative_eq!(e[(1, 0)], -theta.sin(), epsilon = 1e-13);
            assert_relative_eq!(e[(2, 2)], 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn every_pade_degree_matches_taylor() {
        // Norms straddling each degree threshold, including the scaled branch.
        let base = Matrix5::from_fn(|i, j| ((i * 5 + j) as f64 * 0.37).sin() - 0.2);
        for target in [0.01, 0.2, 0.9, 2.0, 5.0, 9.5] {
            let x = base * (target / norm1(&base));
            let e = matrix_exp(&x).unwrap();
            let r = taylor_exp(&x);
            assert!(
                (e - r).norm() <= 1e-13 * r.norm(),
                "norm {target}: {}",
                (e - r).norm() / r.norm()
            );
        }
    }

    #[test]
    fn spiral_closed_form() {
        // exp([[a, −b], [b, a]]) = e^a · rotation(b).
        let (a, b) = (-0.4, 9.0);
        let ours = matrix_exp(&Matrix2::new(a, -b, b, a)).unwrap();
        let r = a.exp();
        let want = Matrix2::new(r * b.cos(), -r * b.sin(), r * b.sin(), r * b.cos());
        assert!((ours - want).norm() <= 1e-13 * want.norm());
    }

    #[test]
    fn non_finite_rejected() {
        let mut x = Mat3::zeros();
        x[(1, 2)] = f64::NAN;
        assert_eq!(
            matrix_exp(&x),
            Err(Error::NonFinite("matrix exponential argument"))
        );
    }

    #[test]
    fn frechet_derivative_matches_finite_difference() {
        let a = Mat3::new(-0.01, 1.0, 0.0, -1.0, -0.02, -0.3, 0.0, 0.3, -0.04);
        let x = Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, -0.2, 0.0, 0.2, 0.0);
        let dt = 0.5;
        let d = exp_frechet_3(&a, &x, dt).unwrap();
        let h = 1e-6;
        let fd = (matrix_exp(&((a + x * h) * dt)).unwrap()
            - matrix_exp(&((a - x * h) * dt)).unwrap())
            / (2.0 * h);
        assert!((d - fd).norm() < 1e-9, "{}", (d - fd).norm());
    }
}
