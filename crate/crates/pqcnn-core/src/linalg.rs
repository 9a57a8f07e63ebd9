//! Small dense complex linear-algebra helpers shared across the crate.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::cr;
use crate::Real;

/// Complex identity matrix.
pub fn identity<T: Real>(n: usize) -> Array2<Complex<T>> {
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            Complex::new(T::one(), T::zero())
        } else {
            Complex::new(T::zero(), T::zero())
        }
    })
}

/// Conjugate transpose.
pub fn dagger<T: Real>(a: &ArrayView2<Complex<T>>) -> Array2<Complex<T>> {
    let (r, c) = a.dim();
    Array2::from_shape_fn((c, r), |(i, j)| a[(j, i)].conj())
}

/// Entrywise max-norm of the difference of two matrices.
pub fn max_abs_diff<T: Real>(a: &ArrayView2<Complex<T>>, b: &ArrayView2<Complex<T>>) -> T {
    debug_assert_eq!(a.dim(), b.dim());
    let mut worst = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        let d = (*x - *y).norm();
        if d > worst {
            worst = d;
        }
    }
    worst
}

/// `max |(U U† - I)_{ij}|`.
pub fn unitarity_deviation<T: Real>(u: &ArrayView2<Complex<T>>) -> T {
    let prod = u.dot(&dagger(u));
    max_abs_diff(&prod.view(), &identity(u.nrows()).view())
}

/// `max |(A - A†)_{ij}|`.
pub fn hermiticity_deviation<T: Real>(a: &ArrayView2<Complex<T>>) -> T {
    max_abs_diff(a, &dagger(a).view())
}

/// Outer product `v w†`.
pub fn outer<T: Real>(v: &Array1<Complex<T>>, w: &Array1<Complex<T>>) -> Array2<Complex<T>> {
    let n = v.len();
    let m = w.len();
    Array2::from_shape_fn((n, m), |(i, j)| v[i] * w[j].conj())
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi sweeps,
/// returned in ascending order.
pub fn hermitian_eigenvalues<T: Real>(a: &ArrayView2<Complex<T>>) -> Vec<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "hermitian_eigenvalues needs a square matrix");
    if n == 0 {
        return Vec::new();
    }
    let mut m = a.to_owned();
    let scale = m
        .iter()
        .map(|z| z.norm())
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
        .max(T::one());
    let tol = T::epsilon() * scale * T::from_usize(n).unwrap();

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag <= tol * T::epsilon().sqrt() {
                    continue;
                }
                // Phase that makes the (p,q) entry real, then a real rotation.
                let phase = apq / mag;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (mag + mag);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let ephn = phase.conj(); // e^{-i alpha}
                let eph = phase; // e^{+i alpha}

                // Column update: A <- A J.
                for i in 0..n {
                    let aip = m[(i, p)];
                    let aiq = m[(i, q)];
                    m[(i, p)] = aip * cr(c) - aiq * ephn * cr(s);
                    m[(i, q)] = aip * cr(s) + aiq * ephn * cr(c);
                }
                // Row update: A <- J† A.
                for j in 0..n {
                    let apj = m[(p, j)];
                    let aqj = m[(q, j)];
                    m[(p, j)] = apj * cr(c) - aqj * eph * cr(s);
                    m[(q, j)] = apj * cr(s) + aqj * eph * cr(c);
                }
            }
        }
    }

    let mut eigs: Vec<T> = (0..n).map(|i| m[(i, i)].re).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("non-finite eigenvalue"));
    eigs
}

/// Haar-ish random unitary: complex Gaussian matrix orthonormalized by
/// modified Gram-Schmidt (run twice for numerical orthogonality).
pub fn random_unitary<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array2<Complex<T>> {
    let mut z = Array2::from_shape_fn((n, n), |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(T::from_f64(re).unwrap(), T::from_f64(im).unwrap())
    });
    for _ in 0..2 {
        for j in 0..n {
            for prev in 0..j {
                let mut proj = Complex::new(T::zero(), T::zero());
                for i in 0..n {
                    proj = proj + z[(i, prev)].conj() * z[(i, j)];
                }
                for i in 0..n {
                    let sub = proj * z[(i, prev)];
                    z[(i, j)] = z[(i, j)] - sub;
                }
            }
            let norm = z.column(j).iter().map(|v| v.norm_sqr()).sum::<T>().sqrt();
            for i in 0..n {
                z[(i, j)] = z[(i, j)] / cr(norm);
            }
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn identity_is_unitary() {
        let id = identity::<f64>(5);
        assert!(unitarity_deviation(&id.view()) < 1e-15);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for n in [2, 5, 9] {
            let u = random_unitary::<f64, _>(n, &mut rng);
            assert!(
                unitarity_deviation(&u.view()) < 1e-12,
                "n={n} deviation too large"
            );
        }
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let a: Array2<Complex<f64>> = ndarray::arr2(&[
            [Complex::new(2.0, 0.0), Complex::new(1.0, 0.0)],
            [Complex::new(1.0, 0.0), Complex::new(2.0, 0.0)],
        ]);
        let e = hermitian_eigenvalues(&a.view());
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);

        // Complex Hermitian: [[1, i],[-i, 1]] has eigenvalues 0 and 2.
        let b: Array2<Complex<f64>> = ndarray::arr2(&[
            [Complex::new(1.0, 0.0), Complex::new(0.0, 1.0)],
            [Complex::new(0.0, -1.0), Complex::new(1.0, 0.0)],
        ]);
        let e = hermitian_eigenvalues(&b.view());
        assert!((e[0] - 0.0).abs() < 1e-12);
        assert!((e[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_projector_spectrum() {
        // Eigenvalues of U diag(1,0,..,0) U† are one 1 and n-1 zeros.
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 8;
        let u = random_unitary::<f64, _>(n, &mut rng);
        let mut d = Array2::zeros((n, n));
        d[(0, 0)] = Complex::new(1.0, 0.0);
        let proj = u.dot(&d).dot(&dagger(&u.view()));
        let e = hermitian_eigenvalues(&proj.view());
        for v in &e[..n - 1] {
            assert!(v.abs() < 1e-10, "expected 0, got {v}");
        }
        assert!((e[n - 1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn jacobi_trace_is_preserved() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 6;
        let u = random_unitary::<f64, _>(n, &mut rng);
        let h = {
            let ud = dagger(&u.view());
            // U + U† is Hermitian.
            Array2::from_shape_fn((n, n), |(i, j)| u[(i, j)] + ud[(i, j)])
        };
        let tr: f64 = (0..n).map(|i| h[(i, i)].re).sum();
        let e = hermitian_eigenvalues(&h.view());
        let sum: f64 = e.iter().sum();
        assert!((tr - sum).abs() < 1e-10);
    }
}
