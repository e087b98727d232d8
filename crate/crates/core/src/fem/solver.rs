use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use super::assembly::{matvec, SparseSystem};
use crate::error::{Error, Result};

/// Systems up to this size may be solved densely by [`solve_dense`].
pub const DENSE_LIMIT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients. `x` is the initial guess and
/// is overwritten. Stops when `|r| <= tol |b|`.
pub fn pcg(a: &CsrMatrix<f64>, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut diag = vec![0.0; n];
    for (i, j, v) in a.triplet_iter() {
        if i == j {
            diag[i] = *v;
        }
    }
    if let Some(d) = diag.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::NotSpd(*d));
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut r = vec![0.0; n];
    matvec(a, x, &mut r);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(SolveStats { iterations: it, relative_residual: res });
        }
        matvec(a, &p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotSpd(pap));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
    }
    if res <= tol {
        return Ok(SolveStats { iterations: max_iter, relative_residual: res });
    }
    Err(Error::SolverStagnation { iterations: max_iter, residual: res })
}

/// Solves an SPD system from zero with PCG.
pub fn solve(system: &SparseSystem, tol: f64) -> Result<Vec<f64>> {
    let mut x = vec![0.0; system.dim()];
    pcg(&system.matrix, &system.rhs, &mut x, tol, 20 * system.dim() + 100)?;
    Ok(x)
}

/// Dense LU solve, for small systems and as a reference.
pub fn solve_dense(a: &CsrMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(n, n);
    for (i, j, v) in a.triplet_iter() {
        m[(i, j)] += *v;
    }
    let x = m.lu().solve(&DVector::from_column_slice(b)).ok_or(Error::SingularMatrix)?;
    Ok(x.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra_sparse::CooMatrix;

    fn laplacian_1d(n: usize) -> CsrMatrix<f64> {
        let mut coo = CooMatrix::new(n, n);
        for i in 0..n {
            coo.push(i, i, 2.0);
            if i > 0 {
                coo.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                coo.push(i, i + 1, -1.0);
            }
        }
        CsrMatrix::from(&coo)
    }

    #[test]
    fn identity_and_zero_rhs() {
        let n = 7;
        let mut coo = CooMatrix::new(n, n);
        (0..n).for_each(|i| coo.push(i, i, 1.0));
        let a = CsrMatrix::from(&coo);
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let mut x = vec![0.0; n];
        let st = pcg(&a, &b, &mut x, 1e-14, 10).unwrap();
        assert_eq!(x, b);
        assert!(st.iterations <= 1);
        let mut x = vec![5.0; n];
        pcg(&a, &vec![0.0; n], &mut x, 1e-14, 10).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn discrete_poisson_solution() {
        // -u'' = 1 on (0,1), u(0)=u(1)=0: nodal values are exact
        let n = 63;
        let h = 1.0 / (n + 1) as f64;
        let a = laplacian_1d(n);
        let b = vec![h * h; n];
        let mut x = vec![0.0; n];
        pcg(&a, &b, &mut x, 1e-14, 1000).unwrap();
        for (i, xi) in x.iter().enumerate() {
            let s = (i + 1) as f64 * h;
            assert!((xi - 0.5 * s * (1.0 - s)).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_lu() {
        let n = 40;
        let a = laplacian_1d(n);
        let b: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mut x = vec![0.0; n];
        pcg(&a, &b, &mut x, 1e-14, 1000).unwrap();
        let y = solve_dense(&a, &b).unwrap();
        let e: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let mut ae = vec![0.0; n];
        matvec(&a, &e, &mut ae);
        let mut ay = vec![0.0; n];
        matvec(&a, &y, &mut ay);
        assert!((dot(&e, &ae) / dot(&y, &ay)).sqrt() < 1e-8);
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let mut coo = CooMatrix::new(2, 2);
        coo.push(0, 0, 1.0);
        coo.push(1, 1, 1.0);
        coo.push(0, 1, 2.0);
        coo.push(1, 0, 2.0);
        let a = CsrMatrix::from(&coo);
        let mut x = vec![0.0; 2];
        assert!(matches!(pcg(&a, &[1.0, -1.0], &mut x, 1e-12, 10), Err(Error::NotSpd(_))));
    }

    #[test]
    fn stagnation_is_reported() {
        let a = laplacian_1d(200);
        let mut x = vec![0.0; 200];
        let r = pcg(&a, &vec![1.0; 200], &mut x, 1e-14, 3);
        assert!(matches!(r, Err(Error::SolverStagnation { iterations: 3, .. })));
    }
}
