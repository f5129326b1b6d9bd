//! Dense symmetric eigensolver and Gram products, backed by the system
//! OpenBLAS/LAPACK (`dsyevr`, `dsyrk`).
//!
//! BLAS is pinned to a single thread on first use: parallelism happens at
//! the replication level, and results must not depend on worker counts.

use std::os::raw::{c_char, c_int};
use std::sync::Once;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

extern "C" {
    fn openblas_set_num_threads(n: c_int);

    fn dsyevr_(
        jobz: *const c_char,
        range: *const c_char,
        uplo: *const c_char,
        n: *const c_int,
        a: *mut f64,
        lda: *const c_int,
        vl: *const f64,
        vu: *const f64,
        il: *const c_int,
        iu: *const c_int,
        abstol: *const f64,
        m: *mut c_int,
        w: *mut f64,
        z: *mut f64,
        ldz: *const c_int,
        isuppz: *mut c_int,
        work: *mut f64,
        lwork: *const c_int,
        iwork: *mut c_int,
        liwork: *const c_int,
        info: *mut c_int,
    );

    fn dsyrk_(
        uplo: *const c_char,
        trans: *const c_char,
        n: *const c_int,
        k: *const c_int,
        alpha: *const f64,
        a: *const f64,
        lda: *const c_int,
        beta: *const f64,
        c: *mut f64,
        ldc: *const c_int,
    );
}

static BLAS_INIT: Once = Once::new();

fn init_blas() {
    BLAS_INIT.call_once(|| unsafe {
        openblas_set_num_threads(1);
    });
}

/// Eigenvalues (ascending) and eigenvectors of the top `k` eigenpairs of a
/// symmetric matrix. `vectors[(row, j)]` is component `row` of the
/// eigenvector paired with `values[j]`.
pub struct EigPairs {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

fn as_dense_standard(a: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::DimensionMismatch(format!(
            "eigensolver needs a square matrix, got {r}x{c}"
        )));
    }
    // symmetric input: row-major and column-major layouts coincide
    Ok(a.iter().copied().collect())
}

/// Top `k` eigenpairs (largest eigenvalues) of a symmetric matrix.
pub fn sym_eig_top_k(a: ArrayView2<'_, f64>, k: usize) -> Result<EigPairs> {
    let n = a.nrows();
    if k == 0 || k > n {
        return Err(Error::DimensionMismatch(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    syevr(a, Some((n - k + 1, n)), true)
}

/// All eigenpairs of a symmetric matrix.
pub fn sym_eig_all(a: ArrayView2<'_, f64>) -> Result<EigPairs> {
    syevr(a, None, true)
}

/// All eigenvalues (ascending) of a symmetric matrix, without vectors.
pub fn sym_eigvals(a: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    Ok(syevr(a, None, false)?.values)
}

fn syevr(a: ArrayView2<'_, f64>, range: Option<(usize, usize)>, vectors: bool) -> Result<EigPairs> {
    init_blas();
    let n = a.nrows() as c_int;
    let mut buf = as_dense_standard(a)?;

    let jobz = if vectors { b'V' } else { b'N' } as c_char;
    let (range_c, il, iu) = match range {
        Some((lo, hi)) => (b'I' as c_char, lo as c_int, hi as c_int),
        None => (b'A' as c_char, 1, n),
    };
    let uplo = b'U' as c_char;
    let lda = n.max(1);
    let vl = 0.0f64;
    let vu = 0.0f64;
    let abstol = f64::MIN_POSITIVE; // most accurate eigenvalues per dsyevr docs
    let n_req = (iu - il + 1) as usize;
    let mut m_found: c_int = 0;
    let mut w = vec![0.0f64; n as usize];
    let ldz = n.max(1);
    let mut z = vec![0.0f64; if vectors { n_req * n as usize } else { 1 }];
    let mut isuppz = vec![0 as c_int; 2 * n_req.max(1)];
    let mut info: c_int = 0;

    // workspace query
    let mut work_query = [0.0f64];
    let mut iwork_query = [0 as c_int];
    let lwork_query: c_int = -1;
    unsafe {
        dsyevr_(
            &jobz,
            &range_c,
            &uplo,
            &n,
            buf.as_mut_ptr(),
            &lda,
            &vl,
            &vu,
            &il,
            &iu,
            &abstol,
            &mut m_found,
            w.as_mut_ptr(),
            z.as_mut_ptr(),
            &ldz,
            isuppz.as_mut_ptr(),
            work_query.as_mut_ptr(),
            &lwork_query,
            iwork_query.as_mut_ptr(),
            &lwork_query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Eigensolver(format!(
            "dsyevr workspace query failed with info = {info}"
        )));
    }
    let lwork = work_query[0] as c_int;
    let liwork = iwork_query[0];
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0 as c_int; liwork as usize];

    unsafe {
        dsyevr_(
            &jobz,
            &range_c,
            &uplo,
            &n,
            buf.as_mut_ptr(),
            &lda,
            &vl,
            &vu,
            &il,
            &iu,
            &abstol,
            &mut m_found,
            w.as_mut_ptr(),
            z.as_mut_ptr(),
            &ldz,
            isuppz.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Eigensolver(format!("dsyevr failed with info = {info}")));
    }
    let m_found = m_found as usize;
    if m_found != n_req {
        return Err(Error::Eigensolver(format!(
            "dsyevr found {m_found} of {n_req} requested eigenvalues"
        )));
    }
    w.truncate(m_found);

    let vec_mat = if vectors {
        // z is column-major n x m_found; that buffer read row-major is (m_found x n)
        // with eigenvector j in row j. Transpose into the (n x m_found) layout.
        z.truncate(m_found * n as usize);
        let rows = Array2::from_shape_vec((m_found, n as usize), z)
            .map_err(|e| Error::Internal(e.to_string()))?;
        rows.t().to_owned()
    } else {
        Array2::zeros((0, 0))
    };
    Ok(EigPairs {
        values: w,
        vectors: vec_mat,
    })
}

/// Symmetric Gram product `X X^T` of a row-major `m x n` matrix, fully
/// symmetrized on output.
pub fn gram(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    init_blas();
    let (m, n) = x.dim();
    let x_std: Vec<f64>;
    let x_slice = match x.as_slice() {
        Some(s) => s,
        None => {
            x_std = x.iter().copied().collect();
            &x_std
        }
    };
    let mut c = vec![0.0f64; m * m];
    // The row-major buffer of X viewed column-major is X^T (n x m), so
    // C := (X^T)^T (X^T) = X X^T with trans = 'T'.
    let uplo = b'U' as c_char;
    let trans = b'T' as c_char;
    let n_c = m as c_int;
    let k_c = n as c_int;
    let alpha = 1.0f64;
    let beta = 0.0f64;
    let lda = n.max(1) as c_int;
    let ldc = m.max(1) as c_int;
    unsafe {
        dsyrk_(
            &uplo,
            &trans,
            &n_c,
            &k_c,
            &alpha,
            x_slice.as_ptr(),
            &lda,
            &beta,
            c.as_mut_ptr(),
            &ldc,
        );
    }
    // column-major upper triangle == row-major lower triangle; mirror it
    let mut q = Array2::from_shape_vec((m, m), c).map_err(|e| Error::Internal(e.to_string()))?;
    for i in 0..m {
        for j in (i + 1)..m {
            let v = q[(j, i)];
            q[(i, j)] = v;
        }
    }
    Ok(q)
}

/// Matrix-vector product `A v` for symmetric `A` (used in residual checks).
pub fn sym_matvec(a: ArrayView2<'_, f64>, v: &Array1<f64>) -> Array1<f64> {
    a.dot(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn diagonal_matrix() {
        let a = arr2(&[[3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]);
        let e = sym_eig_all(a.view()).unwrap();
        assert_eq!(e.values.len(), 3);
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!((e.values[2] - 3.0).abs() < 1e-12);
        // top-1
        let t = sym_eig_top_k(a.view(), 1).unwrap();
        assert!((t.values[0] - 3.0).abs() < 1e-12);
        assert!((t.vectors[(0, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reconstructs_random_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let n = 24;
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let e = sym_eig_all(a.view()).unwrap();
        let lam = Array2::from_diag(&Array1::from(e.values.clone()));
        let recon = e.vectors.dot(&lam).dot(&e.vectors.t());
        let err = (&recon - &a).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(err < 1e-10, "reconstruction error {err}");
    }

    #[test]
    fn gram_matches_naive() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        let x = Array2::from_shape_fn((7, 11), |_| rng.gen_range(-1.0..1.0f64));
        let q = gram(x.view()).unwrap();
        let naive = x.dot(&x.t());
        let err = (&q - &naive).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-12);
        // exact symmetry by construction
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(q[(i, j)], q[(j, i)]);
            }
        }
    }
}
