//! Sparse symmetric solvers for the constrained stiffness system.
//!
//! The default path is a skyline (variable-band) Cholesky factorization,
//! which is exact and bit-deterministic; natural node ordering keeps the
//! profile narrow on the structured meshes this crate produces. A Jacobi
//! preconditioned conjugate-gradient solver is available as a low-memory
//! fallback.

use crate::error::{Error, Result};

/// Compressed sparse row matrix; both triangles of a symmetric matrix are
/// stored so that matrix-vector products stay simple.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from unsorted triplets, accumulating duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last = None;
        for &(r, c, v) in &triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            if let Ok(k) = cols.binary_search(&r) {
                d[r] = vals[k];
            }
        }
        d
    }
}

/// Skyline Cholesky factor `K = L L^T` of a symmetric positive definite
/// matrix; row `i` stores columns `start[i]..=i`.
pub struct SkylineCholesky {
    n: usize,
    start: Vec<usize>,
    ptr: Vec<usize>,
    vals: Vec<f64>,
}

impl SkylineCholesky {
    /// Factorize the lower triangle of `a`. Fails with `SingularSystem` if a
    /// pivot is not strictly positive.
    pub fn factorize(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut start = vec![0usize; n];
        for r in 0..n {
            let (cols, _) = a.row(r);
            start[r] = cols.first().copied().unwrap_or(r).min(r);
        }
        let mut ptr = vec![0usize; n + 1];
        for r in 0..n {
            ptr[r + 1] = ptr[r] + (r - start[r] + 1);
        }
        let mut vals = vec![0.0f64; ptr[n]];
        for r in 0..n {
            let (cols, row_vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(row_vals) {
                if c <= r {
                    vals[ptr[r] + (c - start[r])] = v;
                }
            }
        }

        for i in 0..n {
            let (done, rest) = vals.split_at_mut(ptr[i]);
            let row_i = &mut rest[..ptr[i + 1] - ptr[i]];
            let si = start[i];
            // Off-diagonal entries of row i.
            for jj in 0..row_i.len() - 1 {
                let j = si + jj;
                let sj = start[j];
                let k0 = si.max(sj);
                let off_i = k0 - si;
                let off_j = k0 - sj;
                let len = j - k0;
                let row_j = &done[ptr[j]..ptr[j + 1]];
                let dot: f64 = row_i[off_i..off_i + len]
                    .iter()
                    .zip(&row_j[off_j..off_j + len])
                    .map(|(a, b)| a * b)
                    .sum();
                let pivot = row_j[j - sj];
                row_i[jj] = (row_i[jj] - dot) / pivot;
            }
            let jj = row_i.len() - 1;
            let sq: f64 = row_i[..jj].iter().map(|v| v * v).sum();
            let d = row_i[jj] - sq;
            if !(d > 0.0) {
                return Err(Error::SingularSystem(format!(
                    "non-positive pivot {d:e} at equation {i}"
                )));
            }
            row_i[jj] = d.sqrt();
        }

        Ok(SkylineCholesky {
            n,
            start,
            ptr,
            vals,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        // Forward: L y = b.
        for i in 0..self.n {
            let si = self.start[i];
            let row = &self.vals[self.ptr[i]..self.ptr[i + 1]];
            let len = i - si;
            let dot: f64 = row[..len]
                .iter()
                .zip(&x[si..i])
                .map(|(a, b)| a * b)
                .sum();
            x[i] = (x[i] - dot) / row[len];
        }
        // Backward: L^T x = y.
        for i in (0..self.n).rev() {
            let si = self.start[i];
            let row = &self.vals[self.ptr[i]..self.ptr[i + 1]];
            let len = i - si;
            x[i] /= row[len];
            let xi = x[i];
            for (k, &l) in row[..len].iter().enumerate() {
                x[si + k] -= l * xi;
            }
        }
        x
    }
}

/// Jacobi-preconditioned conjugate gradients on the true residual.
///
/// Returns the solution and the iteration count; convergence is declared
/// when `||b - K x|| <= tol * ||b||`.
pub fn pcg_jacobi(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let norm_b = norm(b);
    if norm_b == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| {
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for iter in 1..=max_iters {
        a.matvec(&p, &mut ap);
        let denom = dot(&p, &ap);
        if denom <= 0.0 {
            return Err(Error::SingularSystem(format!(
                "conjugate gradients hit non-positive curvature {denom:e}"
            )));
        }
        let alpha = rz / denom;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * norm_b {
            return Ok((x, iter));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    Err(Error::NonConvergence {
        iters: max_iters,
        tol,
        residual: norm(&r) / norm_b,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
