//! Thin wrappers over the dense/sparse kernels plus a block shift-invert
//! eigensolver shared by the interior and boundary spectral code.

use crate::error::{Error, Result};
use faer::complex_native::c64;
use faer::prelude::*;
use faer::sparse::SparseColMat;
use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn to_c64(z: Complex64) -> c64 {
    c64::new(z.re, z.im)
}

pub fn from_c64(z: c64) -> Complex64 {
    Complex64::new(z.re, z.im)
}

/// Sparse LU of a real square matrix given as triplets (duplicates summed).
pub struct SparseLuReal {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl SparseLuReal {
    pub fn new(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, triplets)
            .map_err(|e| Error::Solve(format!("sparse assembly: {e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::Solve(format!("sparse LU: {e:?}")))?;
        Ok(SparseLuReal { lu, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::<f64>::zeros(self.n, 1);
        for (i, &v) in b.iter().enumerate() {
            rhs[(i, 0)] = v;
        }
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        self.lu.solve(b)
    }
}

/// Sparse LU of a complex square matrix.
pub struct SparseLuComplex {
    lu: faer::sparse::linalg::solvers::Lu<usize, c64>,
    n: usize,
}

impl SparseLuComplex {
    pub fn new(n: usize, triplets: &[(usize, usize, Complex64)]) -> Result<Self> {
        let trip: Vec<(usize, usize, c64)> =
            triplets.iter().map(|&(i, j, v)| (i, j, to_c64(v))).collect();
        let mat = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::Solve(format!("sparse assembly: {e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::Solve(format!("sparse LU: {e:?}")))?;
        Ok(SparseLuComplex { lu, n })
    }

    pub fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut rhs = Mat::<c64>::zeros(self.n, 1);
        for (i, &v) in b.iter().enumerate() {
            rhs[(i, 0)] = to_c64(v);
        }
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| from_c64(x[(i, 0)])).collect()
    }
}

/// Sparse symmetric matrix kept as triplets for cheap matvec.
#[derive(Clone, Debug)]
pub struct SparseSym {
    pub n: usize,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn apply_slice(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for &(i, j, v) in &self.triplets {
            y[i] += v * x[j];
        }
    }

    pub fn apply(&self, x: &Mat<f64>) -> Mat<f64> {
        let mut y = Mat::<f64>::zeros(self.n, x.ncols());
        for &(i, j, v) in &self.triplets {
            for c in 0..x.ncols() {
                y[(i, c)] += v * x[(j, c)];
            }
        }
        y
    }

    pub fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.fill(Complex64::new(0.0, 0.0));
        for &(i, j, v) in &self.triplets {
            y[i] += x[j] * v;
        }
    }
}

/// Symmetric eigendecomposition; eigenvalues ascending with matching columns.
pub fn sym_eigen(a: &Mat<f64>) -> (Vec<f64>, Mat<f64>) {
    let evd = a.selfadjoint_eigendecomposition(faer::Side::Lower);
    let n = a.nrows();
    let vals: Vec<f64> = (0..n).map(|i| evd.s().column_vector()[i]).collect();
    let vecs = evd.u().to_owned();
    (vals, vecs)
}

/// Cholesky solve of an SPD system; errors when not positive definite.
pub fn cholesky_solve(a: &Mat<f64>, rhs: &Mat<f64>) -> Result<Mat<f64>> {
    let ch = a
        .cholesky(faer::Side::Lower)
        .map_err(|_| Error::Solve("matrix not positive definite".into()))?;
    Ok(ch.solve(rhs))
}

/// Thin SVD of a real matrix: returns (U, s, V) with `A = U diag(s) V^T`.
pub fn svd_real(a: &Mat<f64>) -> (Mat<f64>, Vec<f64>, Mat<f64>) {
    let svd = a.svd();
    let r = a.nrows().min(a.ncols());
    let s: Vec<f64> = (0..r).map(|i| svd.s_diagonal()[i]).collect();
    (svd.u().to_owned(), s, svd.v().to_owned())
}

/// Largest singular value of a real matrix.
pub fn spectral_norm_real(a: &Mat<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let svd = a.svd();
    svd.s_diagonal()[0]
}

/// Complex dense matrix in column-major storage with `num_complex` entries.
#[derive(Clone, Debug)]
pub struct CMat {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CMat {
            nrows,
            ncols,
            data: vec![Complex64::new(0.0, 0.0); nrows * ncols],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[j * self.nrows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[j * self.nrows + i] = v;
    }

    pub fn col(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.data.iter().all(|z| z.im.abs() <= tol)
    }

    /// `A x` for a complex vector.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        for j in 0..self.ncols {
            let c = self.col(j);
            let xj = x[j];
            if xj.norm_sqr() == 0.0 {
                continue;
            }
            for i in 0..self.nrows {
                y[i] += c[i] * xj;
            }
        }
        y
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        CMat {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add_scaled(&self, other: &CMat, alpha: f64) -> CMat {
        CMat {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b * alpha)
                .collect(),
        }
    }

    fn to_faer(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                m[(i, j)] = to_c64(self.at(i, j));
            }
        }
        m
    }
}

/// Thin SVD of a complex matrix: `A = U diag(s) V^H`.
pub struct CSvd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn svd_complex(a: &CMat) -> CSvd {
    let m = a.to_faer();
    let svd = m.svd();
    let r = a.nrows.min(a.ncols);
    let s: Vec<f64> = (0..r).map(|i| svd.s_diagonal()[i].re).collect();
    let fu = svd.u();
    let fv = svd.v();
    let mut u = CMat::zeros(a.nrows, r);
    for j in 0..r {
        for i in 0..a.nrows {
            u.set(i, j, from_c64(fu[(i, j)]));
        }
    }
    let mut v = CMat::zeros(a.ncols, r);
    for j in 0..r {
        for i in 0..a.ncols {
            v.set(i, j, from_c64(fv[(i, j)]));
        }
    }
    CSvd { u, s, v }
}

pub fn spectral_norm_complex(a: &CMat) -> f64 {
    if a.nrows == 0 || a.ncols == 0 {
        return 0.0;
    }
    let m = a.to_faer();
    m.svd().s_diagonal()[0].re
}

/// Modified Gram-Schmidt orthonormalization of the columns (in place).
/// Returns the number of kept (numerically independent) columns.
pub fn mgs_orthonormalize(v: &mut Mat<f64>) -> usize {
    let n = v.nrows();
    let k = v.ncols();
    let mut kept = 0;
    for j in 0..k {
        // two MGS passes for stability
        for _ in 0..2 {
            for p in 0..kept {
                let mut dot = 0.0;
                for i in 0..n {
                    dot += v[(i, p)] * v[(i, j)];
                }
                for i in 0..n {
                    let correction = dot * v[(i, p)];
                    v[(i, j)] -= correction;
                }
            }
        }
        let mut norm = 0.0;
        for i in 0..n {
            norm += v[(i, j)] * v[(i, j)];
        }
        let norm = norm.sqrt();
        if norm > 1e-12 {
            for i in 0..n {
                v[(i, j)] /= norm;
            }
            if j != kept {
                for i in 0..n {
                    let t = v[(i, j)];
                    v[(i, kept)] = t;
                }
            }
            kept += 1;
        }
    }
    kept
}

/// One converged eigenpair of a symmetric operator.
#[derive(Clone, Debug)]
pub struct EigPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

/// Block shift-invert subspace iteration for a symmetric operator.
///
/// `apply_inv` applies `(A - shift)^-1` to a block; `apply_a` applies `A`.
/// Returns the `k` eigenpairs nearest `shift`, sorted by `|value - shift|`,
/// each with relative residual `|A v - mu v| <= tol * max(|mu|, 1)`.
pub fn shift_invert_eigs(
    n: usize,
    k: usize,
    shift: f64,
    apply_inv: &dyn Fn(&Mat<f64>) -> Mat<f64>,
    apply_a: &dyn Fn(&Mat<f64>) -> Mat<f64>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<EigPair>> {
    let block = (k + (k / 2).clamp(4, 12)).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Mat::<f64>::zeros(n, block);
    for j in 0..block {
        for i in 0..n {
            v[(i, j)] = rng.gen_range(-1.0..1.0);
        }
    }
    mgs_orthonormalize(&mut v);

    let mut last_residual = f64::INFINITY;
    for _iter in 0..max_iter {
        let w = apply_inv(&v);
        v = w;
        let kept = mgs_orthonormalize(&mut v);
        if kept < block {
            // refill lost directions deterministically
            for j in kept..block {
                for i in 0..n {
                    v[(i, j)] = rng.gen_range(-1.0..1.0);
                }
            }
            mgs_orthonormalize(&mut v);
        }

        // Rayleigh-Ritz with A
        let av = apply_a(&v);
        let mut proj = Mat::<f64>::zeros(block, block);
        for a in 0..block {
            for b in 0..block {
                let mut dot = 0.0;
                for i in 0..n {
                    dot += v[(i, a)] * av[(i, b)];
                }
                proj[(a, b)] = dot;
            }
        }
        // symmetrize to kill roundoff skew
        for a in 0..block {
            for b in (a + 1)..block {
                let s = 0.5 * (proj[(a, b)] + proj[(b, a)]);
                proj[(a, b)] = s;
                proj[(b, a)] = s;
            }
        }
        let (thetas, s) = sym_eigen(&proj);

        // Ritz vectors, ordered by |theta - shift|
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| {
            (thetas[a] - shift)
                .abs()
                .partial_cmp(&(thetas[b] - shift).abs())
                .unwrap()
        });

        let mut pairs = Vec::with_capacity(k);
        let mut worst = 0.0f64;
        for &idx in order.iter().take(k) {
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut acc = 0.0;
                for a in 0..block {
                    acc += v[(i, a)] * s[(a, idx)];
                }
                y[i] = acc;
            }
            let mut ay = vec![0.0; n];
            // apply_a on a single column
            let mut ym = Mat::<f64>::zeros(n, 1);
            for i in 0..n {
                ym[(i, 0)] = y[i];
            }
            let aym = apply_a(&ym);
            for i in 0..n {
                ay[i] = aym[(i, 0)];
            }
            let theta = thetas[idx];
            let mut res = 0.0;
            for i in 0..n {
                let r = ay[i] - theta * y[i];
                res += r * r;
            }
            let res = res.sqrt();
            worst = worst.max(res / theta.abs().max(1.0));
            pairs.push(EigPair {
                value: theta,
                vector: y,
                residual: res,
            });
        }

        if worst <= tol {
            return Ok(pairs);
        }
        last_residual = worst;
    }
    Err(Error::EigNonConvergence {
        iterations: max_iter,
        residual: last_residual,
    })
}

/// Solve a small dense real system by Gaussian elimination with partial pivoting.
pub fn solve_small(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return Err(Error::Solve("singular small system".into()));
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in (col + 1)..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in (col + 1)..n {
            acc -= a[col * n + c] * b[c];
        }
        b[col] = acc / a[col * n + col];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_invert_finds_nearest_diagonal_eigs() {
        // A = diag(1, 4, 9, 16, 25): eigenpairs nearest 10 are 9 and 16.
        let diag = [1.0, 4.0, 9.0, 16.0, 25.0];
        let shift = 10.0;
        let apply_inv = |x: &Mat<f64>| {
            let mut y = x.to_owned();
            for i in 0..5 {
                for c in 0..x.ncols() {
                    y[(i, c)] = x[(i, c)] / (diag[i] - shift);
                }
            }
            y
        };
        let apply_a = |x: &Mat<f64>| {
            let mut y = x.to_owned();
            for i in 0..5 {
                for c in 0..x.ncols() {
                    y[(i, c)] = diag[i] * x[(i, c)];
                }
            }
            y
        };
        let pairs = shift_invert_eigs(5, 2, shift, &apply_inv, &apply_a, 1e-10, 200, 3).unwrap();
        assert!((pairs[0].value - 9.0).abs() < 1e-8);
        assert!((pairs[1].value - 16.0).abs() < 1e-8);
    }

    #[test]
    fn solve_small_roundtrip() {
        let mut a = vec![2.0, 1.0, 0.0, 0.5, 3.0, -1.0, 0.0, 1.0, 4.0];
        let x_true = [1.0, -2.0, 0.5];
        let mut b = vec![
            2.0 * 1.0 + 1.0 * -2.0,
            0.5 - 6.0 - 0.5,
            -2.0 + 2.0,
        ];
        solve_small(&mut a, &mut b, 3).unwrap();
        for i in 0..3 {
            assert!((b[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_svd_reconstructs() {
        let mut a = CMat::zeros(3, 2);
        a.set(0, 0, Complex64::new(1.0, 2.0));
        a.set(1, 1, Complex64::new(0.0, -3.0));
        a.set(2, 0, Complex64::new(0.5, 0.1));
        let svd = svd_complex(&a);
        for i in 0..3 {
            for j in 0..2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..2 {
                    acc += svd.u.at(i, k) * svd.s[k] * svd.v.at(j, k).conj();
                }
                assert!((acc - a.at(i, j)).norm() < 1e-12);
            }
        }
    }
}
