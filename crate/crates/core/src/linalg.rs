//! Dense LU with partial pivoting for the small element systems, and a
//! lower-triangle CSR matrix with preconditioned conjugate gradients for the
//! global skeleton system.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape mismatch");
        DenseMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        DenseMatrix { rows: rows.len(), cols, data }
    }

    pub fn column(values: &[f64]) -> Self {
        DenseMatrix { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out.row_mut(i).iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `selfᵀ x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate().take(self.rows) {
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &DenseMatrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<LuFactors> {
        if self.rows != self.cols {
            return Err(Error::invalid("LU of a non-square matrix"));
        }
        let n = self.rows;
        let scale = self.max_abs();
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > 1e-14 * scale) {
                return Err(Error::SingularMatrix { column: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let inv = 1.0 / a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] * inv;
                a[i * n + k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= l * a[k * n + j];
                    }
                }
            }
        }
        Ok(LuFactors { n, lu: a, perm })
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Packed `PA = LU` factors.
#[derive(Clone, Debug)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        x
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
    }

    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(b.rows(), self.n);
        let mut out = DenseMatrix::zeros(self.n, b.cols());
        let mut col = vec![0.0; self.n];
        let mut x = vec![0.0; self.n];
        for j in 0..b.cols() {
            for i in 0..self.n {
                col[i] = b[(i, j)];
            }
            self.solve_into(&col, &mut x);
            for i in 0..self.n {
                out[(i, j)] = x[i];
            }
        }
        out
    }
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn dense_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::invalid("right-hand side has the wrong number of rows"));
    }
    Ok(a.lu()?.solve_matrix(b))
}

/// Symmetric sparse matrix stored as the CSR lower triangle (diagonal
/// included, columns sorted within a row).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymmetric {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    // both triangles, for a gather-only matvec
    full_ptr: Vec<usize>,
    full_cols: Vec<u32>,
    full_vals: Vec<f64>,
}

impl SparseSymmetric {
    /// Sums duplicate `(i, j, v)` entries. Entries above the diagonal are
    /// mirrored into the lower triangle, so callers may pass either half but
    /// not both.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; dim + 1];
        for &(i, j, _) in triplets {
            counts[i.max(j) + 1] += 1;
        }
        for r in 0..dim {
            counts[r + 1] += counts[r];
        }
        let mut fill = counts.clone();
        let mut tmp: Vec<(usize, f64)> = vec![(0, 0.0); triplets.len()];
        for &(i, j, v) in triplets {
            let (r, c) = (i.max(j), i.min(j));
            tmp[fill[r]] = (c, v);
            fill[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..dim {
            let row = &mut tmp[counts[r]..counts[r + 1]];
            row.sort_unstable_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(c, v) in row.iter() {
                if c == last {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = c;
                }
            }
            row_ptr.push(cols.len());
        }
        let mut full_ptr = vec![0usize; dim + 1];
        for r in 0..dim {
            for &c in &cols[row_ptr[r]..row_ptr[r + 1]] {
                full_ptr[r + 1] += 1;
                if c != r {
                    full_ptr[c + 1] += 1;
                }
            }
        }
        for r in 0..dim {
            full_ptr[r + 1] += full_ptr[r];
        }
        let nnz = full_ptr[dim];
        let mut full_cols = vec![0u32; nnz];
        let mut full_vals = vec![0.0; nnz];
        let mut fill = full_ptr.clone();
        // row-major sweep over the lower triangle keeps every full row sorted
        for r in 0..dim {
            for idx in row_ptr[r]..row_ptr[r + 1] {
                let (c, v) = (cols[idx], vals[idx]);
                full_cols[fill[r]] = c as u32;
                full_vals[fill[r]] = v;
                fill[r] += 1;
                if c != r {
                    full_cols[fill[c]] = r as u32;
                    full_vals[fill[c]] = v;
                    fill[c] += 1;
                }
            }
        }
        SparseSymmetric { dim, row_ptr, cols, vals, full_ptr, full_cols, full_vals }
    }

    pub fn from_dense_lower(a: &DenseMatrix) -> Self {
        let mut t = Vec::new();
        for i in 0..a.rows() {
            for j in 0..=i {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.rows(), &t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored (lower-triangle) nonzeros.
    pub fn nnz_lower(&self) -> usize {
        self.vals.len()
    }

    /// Entry `(i, j)` of the full symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = (i.max(j), i.min(j));
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(pos) => self.vals[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[idx];
                d[(r, c)] = self.vals[idx];
                d[(c, r)] = self.vals[idx];
            }
        }
        d
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let x = &x[..self.dim];
        for (r, yr) in y[..self.dim].iter_mut().enumerate() {
            let range = self.full_ptr[r]..self.full_ptr[r + 1];
            *yr = self.full_cols[range.clone()]
                .iter()
                .zip(&self.full_vals[range])
                .map(|(&c, v)| v * x[c as usize])
                .sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    /// `|A| |x|`, entrywise absolute values.
    pub fn abs_matvec_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.dim {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                let (c, v) = (self.cols[idx], libm::fabs(self.vals[idx]));
                y[r] += v * libm::fabs(x[c]);
                if c != r {
                    y[c] += v * libm::fabs(x[r]);
                }
            }
        }
    }

    /// Longest row of the full (mirrored) matrix.
    pub fn max_row_len(&self) -> usize {
        self.full_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preconditioner {
    None,
    Jacobi,
    /// Inverts the diagonal blocks of the given size (one block per face).
    BlockJacobi(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    /// Stop when `‖b − A x‖₂ <= tol · ‖b‖₂`.
    pub tol: f64,
    /// Defaults to `50 √dim`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions { tol: 1e-12, max_iter: None, preconditioner: Preconditioner::Jacobi }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// True relative residual `‖b − A x‖ / ‖b‖` at exit.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator given as a closure `apply(x, y)` computing `y = A x`, with
/// `precond(r, z)` computing `z = M⁻¹ r`.
///
/// Iterates on the recursive residual and re-checks the true residual on
/// convergence, restarting (at most a few times) if they have drifted apart.
/// `floor(x)` is an absolute residual norm below which `b − A x` cannot be
/// resolved in floating point; a true residual under it is accepted even if
/// `tol` is out of reach. Pass `|_| 0.0` to disable.
pub fn pcg<A, P, F>(
    mut apply: A,
    mut precond: P,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    mut floor: F,
) -> Result<(Vec<f64>, CgReport)>
where
    A: FnMut(&[f64], &mut [f64]) -> Result<()>,
    P: FnMut(&[f64], &mut [f64]),
    F: FnMut(&[f64]) -> f64,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], CgReport { iterations: 0, residual: 0.0 }));
    }
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let true_residual = |x: &[f64], r: &mut [f64], apply: &mut A| -> Result<f64> {
        apply(x, r)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        Ok(norm(r) / bnorm)
    };

    let mut resolved = |x: &[f64], rel: f64| rel <= tol || rel * bnorm <= floor(x);

    for _restart in 0..4 {
        let mut rel = true_residual(&x, &mut r, &mut apply)?;
        if resolved(&x, rel) {
            return Ok((x, CgReport { iterations, residual: rel }));
        }
        precond(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            apply(&p, &mut ap)?;
            let curvature = dot(&p, &ap);
            if !(curvature > 0.0) {
                return Err(Error::NotSpd { iteration: iterations, curvature });
            }
            let alpha = rz / curvature;
            let mut rr = 0.0;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
                rr += r[i] * r[i];
            }
            iterations += 1;
            rel = libm::sqrt(rr) / bnorm;
            if rel <= tol {
                break;
            }
            precond(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if iterations >= max_iter {
            let rel = true_residual(&x, &mut r, &mut apply)?;
            if resolved(&x, rel) {
                return Ok((x, CgReport { iterations, residual: rel }));
            }
            return Err(Error::IterativeFailure { iterations, residual: rel });
        }
    }
    let rel = true_residual(&x, &mut r, &mut apply)?;
    if resolved(&x, rel) {
        Ok((x, CgReport { iterations, residual: rel }))
    } else {
        Err(Error::IterativeFailure { iterations, residual: rel })
    }
}

/// Solves `A x = b` for SPD `A` by preconditioned conjugate gradients.
pub fn spd_solve(a: &SparseSymmetric, b: &[f64], opts: &CgOptions) -> Result<(Vec<f64>, CgReport)> {
    spd_solve_from(a, b, None, opts)
}

/// [`spd_solve`] with an initial guess.
pub fn spd_solve_from(
    a: &SparseSymmetric,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &CgOptions,
) -> Result<(Vec<f64>, CgReport)> {
    if !(opts.tol > 0.0 && opts.tol <= 1e-6) {
        return Err(Error::invalid("CG tolerance must lie in (0, 1e-6]"));
    }
    if b.len() != a.dim() {
        return Err(Error::invalid("right-hand side length differs from matrix dimension"));
    }
    let dim = a.dim();
    let max_iter = opts
        .max_iter
        .unwrap_or_else(|| ((50.0 * libm::sqrt(dim as f64)) as usize).max(50));
    let precond = build_preconditioner(a, opts.preconditioner)?;
    // rounding bound of evaluating b − A x: (row length + 1) ε (|A||x| + |b|)
    let c = 4.0 * (a.max_row_len() + 1) as f64 * f64::EPSILON;
    let mut abs = vec![0.0; dim];
    pcg(
        |x, y| {
            a.matvec_into(x, y);
            Ok(())
        },
        |r, z| precond.apply(r, z),
        b,
        x0,
        opts.tol,
        max_iter,
        |x| {
            a.abs_matvec_into(x, &mut abs);
            c * libm::sqrt(abs.iter().zip(b).map(|(v, bi)| (v + libm::fabs(*bi)) * (v + libm::fabs(*bi))).sum::<f64>())
        },
    )
}

enum PrecondData {
    Identity,
    Diagonal(Vec<f64>),
    Blocks { size: usize, inverses: Vec<f64> },
}

impl PrecondData {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            PrecondData::Identity => z.copy_from_slice(r),
            PrecondData::Diagonal(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            PrecondData::Blocks { size, inverses } => {
                let s = *size;
                for (b, (zb, rb)) in z.chunks_mut(s).zip(r.chunks(s)).enumerate() {
                    let inv = &inverses[b * s * s..(b + 1) * s * s];
                    for i in 0..s {
                        zb[i] = (0..s).map(|j| inv[i * s + j] * rb[j]).sum();
                    }
                }
            }
        }
    }
}

fn build_preconditioner(a: &SparseSymmetric, kind: Preconditioner) -> Result<PrecondData> {
    match kind {
        Preconditioner::None => Ok(PrecondData::Identity),
        Preconditioner::Jacobi => {
            let d = a.diagonal();
            if let Some(i) = d.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::NotSpd { iteration: 0, curvature: d[i] });
            }
            Ok(PrecondData::Diagonal(d.iter().map(|v| 1.0 / v).collect()))
        }
        Preconditioner::BlockJacobi(size) => {
            if size == 0 || a.dim() % size != 0 {
                return Err(Error::invalid("block size must divide the matrix dimension"));
            }
            let mut inverses = Vec::with_capacity(a.dim() * size);
            for b in 0..a.dim() / size {
                let mut block = DenseMatrix::zeros(size, size);
                for i in 0..size {
                    for j in 0..size {
                        block[(i, j)] = a.get(b * size + i, b * size + j);
                    }
                }
                let inv = dense_solve(&block, &DenseMatrix::identity(size))?;
                inverses.extend_from_slice(inv.as_slice());
            }
            Ok(PrecondData::Blocks { size, inverses })
        }
    }
}
