//! Dense symmetric linear algebra at desk scale: row-major storage,
//! Cholesky factorization, triangular solves, matrix-free Lanczos extreme
//! eigenvalues, and a small Jacobi eigensolver used as a test oracle.

use crate::error::{Error, Result};
use crate::par;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Symmetric Toeplitz matrix from its first row.
    pub fn from_toeplitz(first_row: &[f64]) -> Self {
        let n = first_row.len();
        let mut m = DenseMatrix::zeros(n);
        par::for_each_row(&mut m.data, n, |i, row| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = first_row[i.abs_diff(j)];
            }
        });
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = DenseMatrix::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n);
            m.row_mut(i).copy_from_slice(r);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Sum of squared entries, i.e. `tr(A^2)` for symmetric `A`.
    pub fn frob_sq(&self) -> f64 {
        par::sum_chunks(self.n, |rows| {
            rows.map(|i| self.row(i).iter().map(|x| x * x).sum::<f64>())
                .sum()
        })
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &DenseMatrix, s: f64) {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let other_data = &other.data;
        par::for_each_row(&mut self.data, n, |i, row| {
            let orow = &other_data[i * n..(i + 1) * n];
            for (a, b) in row.iter_mut().zip(orow) {
                *a += s * b;
            }
        });
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn transpose_in_place(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                self.data.swap(i * n + j, j * n + i);
            }
        }
    }

    /// Averages the matrix with its transpose.
    pub fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                let a = self.data[i * n + j];
                let b = self.data[j * n + i];
                let m = 0.5 * (a + b);
                self.data[i * n + j] = m;
                self.data[j * n + i] = m;
            }
        }
    }

    /// Worst relative asymmetry `|a_ij - a_ji| / max|a|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        worst / scale
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let n = self.n;
        let data = &self.data;
        let results = par::map_collect(n, |i| dot(&data[i * n..(i + 1) * n], x));
        y.copy_from_slice(&results);
    }

    /// `x' A x` for symmetric `A`, deterministic chunked reduction.
    pub fn quad(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        let n = self.n;
        let data = &self.data;
        par::sum_chunks(n, |rows| {
            rows.map(|i| x[i] * dot(&data[i * n..(i + 1) * n], x))
                .sum()
        })
    }

    /// `z_r' A z_r` for a block of vectors stored as consecutive rows; `A`
    /// streams through cache once for the whole block. Single-threaded by
    /// design -- callers parallelize across independent blocks.
    pub fn quad_block(&self, zs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(zs.len() % n, 0);
        let k = zs.len() / n;
        let mut acc = vec![0.0; k];
        for i in 0..n {
            let row = self.row(i);
            for (a, z) in acc.iter_mut().zip(zs.chunks(n)) {
                *a += z[i] * dot(row, z);
            }
        }
        acc
    }

    /// `tr(A B)` for symmetric matrices: elementwise product sum.
    pub fn trace_product(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        let n = self.n;
        par::sum_chunks(n, |rows| {
            rows.map(|i| dot(self.row(i), other.row(i))).sum()
        })
    }

    /// In-place blocked Cholesky `A = L L'`; on success the lower triangle
    /// holds `L`, the strict upper triangle is zeroed. Returns `log det A`.
    ///
    /// Right-looking with panel width `B`: the trailing update reads the
    /// freshly factored panel columns from a scratch copy, which keeps the
    /// row updates independent and the panel data hot in cache.
    pub fn cholesky_in_place(&mut self) -> Result<f64> {
        const B: usize = 48;
        let n = self.n;
        let mut log_det = 0.0;
        let mut p = 0;
        while p < n {
            let pb = B.min(n - p);
            // factor the diagonal block (columns p..p+pb are fully updated)
            for j in p..p + pb {
                let (head, tail) = self.data.split_at_mut((j + 1) * n);
                let row_j = &mut head[j * n..(j + 1) * n];
                let d = row_j[j] - dot(&row_j[p..j], &row_j[p..j]);
                if !(d > 0.0) {
                    return Err(Error::NotPositiveDefinite { pivot: j });
                }
                let ljj = d.sqrt();
                row_j[j] = ljj;
                log_det += 2.0 * ljj.ln();
                let pivot = &head[j * n + p..j * n + j];
                let inv = 1.0 / ljj;
                // in-panel update of the rows below j inside the block
                let in_block = (p + pb).min(n) - (j + 1);
                for r in 0..in_block {
                    let row = &mut tail[r * n..(r + 1) * n];
                    let s = row[j] - dot(&row[p..j], pivot);
                    row[j] = s * inv;
                }
            }
            let below = p + pb;
            if below < n {
                // panel solve for all rows underneath the block
                let (head, tail) = self.data.split_at_mut(below * n);
                let block_rows = &head[p * n..below * n];
                par::for_each_row_block(tail, n, 8, |_, rows| {
                    for row in rows.chunks_mut(n) {
                        for j in p..below {
                            let pivot = &block_rows[(j - p) * n + p..(j - p) * n + j];
                            let s = row[j] - dot(&row[p..j], pivot);
                            row[j] = s / block_rows[(j - p) * n + j];
                        }
                    }
                });
                // trailing update A[below.., below..] -= P P' from a scratch
                // copy of the panel columns
                let rows_below = n - below;
                let mut panel = vec![0.0; rows_below * pb];
                for (r, prow) in panel.chunks_mut(pb).enumerate() {
                    let src = &tail[r * n + p..r * n + below];
                    prow.copy_from_slice(src);
                }
                let panel_ref = &panel;
                par::for_each_row_block(tail, n, 8, |first, rows| {
                    for (k, row) in rows.chunks_mut(n).enumerate() {
                        let i = first + k;
                        let pi = &panel_ref[i * pb..(i + 1) * pb];
                        for j in below..=(below + i) {
                            let pj = &panel_ref[(j - below) * pb..(j - below + 1) * pb];
                            row[j] -= dot(pi, pj);
                        }
                    }
                });
            }
            p += pb;
        }
        // zero the strict upper triangle
        for i in 0..n {
            for j in (i + 1)..n {
                self.data[i * n + j] = 0.0;
            }
        }
        Ok(log_det)
    }

    /// Replaces `B` (self) by `B L^-T` where `L` is lower triangular: each
    /// row solves `L y = b_row'` by forward substitution. Rows are processed
    /// in blocks so `L` streams through cache once per block.
    pub fn right_solve_lower_transpose(&mut self, l: &DenseMatrix) {
        assert_eq!(self.n, l.n);
        let n = self.n;
        par::for_each_row_block(&mut self.data, n, 12, |_, rows| {
            solve_lower_block(l, rows);
        });
    }

    /// Congruence `W = L^-1 B L^-T` for symmetric `B`, in place.
    pub fn whiten_in_place(&mut self, l: &DenseMatrix) {
        // B L^-T, then transpose (giving L^-1 B), then again L^-T
        self.right_solve_lower_transpose(l);
        self.transpose_in_place();
        self.right_solve_lower_transpose(l);
        self.symmetrize();
    }
}

/// Dot product with four accumulator lanes so the reduction vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert!(a.len() <= b.len());
    let b = &b[..a.len()];
    let mut lanes = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        lanes[0] += x[0] * y[0];
        lanes[1] += x[1] * y[1];
        lanes[2] += x[2] * y[2];
        lanes[3] += x[3] * y[3];
    }
    let mut rest = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        rest += x * y;
    }
    (lanes[0] + lanes[2]) + (lanes[1] + lanes[3]) + rest
}

/// Solves `L v = b` in place (forward substitution).
pub fn forward_substitute(l: &DenseMatrix, v: &mut [f64]) {
    let n = l.n();
    assert_eq!(v.len(), n);
    for i in 0..n {
        let row = l.row(i);
        let s = v[i] - dot_split(&row[..i], &v[..i]);
        v[i] = s / row[i];
    }
}

/// Forward substitution for several right-hand sides stored as consecutive
/// length-n rows; `L` is walked once for the whole block.
pub fn solve_lower_block(l: &DenseMatrix, vs: &mut [f64]) {
    let n = l.n();
    assert_eq!(vs.len() % n, 0);
    for i in 0..n {
        let row = l.row(i);
        let inv = 1.0 / row[i];
        for v in vs.chunks_mut(n) {
            let s = v[i] - dot(&row[..i], &v[..i]);
            v[i] = s * inv;
        }
    }
}

/// `x_r = L z_r` in place for a block of vectors (descending index order, so
/// each entry reads only not-yet-overwritten values).
pub fn multiply_lower_block(l: &DenseMatrix, zs: &mut [f64]) {
    let n = l.n();
    assert_eq!(zs.len() % n, 0);
    for i in (0..n).rev() {
        let row = &l.row(i)[..=i];
        for z in zs.chunks_mut(n) {
            z[i] = dot(row, &z[..=i]);
        }
    }
}

/// Solves `L' v = b` in place (back substitution against the transpose).
pub fn back_substitute_transpose(l: &DenseMatrix, v: &mut [f64]) {
    let n = l.n();
    assert_eq!(v.len(), n);
    for i in (0..n).rev() {
        let mut s = v[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * v[k];
        }
        v[i] = s / l.get(i, i);
    }
}

#[inline]
fn dot_split(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b)
}

/// Largest-magnitude eigenvalue of a symmetric operator via Lanczos with
/// full reorthogonalization. Returns the estimate and a convergence flag.
pub fn lanczos_extreme<F>(apply: F, n: usize, tol: f64, max_iter: usize) -> (f64, bool)
where
    F: Fn(&[f64], &mut [f64]),
{
    if n == 0 {
        return (0.0, true);
    }
    if n == 1 {
        let mut y = [0.0];
        apply(&[1.0], &mut y);
        return (y[0].abs(), true);
    }
    let m_max = max_iter.min(n);
    // deterministic pseudo-random start vector
    let mut v = vec![0.0; n];
    let mut state = 0x9e37_79b9_7f4a_7c15u64 ^ (n as u64);
    for x in v.iter_mut() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        *x = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
    }
    normalize(&mut v);

    let mut basis: Vec<Vec<f64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut prev_est = f64::NAN;
    let mut stable = 0usize;

    for it in 0..m_max {
        apply(&basis[it], &mut w);
        let alpha = dot_split(&basis[it], &w);
        alphas.push(alpha);
        for (wi, vi) in w.iter_mut().zip(&basis[it]) {
            *wi -= alpha * vi;
        }
        if it > 0 {
            let beta_prev = betas[it - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[it - 1]) {
                *wi -= beta_prev * vi;
            }
        }
        // full reorthogonalization keeps the Ritz values clean
        for b in &basis {
            let c = dot_split(b, &w);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= c * bi;
            }
        }
        let beta = dot_split(&w, &w).sqrt();

        let est = tridiag_extreme_abs(&alphas, &betas);
        if est.is_finite() && prev_est.is_finite() {
            if (est - prev_est).abs() <= tol * est.abs().max(f64::MIN_POSITIVE) {
                stable += 1;
            } else {
                stable = 0;
            }
        }
        prev_est = est;
        if stable >= 3 || beta <= tol * est.abs().max(f64::MIN_POSITIVE) {
            return (est, true);
        }
        if it + 1 == m_max {
            break;
        }
        betas.push(beta);
        let mut next = w.clone();
        for x in next.iter_mut() {
            *x /= beta;
        }
        basis.push(next);
    }
    (tridiag_extreme_abs(&alphas, &betas), false)
}

/// Largest |eigenvalue| of the symmetric tridiagonal (alphas, betas) via
/// bisection on Sturm sequence counts.
fn tridiag_extreme_abs(alphas: &[f64], betas: &[f64]) -> f64 {
    let m = alphas.len();
    if m == 0 {
        return 0.0;
    }
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let b_left = if i > 0 { betas[i - 1].abs() } else { 0.0 };
        let b_right = if i < m - 1 { betas[i].abs() } else { 0.0 };
        lo = lo.min(alphas[i] - b_left - b_right);
        hi = hi.max(alphas[i] + b_left + b_right);
    }
    let count_below = |x: f64| -> usize {
        // number of eigenvalues < x via the LDL' sign recurrence
        let mut count = 0;
        let mut d = alphas[0] - x;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..m {
            let b2 = betas[i - 1] * betas[i - 1];
            let denom = if d == 0.0 { 1e-300 } else { d };
            d = alphas[i] - x - b2 / denom;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let bisect = |mut a: f64, mut b: f64, target: usize| -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if count_below(mid) > target {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    let largest = bisect(lo - 1.0, hi + 1.0, m - 1);
    let smallest = bisect(lo - 1.0, hi + 1.0, 0);
    largest.abs().max(smallest.abs())
}

fn normalize(v: &mut [f64]) {
    let nrm = dot_split(v, v).sqrt();
    for x in v.iter_mut() {
        *x /= nrm;
    }
}

/// Eigenvalues (and optionally vectors) of a small symmetric matrix by
/// cyclic Jacobi rotations. Test oracle; cost is O(n^3) per sweep.
#[cfg(test)]
pub(crate) fn jacobi_eigen(a: &DenseMatrix, want_vectors: bool) -> (Vec<f64>, Option<DenseMatrix>) {
    let n = a.n();
    let mut m = a.clone();
    let mut v = if want_vectors {
        Some(DenseMatrix::identity(n))
    } else {
        None
    };
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m.get(i, j).abs());
            }
        }
        let scale = (0..n).map(|i| m.get(i, i).abs()).fold(off, f64::max);
        if off <= 1e-15 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                if let Some(vm) = v.as_mut() {
                    for k in 0..n {
                        let vkp = vm.get(k, p);
                        let vkq = vm.get(k, q);
                        vm.set(k, p, c * vkp - s * vkq);
                        vm.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    if v.is_none() {
        eig.sort_by(f64::total_cmp);
    }
    (eig, v)
}

/// 3x3 helpers for the triangular score transform.
pub mod mat3 {
    /// `C = A B`.
    pub fn mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    }

    /// `y = A x`.
    pub fn apply(a: &[[f64; 3]; 3], x: &[f64; 3]) -> [f64; 3] {
        let mut y = [0.0; 3];
        for i in 0..3 {
            y[i] = a[i][0] * x[0] + a[i][1] * x[1] + a[i][2] * x[2];
        }
        y
    }

    pub fn transpose(a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut t = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                t[i][j] = a[j][i];
            }
        }
        t
    }

    /// Inverse of a unit lower-triangular 3x3 matrix, closed form.
    pub fn inv_unit_lower(a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let l21 = a[1][0];
        let l31 = a[2][0];
        let l32 = a[2][1];
        [
            [1.0, 0.0, 0.0],
            [-l21, 1.0, 0.0],
            [l21 * l32 - l31, -l32, 1.0],
        ]
    }
}
