//! Small dense linear algebra: symmetric eigenvalues and singular values by
//! Jacobi rotations. Matrices here are at most a few dozen rows, so the
//! cubic-per-sweep cost is irrelevant and Jacobi's accuracy is welcome.

// Rotations index two columns at once; iterator forms obscure them.
#![allow(clippy::needless_range_loop)]

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Principal submatrix on the index set `idx`.
    pub fn principal(&self, idx: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m.set(a, b, self.get(i, j));
            }
        }
        m
    }
}

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
/// Only the upper triangle is read after symmetrisation.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    assert_eq!(m.rows, m.cols, "square matrix required");
    let n = m.rows;
    let mut a = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, s);
            a.set(j, i, s);
        }
    }
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        let diag: f64 = (0..n).map(|i| a.get(i, i) * a.get(i, i)).sum();
        if off <= 1e-32 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Singular values in descending order (one-sided Hestenes Jacobi).
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    // Work on the orientation with fewer columns.
    let a = if m.cols > m.rows { m.transpose() } else { m.clone() };
    let (rows, cols) = (a.rows, a.cols);
    let mut colv: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| a.get(i, j)).collect()).collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    alpha += colv[p][i] * colv[p][i];
                    beta += colv[q][i] * colv[q][i];
                    gamma += colv[p][i] * colv[q][i];
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let x = colv[p][i];
                    let y = colv[q][i];
                    colv[p][i] = c * x - s * y;
                    colv[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = colv.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Numerical rank: singular values above `tol · max(σ_max, 1)`.
pub fn numerical_rank(m: &Matrix, tol: f64) -> usize {
    if m.rows == 0 || m.cols == 0 {
        return 0;
    }
    let sv = singular_values(m);
    let cut = tol * sv.first().copied().unwrap_or(0.0).max(1.0);
    sv.iter().filter(|&&s| s > cut).count()
}

/// Largest `k` such that some `k × k` principal submatrix is nonsingular
/// (smallest |eigenvalue| above the tolerance). For PSD matrices this
/// equals the rank.
pub fn max_nonsingular_principal(m: &Matrix, tol: f64) -> (usize, Vec<usize>) {
    let n = m.rows;
    let scale = m.max_abs().max(1.0);
    let mut best: (usize, Vec<usize>) = (0, Vec::new());
    // Subsets in order of decreasing size; n is small (enumeration is 2^n).
    for mask in 1u64..(1u64 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if idx.len() <= best.0 {
            continue;
        }
        let ev = symmetric_eigenvalues(&m.principal(&idx));
        let min_abs = ev.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        if min_abs > tol * scale {
            best = (idx.len(), idx);
        }
    }
    best
}

/// Least-squares solution of `A x ≈ y` by Householder QR on
/// column-normalised `A`; `None` if `A` is rank deficient.
pub fn least_squares(a: &Matrix, y: &[f64]) -> Option<Vec<f64>> {
    let (m, n) = (a.rows, a.cols);
    assert_eq!(y.len(), m);
    if m < n {
        return None;
    }
    let norms: Vec<f64> = (0..n).map(|j| (0..m).map(|i| a.get(i, j).powi(2)).sum::<f64>().sqrt()).collect();
    if norms.contains(&0.0) {
        return None;
    }
    let mut r = Matrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            r.set(i, j, a.get(i, j) / norms[j]);
        }
    }
    let mut b = y.to_vec();
    for k in 0..n {
        let alpha = {
            let norm = (k..m).map(|i| r.get(i, k).powi(2)).sum::<f64>().sqrt();
            if r.get(k, k) > 0.0 { -norm } else { norm }
        };
        if alpha == 0.0 {
            return None;
        }
        let mut v: Vec<f64> = (k..m).map(|i| r.get(i, k)).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * r.get(i, j)).sum();
            for i in k..m {
                let nv = r.get(i, j) - 2.0 * dot / vv * v[i - k];
                r.set(i, j, nv);
            }
        }
        let dot: f64 = (k..m).map(|i| v[i - k] * b[i]).sum();
        for i in k..m {
            b[i] -= 2.0 * dot / vv * v[i - k];
        }
    }
    let diag_max = (0..n).fold(0.0f64, |acc, k| acc.max(r.get(k, k).abs()));
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let rkk = r.get(k, k);
        if rkk.abs() <= 1e-13 * diag_max {
            return None;
        }
        let s: f64 = ((k + 1)..n).map(|j| r.get(k, j) * x[j]).sum();
        x[k] = (b[k] - s) / rkk;
    }
    Some(x.iter().zip(&norms).map(|(v, c)| v / c).collect())
}
