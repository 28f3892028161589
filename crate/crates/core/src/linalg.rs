//! Small dense linear algebra used by the solvers.
//!
//! Everything here is deterministic: fixed pivoting rules, fixed loop order,
//! no randomized algorithms. Problem sizes are desk scale (a handful of
//! assets and outcomes), so plain dense O(n^3) routines are the right tool.

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
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

    /// A * x for a column vector x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self.get(i, j) * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// A^T * x.
    pub fn mul_vec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                y[j] += self.get(i, j) * x[i];
            }
        }
        y
    }

    /// A^T * A (Gram matrix of the columns).
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for j in 0..self.cols {
            for k in j..self.cols {
                let mut acc = 0.0;
                for i in 0..self.rows {
                    acc += self.get(i, j) * self.get(i, k);
                }
                g.set(j, k, acc);
                g.set(k, j, acc);
            }
        }
        g
    }
}

/// LU factorization with partial pivoting, stored row-permuted in place.
/// Factor once, then solve A x = b and A^T x = b any number of times.
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    /// Returns `None` when the matrix is singular to working precision.
    pub fn new(a: &Matrix) -> Option<Lu> {
        let n = a.rows();
        assert_eq!(a.cols(), n, "Lu expects a square matrix");
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // partial pivot: largest magnitude, lowest row index on ties
            let mut piv = k;
            let mut best = lu.get(perm[k], k).abs();
            for i in k + 1..n {
                let v = lu.get(perm[i], k).abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < 1e-14 {
                return None;
            }
            perm.swap(k, piv);
            let pk = perm[k];
            let diag = lu.get(pk, k);
            for i in k + 1..n {
                let pi = perm[i];
                let factor = lu.get(pi, k) / diag;
                lu.set(pi, k, factor);
                for j in k + 1..n {
                    let v = lu.get(pi, j) - factor * lu.get(pk, j);
                    lu.set(pi, j, v);
                }
            }
        }
        Some(Lu { lu, perm })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(b.len(), n);
        // L y = P b (unit lower triangle)
        let mut y = vec![0.0; n];
        for k in 0..n {
            let pk = self.perm[k];
            let mut acc = b[pk];
            for j in 0..k {
                acc -= self.lu.get(pk, j) * y[j];
            }
            y[k] = acc;
        }
        // U x = y
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let pk = self.perm[k];
            let mut acc = y[k];
            for j in k + 1..n {
                acc -= self.lu.get(pk, j) * x[j];
            }
            x[k] = acc / self.lu.get(pk, k);
        }
        x
    }

    /// Solves A^T x = b. With P A = L U this is U^T z = b, L^T w = z,
    /// x = P^T w.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(b.len(), n);
        let mut z = vec![0.0; n];
        for k in 0..n {
            let mut acc = b[k];
            for j in 0..k {
                acc -= self.lu.get(self.perm[j], k) * z[j];
            }
            z[k] = acc / self.lu.get(self.perm[k], k);
        }
        let mut w = vec![0.0; n];
        for k in (0..n).rev() {
            let mut acc = z[k];
            for j in k + 1..n {
                acc -= self.lu.get(self.perm[j], k) * w[j];
            }
            w[k] = acc;
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.perm[k]] = w[k];
        }
        x
    }
}

/// Solves A x = b by LU with partial pivoting. Returns `None` when A is
/// singular to working precision.
pub fn solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    Lu::new(a).map(|lu| lu.solve(b))
}

/// Least-squares solution of min ||A x - b|| via Householder QR with column
/// pivoting. Rank-deficient systems get the basic solution (free variables
/// pinned to zero), which is all the callers need: they test the residual.
pub struct Lstsq {
    pub solution: Vec<f64>,
    pub residual: Vec<f64>,
    pub rank: usize,
}

pub fn lstsq(a: &Matrix, b: &[f64]) -> Lstsq {
    let m = a.rows();
    let n = a.cols();
    assert_eq!(b.len(), m);
    let mut r = a.clone();
    let mut qtb: Vec<f64> = b.to_vec();
    let mut col_perm: Vec<usize> = (0..n).collect();

    let max_norm: f64 = (0..n)
        .map(|j| (0..m).map(|i| a.get(i, j).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let tol = 1e-12 * max_norm.max(1.0);

    let kmax = m.min(n);
    let mut rank = 0;
    for k in 0..kmax {
        // column pivot: largest remaining norm, lowest index on ties
        let mut best_j = k;
        let mut best_norm = -1.0;
        for j in k..n {
            let nj: f64 = (k..m).map(|i| r.get(i, j).powi(2)).sum::<f64>().sqrt();
            if nj > best_norm + 1e-300 {
                best_norm = nj;
                best_j = j;
            }
        }
        if best_norm <= tol {
            break;
        }
        if best_j != k {
            for i in 0..m {
                let t = r.get(i, k);
                r.set(i, k, r.get(i, best_j));
                r.set(i, best_j, t);
            }
            col_perm.swap(k, best_j);
        }
        // Householder reflector for column k
        let alpha: f64 = {
            let nrm: f64 = (k..m).map(|i| r.get(i, k).powi(2)).sum::<f64>().sqrt();
            if r.get(k, k) >= 0.0 {
                -nrm
            } else {
                nrm
            }
        };
        if alpha.abs() <= tol {
            break;
        }
        let mut v = vec![0.0; m];
        for i in k..m {
            v[i] = r.get(i, k);
        }
        v[k] -= alpha;
        let vnorm2: f64 = v[k..].iter().map(|x| x * x).sum();
        if vnorm2 < 1e-300 {
            break;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i] * r.get(i, j)).sum();
            let scale = 2.0 * dot / vnorm2;
            for i in k..m {
                let val = r.get(i, j) - scale * v[i];
                r.set(i, j, val);
            }
        }
        let dot: f64 = (k..m).map(|i| v[i] * qtb[i]).sum();
        let scale = 2.0 * dot / vnorm2;
        for i in k..m {
            qtb[i] -= scale * v[i];
        }
        r.set(k, k, alpha);
        for i in k + 1..m {
            r.set(i, k, 0.0);
        }
        rank = k + 1;
    }

    // back substitution on the leading rank x rank block
    let mut y = vec![0.0; n];
    for k in (0..rank).rev() {
        let mut acc = qtb[k];
        for j in k + 1..rank {
            acc -= r.get(k, j) * y[j];
        }
        y[k] = acc / r.get(k, k);
    }
    let mut solution = vec![0.0; n];
    for k in 0..n {
        solution[col_perm[k]] = y[k];
    }
    let ax = a.mul_vec(&solution);
    let residual: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    Lstsq {
        solution,
        residual,
        rank,
    }
}

/// Basis of the null space of A, from the reduced row echelon form.
/// Each basis vector has one free variable set to 1 and the rest solved.
pub fn null_space(a: &Matrix, tol_scale: f64) -> Vec<Vec<f64>> {
    let m = a.rows();
    let n = a.cols();
    let mut r = a.clone();
    let max_abs = r.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = tol_scale * max_abs.max(1.0);

    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row >= m {
            break;
        }
        let mut piv = row;
        let mut best = r.get(row, col).abs();
        for i in row + 1..m {
            let v = r.get(i, col).abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best <= tol {
            continue;
        }
        if piv != row {
            for j in 0..n {
                let t = r.get(row, j);
                r.set(row, j, r.get(piv, j));
                r.set(piv, j, t);
            }
        }
        let d = r.get(row, col);
        for j in 0..n {
            let v = r.get(row, j) / d;
            r.set(row, j, v);
        }
        for i in 0..m {
            if i != row {
                let f = r.get(i, col);
                if f != 0.0 {
                    for j in 0..n {
                        let v = r.get(i, j) - f * r.get(row, j);
                        r.set(i, j, v);
                    }
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }

    let mut basis = Vec::new();
    let pivot_set: Vec<bool> = {
        let mut s = vec![false; n];
        for &c in &pivot_cols {
            s[c] = true;
        }
        s
    };
    for free in 0..n {
        if pivot_set[free] {
            continue;
        }
        let mut v = vec![0.0; n];
        v[free] = 1.0;
        for (ri, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -r.get(ri, free);
        }
        basis.push(v);
    }
    basis
}

/// Rank of A with the same pivoting and tolerance rule as `null_space`.
pub fn rank(a: &Matrix, tol_scale: f64) -> usize {
    a.cols() - null_space(a, tol_scale).len()
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method,
/// returned in ascending order.
pub fn sym_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    let mut m = a.clone();
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(m.get(i, j).abs());
            }
        }
        let scale = m.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if off <= 1e-15 * scale.max(1.0) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
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
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

/// Orthonormal basis of the orthogonal complement of the span of `cols`
/// inside R^dim, via modified Gram-Schmidt against the identity.
pub fn orthogonal_complement(cols: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in cols {
        assert_eq!(c.len(), dim);
        if let Some(u) = orthonormalize_against(c, &basis) {
            basis.push(u);
        }
    }
    let span_dim = basis.len();
    for k in 0..dim {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        if let Some(u) = orthonormalize_against(&e, &basis) {
            basis.push(u);
        }
    }
    basis.split_off(span_dim)
}

fn orthonormalize_against(v: &[f64], basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut u = v.to_vec();
    // two MGS passes for re-orthogonalization
    for _ in 0..2 {
        for b in basis {
            let dot: f64 = u.iter().zip(b).map(|(x, y)| x * y).sum();
            for (ui, bi) in u.iter_mut().zip(b) {
                *ui -= dot * bi;
            }
        }
    }
    let norm: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let orig: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 1e-10 * orig.max(1.0) {
        return None;
    }
    for ui in u.iter_mut() {
        *ui /= norm;
    }
    Some(u)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}
