//! Small dense linear algebra for patch groups: sample statistics and
//! jittered symmetric positive-definite solves.

use crate::error::{Error, Result};

/// How many times a failed factorization retries with ten times the jitter.
pub const MAX_JITTER_ESCALATIONS: u32 = 12;

/// Symmetric matrix holding only the lower triangle, packed row by row.
/// `get(i, j)` and `get(j, i)` read the same slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    packed: Vec<f64>,
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            packed: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Reads the lower triangle of a dense row-major square matrix.
    pub fn from_lower(dense: &Matrix) -> Result<Self> {
        if dense.rows != dense.cols {
            return Err(Error::shape("square matrix", format!("{}x{}", dense.rows, dense.cols)));
        }
        let mut m = Self::zeros(dense.rows);
        for i in 0..dense.rows {
            for j in 0..=i {
                m.set(i, j, dense.get(i, j));
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.packed[packed_index(i, j)] = v;
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.packed.iter().all(|&v| v == 0.0)
    }

    pub fn add_diag(&mut self, diag: &[f64]) {
        for (i, &d) in diag.iter().enumerate() {
            let k = packed_index(i, i);
            self.packed[k] += d;
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.data[i * self.dim + j] = self.get(i, j);
            }
        }
        m
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Sample mean and unbiased (k − 1) sample covariance of a patch group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
    pub count: usize,
}

pub fn sample_stats<V: AsRef<[f64]>>(samples: &[V], dim: usize) -> Result<GroupStats> {
    let k = samples.len();
    if k < 2 {
        return Err(Error::InsufficientData { needed: 2, got: k });
    }
    if let Some(bad) = samples.iter().find(|s| s.as_ref().len() != dim) {
        return Err(Error::shape(dim, bad.as_ref().len()));
    }

    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.as_ref()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k as f64);

    let mut cov = SymMatrix::zeros(dim);
    let mut centered = vec![0.0; dim];
    for s in samples {
        for ((c, v), m) in centered.iter_mut().zip(s.as_ref()).zip(&mean) {
            *c = v - m;
        }
        let mut idx = 0;
        for i in 0..dim {
            let ci = centered[i];
            for &cj in &centered[..=i] {
                cov.packed[idx] += ci * cj;
                idx += 1;
            }
        }
    }
    let norm = 1.0 / (k - 1) as f64;
    cov.packed.iter_mut().for_each(|c| *c *= norm);

    Ok(GroupStats {
        mean,
        cov,
        count: k,
    })
}

/// Lower-triangular Cholesky factor of an SPD matrix, row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors `a + jitter·I`. Returns `None` when a pivot is not positive.
    pub fn factor(a: &SymMatrix, jitter: f64) -> Option<Self> {
        let n = a.dim;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a.get(i, j);
                if i == j {
                    s += jitter;
                }
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                if i == j {
                    if !(s > 0.0 && s.is_finite()) {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Self { dim: n, lower: l })
    }

    /// Solves `L Lᵀ X = B` in place, B being `dim × m` row-major.
    pub fn solve_in_place(&self, b: &mut [f64], m: usize) {
        let n = self.dim;
        let l = &self.lower;
        // forward: L Y = B
        for i in 0..n {
            let (done, rest) = b.split_at_mut(i * m);
            let row = &mut rest[..m];
            for k in 0..i {
                let f = l[i * n + k];
                if f != 0.0 {
                    for (r, d) in row.iter_mut().zip(&done[k * m..(k + 1) * m]) {
                        *r -= f * d;
                    }
                }
            }
            let inv = 1.0 / l[i * n + i];
            row.iter_mut().for_each(|r| *r *= inv);
        }
        // backward: Lᵀ X = Y
        for i in (0..n).rev() {
            let (head, tail) = b.split_at_mut((i + 1) * m);
            let row = &mut head[i * m..];
            for k in i + 1..n {
                let f = l[k * n + i];
                if f != 0.0 {
                    let off = (k - i - 1) * m;
                    for (r, d) in row.iter_mut().zip(&tail[off..off + m]) {
                        *r -= f * d;
                    }
                }
            }
            let inv = 1.0 / l[i * n + i];
            row.iter_mut().for_each(|r| *r *= inv);
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub x: Matrix,
    /// Diagonal jitter that made the factorization succeed.
    pub jitter: f64,
}

/// Solves `(A + εI) X = B`. When factorization fails, ε is multiplied by ten
/// (starting from a scale-relative floor if it was zero) up to
/// [`MAX_JITTER_ESCALATIONS`] times.
pub fn solve_spd(a: &SymMatrix, b: &Matrix, jitter: f64) -> Result<SpdSolution> {
    if b.rows != a.dim {
        return Err(Error::shape(format!("{} rows", a.dim), format!("{} rows", b.rows)));
    }
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::Config(format!("jitter must be finite and >= 0, got {jitter}")));
    }
    let mut eps = jitter;
    let mut attempt = 0;
    let chol = loop {
        if let Some(c) = Cholesky::factor(a, eps) {
            break c;
        }
        if attempt == MAX_JITTER_ESCALATIONS {
            return Err(Error::Singular { jitter: eps });
        }
        attempt += 1;
        eps = if eps > 0.0 {
            eps * 10.0
        } else {
            escalation_floor(a)
        };
    };
    let mut x = b.clone();
    chol.solve_in_place(&mut x.data, x.cols);
    Ok(SpdSolution { x, jitter: eps })
}

fn escalation_floor(a: &SymMatrix) -> f64 {
    let n = a.dim.max(1) as f64;
    let scale = (0..a.dim).map(|i| a.get(i, i).abs()).sum::<f64>() / n;
    if scale > 0.0 {
        1e-12 * scale
    } else {
        1e-12
    }
}
