use serde::{Deserialize, Serialize};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }
}

/// `a (n x p) * b (p x q)`.
pub fn matmul(a: &[f64], n: usize, p: usize, b: &[f64], q: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * q];
    for i in 0..n {
        let row = &mut out[i * q..(i + 1) * q];
        for (k, &aik) in a[i * p..(i + 1) * p].iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in row.iter_mut().zip(&b[k * q..(k + 1) * q]) {
                *o += aik * bkj;
            }
        }
    }
    out
}

/// `a^T (p x n) * b (n x q)`, accumulated into `out (p x q)`.
pub fn matmul_tn_acc(a: &[f64], n: usize, p: usize, b: &[f64], q: usize, out: &mut [f64]) {
    for r in 0..n {
        let brow = &b[r * q..(r + 1) * q];
        for (i, &ari) in a[r * p..(r + 1) * p].iter().enumerate() {
            if ari == 0.0 {
                continue;
            }
            for (o, &v) in out[i * q..(i + 1) * q].iter_mut().zip(brow) {
                *o += ari * v;
            }
        }
    }
}

/// `a (n x q) * b^T` where `b` is `p x q`; result `n x p`.
pub fn matmul_nt(a: &[f64], n: usize, q: usize, b: &[f64], p: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * p];
    for i in 0..n {
        let arow = &a[i * q..(i + 1) * q];
        for j in 0..p {
            out[i * p + j] = arow.iter().zip(&b[j * q..(j + 1) * q]).map(|(x, y)| x * y).sum();
        }
    }
    out
}
