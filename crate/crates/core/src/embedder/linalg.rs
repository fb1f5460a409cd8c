//! Just enough dense linear algebra for the embedding trainers.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Row-major matrix.
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

    /// Uniform in `[-scale, scale]`.
    pub fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-scale..=scale)).collect();
        Matrix { rows, cols, data }
    }

    /// Glorot-uniform initialisation.
    pub fn xavier(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        Matrix::uniform(rows, cols, (6.0 / (rows + cols) as f64).sqrt(), rng)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out = self · x`
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(r), x);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    /// `out += selfᵀ · y`
    pub fn matvec_t_acc(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            axpy(yr, self.row(r), out);
        }
    }

    /// `self += a ⊗ b`
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (r, &ar) in a.iter().enumerate() {
            if ar == 0.0 {
                continue;
            }
            axpy(ar, b, self.row_mut(r));
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a · x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scale every slice so their joint L2 norm is at most `max_norm`.
pub fn clip_joint(parts: &mut [&mut [f64]], max_norm: f64) {
    let total: f64 = parts.iter().map(|p| dot(p, p)).sum::<f64>().sqrt();
    if total > max_norm && total.is_finite() {
        let s = max_norm / total;
        for p in parts.iter_mut() {
            p.iter_mut().for_each(|v| *v *= s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let m = Matrix { rows: 2, cols: 3, data: vec![1., 2., 3., 4., 5., 6.] };
        assert_eq!(m.matvec(&[1., 0., -1.]), vec![-2., -2.]);
        let mut out = vec![0.0; 3];
        m.matvec_t_acc(&[1., 1.], &mut out);
        assert_eq!(out, vec![5., 7., 9.]);
        let mut z = Matrix::zeros(2, 3);
        z.add_outer(&[1., 2.], &[1., 0., 1.]);
        assert_eq!(z.data, vec![1., 0., 1., 2., 0., 2.]);
    }

    #[test]
    fn clipping() {
        let mut a = vec![3.0, 0.0];
        let mut b = vec![0.0, 4.0];
        clip_joint(&mut [&mut a, &mut b], 1.0);
        assert!((norm(&a).powi(2) + norm(&b).powi(2) - 1.0).abs() < 1e-12);
    }
}
