//! Symmetric banded matrices and their Cholesky factorization.

/// Lower band of a symmetric `n×n` matrix with half-bandwidth `bw`.
#[derive(Clone, Debug)]
pub(crate) struct Banded {
    n: usize,
    bw: usize,
    // Row i holds A[i][i-bw..=i], diagonal last.
    data: Vec<f64>,
}

impl Banded {
    pub(crate) fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        Banded {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + self.bw - (i - j)
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`).
    #[inline]
    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub(crate) fn max_diag(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    /// In-place `L·Lᵀ` factorization; `None` on a nonpositive pivot.
    pub(crate) fn cholesky(mut self, shift: f64) -> Option<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let k = self.idx(i, i);
            self.data[k] += shift;
        }
        for j in 0..n {
            let j0 = j.saturating_sub(bw);
            let mut d = self.data[self.idx(j, j)];
            for k in j0..j {
                let l = self.data[self.idx(j, k)];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            let jj = self.idx(j, j);
            self.data[jj] = d;
            for i in (j + 1)..(j + bw + 1).min(n) {
                let i0 = i.saturating_sub(bw).max(j0);
                let mut s = self.data[self.idx(i, j)];
                for k in i0..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                let ij = self.idx(i, j);
                self.data[ij] = s / d;
            }
        }
        Some(BandedCholesky { l: self })
    }
}

pub(crate) struct BandedCholesky {
    l: Banded,
}

impl BandedCholesky {
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= l.data[l.idx(i, k)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..(i + bw + 1).min(n) {
                s -= l.data[l.idx(k, i)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_cholesky() {
        let n = 9;
        let bw = 3;
        let mut band = Banded::zeros(n, bw);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                let v = if i == j { 10.0 + i as f64 } else { ((i * 7 + j * 3) % 5) as f64 - 2.0 };
                band.add(i, j, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = band.cholesky(0.0).unwrap().solve(&b);
        let expected = dense.cholesky().unwrap().solve(&DVector::from_vec(b));
        for i in 0..n {
            assert!((x[i] - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut band = Banded::zeros(2, 1);
        band.add(0, 0, 1.0);
        band.add(1, 0, 2.0);
        band.add(1, 1, 1.0);
        assert!(band.cholesky(0.0).is_none());
    }
}
