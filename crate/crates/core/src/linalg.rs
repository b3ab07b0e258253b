//! Banded LU with partial pivoting, for the block-tridiagonal Newton systems.

/// Square matrix with `kl` sub- and `ku` super-diagonals. Rows keep `kl`
/// extra columns on the right for pivoting fill-in.
#[derive(Debug, Clone)]
pub(crate) struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Banded { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl, "({i},{j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// `A x` for the unfactored matrix.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Solve `A X = B` in place for several right-hand sides; consumes the
    /// matrix. `None` if a pivot is numerically zero.
    pub fn solve(mut self, rhs: &mut [Vec<f64>]) -> Option<()> {
        let n = self.n;
        let reach = self.ku + self.kl;
        let amax = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(amax > 0.0 && amax.is_finite()) {
            return None;
        }
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let p = (k..=last_row)
                .max_by(|&a, &b| self.get(a, k).abs().total_cmp(&self.get(b, k).abs()))
                .unwrap();
            let piv = self.get(p, k);
            if piv.abs() <= 1e-14 * amax {
                return None;
            }
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
                for r in rhs.iter_mut() {
                    r.swap(k, p);
                }
            }
            for r in k + 1..=last_row {
                let f = self.get(r, k) / piv;
                if f == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let v = self.get(k, j);
                    self.add(r, j, -f * v);
                }
                for b in rhs.iter_mut() {
                    b[r] -= f * b[k];
                }
            }
        }
        for b in rhs.iter_mut() {
            for k in (0..n).rev() {
                let last_col = (k + reach).min(n - 1);
                let mut s = b[k];
                for j in k + 1..=last_col {
                    s -= self.get(k, j) * b[j];
                }
                b[k] = s / self.get(k, k);
            }
        }
        Some(())
    }
}
