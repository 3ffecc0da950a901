//! Banded LU factorization with partial pivoting.
//!
//! Row `r` stores columns `r - kl ..= r + ku + kl`; the extra `kl`
//! super-diagonals hold fill-in created by row interchanges.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct SingularPivot(pub usize);

#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    /// Accumulates `v` into entry `(r, c)`; `c` must lie within the band.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(c + self.kl >= r && c <= r + self.ku);
        let k = self.slot(r, c);
        self.data[k] += v;
    }

    pub fn factor(mut self) -> Result<BandLu, SingularPivot> {
        let n = self.n;
        let upper = self.kl + self.ku;
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for r in k + 1..=last {
                let v = self.data[self.slot(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(SingularPivot(k));
            }
            piv[k] = p;
            let cmax = (k + upper).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    let a = self.slot(k, c);
                    let b = self.slot(p, c);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            let krow = self.slot(k, k);
            for r in k + 1..=last {
                let rk = self.slot(r, k);
                let f = self.data[rk] / pivot;
                self.data[rk] = f;
                if f == 0.0 {
                    continue;
                }
                // row k and row r are both contiguous in c
                for off in 1..=(cmax - k) {
                    let v = self.data[krow + off];
                    self.data[rk + off] -= f * v;
                }
            }
        }
        Ok(BandLu { band: self, piv })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandLu {
    band: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let a = &self.band;
        let n = a.n;
        let upper = a.kl + a.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == 0.0 {
                continue;
            }
            for r in k + 1..=(k + a.kl).min(n - 1) {
                b[r] -= a.data[a.slot(r, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let row = a.slot(k, k);
            let mut s = b[k];
            for off in 1..=((k + upper).min(n - 1) - k) {
                s -= a.data[row + off] * b[k + off];
            }
            b[k] = s / a.data[row];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn solves_banded_system_needing_pivots() {
        let n = 40;
        let (kl, ku) = (3, 2);
        let mut dense = vec![vec![0.0; n]; n];
        let mut band = BandMatrix::zeros(n, kl, ku);
        for r in 0..n {
            for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                // small diagonal forces interchanges
                let v = if r == c {
                    1e-3 * (r as f64 + 1.0)
                } else {
                    ((r * 7 + c * 3) % 11) as f64 - 5.0
                };
                dense[r][c] = v;
                band.add(r, c, v);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = dense_mul(&dense, &x);
        band.factor().unwrap().solve(&mut b);
        for (got, want) in b.iter().zip(&x) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn reports_singular_matrix() {
        let mut band = BandMatrix::zeros(3, 1, 1);
        band.add(0, 0, 1.0);
        band.add(1, 1, 1.0);
        assert_eq!(band.factor().unwrap_err(), SingularPivot(2));
    }
}
