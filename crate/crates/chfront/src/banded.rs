//! Complex banded matrices with an LU factorisation (partial pivoting).

use num_complex::Complex64 as C64;

/// Row-major band storage; entry `(i, j)` is kept for `i − kl ≤ j ≤ i + ku`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![C64::new(0.0, 0.0); n * (kl + ku + 1)] }
    }

    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku || i >= self.n || j >= self.n {
            None
        } else {
            Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.idx(i, j).map_or(C64::new(0.0, 0.0), |k| self.data[k])
    }

    /// Adds `v` at `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        let k = self.idx(i, j).unwrap_or_else(|| panic!("({i}, {j}) outside band"));
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                t.add(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `self − s·I`.
    pub fn shifted(&self, s: C64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.add(i, i, -s);
        }
        m
    }

    pub fn lu(&self) -> Option<BandLu> {
        BandLu::factor(self)
    }
}

/// LU factors in band storage with upper bandwidth `kl + ku` after fill-in.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    w: usize,
    data: Vec<C64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.w + (j + self.kl - i)
    }

    fn factor(a: &BandMatrix) -> Option<Self> {
        let (n, kl) = (a.n, a.kl);
        let uw = kl + a.ku;
        let w = kl + uw + 1;
        let mut lu = Self { n, kl, w, data: vec![C64::new(0.0, 0.0); n * w], piv: vec![0; n] };
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + a.ku).min(n - 1);
            for j in lo..=hi {
                let k = lu.at(i, j);
                lu.data[k] = a.get(i, j);
            }
        }
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.at(k, k)].norm();
            for r in (k + 1)..=last {
                let v = lu.data[lu.at(r, k)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 {
                return None;
            }
            lu.piv[k] = p;
            let jmax = (k + uw).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a1, a2) = (lu.at(k, j), lu.at(p, j));
                    lu.data.swap(a1, a2);
                }
            }
            let pivot = lu.data[lu.at(k, k)];
            for r in (k + 1)..=last {
                let ir = lu.at(r, k);
                let l = lu.data[ir] / pivot;
                lu.data[ir] = l;
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in (k + 1)..=jmax {
                    let src = lu.data[lu.at(k, j)];
                    let dst = lu.at(r, j);
                    lu.data[dst] -= l * src;
                }
            }
        }
        Some(lu)
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let uw = self.w - self.kl - 1;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let last = (k + self.kl).min(n - 1);
            for r in (k + 1)..=last {
                let l = self.data[self.at(r, k)];
                x[r] = x[r] - l * x[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + uw).min(n - 1);
            let mut s = x[k];
            for j in (k + 1)..=jmax {
                s -= self.data[self.at(k, j)] * x[j];
            }
            x[k] = s / self.data[self.at(k, k)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_matches_dense() {
        let n = 30;
        let (kl, ku) = (3, 2);
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = C64::new(((i * 7 + j * 3) % 11) as f64 - 5.0, ((i + 2 * j) % 5) as f64 - 2.0);
                a.add(i, j, v);
            }
        }
        let x: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0 - i as f64 * 0.3)).collect();
        let b = a.matvec(&x);
        let y = a.lu().unwrap().solve(&b);
        let err: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        let at = a.transpose();
        assert_eq!(at.get(2, 4), a.get(4, 2));
    }
}
