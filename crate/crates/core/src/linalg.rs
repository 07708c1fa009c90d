//! Linear solves for Jacobians with periodic band structure.
//!
//! A [`CyclicBanded`] matrix has a periodic band of half-width `m` on its
//! first `n` rows/columns (row `i` couples to `(i+k) mod n`, `|k| <= m`) and
//! an optional dense border of `extra` rows and columns. The last `m` periodic
//! unknowns are moved into the border together with the extra unknowns, which
//! leaves a plain banded block; that block is factored by banded LU with
//! partial pivoting and the border is eliminated through a small dense Schur
//! complement.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Banded LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row `i` stores columns `i - kl ..= i + kl + ku`.
    rows: Vec<f64>,
    mult: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    fn width(kl: usize, ku: usize) -> usize {
        2 * kl + ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // j >= i - kl always holds for the entries we touch
        i * Self::width(self.kl, self.ku) + (j + self.kl - i)
    }

    /// Factors the banded matrix given entry-wise by `entry(i, j)` for
    /// `|i - j|` within the band.
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        entry: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let w = Self::width(kl, ku);
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            rows: vec![0.0; n * w],
            mult: vec![0.0; n * kl],
            piv: vec![0; n],
        };
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                let k = lu.idx(i, j);
                lu.rows[k] = entry(i, j);
            }
        }
        lu.eliminate()?;
        Ok(lu)
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.rows[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.rows[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(k));
            }
            self.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.rows.swap(a, b);
                }
            }
            let pivot = self.rows[self.idx(k, k)];
            for r in k + 1..=last_row {
                let ir = self.idx(r, k);
                let m = self.rows[ir] / pivot;
                self.rows[ir] = 0.0;
                self.mult[k * kl + (r - k - 1)] = m;
                if m != 0.0 {
                    for j in k + 1..=last_col {
                        let (a, b) = (self.idx(r, j), self.idx(k, j));
                        self.rows[a] -= m * self.rows[b];
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + kl).min(n - 1) {
                    b[r] -= self.mult[k * kl + (r - k - 1)] * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= self.rows[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.rows[self.idx(i, i)];
        }
    }
}

/// Periodic banded matrix with an optional dense border.
#[derive(Debug, Clone)]
pub struct CyclicBanded {
    n: usize,
    m: usize,
    extra: usize,
    /// `band[i * (2m+1) + (k + m)] = A[i, (i + k) mod n]`
    band: Vec<f64>,
    /// `A[i, n + e]`, stored row-major `n × extra`
    col_border: Vec<f64>,
    /// `A[n + e, j]`, stored row-major `extra × n`
    row_border: Vec<f64>,
    /// `A[n + e, n + f]`
    corner: Vec<f64>,
}

impl CyclicBanded {
    pub fn new(n: usize, m: usize, extra: usize) -> Self {
        assert!(n > 2 * m + 1, "periodic part too small for the band");
        CyclicBanded {
            n,
            m,
            extra,
            band: vec![0.0; n * (2 * m + 1)],
            col_border: vec![0.0; n * extra],
            row_border: vec![0.0; extra * n],
            corner: vec![0.0; extra * extra],
        }
    }

    pub fn dim(&self) -> usize {
        self.n + self.extra
    }

    pub fn clear(&mut self) {
        self.band.iter_mut().for_each(|v| *v = 0.0);
        self.col_border.iter_mut().for_each(|v| *v = 0.0);
        self.row_border.iter_mut().for_each(|v| *v = 0.0);
        self.corner.iter_mut().for_each(|v| *v = 0.0);
    }

    fn band_offset(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.n as isize;
        let mut k = (j as isize - i as isize).rem_euclid(n);
        if k > n / 2 {
            k -= n;
        }
        (k.unsigned_abs() <= self.m).then(|| (k + self.m as isize) as usize)
    }

    /// Adds `v` to `A[i, j]`. Panics if `(i, j)` lies outside the structure.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (n, e) = (self.n, self.extra);
        match (i < n, j < n) {
            (true, true) => {
                let k = self
                    .band_offset(i, j)
                    .unwrap_or_else(|| panic!("entry ({i}, {j}) outside the periodic band"));
                self.band[i * (2 * self.m + 1) + k] += v;
            }
            (true, false) => self.col_border[i * e + (j - n)] += v,
            (false, true) => self.row_border[(i - n) * n + j] += v,
            (false, false) => self.corner[(i - n) * e + (j - n)] += v,
        }
    }

    /// Adds `v` at periodic offset `k` of row `i`, i.e. to `A[i, (i+k) mod n]`.
    #[inline]
    pub fn add_offset(&mut self, i: usize, k: isize, v: f64) {
        debug_assert!(k.unsigned_abs() <= self.m);
        self.band[i * (2 * self.m + 1) + (k + self.m as isize) as usize] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (n, e) = (self.n, self.extra);
        match (i < n, j < n) {
            (true, true) => self
                .band_offset(i, j)
                .map_or(0.0, |k| self.band[i * (2 * self.m + 1) + k]),
            (true, false) => self.col_border[i * e + (j - n)],
            (false, true) => self.row_border[(i - n) * n + j],
            (false, false) => self.corner[(i - n) * e + (j - n)],
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        assert_eq!(x.len(), d);
        let (n, m) = (self.n, self.m as isize);
        let mut y = vec![0.0; d];
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            let mut s = 0.0;
            for k in -m..=m {
                let j = (i as isize + k).rem_euclid(n as isize) as usize;
                s += self.band[i * (2 * self.m + 1) + (k + m) as usize] * x[j];
            }
            for e in 0..self.extra {
                s += self.col_border[i * self.extra + e] * x[n + e];
            }
            *yi = s;
        }
        for e in 0..self.extra {
            let mut s: f64 = (0..n).map(|j| self.row_border[e * n + j] * x[j]).sum();
            for f in 0..self.extra {
                s += self.corner[e * self.extra + f] * x[n + f];
            }
            y[n + e] = s;
        }
        y
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        assert_eq!(rhs.len(), d);
        let (n, m) = (self.n, self.m);
        // Interior block: periodic indices 0..n1, free of wrap-around entries.
        let n1 = n - m;
        let s = m + self.extra;
        // Border unknown `b` maps to global index n1 + b.
        let lu = BandedLu::factor(n1, m, m, |i, j| self.get(i, j))?;

        let mut y = rhs[..n1].to_vec();
        lu.solve_in_place(&mut y);

        let mut z = vec![vec![0.0; n1]; s];
        for (b, col) in z.iter_mut().enumerate() {
            let gj = n1 + b;
            for (i, zi) in col.iter_mut().enumerate() {
                *zi = self.border_entry(i, gj);
            }
            lu.solve_in_place(col);
        }

        // Schur complement S = A22 - A21 Z, reduced rhs = b2 - A21 y.
        let mut schur = DMatrix::<f64>::zeros(s, s);
        let mut r2 = DVector::<f64>::zeros(s);
        for a in 0..s {
            let gi = n1 + a;
            let row: Vec<(usize, f64)> = self.row_entries(gi, n1);
            let mut acc = rhs[gi];
            for &(j, v) in &row {
                acc -= v * y[j];
            }
            r2[a] = acc;
            for (b, zb) in z.iter().enumerate() {
                let mut v = self.get(gi, n1 + b);
                for &(j, aij) in &row {
                    v -= aij * zb[j];
                }
                schur[(a, b)] = v;
            }
        }
        let x2 = schur
            .lu()
            .solve(&r2)
            .ok_or(Error::Singular(n1))?;

        let mut x = vec![0.0; d];
        for i in 0..n1 {
            let mut v = y[i];
            for (b, zb) in z.iter().enumerate() {
                v -= zb[i] * x2[b];
            }
            x[i] = v;
        }
        for b in 0..s {
            x[n1 + b] = x2[b];
        }
        Ok(x)
    }

    /// `A[i, j]` for an interior row `i` and a border column `j`.
    fn border_entry(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }

    /// Nonzero entries of row `i` restricted to interior columns `0..n1`.
    fn row_entries(&self, i: usize, n1: usize) -> Vec<(usize, f64)> {
        if i < self.n {
            let n = self.n as isize;
            let m = self.m as isize;
            (-m..=m)
                .filter_map(|k| {
                    let j = (i as isize + k).rem_euclid(n) as usize;
                    let v = self.band[i * (2 * self.m + 1) + (k + m) as usize];
                    (j < n1 && v != 0.0).then_some((j, v))
                })
                .collect()
        } else {
            let e = i - self.n;
            (0..n1)
                .filter_map(|j| {
                    let v = self.row_border[e * self.n + j];
                    (v != 0.0).then_some((j, v))
                })
                .collect()
        }
    }
}
