//! Lemke's complementary pivoting for `w = M z + q, w, z >= 0, w'z = 0`.
//!
//! The basis inverse is kept dense and updated by elementary row operations;
//! it is rebuilt from scratch every few pivots. Ties in the ratio test are
//! broken lexicographically, which rules out cycling on degenerate problems.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const REFACTOR_EVERY: usize = 64;
const TIE_TOL: f64 = 1e-12;

pub(crate) struct Lcp {
    pub n: usize,
    /// Column-major `n x n`.
    pub m: Vec<f64>,
    pub q: Vec<f64>,
}

pub(crate) enum LcpOutcome {
    Solved { z: Vec<f64> },
    Ray,
}

impl Lcp {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            m: vec![0.0; n * n],
            q: vec![0.0; n],
        }
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.m[col * self.n + row] = v;
    }

    fn m_col(&self, col: usize) -> &[f64] {
        &self.m[col * self.n..(col + 1) * self.n]
    }
}

/// Variable ids: `0..n` are `w`, `n..2n` are `z`, `2n` is the artificial `z0`.
struct Tableau<'a> {
    lcp: &'a Lcp,
    basis: Vec<usize>,
    binv: Vec<f64>,
    qbar: Vec<f64>,
    since_refactor: usize,
}

impl<'a> Tableau<'a> {
    fn n(&self) -> usize {
        self.lcp.n
    }

    /// Column of `var` in `[I, -M, -e] (w; z; z0) = q`.
    fn column(&self, var: usize, out: &mut [f64]) {
        let n = self.n();
        out.iter_mut().for_each(|v| *v = 0.0);
        if var < n {
            out[var] = 1.0;
        } else if var < 2 * n {
            for (o, m) in out.iter_mut().zip(self.lcp.m_col(var - n)) {
                *o = -m;
            }
        } else {
            out.iter_mut().for_each(|v| *v = -1.0);
        }
    }

    /// `B^-1 a` for the column of `var`.
    fn transformed(&self, var: usize) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        if var < n {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.binv[i * n + var];
            }
            return out;
        }
        let mut col = vec![0.0; n];
        self.column(var, &mut col);
        let nz: Vec<(usize, f64)> = col
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.binv[i * n..(i + 1) * n];
            *o = nz.iter().map(|&(j, v)| row[j] * v).sum();
        }
        out
    }

    fn pivot(&mut self, r: usize, abar: &[f64], entering: usize) {
        let n = self.n();
        let p = abar[r];
        self.qbar[r] /= p;
        for v in &mut self.binv[r * n..(r + 1) * n] {
            *v /= p;
        }
        let (head, rest) = self.binv.split_at_mut(r * n);
        let (pivot_row, tail) = rest.split_at_mut(n);
        for (i, &f) in abar.iter().enumerate() {
            if i == r || f == 0.0 {
                continue;
            }
            self.qbar[i] -= f * self.qbar[r];
            let row = if i < r {
                &mut head[i * n..(i + 1) * n]
            } else {
                let k = i - r - 1;
                &mut tail[k * n..(k + 1) * n]
            };
            for (x, y) in row.iter_mut().zip(pivot_row.iter()) {
                *x -= f * y;
            }
        }
        self.basis[r] = entering;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            // keep the stale inverse if the rebuild fails; the final solve checks it
            let _ = self.refactor();
        }
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut b = DMatrix::zeros(n, n);
        let mut col = vec![0.0; n];
        for (k, &var) in self.basis.iter().enumerate() {
            self.column(var, &mut col);
            for i in 0..n {
                b[(i, k)] = col[i];
            }
        }
        b
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.n();
        self.since_refactor = 0;
        let inv = self
            .basis_matrix()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular basis in complementary pivoting".into()))?;
        for i in 0..n {
            for j in 0..n {
                self.binv[i * n + j] = inv[(i, j)];
            }
            self.qbar[i] = (0..n).map(|j| inv[(i, j)] * self.lcp.q[j]).sum();
        }
        Ok(())
    }

    /// Lexicographic minimum ratio row among rows with positive pivot.
    fn ratio_test(&self, abar: &[f64]) -> Option<usize> {
        let n = self.n();
        let scale = abar.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let piv_tol = (1e-10 * scale).max(1e-13);
        let mut best: Option<usize> = None;
        for i in 0..n {
            if abar[i] <= piv_tol {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    if self.lex_less(i, b, abar) {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        // the artificial leaves whenever it ties for the minimum ratio
        let b = best?;
        if let Some(r0) = self.basis.iter().position(|&v| v == 2 * n) {
            if r0 != b && abar[r0] > piv_tol {
                let rb = self.qbar[b].max(0.0) / abar[b];
                let r = self.qbar[r0].max(0.0) / abar[r0];
                if r <= rb + TIE_TOL * rb.abs().max(1.0) {
                    return Some(r0);
                }
            }
        }
        Some(b)
    }

    fn lex_less(&self, i: usize, k: usize, abar: &[f64]) -> bool {
        let n = self.n();
        let ri = self.qbar[i].max(0.0) / abar[i];
        let rk = self.qbar[k].max(0.0) / abar[k];
        let tol = TIE_TOL * ri.abs().max(rk.abs()).max(1.0);
        if ri < rk - tol {
            return true;
        }
        if ri > rk + tol {
            return false;
        }
        for j in 0..n {
            let a = self.binv[i * n + j] / abar[i];
            let b = self.binv[k * n + j] / abar[k];
            let tol = TIE_TOL * a.abs().max(b.abs()).max(1.0);
            if a < b - tol {
                return true;
            }
            if a > b + tol {
                return false;
            }
        }
        i < k
    }

    /// Solves `B x = q` from the original data for the final basis.
    fn basic_values(&self) -> Vec<f64> {
        let n = self.n();
        let q = nalgebra::DVector::from_column_slice(&self.lcp.q);
        match self.basis_matrix().lu().solve(&q) {
            Some(x) if x.iter().all(|v| v.is_finite()) => x.iter().copied().collect(),
            _ => (0..n).map(|i| self.qbar[i]).collect(),
        }
    }
}

pub(crate) fn solve_lcp(lcp: &Lcp) -> Result<LcpOutcome> {
    let n = lcp.n;
    if n == 0 || lcp.q.iter().all(|&v| v >= 0.0) {
        return Ok(LcpOutcome::Solved { z: vec![0.0; n] });
    }
    let mut binv = vec![0.0; n * n];
    for i in 0..n {
        binv[i * n + i] = 1.0;
    }
    let mut tab = Tableau {
        lcp,
        basis: (0..n).collect(),
        binv,
        qbar: lcp.q.clone(),
        since_refactor: 0,
    };

    // z0 enters at the most negative q; among ties the largest index keeps
    // the tableau lexicographically positive.
    let mut r = 0;
    for i in 0..n {
        if lcp.q[i] <= lcp.q[r] {
            r = i;
        }
    }
    let z0 = 2 * n;
    let abar = vec![-1.0; n];
    tab.pivot(r, &abar, z0);
    let mut entering = n + r;

    let max_pivots = 50 * n + 500;
    for _ in 0..max_pivots {
        let abar = tab.transformed(entering);
        let Some(r) = tab.ratio_test(&abar) else {
            // a numerically vanished artificial means the system already holds
            let r0 = tab.basis.iter().position(|&v| v == z0).unwrap_or(0);
            let scale = lcp.q.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if tab.basis[r0] == z0 && tab.qbar[r0] <= 1e-11 * scale {
                return Ok(tab.solution());
            }
            return Ok(LcpOutcome::Ray);
        };
        let leaving = tab.basis[r];
        tab.pivot(r, &abar, entering);
        if leaving == z0 {
            return Ok(tab.solution());
        }
        entering = if leaving < n { leaving + n } else { leaving - n };
    }
    Err(Error::Numerical(format!(
        "complementary pivoting did not terminate within {max_pivots} pivots"
    )))
}

impl Tableau<'_> {
    fn solution(&self) -> LcpOutcome {
        let n = self.n();
        let xb = self.basic_values();
        let mut z = vec![0.0; n];
        for (k, &var) in self.basis.iter().enumerate() {
            if var >= n && var < 2 * n {
                z[var - n] = xb[k].max(0.0);
            }
        }
        LcpOutcome::Solved { z }
    }
}
