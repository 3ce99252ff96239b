//! Concave quadratic programs with a separable objective.
//!
//! ```text
//! maximize    c'x + 1/2 sum_i d_i x_i^2        (d_i <= 0)
//! subject to  A_eq x  = b_eq      (multiplier y, free)
//!             A_in x <= b_in      (multiplier mu >= 0)
//!             l <= x <= u         (multipliers z_l, z_u >= 0)
//! ```
//!
//! Multipliers follow `c + D x = A_eq' y + A_in' mu + z_u - z_l`.

mod lemke;

use lemke::{solve_lcp, Lcp, LcpOutcome};

use crate::error::{Error, Result};

pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QpProblem {
    pub linear: Vec<f64>,
    pub quadratic: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub eq_rows: Vec<SparseRow>,
    pub eq_rhs: Vec<f64>,
    pub in_rows: Vec<SparseRow>,
    pub in_rhs: Vec<f64>,
}

impl QpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n(&self) -> usize {
        self.linear.len()
    }

    /// Adds a variable and returns its index. Bounds may be infinite.
    pub fn add_var(&mut self, lower: f64, upper: f64, linear: f64, quadratic: f64) -> usize {
        self.linear.push(linear);
        self.quadratic.push(quadratic);
        self.lower.push(lower);
        self.upper.push(upper);
        self.linear.len() - 1
    }

    pub fn add_eq(&mut self, row: SparseRow, rhs: f64) -> usize {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        self.eq_rows.len() - 1
    }

    pub fn add_le(&mut self, row: SparseRow, rhs: f64) -> usize {
        self.in_rows.push(row);
        self.in_rhs.push(rhs);
        self.in_rows.len() - 1
    }

    /// Adds `row' x >= rhs` as `-row' x <= -rhs`.
    pub fn add_ge(&mut self, row: SparseRow, rhs: f64) -> usize {
        self.add_le(row.into_iter().map(|(j, v)| (j, -v)).collect(), -rhs)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.linear
            .iter()
            .zip(&self.quadratic)
            .zip(x)
            .map(|((c, d), x)| c * x + 0.5 * d * x * x)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.quadratic.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Numerical("inconsistent variable dimensions".into()));
        }
        if self.eq_rows.len() != self.eq_rhs.len() || self.in_rows.len() != self.in_rhs.len() {
            return Err(Error::Numerical("inconsistent row dimensions".into()));
        }
        if self.quadratic.iter().any(|d| !(*d <= 0.0)) {
            return Err(Error::Numerical("objective is not concave".into()));
        }
        if self.linear.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("non-finite objective coefficient".into()));
        }
        for row in self.eq_rows.iter().chain(&self.in_rows) {
            if row.iter().any(|&(j, v)| j >= n || !v.is_finite()) {
                return Err(Error::Numerical("row references an unknown variable".into()));
            }
        }
        if self.lower.iter().chain(&self.upper).any(|v| v.is_nan()) {
            return Err(Error::Numerical("NaN bound".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A constraint taking part in an infeasibility certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConstraintRef {
    Eq(usize),
    Ineq(usize),
    Bound(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: Vec<f64>,
    pub eq_duals: Vec<f64>,
    pub ineq_duals: Vec<f64>,
    pub upper_duals: Vec<f64>,
    pub lower_duals: Vec<f64>,
    pub objective: f64,
    /// Constraints that cannot hold together, when infeasible.
    pub certificate: Vec<ConstraintRef>,
    /// Improving direction, when unbounded.
    pub ray: Option<Vec<f64>>,
}

impl QpSolution {
    fn empty(problem: &QpProblem, status: QpStatus) -> Self {
        Self {
            status,
            x: vec![0.0; problem.n()],
            eq_duals: vec![0.0; problem.eq_rows.len()],
            ineq_duals: vec![0.0; problem.in_rows.len()],
            upper_duals: vec![0.0; problem.n()],
            lower_duals: vec![0.0; problem.n()],
            objective: f64::NAN,
            certificate: Vec::new(),
            ray: None,
        }
    }
}

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
enum Map {
    Fixed(f64),
    /// `x = offset + sign * s[col]`.
    Single { col: usize, offset: f64, sign: f64 },
    /// `x = s[pos] - s[neg]`.
    Free { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowOrigin {
    EqPlus(usize),
    EqMinus(usize),
    Ineq(usize),
    Upper(usize),
}

impl RowOrigin {
    fn constraint(self) -> ConstraintRef {
        match self {
            RowOrigin::EqPlus(i) | RowOrigin::EqMinus(i) => ConstraintRef::Eq(i),
            RowOrigin::Ineq(i) => ConstraintRef::Ineq(i),
            RowOrigin::Upper(j) => ConstraintRef::Bound(j),
        }
    }
}

/// The problem rewritten over nonnegative variables `s`:
/// minimize `1/2 s'Qs + c's` subject to `G s <= h`.
struct Reduced {
    maps: Vec<Map>,
    ns: usize,
    /// Dense row-major `ns x ns`.
    q: Vec<f64>,
    c: Vec<f64>,
    g: Vec<Vec<f64>>,
    h: Vec<f64>,
    origin: Vec<RowOrigin>,
}

impl Reduced {
    fn build(p: &QpProblem) -> Self {
        let mut maps = Vec::with_capacity(p.n());
        let mut ns = 0;
        for j in 0..p.n() {
            let (l, u) = (p.lower[j], p.upper[j]);
            let m = if l.is_finite() && u.is_finite() && u - l <= 0.0 {
                Map::Fixed(l)
            } else if l.is_finite() {
                ns += 1;
                Map::Single {
                    col: ns - 1,
                    offset: l,
                    sign: 1.0,
                }
            } else if u.is_finite() {
                ns += 1;
                Map::Single {
                    col: ns - 1,
                    offset: u,
                    sign: -1.0,
                }
            } else {
                ns += 2;
                Map::Free {
                    pos: ns - 2,
                    neg: ns - 1,
                }
            };
            maps.push(m);
        }

        let mut q = vec![0.0; ns * ns];
        let mut c = vec![0.0; ns];
        for (j, m) in maps.iter().enumerate() {
            let qd = -p.quadratic[j];
            match *m {
                Map::Fixed(_) => {}
                Map::Single { col, offset, sign } => {
                    q[col * ns + col] += qd;
                    c[col] += sign * (qd * offset - p.linear[j]);
                }
                Map::Free { pos, neg } => {
                    q[pos * ns + pos] += qd;
                    q[neg * ns + neg] += qd;
                    q[pos * ns + neg] -= qd;
                    q[neg * ns + pos] -= qd;
                    c[pos] -= p.linear[j];
                    c[neg] += p.linear[j];
                }
            }
        }

        let mut g = Vec::new();
        let mut h = Vec::new();
        let mut origin = Vec::new();
        let mut push_row = |row: &SparseRow, rhs: f64, sign: f64, o: RowOrigin| {
            let mut dense = vec![0.0; ns];
            let mut r = rhs;
            for &(j, a) in row {
                match maps[j] {
                    Map::Fixed(v) => r -= a * v,
                    Map::Single { col, offset, sign: s } => {
                        dense[col] += a * s;
                        r -= a * offset;
                    }
                    Map::Free { pos, neg } => {
                        dense[pos] += a;
                        dense[neg] -= a;
                    }
                }
            }
            g.push(dense.into_iter().map(|v| sign * v).collect());
            h.push(sign * r);
            origin.push(o);
        };
        for (i, row) in p.eq_rows.iter().enumerate() {
            push_row(row, p.eq_rhs[i], 1.0, RowOrigin::EqPlus(i));
            push_row(row, p.eq_rhs[i], -1.0, RowOrigin::EqMinus(i));
        }
        for (i, row) in p.in_rows.iter().enumerate() {
            push_row(row, p.in_rhs[i], 1.0, RowOrigin::Ineq(i));
        }
        for (j, m) in maps.iter().enumerate() {
            if let Map::Single { col, sign, .. } = *m {
                if p.lower[j].is_finite() && p.upper[j].is_finite() && sign > 0.0 {
                    let mut dense = vec![0.0; ns];
                    dense[col] = 1.0;
                    g.push(dense);
                    h.push(p.upper[j] - p.lower[j]);
                    origin.push(RowOrigin::Upper(j));
                }
            }
        }
        Self {
            maps,
            ns,
            q,
            c,
            g,
            h,
            origin,
        }
    }

    fn x_of(&self, s: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|m| match *m {
                Map::Fixed(v) => v,
                Map::Single { col, offset, sign } => offset + sign * s[col],
                Map::Free { pos, neg } => s[pos] - s[neg],
            })
            .collect()
    }

    fn direction_of(&self, d: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|m| match *m {
                Map::Fixed(_) => 0.0,
                Map::Single { col, sign, .. } => sign * d[col],
                Map::Free { pos, neg } => d[pos] - d[neg],
            })
            .collect()
    }
}

/// KKT system of `min 1/2 s'Qs + c's, G s <= h, s >= 0` as an LCP.
fn kkt_lcp(ns: usize, q: &[f64], c: &[f64], g: &[Vec<f64>], h: &[f64]) -> Lcp {
    let m = g.len();
    let mut lcp = Lcp::new(ns + m);
    for i in 0..ns {
        for j in 0..ns {
            let v = q[i * ns + j];
            if v != 0.0 {
                lcp.set(i, j, v);
            }
        }
        lcp.q[i] = c[i];
    }
    for (r, row) in g.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                lcp.set(j, ns + r, v);
                lcp.set(ns + r, j, -v);
            }
        }
        lcp.q[ns + r] = h[r];
    }
    lcp
}

/// Solves a concave QP. Deterministic: equal inputs give bit-identical output.
pub fn solve_qp(problem: &QpProblem, tol: f64) -> Result<QpSolution> {
    problem.validate()?;
    if let Some(j) = (0..problem.n()).find(|&j| problem.lower[j] > problem.upper[j]) {
        let mut sol = QpSolution::empty(problem, QpStatus::Infeasible);
        sol.certificate = vec![ConstraintRef::Bound(j)];
        return Ok(sol);
    }
    let red = Reduced::build(problem);
    let lcp = kkt_lcp(red.ns, &red.q, &red.c, &red.g, &red.h);
    match solve_lcp(&lcp)? {
        LcpOutcome::Solved { z } => Ok(finish(problem, &red, &z)),
        LcpOutcome::Ray => diagnose(problem, &red, tol),
    }
}

fn finish(problem: &QpProblem, red: &Reduced, z: &[f64]) -> QpSolution {
    let ns = red.ns;
    let x = red.x_of(&z[..ns]);
    let mut sol = QpSolution::empty(problem, QpStatus::Optimal);
    for (r, o) in red.origin.iter().enumerate() {
        let mu = z[ns + r];
        match *o {
            RowOrigin::EqPlus(i) => sol.eq_duals[i] += mu,
            RowOrigin::EqMinus(i) => sol.eq_duals[i] -= mu,
            RowOrigin::Ineq(i) => sol.ineq_duals[i] = mu,
            RowOrigin::Upper(_) => {}
        }
    }
    let resid = reduced_gradient(problem, &x, &sol.eq_duals, &sol.ineq_duals);
    for (j, r) in resid.into_iter().enumerate() {
        if r > 0.0 {
            sol.upper_duals[j] = r;
        } else {
            sol.lower_duals[j] = -r;
        }
    }
    sol.objective = problem.objective(&x);
    sol.x = x;
    sol
}

/// `c + D x - A_eq' y - A_in' mu`.
fn reduced_gradient(problem: &QpProblem, x: &[f64], y: &[f64], mu: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = (0..problem.n())
        .map(|j| problem.linear[j] + problem.quadratic[j] * x[j])
        .collect();
    for (row, &yi) in problem.eq_rows.iter().zip(y) {
        for &(j, a) in row {
            r[j] -= a * yi;
        }
    }
    for (row, &mi) in problem.in_rows.iter().zip(mu) {
        for &(j, a) in row {
            r[j] -= a * mi;
        }
    }
    r
}

/// After ray termination: decide between infeasible and unbounded.
fn diagnose(problem: &QpProblem, red: &Reduced, tol: f64) -> Result<QpSolution> {
    let (ns, m) = (red.ns, red.g.len());
    // phase 1: minimize the total violation sum(a) with G s - a <= h
    let n1 = ns + m;
    let mut g1 = Vec::with_capacity(m);
    for (r, row) in red.g.iter().enumerate() {
        let mut v = row.clone();
        v.extend((0..m).map(|k| if k == r { -1.0 } else { 0.0 }));
        g1.push(v);
    }
    let mut c1 = vec![0.0; n1];
    c1[ns..].iter_mut().for_each(|v| *v = 1.0);
    let lcp = kkt_lcp(n1, &vec![0.0; n1 * n1], &c1, &g1, &red.h);
    let LcpOutcome::Solved { z } = solve_lcp(&lcp)? else {
        return Err(Error::Numerical("phase-one problem reported a ray".into()));
    };
    let violation: f64 = z[ns..n1].iter().sum();
    let scale = red.h.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if violation > tol * scale {
        let mut sol = QpSolution::empty(problem, QpStatus::Infeasible);
        let mut cert: Vec<ConstraintRef> = red
            .origin
            .iter()
            .enumerate()
            .filter(|(r, _)| z[n1 + r] > 1e-9)
            .map(|(_, o)| o.constraint())
            .collect();
        cert.sort();
        cert.dedup();
        sol.certificate = cert;
        return Ok(sol);
    }

    // feasible, so unbounded: find an improving recession direction
    // minimize c'd with G d <= 0, Q d = 0, 0 <= d <= 1
    let mut g2: Vec<Vec<f64>> = red.g.clone();
    let mut h2 = vec![0.0; m];
    for i in 0..ns {
        let row: Vec<f64> = red.q[i * ns..(i + 1) * ns].to_vec();
        if row.iter().any(|v| *v != 0.0) {
            g2.push(row.clone());
            h2.push(0.0);
            g2.push(row.into_iter().map(|v| -v).collect());
            h2.push(0.0);
        }
        let mut unit = vec![0.0; ns];
        unit[i] = 1.0;
        g2.push(unit);
        h2.push(1.0);
    }
    let lcp = kkt_lcp(ns, &vec![0.0; ns * ns], &red.c, &g2, &h2);
    let LcpOutcome::Solved { z } = solve_lcp(&lcp)? else {
        return Err(Error::Numerical("recession problem reported a ray".into()));
    };
    let mut sol = QpSolution::empty(problem, QpStatus::Unbounded);
    sol.ray = Some(red.direction_of(&z[..ns]));
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub pass: bool,
}

/// Measures how far a candidate is from satisfying the KKT conditions.
pub fn check_kkt(problem: &QpProblem, sol: &QpSolution, tol: f64) -> KktReport {
    let x = &sol.x;
    let mut primal = 0.0f64;
    let mut dual = 0.0f64;
    let mut comp = 0.0f64;
    let dot = |row: &SparseRow| row.iter().map(|&(j, a)| a * x[j]).sum::<f64>();
    for (row, b) in problem.eq_rows.iter().zip(&problem.eq_rhs) {
        primal = primal.max((dot(row) - b).abs());
    }
    for ((row, b), &mu) in problem.in_rows.iter().zip(&problem.in_rhs).zip(&sol.ineq_duals) {
        let slack = b - dot(row);
        primal = primal.max(-slack);
        dual = dual.max(-mu);
        comp = comp.max(mu.min(slack.max(0.0)).max(0.0));
    }
    for j in 0..problem.n() {
        let (l, u) = (problem.lower[j], problem.upper[j]);
        primal = primal.max(l - x[j]).max(x[j] - u);
        let (zu, zl) = (sol.upper_duals[j], sol.lower_duals[j]);
        dual = dual.max(-zu).max(-zl);
        comp = comp.max(zu.min((u - x[j]).max(0.0)).max(0.0));
        comp = comp.max(zl.min((x[j] - l).max(0.0)).max(0.0));
    }
    let resid = reduced_gradient(problem, x, &sol.eq_duals, &sol.ineq_duals);
    let stationarity = resid
        .iter()
        .enumerate()
        .map(|(j, r)| (r - sol.upper_duals[j] + sol.lower_duals[j]).abs())
        .fold(0.0, f64::max);
    let pass = stationarity <= tol && primal <= tol && dual <= tol && comp <= tol;
    KktReport {
        stationarity,
        primal,
        dual,
        complementarity: comp,
        pass,
    }
}
