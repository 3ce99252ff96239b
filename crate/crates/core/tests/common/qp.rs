use dayahead::qp::QpProblem;

/// Random concave QP that is feasible by construction: rows are built to be
/// satisfied by a known interior point.
pub fn random_qp(n: usize, seed: &[f64]) -> QpProblem {
    let mut it = seed.iter().cycle().copied();
    let mut next = move || it.next().unwrap();
    let mut p = QpProblem::new();
    let x0: Vec<f64> = (0..n).map(|_| 4.0 * next() - 2.0).collect();
    for &v in &x0 {
        let kind = (next() * 4.0) as usize;
        let (l, u) = match kind {
            0 => (v - 1.0 - 3.0 * next(), v + 1.0 + 3.0 * next()),
            1 => (v - 1.0 - 3.0 * next(), f64::INFINITY),
            2 => (f64::NEG_INFINITY, v + 1.0 + 3.0 * next()),
            _ => (v - 2.0, v + 2.0),
        };
        let d = if next() < 0.3 { 0.0 } else { -4.0 * next() };
        p.add_var(l, u, 10.0 * next() - 5.0, d);
    }
    let m_in = (next() * 6.0) as usize;
    let m_eq = (next() * 3.0) as usize;
    for k in 0..m_in + m_eq {
        let mut row = Vec::new();
        for j in 0..n {
            if next() < 0.4 {
                row.push((j, 4.0 * next() - 2.0));
            }
        }
        let ax: f64 = row.iter().map(|&(j, a)| a * x0[j]).sum();
        if k < m_in {
            p.add_le(row, ax + 2.0 * next());
        } else {
            p.add_eq(row, ax);
        }
    }
    // keep the objective bounded: box every zero-curvature free direction
    for j in 0..n {
        if p.quadratic[j] == 0.0 {
            if !p.lower[j].is_finite() {
                p.lower[j] = x0[j] - 10.0;
            }
            if !p.upper[j].is_finite() {
                p.upper[j] = x0[j] + 10.0;
            }
        }
    }
    p
}

/// Best grid point over the box, zooming in around the incumbent.
pub fn grid_search(p: &QpProblem) -> f64 {
    let n = p.n();
    let mut lo = p.lower.clone();
    let mut hi = p.upper.clone();
    let steps = 20usize;
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    for _ in 0..40 {
        let h: Vec<f64> = (0..n).map(|j| (hi[j] - lo[j]) / steps as f64).collect();
        for k in 0..(steps + 1).pow(n as u32) {
            let mut rem = k;
            let x: Vec<f64> = (0..n)
                .map(|j| {
                    let i = rem % (steps + 1);
                    rem /= steps + 1;
                    (lo[j] + h[j] * i as f64).min(p.upper[j])
                })
                .collect();
            let f = p.objective(&x);
            if f > best.0 {
                best = (f, x);
            }
        }
        for j in 0..n {
            lo[j] = (best.1[j] - 2.0 * h[j]).max(p.lower[j]);
            hi[j] = (best.1[j] + 2.0 * h[j]).min(p.upper[j]);
        }
    }
    best.0
}

/// Exhaustive search over faces: maximize on the affine hull of every set of
/// at most `n` active constraints and keep the best feasible candidate.
pub fn face_enumeration(p: &QpProblem) -> f64 {
    let n = p.n();
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, &b) in p.in_rows.iter().zip(&p.in_rhs) {
        let mut a = vec![0.0; n];
        row.iter().for_each(|&(j, v)| a[j] += v);
        cons.push((a, b));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        cons.push((a.clone(), p.upper[j]));
        a[j] = -1.0;
        cons.push((a, -p.lower[j]));
    }
    let m = cons.len();
    let feasible = |x: &[f64]| {
        cons.iter()
            .all(|(a, b)| a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() <= b + 1e-9)
    };
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << m) {
        let act: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if act.len() > n {
            continue;
        }
        // KKT of max c'x + 1/2 x'Dx subject to A_S x = b_S
        let k = act.len();
        let mut kkt = nalgebra::DMatrix::<f64>::zeros(n + k, n + k);
        let mut rhs = nalgebra::DVector::<f64>::zeros(n + k);
        for j in 0..n {
            kkt[(j, j)] = p.quadratic[j];
            rhs[j] = -p.linear[j];
        }
        for (r, &i) in act.iter().enumerate() {
            for j in 0..n {
                kkt[(j, n + r)] = -cons[i].0[j];
                kkt[(n + r, j)] = cons[i].0[j];
            }
            rhs[n + r] = cons[i].1;
        }
        if let Some(sol) = kkt.lu().solve(&rhs) {
            let x: Vec<f64> = sol.iter().take(n).copied().collect();
            if x.iter().all(|v| v.is_finite()) && feasible(&x) {
                best = best.max(p.objective(&x));
            }
        }
    }
    best
}

