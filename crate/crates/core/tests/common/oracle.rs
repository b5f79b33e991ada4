//! Independent reference computations used only by tests.

fn loss(beta: f64, r: f64) -> f64 {
    if r >= 0.0 {
        beta * r
    } else {
        (beta - 1.0) * r
    }
}

fn objective(beta: f64, x: &[Vec<f64>], y: &[f64], coef: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, &t)| {
            let fit = coef[0] + row.iter().zip(&coef[1..]).map(|(a, b)| a * b).sum::<f64>();
            loss(beta, t - fit)
        })
        .sum()
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        let pivot = a[c].clone();
        for r in (c + 1)..n {
            let f = a[r][c] / pivot[c];
            for (v, p) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                *v -= f * p;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        subsets(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Minimum pinball objective over every vertex (coefficients interpolating
/// `m + 1` observations). Exact for full-column-rank designs.
pub fn vertex_enumeration(beta: f64, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len();
    let q = x.first().map_or(0, Vec::len) + 1;
    let mut all = Vec::new();
    subsets(n, q, 0, &mut Vec::new(), &mut all);
    let mut best = f64::INFINITY;
    for h in all {
        let a: Vec<Vec<f64>> = h
            .iter()
            .map(|&i| std::iter::once(1.0).chain(x[i].iter().copied()).collect())
            .collect();
        let b: Vec<f64> = h.iter().map(|&i| y[i]).collect();
        if let Some(coef) = solve_dense(a, b) {
            best = best.min(objective(beta, x, y, &coef));
        }
    }
    best
}

/// Best objective reached by normalized subgradient descent with a
/// diminishing step.
pub fn subgradient_descent(beta: f64, x: &[Vec<f64>], y: &[f64], iters: usize) -> f64 {
    let q = x.first().map_or(0, Vec::len) + 1;
    let n = y.len();
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut coef = vec![0.0; q];
    coef[0] = sorted[((n - 1) as f64 * beta) as usize];
    let scale = y.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let mut best = objective(beta, x, y, &coef);
    for k in 0..iters {
        let mut g = vec![0.0; q];
        for (row, &t) in x.iter().zip(y) {
            let fit = coef[0] + row.iter().zip(&coef[1..]).map(|(a, b)| a * b).sum::<f64>();
            let psi = if t - fit > 0.0 { -beta } else { 1.0 - beta };
            g[0] += psi;
            for (gj, v) in g[1..].iter_mut().zip(row) {
                *gj += psi * v;
            }
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let step = 0.5 * scale / ((k + 1) as f64).sqrt() / norm;
        for (c, gj) in coef.iter_mut().zip(&g) {
            *c -= step * gj;
        }
        best = best.min(objective(beta, x, y, &coef));
    }
    best
}

/// `k`-th smallest of `scores ∪ {+∞}` with `k = ⌈(num/den)(n + 1)⌉`, using
/// integer arithmetic for `k` and counting instead of sorting for the
/// selection.
pub fn augmented_order_statistic(scores: &[f64], num: u64, den: u64) -> f64 {
    let n = scores.len() as u64;
    let k = (num * (n + 1)).div_ceil(den);
    if k == 0 {
        return f64::NEG_INFINITY;
    }
    if k > n {
        return f64::INFINITY;
    }
    for &v in scores {
        let below = scores.iter().filter(|&&s| s < v).count() as u64;
        let at_most = scores.iter().filter(|&&s| s <= v).count() as u64;
        if below < k && k <= at_most {
            return v;
        }
    }
    unreachable!("some score holds rank {k}")
}

/// Standard deviation, in percent, of the mean of `size` independent
/// Bernoulli(`p`) draws.
pub fn binomial_percent_std(p: f64, size: usize) -> f64 {
    (p * (1.0 - p) / size as f64).sqrt() * 100.0
}
