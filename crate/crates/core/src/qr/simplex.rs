//! Exact minimization of the summed pinball loss.
//!
//! The problem `min_λ Σ ρ_β(y_i − z_iᵀλ)` is a linear program whose vertices
//! are the coefficient vectors interpolating `q` observations (a "basis").
//! The solver walks from vertex to vertex along edges of strictly negative
//! directional derivative, stepping each time to the minimizer of the convex
//! piecewise-linear loss along that edge (a weighted median of the
//! breakpoints). Targets receive a deterministic perturbation far below data
//! resolution so that no vertex is degenerate; the final coefficients are
//! recomputed from the optimal basis with the unperturbed targets.

use crate::error::{Error, Result};
use crate::seed::splitmix;

/// Relative size of the tie-breaking perturbation applied to the targets.
const PERTURBATION: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct VertexSolution {
    /// Coefficients over the columns of the (full-rank) design.
    pub coef: Vec<f64>,
    /// Row indices interpolated by the optimal vertex.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

/// Row-major `n × q` design.
pub(crate) struct Design<'a> {
    pub data: &'a [f64],
    pub n: usize,
    pub q: usize,
}

impl Design<'_> {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }
}

/// Columns that are linearly independent of the preceding ones, scanning
/// left to right.
pub(crate) fn independent_columns(data: &[f64], n: usize, p: usize) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for j in 0..p {
        let mut v: Vec<f64> = (0..n).map(|i| data[i * p + j]).collect();
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            continue;
        }
        // two passes of Gram-Schmidt for stability
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                v.iter_mut().zip(b).for_each(|(a, c)| *a -= dot * c);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 * norm0 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
            keep.push(j);
        }
    }
    keep
}

/// Inverse of a `q × q` row-major matrix by Gauss-Jordan with partial pivoting.
fn invert(mat: &[f64], q: usize) -> Option<Vec<f64>> {
    let mut a = mat.to_vec();
    let mut inv = vec![0.0; q * q];
    for i in 0..q {
        inv[i * q + i] = 1.0;
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..q {
        let piv = (col..q)
            .max_by(|&r1, &r2| a[r1 * q + col].abs().total_cmp(&a[r2 * q + col].abs()))
            .unwrap();
        if a[piv * q + col].abs() <= 1e-13 * scale {
            return None;
        }
        if piv != col {
            for k in 0..q {
                a.swap(piv * q + k, col * q + k);
                inv.swap(piv * q + k, col * q + k);
            }
        }
        let d = a[col * q + col];
        for k in 0..q {
            a[col * q + k] /= d;
            inv[col * q + k] /= d;
        }
        for r in 0..q {
            if r != col {
                let f = a[r * q + col];
                if f != 0.0 {
                    for k in 0..q {
                        a[r * q + k] -= f * a[col * q + k];
                        inv[r * q + k] -= f * inv[col * q + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Picks `q` rows spanning the row space, preferring `preferred` rows first and
/// then, greedily, the row farthest from the span of those already chosen.
fn starting_basis(design: &Design, preferred: &[usize]) -> Option<Vec<usize>> {
    let q = design.q;
    let mut chosen: Vec<usize> = Vec::with_capacity(q);
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(q);

    let residual = |ortho: &[Vec<f64>], row: &[f64]| -> (Vec<f64>, f64, f64) {
        let mut v = row.to_vec();
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _ in 0..2 {
            for b in ortho {
                let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                v.iter_mut().zip(b).for_each(|(a, c)| *a -= dot * c);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (v, norm, norm0)
    };

    for &i in preferred {
        if chosen.len() == q {
            break;
        }
        if i >= design.n || chosen.contains(&i) {
            continue;
        }
        let (mut v, norm, norm0) = residual(&ortho, design.row(i));
        if norm0 > 0.0 && norm > 1e-6 * norm0 {
            v.iter_mut().for_each(|a| *a /= norm);
            ortho.push(v);
            chosen.push(i);
        }
    }
    while chosen.len() < q {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..design.n {
            if chosen.contains(&i) {
                continue;
            }
            let (_, norm, norm0) = residual(&ortho, design.row(i));
            if norm0 == 0.0 {
                continue;
            }
            let rel = norm / norm0;
            if best.is_none_or(|(_, b)| rel > b) {
                best = Some((i, rel));
            }
        }
        let (i, rel) = best?;
        if rel <= 1e-9 {
            return None;
        }
        let (mut v, norm, _) = residual(&ortho, design.row(i));
        v.iter_mut().for_each(|a| *a /= norm);
        ortho.push(v);
        chosen.push(i);
    }
    Some(chosen)
}

fn basis_matrix(design: &Design, basis: &[usize]) -> Vec<f64> {
    let q = design.q;
    let mut b = Vec::with_capacity(q * q);
    for &i in basis {
        b.extend_from_slice(design.row(i));
    }
    b
}

/// Solves `B λ = target[basis]` given `B⁻¹`.
fn vertex(binv: &[f64], q: usize, basis: &[usize], target: &[f64]) -> Vec<f64> {
    (0..q)
        .map(|r| (0..q).map(|c| binv[r * q + c] * target[basis[c]]).sum())
        .collect()
}

pub(crate) fn solve(
    design: &Design,
    y: &[f64],
    beta: f64,
    warm_basis: &[usize],
) -> Result<VertexSolution> {
    let (n, q) = (design.n, design.q);
    if n < q {
        return Err(Error::InsufficientHistory {
            required: q,
            available: n,
        });
    }

    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let target: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let u = (splitmix(i as u64) >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            v + PERTURBATION * scale * u
        })
        .collect();

    let mut basis = starting_basis(design, warm_basis).ok_or(Error::SolverFailure {
        iterations: 0,
        objective: f64::NAN,
    })?;
    let mut binv = match invert(&basis_matrix(design, &basis), q) {
        Some(b) => b,
        None => {
            basis = starting_basis(design, &[]).ok_or(Error::SolverFailure {
                iterations: 0,
                objective: f64::NAN,
            })?;
            invert(&basis_matrix(design, &basis), q).ok_or(Error::SolverFailure {
                iterations: 0,
                objective: f64::NAN,
            })?
        }
    };

    let max_iter = 50 * n + 1000;
    let mut in_basis = vec![usize::MAX; n];
    let mut resid = vec![0.0; n];
    // a[i * q + k] = z_iᵀ (column k of B⁻¹)
    let mut dirs = vec![0.0; n * q];
    let mut breaks: Vec<(f64, f64, usize)> = Vec::with_capacity(n);

    for iter in 0..max_iter {
        in_basis.iter_mut().for_each(|v| *v = usize::MAX);
        for (k, &i) in basis.iter().enumerate() {
            in_basis[i] = k;
        }
        let lambda = vertex(&binv, q, &basis, &target);
        for i in 0..n {
            let row = design.row(i);
            resid[i] = if in_basis[i] != usize::MAX {
                0.0
            } else {
                target[i] - row.iter().zip(&lambda).map(|(a, b)| a * b).sum::<f64>()
            };
            for k in 0..q {
                dirs[i * q + k] = if in_basis[i] != usize::MAX {
                    if in_basis[i] == k {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (0..q).map(|c| row[c] * binv[c * q + k]).sum()
                };
            }
        }

        // Directional derivative along each of the 2q edges.
        let mut best: Option<(f64, usize, f64)> = None;
        for k in 0..q {
            for s in [1.0, -1.0] {
                let mut deriv = 0.0;
                let mut mass = 0.0;
                for i in 0..n {
                    let a = s * dirs[i * q + k];
                    if a == 0.0 {
                        continue;
                    }
                    mass += a.abs();
                    let r = resid[i];
                    deriv += if r > 0.0 || (r == 0.0 && a < 0.0) {
                        -beta * a
                    } else {
                        (1.0 - beta) * a
                    };
                }
                let tol = 1e-11 * (1.0 + mass);
                if deriv < -tol && best.is_none_or(|(d, _, _)| deriv / mass < d) {
                    best = Some((deriv / mass, k, s));
                }
            }
        }

        let Some((_, k, s)) = best else {
            let coef = vertex(&binv, q, &basis, y);
            return Ok(VertexSolution {
                coef,
                basis,
                iterations: iter,
            });
        };

        let mut slope = 0.0;
        breaks.clear();
        let mut amax = 0.0f64;
        for i in 0..n {
            let a = s * dirs[i * q + k];
            if a == 0.0 {
                continue;
            }
            amax = amax.max(a.abs());
            let r = resid[i];
            slope += if r > 0.0 || (r == 0.0 && a < 0.0) {
                -beta * a
            } else {
                (1.0 - beta) * a
            };
            if r != 0.0 && (r > 0.0) == (a > 0.0) {
                breaks.push((r / a, a.abs(), i));
            }
        }
        breaks.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(&y.2)));

        let mut entering = None;
        for &(_, w, i) in &breaks {
            slope += w;
            if slope >= 0.0 && w > 1e-12 * amax {
                entering = Some(i);
                break;
            }
        }
        let Some(entering) = entering else {
            return Err(Error::SolverFailure {
                iterations: iter,
                objective: f64::NAN,
            });
        };

        let mut next = basis.clone();
        next[k] = entering;
        match invert(&basis_matrix(design, &next), q) {
            Some(b) => {
                basis = next;
                binv = b;
            }
            None => {
                return Err(Error::SolverFailure {
                    iterations: iter,
                    objective: f64::NAN,
                })
            }
        }
    }

    let coef = vertex(&binv, q, &basis, y);
    let objective = (0..n)
        .map(|i| {
            let r = y[i]
                - design
                    .row(i)
                    .iter()
                    .zip(&coef)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            if r >= 0.0 {
                beta * r
            } else {
                (beta - 1.0) * r
            }
        })
        .sum();
    Err(Error::SolverFailure {
        iterations: max_iter,
        objective,
    })
}
