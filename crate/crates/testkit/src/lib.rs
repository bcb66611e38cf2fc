//! Independent reference oracles for the leafrep test suites.
//!
//! Everything here works on dense matrices and plain slices and shares no
//! code with the solvers it checks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// `1/2 a'Qa - sum a`.
pub fn svm_objective(q: &[Vec<f64>], a: &[f64]) -> f64 {
    0.5 * quad(q, a) - a.iter().sum::<f64>()
}

/// `1/2 a'Qa + sum a log a + (C - a) log(C - a)`, with `0 log 0 = 0`.
pub fn klr_objective(q: &[Vec<f64>], a: &[f64], c: f64) -> f64 {
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    0.5 * quad(q, a) + a.iter().map(|&ai| xlogx(ai) + xlogx(c - ai)).sum::<f64>()
}

fn quad(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let qa = matvec(q, a);
    a.iter().zip(&qa).map(|(x, y)| x * y).sum()
}

fn matvec(q: &[Vec<f64>], a: &[f64]) -> Vec<f64> {
    q.iter()
        .map(|row| row.iter().zip(a).map(|(x, y)| x * y).sum())
        .collect()
}

fn to_matrix(m: &[Vec<f64>]) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j])
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    if m.is_empty() {
        return vec![];
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(to_matrix(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &[Vec<f64>]) -> f64 {
    eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// `Q_ij = y_i y_j G_ij`.
pub fn signed_gram(gram: &[Vec<f64>], y: &[i8]) -> Vec<Vec<f64>> {
    gram.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &g)| (y[i] * y[j]) as f64 * g)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub alphas: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Largest projected-gradient magnitude at the returned point.
    pub violation: f64,
}

/// Box-constrained SVM dual by accelerated projected gradient (step `1/L`,
/// `L = lambda_max(Q)`) with gradient-based momentum restarts.
pub fn svm_dual_pgd(q: &[Vec<f64>], c: f64) -> OracleSolution {
    let n = q.len();
    let lipschitz = max_eigenvalue(q);
    if lipschitz <= 1e-300 {
        let alphas = vec![c; n];
        return OracleSolution {
            objective: svm_objective(q, &alphas),
            alphas,
            iterations: 0,
            violation: 0.0,
        };
    }
    let step = 1.0 / lipschitz;
    let grad = |a: &[f64]| -> Vec<f64> { matvec(q, a).into_iter().map(|g| g - 1.0).collect() };
    let violation = |a: &[f64]| -> f64 {
        grad(a)
            .iter()
            .zip(a)
            .map(|(&g, &ai)| {
                if ai <= 0.0 {
                    g.min(0.0).abs()
                } else if ai >= c {
                    g.max(0.0).abs()
                } else {
                    g.abs()
                }
            })
            .fold(0.0, f64::max)
    };

    let mut x = vec![0.0; n];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    while iterations < 2_000_000 {
        iterations += 1;
        let g = grad(&y);
        let x_next: Vec<f64> = y
            .iter()
            .zip(&g)
            .map(|(yi, gi)| (yi - step * gi).clamp(0.0, c))
            .collect();
        // restart momentum when it points uphill
        let uphill: f64 = g
            .iter()
            .zip(x_next.iter().zip(&x))
            .map(|(gi, (xn, xo))| gi * (xn - xo))
            .sum();
        let t_next = if uphill > 0.0 {
            1.0
        } else {
            (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
        };
        let beta = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        y = x_next
            .iter()
            .zip(&x)
            .map(|(xn, xo)| (xn + beta * (xn - xo)).clamp(0.0, c))
            .collect();
        x = x_next;
        t = t_next;
        if iterations % 50 == 0 && violation(&x) <= 1e-9 {
            break;
        }
    }
    OracleSolution {
        objective: svm_objective(q, &x),
        violation: violation(&x),
        alphas: x,
        iterations,
    }
}

/// KLR dual by damped Newton with Armijo backtracking. The Hessian
/// `Q + diag(C / (a (C - a)))` is positive definite on the open box; steps are
/// capped to stay strictly inside `(0, C)`.
pub fn klr_dual_pgd(q: &[Vec<f64>], c: f64) -> OracleSolution {
    let n = q.len();
    let grad = |a: &[f64]| -> Vec<f64> {
        matvec(q, a)
            .into_iter()
            .zip(a)
            .map(|(qa, &ai)| qa + ai.ln() - (c - ai).ln())
            .collect()
    };
    let mut a = vec![c / 2.0; n];
    let mut f = klr_objective(q, &a, c);
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    while iterations < 10_000 {
        iterations += 1;
        let g = grad(&a);
        violation = g.iter().fold(0.0, |m, x| m.max(x.abs()));
        if violation <= 1e-11 {
            break;
        }
        let mut h = to_matrix(q);
        for i in 0..n {
            h[(i, i)] += c / (a[i] * (c - a[i]));
        }
        let rhs = DVector::from_iterator(n, g.iter().map(|x| -x));
        let dir: Vec<f64> = match h.clone().cholesky() {
            Some(ch) => ch.solve(&rhs).iter().copied().collect(),
            None => (0..n).map(|i| rhs[i] / h[(i, i)]).collect(),
        };
        // fraction-to-boundary cap
        let mut t = a
            .iter()
            .zip(&dir)
            .map(|(&ai, &di)| match di {
                d if d < 0.0 => -0.99 * ai / d,
                d if d > 0.0 => 0.99 * (c - ai) / d,
                _ => f64::INFINITY,
            })
            .fold(1.0, f64::min);
        let slope: f64 = g.iter().zip(&dir).map(|(x, y)| x * y).sum();
        loop {
            let cand: Vec<f64> = a.iter().zip(&dir).map(|(ai, di)| ai + t * di).collect();
            let fc = klr_objective(q, &cand, c);
            if fc <= f + 1e-4 * t * slope || t < 1e-20 {
                a = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
    }
    OracleSolution {
        alphas: a,
        objective: f,
        iterations,
        violation,
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svm_oracle_identity_q() {
        let q = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let s = svm_dual_pgd(&q, 100.0);
        assert!((s.alphas[0] - 1.0).abs() < 1e-10);
        assert!((s.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn klr_oracle_scalar() {
        // n = 1, Q = 0: minimum of a log a + (C - a) log(C - a) is at C/2
        let s = klr_dual_pgd(&[vec![0.0]], 2.0);
        assert!((s.alphas[0] - 1.0).abs() < 1e-10);
        // n = 1, Q = q: root of q a + log(a / (C - a)) = 0
        let s = klr_dual_pgd(&[vec![3.0]], 1.0);
        let a = s.alphas[0];
        assert!((3.0 * a + (a / (1.0 - a)).ln()).abs() < 1e-10);
    }

    #[test]
    fn eigen_of_diag() {
        let m = vec![vec![2.0, 0.0], vec![0.0, -1.0]];
        assert_eq!(eigenvalues(&m), vec![-1.0, 2.0]);
    }
}
