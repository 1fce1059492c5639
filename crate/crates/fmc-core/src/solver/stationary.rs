//! Stationary distributions of sparse row-stochastic chains.
//!
//! Small chains get a direct linear solve on `(P^T - I)` with the
//! normalization row replaced; larger ones (or direct-solve failures, e.g.
//! numerically awkward reducible chains) fall back to damped power iteration.

use crate::error::SolveError;
use crate::linalg;

pub(crate) struct StationaryOptions {
    pub direct_threshold: usize,
    pub residual_tol: f64,
    pub max_iters: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        // The residual is driven well below the documented 1e-10 contract so
        // that stationary averages of O(10) rewards stay accurate to 1e-8.
        StationaryOptions {
            direct_threshold: 600,
            residual_tol: 1e-12,
            max_iters: 5_000_000,
        }
    }
}

/// Max-norm residual `||x P - x||_inf`.
fn residual(rows: &[&[(usize, f64)]], x: &[f64]) -> f64 {
    let y = multiply(rows, x);
    x.iter()
        .zip(&y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn multiply(rows: &[&[(usize, f64)]], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (s, row) in rows.iter().enumerate() {
        let mass = x[s];
        if mass == 0.0 {
            continue;
        }
        for &(t, p) in *row {
            y[t] += mass * p;
        }
    }
    y
}

fn normalize(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    if total > 0.0 {
        for v in x.iter_mut() {
            *v /= total;
        }
    }
}

fn solve_direct(rows: &[&[(usize, f64)]]) -> Option<Vec<f64>> {
    let n = rows.len();
    // (P^T - I) x = 0 with the last equation replaced by sum(x) = 1.
    let mut a = vec![vec![0.0; n]; n];
    for (s, row) in rows.iter().enumerate() {
        for &(t, p) in *row {
            a[t][s] += p;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= 1.0;
    }
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut x = linalg::solve(a, b)?;
    if x.iter().any(|v| !v.is_finite() || *v < -1e-8) {
        return None;
    }
    normalize(&mut x);
    Some(x)
}

/// Computes the stationary distribution of the chain given as sparse rows.
pub(crate) fn stationary(
    rows: &[&[(usize, f64)]],
    warm: Option<&[f64]>,
    opts: &StationaryOptions,
) -> Result<Vec<f64>, SolveError> {
    let n = rows.len();

    let mut start = None;
    if n <= opts.direct_threshold {
        if let Some(x) = solve_direct(rows) {
            if residual(rows, &x) < opts.residual_tol {
                return Ok(x);
            }
            start = Some(x);
        }
    }

    // Damped power iteration: x <- (x + xP)/2 keeps the fixed points of P
    // and is immune to periodicity.
    let mut x = match (start, warm) {
        (Some(x), _) => x,
        (None, Some(w)) if w.len() == n => {
            let mut x = w.to_vec();
            normalize(&mut x);
            if x.iter().sum::<f64>() == 0.0 {
                x = vec![1.0 / n as f64; n];
            }
            x
        }
        _ => vec![1.0 / n as f64; n],
    };

    let mut iters = 0usize;
    loop {
        let y = multiply(rows, &x);
        let resid = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if resid < opts.residual_tol {
            normalize(&mut x);
            return Ok(x);
        }
        iters += 1;
        if iters > opts.max_iters {
            return Err(SolveError::StationaryNotConverged {
                iters,
                residual: resid,
            });
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = 0.5 * (*xi + *yi);
        }
        normalize(&mut x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_two_state_chain() {
        let r0 = vec![(0usize, 0.5), (1usize, 0.5)];
        let r1 = vec![(0usize, 0.5), (1usize, 0.5)];
        let rows: Vec<&[(usize, f64)]> = vec![&r0, &r1];
        let pi = stationary(&rows, None, &StationaryOptions::default()).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-10);
        assert!((pi[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn periodic_chain_converges_with_damping() {
        let r0 = vec![(1usize, 1.0)];
        let r1 = vec![(0usize, 1.0)];
        let rows: Vec<&[(usize, f64)]> = vec![&r0, &r1];
        let opts = StationaryOptions {
            direct_threshold: 0,
            ..StationaryOptions::default()
        };
        let pi = stationary(&rows, None, &opts).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn chain_with_transient_state() {
        // State 0 drains into the 1<->2 recurrent pair.
        let r0 = vec![(1usize, 0.6), (2usize, 0.4)];
        let r1 = vec![(1usize, 0.3), (2usize, 0.7)];
        let r2 = vec![(1usize, 0.8), (2usize, 0.2)];
        let rows: Vec<&[(usize, f64)]> = vec![&r0, &r1, &r2];
        let pi = stationary(&rows, None, &StationaryOptions::default()).unwrap();
        assert!(pi[0].abs() < 1e-10);
        // pi_1 * 0.7 = pi_2 * 0.8.
        assert!((pi[1] * 0.7 - pi[2] * 0.8).abs() < 1e-9);
    }

    #[test]
    fn residual_meets_tolerance() {
        let r0 = vec![(0usize, 0.9), (1usize, 0.1)];
        let r1 = vec![(0usize, 0.2), (1usize, 0.8)];
        let rows: Vec<&[(usize, f64)]> = vec![&r0, &r1];
        let pi = stationary(&rows, None, &StationaryOptions::default()).unwrap();
        assert!(residual(&rows, &pi) < 1e-10);
    }
}
