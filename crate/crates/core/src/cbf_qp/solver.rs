//! Dual active-set solver for the projection problem
//!
//! ```text
//! minimize ½‖u − target‖²   subject to   a_k · u ≥ b_k,  k = 1..m
//! ```
//!
//! Identity-Hessian specialization of the Goldfarb–Idnani method. It starts
//! at the unconstrained optimum and repeatedly adds the most violated row,
//! dropping rows whose multiplier would turn negative. Every iterate keeps
//! `u − target = Σ μ_k a_k` with `μ ≥ 0`. Directions are split against the
//! active rows through a thin QR factorization, which stays accurate when
//! rows are close to dependent (rigid clusters of safety pairs produce
//! exactly such rows).

use nalgebra::{DMatrix, DVector};

/// Normalized violation `(b − a·u)/‖a‖` treated as satisfied.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-10;

/// Relative size of the null-space component below which a row is
/// considered linearly dependent on the active set. Anything smaller than
/// this is rounding noise and would produce an absurdly long primal step.
const DEPENDENCE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SolveFailure {
    /// Indices of a subset of rows with no common feasible point.
    Infeasible(Vec<usize>),
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct Projection {
    pub u: DVector<f64>,
    /// Active row indices, ascending.
    pub active: Vec<usize>,
    /// Multipliers aligned with `active`.
    pub multipliers: Vec<f64>,
}

pub(crate) fn project(
    target: &DVector<f64>,
    rows: &[&DVector<f64>],
    bounds: &[f64],
) -> Result<Projection, SolveFailure> {
    debug_assert_eq!(rows.len(), bounds.len());
    let norms: Vec<f64> = rows.iter().map(|a| a.norm()).collect();

    for (k, &norm) in norms.iter().enumerate() {
        if norm == 0.0 && bounds[k] > FEASIBILITY_TOLERANCE {
            return Err(SolveFailure::Infeasible(vec![k]));
        }
    }

    let mut u = target.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut mu: Vec<f64> = Vec::new();
    let max_iterations = 50 * (rows.len() + target.len()) + 100;
    let mut iterations = 0;

    'outer: loop {
        // Most violated row, lowest index on ties.
        let mut pick: Option<(usize, f64)> = None;
        for (k, a) in rows.iter().enumerate() {
            if norms[k] == 0.0 || active.contains(&k) {
                continue;
            }
            let violation = (bounds[k] - a.dot(&u)) / norms[k];
            if violation > FEASIBILITY_TOLERANCE && pick.is_none_or(|(_, best)| violation > best) {
                pick = Some((k, violation));
            }
        }
        let Some((p, _)) = pick else {
            break;
        };

        let a_p = rows[p];
        let mut mu_p = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iterations {
                return Err(SolveFailure::IterationLimit);
            }

            let (z, r) = split_direction(a_p, rows, &active);
            let slack = bounds[p] - a_p.dot(&u);
            let dependent = z.norm() <= DEPENDENCE_TOLERANCE * norms[p];

            // Largest dual step before an active multiplier hits zero.
            let mut blocking: Option<(usize, f64)> = None;
            for (slot, &r_j) in r.iter().enumerate() {
                if r_j > 0.0 {
                    let t = mu[slot].max(0.0) / r_j;
                    if blocking.is_none_or(|(_, best)| t < best) {
                        blocking = Some((slot, t));
                    }
                }
            }

            if dependent {
                let Some((slot, t)) = blocking else {
                    let mut culprits: Vec<usize> = active
                        .iter()
                        .zip(r.iter())
                        .filter(|(_, &r_j)| r_j < 0.0)
                        .map(|(&k, _)| k)
                        .collect();
                    culprits.push(p);
                    culprits.sort_unstable();
                    return Err(SolveFailure::Infeasible(culprits));
                };
                for (m, r_j) in mu.iter_mut().zip(r.iter()) {
                    *m -= t * r_j;
                }
                mu_p += t;
                active.remove(slot);
                mu.remove(slot);
                continue;
            }

            // z is orthogonal to the active rows, so z·a_p = ‖z‖² exactly.
            let primal_step = slack / z.norm_squared();
            let (step, full) = match blocking {
                Some((_, t)) if t < primal_step => (t, false),
                _ => (primal_step, true),
            };
            u.axpy(step, &z, 1.0);
            for (m, r_j) in mu.iter_mut().zip(r.iter()) {
                *m -= step * r_j;
            }
            mu_p += step;

            if full {
                let at = active.partition_point(|&k| k < p);
                active.insert(at, p);
                mu.insert(at, mu_p);
                continue 'outer;
            }
            let (slot, _) = blocking.expect("partial step implies a blocking row");
            active.remove(slot);
            mu.remove(slot);
        }
    }

    for m in &mut mu {
        *m = m.max(0.0);
    }
    Ok(Projection {
        u,
        active,
        multipliers: mu,
    })
}

/// Splits `a_p = z + A_Wᵀ r` with `z` orthogonal to the active rows.
fn split_direction(
    a_p: &DVector<f64>,
    rows: &[&DVector<f64>],
    active: &[usize],
) -> (DVector<f64>, Vec<f64>) {
    if active.is_empty() {
        return (a_p.clone(), Vec::new());
    }
    let n = a_p.len();
    let k = active.len();
    let basis = DMatrix::from_fn(n, k, |row, col| rows[active[col]][row]);
    let qr = basis.qr();
    let q = qr.q();
    let coords = q.tr_mul(a_p);
    let r = qr
        .r()
        .solve_upper_triangular(&coords)
        .unwrap_or_else(|| DVector::zeros(k));
    let z = a_p - q * coords;
    (z, r.iter().copied().collect())
}
