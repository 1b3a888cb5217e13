//! Operator-splitting (ADMM) solver for box-constrained convex QPs:
//!
//!   min 1/2 x^T P x + q^T x   s.t.   l <= A x <= u
//!
//! Fixed iteration cap, fixed step parameter. Rows with l == u are treated
//! as equalities and get a 1e3-times larger step weight, fixed at setup, so
//! equality residuals reach the tolerance without adaptive restarts.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct QpOpts {
    pub max_iterations: usize,
    /// Primal/dual residual tolerance (infinity norm).
    pub tolerance: f64,
    /// Step parameter rho.
    pub rho: f64,
}

impl Default for QpOpts {
    fn default() -> Self {
        Self {
            max_iterations: 4000,
            tolerance: 1e-6,
            rho: 0.1,
        }
    }
}

#[derive(Debug, Error)]
pub enum QpError {
    #[error("qp dimensions are inconsistent")]
    Dimensions,
    #[error("qp matrix is not positive semidefinite enough to factor")]
    Factorization,
    #[error("qp did not converge: primal residual {primal:.3e}, dual residual {dual:.3e} after {iterations} iterations")]
    NotConverged {
        primal: f64,
        dual: f64,
        iterations: usize,
    },
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

const SIGMA: f64 = 1e-6;
const EQUALITY_RHO_SCALE: f64 = 1e3;
const RELAXATION: f64 = 1.6;

/// Solve the QP; `warm_start` seeds the primal iterate (zeros otherwise).
/// Fails only when residuals still exceed 1e3 * tolerance at the iteration
/// cap; residuals between tolerance and that slack are reported as a
/// (successful) low-accuracy solution.
pub fn qp_solve(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    opts: &QpOpts,
    warm_start: Option<&DVector<f64>>,
) -> Result<QpSolution, QpError> {
    let n = p.nrows();
    let m = a.nrows();
    if p.ncols() != n || q.len() != n || (m > 0 && a.ncols() != n) || l.len() != m || u.len() != m {
        return Err(QpError::Dimensions);
    }

    // Per-row step weights, fixed at setup.
    let rho_vec = DVector::from_iterator(
        m,
        (0..m).map(|i| {
            if l[i] == u[i] {
                EQUALITY_RHO_SCALE * opts.rho
            } else {
                opts.rho
            }
        }),
    );

    // K = P + sigma I + A^T R A
    let mut k = p.clone();
    for i in 0..n {
        k[(i, i)] += SIGMA;
    }
    if m > 0 {
        let mut ra = a.clone();
        for i in 0..m {
            for j in 0..n {
                ra[(i, j)] *= rho_vec[i];
            }
        }
        k += a.transpose() * ra;
    }
    let chol = k.cholesky().ok_or(QpError::Factorization)?;

    let mut x = warm_start.cloned().unwrap_or_else(|| DVector::zeros(n));
    if x.len() != n {
        return Err(QpError::Dimensions);
    }
    let clamp = |v: &mut DVector<f64>| {
        for i in 0..m {
            v[i] = v[i].clamp(l[i], u[i]);
        }
    };
    let mut z = if m > 0 { a * &x } else { DVector::zeros(0) };
    clamp(&mut z);
    let mut y = DVector::zeros(m);

    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = 0;
    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        // x-update: K x~ = sigma x - q + A^T (R z - y)
        let mut rhs = x.scale(SIGMA) - q;
        if m > 0 {
            let rz = z.component_mul(&rho_vec) - &y;
            rhs += a.transpose() * rz;
        }
        let x_tilde = chol.solve(&rhs);

        if m > 0 {
            let z_tilde = a * &x_tilde;
            let z_relaxed = z_tilde.scale(RELAXATION) + z.scale(1.0 - RELAXATION);
            let mut z_next = &z_relaxed + y.component_div(&rho_vec);
            clamp(&mut z_next);
            y += (z_relaxed - &z_next).component_mul(&rho_vec);
            z = z_next;
        }
        x = x_tilde.scale(RELAXATION) + x.scale(1.0 - RELAXATION);

        primal = if m > 0 { (a * &x - &z).amax() } else { 0.0 };
        let mut grad = p * &x + q;
        if m > 0 {
            grad += a.transpose() * &y;
        }
        dual = grad.amax();

        if primal < opts.tolerance && dual < opts.tolerance {
            return Ok(QpSolution {
                x,
                primal_residual: primal,
                dual_residual: dual,
                iterations,
            });
        }
    }

    // At the cap: accept mild residuals, reject anything worse.
    if primal <= 1e3 * opts.tolerance && dual <= 1e3 * opts.tolerance {
        Ok(QpSolution {
            x,
            primal_residual: primal,
            dual_residual: dual,
            iterations,
        })
    } else {
        Err(QpError::NotConverged {
            primal,
            dual,
            iterations,
        })
    }
}
