//! The finite-dimensional reduction in the concentration scales: the
//! reduced energy over the bubble scale parameters, its gradient, the
//! damped Newton solver for the unique stationary configuration, and the
//! leading-order amplitude estimate.
//!
//! For a positive-definite interaction matrix `M` the reduced energy is
//!
//! ```text
//! F(l) = 1/2 sum_{jk} M_jk / (l_j l_k) + sum_k (pi^2 tau / (4 K_k)) log l_k
//! ```
//!
//! which is strictly convex in `s = 1/l`, so Newton in `s` converges to
//! the unique zero of the gradient; the solution scales like `tau^{-1/2}`.

use crate::error::{Error, Result};
use crate::fd::{Field, Grid, SubLaplacian};
use crate::linalg;

/// Largest admissible subcritical defect.
pub const TAU_MAX: f64 = 0.5;
/// `int U^4 = pi^2 / 4` enters the gradient as a fixed constant.
pub const U4_INTEGRAL: f64 = std::f64::consts::PI * std::f64::consts::PI / 4.0;
/// Band constant for the amplitude estimate `|a_k - 2/sqrt(K_k)| <=
/// C tau^{1/2} |log tau|`.
pub const AMPLITUDE_BAND_C: f64 = 1.0;

/// Reduced problem data for a subset of critical points with `mu(M) > 0`.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    /// Row-major symmetric interaction matrix of the subset.
    pub matrix: Vec<f64>,
    pub n: usize,
    /// Curvature values at the subset points.
    pub k_values: Vec<f64>,
    /// Subcritical defect `tau = 3 - p`.
    pub tau: f64,
    /// Box constant `A` of the admissible scale window
    /// `(A^{-1} tau^{-1/2}, A tau^{-1/2})`.
    pub box_a: f64,
    /// Amplitude window half-width.
    pub box_eps: f64,
}

impl ReducedProblem {
    pub fn new(matrix: Vec<f64>, k_values: Vec<f64>, tau: f64) -> Result<Self> {
        let n = k_values.len();
        if matrix.len() != n * n || n == 0 {
            return Err(Error::InvalidArgument("matrix/K dimension mismatch".into()));
        }
        if !(0.0 < tau && tau <= TAU_MAX) {
            return Err(Error::InvalidArgument(format!(
                "tau must lie in (0, {TAU_MAX}], got {tau}"
            )));
        }
        let (mu, _) = linalg::least_eigenpair(&matrix, n);
        if mu <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "reduced problem requires mu(M) > 0, got {mu:.6e}"
            )));
        }
        if k_values.iter().any(|&k| k <= 0.0) {
            return Err(Error::InvalidArgument("curvature values must be positive".into()));
        }
        Ok(ReducedProblem { matrix, n, k_values, tau, box_a: 10.0, box_eps: 0.5 })
    }

    /// Admissible scale window `(A^{-1} tau^{-1/2}, A tau^{-1/2})`.
    pub fn lambda_box(&self) -> (f64, f64) {
        let s = self.tau.sqrt();
        (1.0 / (self.box_a * s), self.box_a / s)
    }
}

/// Gradient of the reduced energy:
/// `g_k = -(1/l_k^2) sum_j M_kj / l_j + (pi^2/4) tau / (K_k l_k)`.
pub fn reduced_gradient(lambda: &[f64], prob: &ReducedProblem) -> Vec<f64> {
    let n = prob.n;
    let mut g = vec![0.0; n];
    for k in 0..n {
        let mut coupling = 0.0;
        for j in 0..n {
            coupling += prob.matrix[k * n + j] / lambda[j];
        }
        g[k] = -coupling / (lambda[k] * lambda[k])
            + U4_INTEGRAL * prob.tau / (prob.k_values[k] * lambda[k]);
    }
    g
}

/// Reduced energy value.
pub fn reduced_energy(lambda: &[f64], prob: &ReducedProblem) -> f64 {
    let n = prob.n;
    let mut quad = 0.0;
    for j in 0..n {
        for k in 0..n {
            quad += prob.matrix[j * n + k] / (lambda[j] * lambda[k]);
        }
    }
    let mut log_part = 0.0;
    for k in 0..n {
        log_part += U4_INTEGRAL * prob.tau / (4.0 * prob.k_values[k]) * 4.0 * lambda[k].ln();
    }
    0.5 * quad + log_part
}

/// Solution of the reduced problem.
#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub lambdas: Vec<f64>,
    /// Leading-order amplitudes `2 / sqrt(K_k)`.
    pub amplitudes: Vec<f64>,
    /// Least eigenvalue of the energy Hessian in the convexity
    /// coordinates `s = 1/lambda` at the solution (strictly positive).
    pub hessian_min_eig: f64,
    /// `lambda_k tau^{1/2}`, the scale-free coordinates that stabilize as
    /// `tau -> 0`.
    pub scaled_lambdas: Vec<f64>,
}

/// Damped Newton for the unique zero of the reduced gradient, run in the
/// coordinates `s = 1/lambda` where the Hessian is `M + diag(c_k/s_k^2)`,
/// positive definite whenever `mu(M) > 0`. Starts at `lambda = tau^{-1/2}`.
pub fn solve_reduced(prob: &ReducedProblem) -> Result<ReducedSolution> {
    solve_reduced_from(prob, &vec![prob.tau.sqrt(); prob.n])
}

/// [`solve_reduced`] from a caller-chosen starting point in `s = 1/lambda`
/// coordinates; strict convexity makes every start land on the same zero.
pub fn solve_reduced_from(prob: &ReducedProblem, s0: &[f64]) -> Result<ReducedSolution> {
    let n = prob.n;
    let c: Vec<f64> = prob
        .k_values
        .iter()
        .map(|&k| U4_INTEGRAL * prob.tau / k)
        .collect();
    // grad_s F = M s - c_k / s_k.
    let mut s = s0.to_vec();
    let grad = |s: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let ms: f64 = (0..n).map(|j| prob.matrix[k * n + j] * s[j]).sum();
                ms - c[k] / s[k]
            })
            .collect()
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut trace = Vec::new();
    let scale = norm(&grad(&vec![prob.tau.sqrt(); n])).max(1e-300);
    for _ in 0..200 {
        let g = grad(&s);
        let gn = norm(&g);
        trace.push(gn);
        if gn <= 1e-14 * scale.max(1.0) {
            // Assemble the outputs.
            let lambdas: Vec<f64> = s.iter().map(|&x| 1.0 / x).collect();
            let mut hess = prob.matrix.clone();
            for k in 0..n {
                hess[k * n + k] += c[k] / (s[k] * s[k]);
            }
            let (hmin, _) = linalg::least_eigenpair(&hess, n);
            let amplitudes = prob.k_values.iter().map(|&k| 2.0 / k.sqrt()).collect();
            let scaled = lambdas.iter().map(|&l| l * prob.tau.sqrt()).collect();
            return Ok(ReducedSolution {
                lambdas,
                amplitudes,
                hessian_min_eig: hmin,
                scaled_lambdas: scaled,
            });
        }
        let mut hess = prob.matrix.clone();
        for k in 0..n {
            hess[k * n + k] += c[k] / (s[k] * s[k]);
        }
        let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
        let Some(step) = linalg::lu_solve(&hess, &rhs, n) else {
            return Err(Error::NewtonDiverged {
                context: "singular reduced Hessian".into(),
                trace,
            });
        };
        // Damping keeps every s_k positive and the gradient decreasing.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = s.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
            if cand.iter().all(|&x| x > 0.0) && norm(&grad(&cand)) < gn {
                s = cand;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged {
                context: "line search stalled on the reduced gradient".into(),
                trace,
            });
        }
    }
    Err(Error::NewtonDiverged { context: "reduced Newton iteration cap".into(), trace })
}

/// Leading-order amplitudes with the guaranteed error band
/// `C tau^{1/2} |log tau|` carried alongside.
pub fn amplitude_estimate(prob: &ReducedProblem) -> Vec<(f64, f64)> {
    let band = AMPLITUDE_BAND_C * prob.tau.sqrt() * prob.tau.ln().abs();
    prob.k_values.iter().map(|&k| (2.0 / k.sqrt(), band)).collect()
}

/// Subcritical functional `J_tau(u) = 1/2 int u L u - 1/(4 - tau) int K
/// |u|^{4-tau}` on the solver grid, with the discrete operator and the
/// grid volume element.
pub fn functional_value(
    u: &Field,
    tau: f64,
    k_field: &Field,
    op: &SubLaplacian,
    grid: &Grid,
) -> f64 {
    let lu = op.apply_l(u);
    let w = grid.hx * grid.hy * grid.ht;
    let mut quad = 0.0;
    let mut pot = 0.0;
    let p1 = 4.0 - tau;
    for i in 0..u.values.len() {
        quad += u.values[i] * lu.values[i];
        pot += k_field.values[i] * u.values[i].abs().powf(p1);
    }
    0.5 * quad * w - pot * w / p1
}
