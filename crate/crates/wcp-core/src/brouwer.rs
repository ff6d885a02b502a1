//! Finite-dimensional Brouwer degree on boxes: sum of Jacobian signs over
//! the preimages of a regular value, found by dense multistart Newton.
//! Dimension is capped at 4; the infinite-dimensional product law is
//! represented through the property tests of this engine.

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::halton;

#[derive(Debug, Clone)]
pub struct DegreeOptions {
    pub starts: usize,
    pub newton_tol: f64,
    pub dedup_radius: f64,
    pub boundary_margin: f64,
    /// Regularity threshold: |det J| at a root must exceed this times the
    /// Jacobian scale.
    pub regularity: f64,
    pub seed: u64,
}

impl Default for DegreeOptions {
    fn default() -> Self {
        DegreeOptions {
            starts: 800,
            newton_tol: 1e-11,
            dedup_radius: 1e-6,
            boundary_margin: 1e-9,
            regularity: 1e-8,
            seed: 0,
        }
    }
}

fn fd_jacobian<F>(f: &F, x: &[f64], scale: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let h = 1e-6 * scale.max(1.0);
    let mut jac = vec![0.0; n * n];
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let fp = f(&xp);
        let fm = f(&xm);
        for i in 0..n {
            jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

fn inside(x: &[f64], boxes: &[(f64, f64)], slack: f64) -> bool {
    x.iter()
        .zip(boxes.iter())
        .all(|(v, (lo, hi))| *v >= lo - slack && *v <= hi + slack)
}

/// Brouwer degree of `f` on the product box at `target`.
///
/// Errors when `f - target` vanishes on the boundary, when a preimage has
/// a near-singular Jacobian (target not regular), or when the dimension
/// exceeds 4.
pub fn brouwer_degree<F>(
    f: F,
    boxes: &[(f64, f64)],
    target: &[f64],
    opts: &DegreeOptions,
) -> Result<i64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = boxes.len();
    if n == 0 || n > 4 {
        return Err(Error::InvalidArgument(format!(
            "degree engine handles dimensions 1..=4, got {n}"
        )));
    }
    if target.len() != n {
        return Err(Error::InvalidArgument("target dimension mismatch".into()));
    }
    let g = |x: &[f64]| -> Vec<f64> {
        f(x).iter().zip(target.iter()).map(|(a, b)| a - b).collect()
    };
    let diam: f64 = boxes.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);

    // Boundary check: sample every face on a grid.
    let mut min_boundary = f64::INFINITY;
    let grid = 9usize;
    for fixed in 0..n {
        for &side in &[0usize, 1] {
            let m = grid.pow((n - 1) as u32);
            for idx in 0..m {
                let mut x = vec![0.0; n];
                let mut rem = idx;
                for d in 0..n {
                    if d == fixed {
                        x[d] = if side == 0 { boxes[d].0 } else { boxes[d].1 };
                    } else {
                        let k = rem % grid;
                        rem /= grid;
                        x[d] = boxes[d].0
                            + (boxes[d].1 - boxes[d].0) * (k as f64 + 0.5) / grid as f64;
                    }
                }
                let v = g(&x);
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                min_boundary = min_boundary.min(norm);
            }
        }
    }
    if min_boundary < opts.boundary_margin {
        return Err(Error::BoundaryZero(min_boundary));
    }

    // Multistart Newton.
    let mut roots: Vec<Vec<f64>> = Vec::new();
    let mut signs: Vec<i64> = Vec::new();
    'starts: for s in 0..opts.starts {
        let h = halton(opts.seed.wrapping_add(s as u64), n);
        let mut x: Vec<f64> = (0..n)
            .map(|d| boxes[d].0 + (boxes[d].1 - boxes[d].0) * h[d])
            .collect();
        for _ in 0..60 {
            let v = g(&x);
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm <= opts.newton_tol {
                break;
            }
            let jac = fd_jacobian(&g, &x, diam);
            let rhs: Vec<f64> = v.iter().map(|a| -a).collect();
            let Some(step) = linalg::lu_solve(&jac, &rhs, n) else {
                continue 'starts;
            };
            let step_norm: f64 = step.iter().map(|a| a * a).sum::<f64>().sqrt();
            let clamp = if step_norm > 0.25 * diam { 0.25 * diam / step_norm } else { 1.0 };
            for d in 0..n {
                x[d] += clamp * step[d];
            }
            if !inside(&x, boxes, 0.5 * diam) {
                continue 'starts;
            }
        }
        let v = g(&x);
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > opts.newton_tol {
            continue;
        }
        if !inside(&x, boxes, 0.0) {
            continue;
        }
        if roots.iter().any(|r| {
            r.iter()
                .zip(x.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                < opts.dedup_radius * diam.max(1.0)
        }) {
            continue;
        }
        let jac = fd_jacobian(&g, &x, diam);
        let det = linalg::determinant(&jac, n);
        let scale: f64 = jac.iter().map(|a| a.abs()).fold(0.0, f64::max).powi(n as i32);
        if det.abs() < opts.regularity * scale.max(1e-300) {
            return Err(Error::NotRegularValue(format!(
                "|det J| = {:.3e} at root {:?}",
                det.abs(),
                x
            )));
        }
        roots.push(x);
        signs.push(if det > 0.0 { 1 } else { -1 });
    }
    Ok(signs.iter().sum())
}
