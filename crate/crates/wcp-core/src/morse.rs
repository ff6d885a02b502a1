//! Critical-point analysis of curvature candidates on the sphere backend:
//! locations, Morse indices, sublaplacian values, mass constants, and the
//! nondegeneracy conditions entering the degree formula.

use crate::error::{Error, Result};
use crate::heisenberg::HPoint;
use crate::linalg;
use crate::rng::sphere_points;
use crate::sphere::{self, Chart, ManifoldFn, SpherePoint};

/// Threshold below which a tangent Hessian eigenvalue counts as
/// degenerate, relative to the largest one.
const DEGENERACY_RATIO: f64 = 1e-8;
/// Chordal deduplication radius for critical points.
const DEDUP_RADIUS: f64 = 1e-6;
/// Number of deterministic multistart seeds.
const MULTISTART: usize = 200;

/// A nondegenerate critical point of `K` with the data the interaction
/// matrix needs.
#[derive(Debug, Clone)]
pub struct CritPoint {
    pub location: SpherePoint,
    pub k_value: f64,
    /// Norm of the tangential gradient at the accepted point.
    pub grad_residual: f64,
    /// Eigenvalues of the tangent Hessian, ascending.
    pub hessian_eigs: [f64; 3],
    /// Number of negative Hessian eigenvalues.
    pub morse_index: usize,
    /// Sublaplacian of `K` at the point.
    pub delta_b_k: f64,
    /// Green-expansion constant `A_p` at the point.
    pub mass: f64,
}

/// Value of the first nondegeneracy condition at a critical point:
/// `-Delta_b K / K - 32 A_p`. The caller treats values near zero as a
/// hypothesis violation.
pub fn condition_one(cp: &CritPoint) -> f64 {
    -cp.delta_b_k / cp.k_value - 32.0 * cp.mass
}

/// Orthonormal tangent basis at `q`, deterministic in `q`.
fn tangent_basis(q: &SpherePoint) -> [[f64; 4]; 3] {
    // Start from the coordinate axes least aligned with q.
    let mut axes: Vec<usize> = (0..4).collect();
    axes.sort_by(|&a, &b| q.c[a].abs().partial_cmp(&q.c[b].abs()).unwrap());
    let mut basis = [[0.0; 4]; 3];
    let mut count = 0;
    for &ax in &axes {
        if count == 3 {
            break;
        }
        let mut v = [0.0; 4];
        v[ax] = 1.0;
        let dot: f64 = (0..4).map(|i| v[i] * q.c[i]).sum();
        for i in 0..4 {
            v[i] -= dot * q.c[i];
        }
        for b in basis.iter().take(count) {
            let d: f64 = (0..4).map(|i| v[i] * b[i]).sum();
            for i in 0..4 {
                v[i] -= d * b[i];
            }
        }
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-8 {
            continue;
        }
        for x in &mut v {
            *x /= n;
        }
        basis[count] = v;
        count += 1;
    }
    basis
}

/// Tangential gradient of `K` at `q`.
fn tangent_gradient(k: &ManifoldFn, q: &SpherePoint) -> [f64; 4] {
    let g = k.grad(q.c);
    let radial: f64 = (0..4).map(|i| g[i] * q.c[i]).sum();
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = g[i] - radial * q.c[i];
    }
    out
}

fn norm4(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Tangent Hessian of the restriction of `K` to the sphere in the given
/// orthonormal basis: `P (H - (q . grad K) I) P`.
fn tangent_hessian(k: &ManifoldFn, q: &SpherePoint, basis: &[[f64; 4]; 3]) -> [f64; 9] {
    let h = k.hess(q.c);
    let g = k.grad(q.c);
    let radial: f64 = (0..4).map(|i| g[i] * q.c[i]).sum();
    let mut out = [0.0; 9];
    for a in 0..3 {
        for b in 0..3 {
            let mut v = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    v += basis[a][i] * h[i][j] * basis[b][j];
                }
            }
            let delta: f64 = (0..4).map(|i| basis[a][i] * basis[b][i]).sum();
            out[a * 3 + b] = v - radial * delta;
        }
    }
    out
}

/// One Riemannian Newton step toward a critical point; returns the new
/// point or `None` when the reduced Hessian is singular.
fn newton_step(k: &ManifoldFn, q: &SpherePoint) -> Option<SpherePoint> {
    let basis = tangent_basis(q);
    let gt_full = tangent_gradient(k, q);
    let gt: Vec<f64> = (0..3)
        .map(|a| (0..4).map(|i| basis[a][i] * gt_full[i]).sum::<f64>())
        .collect();
    let ht = tangent_hessian(k, q, &basis);
    let rhs: Vec<f64> = gt.iter().map(|x| -x).collect();
    let delta = linalg::lu_solve(&ht, &rhs, 3)?;
    // Clamp overly long steps to stay on the right hemisphere.
    let step: f64 = delta.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = if step > 0.5 { 0.5 / step } else { 1.0 };
    let mut c = q.c;
    for i in 0..4 {
        for (a, b) in basis.iter().enumerate() {
            c[i] += scale * delta[a] * b[i];
        }
    }
    SpherePoint::new(c).ok()
}

/// Multistart Riemannian Newton for the critical points of `K`, with the
/// deterministic low-discrepancy start set shifted by `seed`, dedup, a
/// dense-scan completeness cross-check, and per-point validation.
///
/// Errors: `K` nonpositive somewhere, a degenerate critical point
/// ("not Morse"), a Morse-inconsistent point count, or scan evidence of a
/// missed critical point.
pub fn find_critical_points_seeded(k: &ManifoldFn, seed: u64) -> Result<Vec<CritPoint>> {
    let min_k = k.min_on_sample(10_000);
    if min_k <= 0.0 {
        return Err(Error::KNotPositive(min_k));
    }
    // Scale of the gradient used for convergence thresholds.
    let scan = sphere_points(20_000, seed.wrapping_add(1));
    let mut grad_scale = 0.0_f64;
    for c in &scan {
        let q = SpherePoint { c: *c };
        grad_scale = grad_scale.max(norm4(&tangent_gradient(k, &q)));
    }
    if grad_scale < 1e-14 {
        return Err(Error::NotMorse("gradient vanishes identically (constant K)".into()));
    }
    let tol = 1e-13 * grad_scale.max(1.0);

    // Multistart set: low-discrepancy seeds plus the best scan candidates.
    let mut starts: Vec<SpherePoint> = sphere_points(MULTISTART, seed)
        .into_iter()
        .map(|c| SpherePoint { c })
        .collect();
    let mut ranked: Vec<(f64, usize)> = scan
        .iter()
        .enumerate()
        .map(|(i, c)| (norm4(&tangent_gradient(k, &SpherePoint { c: *c })), i))
        .collect();
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for &(_, i) in ranked.iter().take(100) {
        starts.push(SpherePoint { c: scan[i] });
    }

    let mut found: Vec<SpherePoint> = Vec::new();
    'starts: for start in starts {
        let mut q = start;
        let mut res = norm4(&tangent_gradient(k, &q));
        for _ in 0..80 {
            if res <= tol {
                break;
            }
            let Some(next) = newton_step(k, &q) else {
                continue 'starts;
            };
            let next_res = norm4(&tangent_gradient(k, &next));
            // Plain step; fall back to a damped move when it worsens badly.
            if next_res < 10.0 * res || res > 0.1 * grad_scale {
                q = next;
                res = next_res;
            } else {
                continue 'starts;
            }
        }
        if res > tol {
            continue;
        }
        if !found.iter().any(|p| p.chordal(&q) < DEDUP_RADIUS) {
            found.push(q);
        }
    }

    // Completeness: any scan point with a tiny gradient must lie near an
    // accepted critical point.
    for c in &scan {
        let q = SpherePoint { c: *c };
        let g = norm4(&tangent_gradient(k, &q));
        if g < 1e-4 * grad_scale && !found.iter().any(|p| p.chordal(&q) < 0.1) {
            return Err(Error::NotMorse(format!(
                "dense scan found unexplained near-critical point at {:?} (|grad| = {g:.3e})",
                q.c
            )));
        }
    }

    // Deterministic report order: by K value descending, then coordinates.
    found.sort_by(|a, b| {
        let ka = k.eval_sphere(a);
        let kb = k.eval_sphere(b);
        kb.partial_cmp(&ka)
            .unwrap()
            .then(a.c.partial_cmp(&b.c).unwrap())
    });

    let mut out = Vec::with_capacity(found.len());
    for q in found {
        let basis = tangent_basis(&q);
        let ht = tangent_hessian(k, &q, &basis);
        let (eigs, _) = linalg::jacobi_eigen(&ht, 3);
        let max_eig = eigs.iter().map(|e| e.abs()).fold(0.0, f64::max);
        if eigs.iter().any(|e| e.abs() < DEGENERACY_RATIO * max_eig) || max_eig == 0.0 {
            return Err(Error::NotMorse(format!(
                "degenerate Hessian spectrum {eigs:?} at {:?}",
                q.c
            )));
        }
        let morse_index = eigs.iter().filter(|&&e| e < 0.0).count();
        let delta_b_k = sphere::sublaplacian_sphere(k, &q);
        let mass = sphere::mass_constant(&q)?.constant_term;
        out.push(CritPoint {
            location: q,
            k_value: k.eval_sphere(&q),
            grad_residual: norm4(&tangent_gradient(k, &q)),
            hessian_eigs: [eigs[0], eigs[1], eigs[2]],
            morse_index,
            delta_b_k,
            mass,
        });
    }

    // Morse consistency: the alternating index sum equals the Euler
    // characteristic of S^3, which vanishes.
    let euler: i64 = out.iter().map(|c| if c.morse_index % 2 == 0 { 1 } else { -1 }).sum();
    if euler != 0 {
        return Err(Error::NotMorse(format!(
            "index count violates Morse consistency (alternating sum {euler}, {} points)",
            out.len()
        )));
    }
    Ok(out)
}

/// [`find_critical_points_seeded`] with the default seed.
pub fn find_critical_points(k: &ManifoldFn) -> Result<Vec<CritPoint>> {
    find_critical_points_seeded(k, 0)
}

/// Blow-up gradient products `|grad K(x_i)| * M_i` for peaks located in
/// chart coordinates; bounded along a genuine blow-up family.
pub fn gradient_diagnostic(
    peaks: &[(HPoint, f64)],
    k: &ManifoldFn,
    chart: &Chart,
) -> Vec<f64> {
    peaks
        .iter()
        .map(|&(x, m)| {
            let q = chart.from_heisenberg(x);
            norm4(&tangent_gradient(k, &q)) * m
        })
        .collect()
}
