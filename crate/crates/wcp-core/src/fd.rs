//! Hypoelliptic finite differences on a Heisenberg box: the expanded
//! second-order stencil for the sublaplacian, Dirichlet solves, damped
//! Newton continuation in the subcritical exponent, the first eigenpair
//! and the linearized spectral check, and blow-up diagnostics for
//! solution families.

use crate::bubble;
use crate::error::{Error, Result};
use crate::heisenberg::{self, HPoint, KAPPA};
use crate::linalg;
use std::io::{Read, Write};

/// Heisenberg box grid, node-centered including the boundary.
#[derive(Debug, Clone)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub hx: f64,
    pub hy: f64,
    pub ht: f64,
    /// Coordinates of the first node.
    pub x0: f64,
    pub y0: f64,
    pub t0: f64,
}

impl Grid {
    /// Grid over `[-xh, xh] x [-yh, yh] x [-th, th]`.
    pub fn new(xh: f64, yh: f64, th: f64, nx: usize, ny: usize, nt: usize) -> Result<Self> {
        if nx < 3 || ny < 3 || nt < 3 {
            return Err(Error::InvalidArgument("need at least 3 nodes per axis".into()));
        }
        Ok(Grid {
            nx,
            ny,
            nt,
            hx: 2.0 * xh / (nx - 1) as f64,
            hy: 2.0 * yh / (ny - 1) as f64,
            ht: 2.0 * th / (nt - 1) as f64,
            x0: -xh,
            y0: -yh,
            t0: -th,
        })
    }

    /// Grid matched to the parabolic dilations: `ht = hx^2` exactly, the
    /// t-extent derived from the node count. Rescaling by `d_s` then maps
    /// grid-aligned points to grid-aligned points of the rescaled grid.
    pub fn dilation_matched(xh: f64, yh: f64, nx: usize, ny: usize, nt: usize) -> Result<Self> {
        let hx = 2.0 * xh / (nx - 1) as f64;
        let ht = hx * hx;
        let th = 0.5 * ht * (nt - 1) as f64;
        Grid::new(xh, yh, th, nx, ny, nt)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ny + j) * self.nx + i
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> HPoint {
        HPoint::new(
            self.x0 + i as f64 * self.hx,
            self.y0 + j as f64 * self.hy,
            self.t0 + k as f64 * self.ht,
        )
    }

    pub fn is_interior(&self, i: usize, j: usize, k: usize) -> bool {
        i > 0 && i < self.nx - 1 && j > 0 && j < self.ny - 1 && k > 0 && k < self.nt - 1
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nt
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element of one node.
    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy * self.ht
    }

    /// Whether the anisotropic matching `ht = hx^2 * (t extent / x
    /// extent^2)` holds to rounding; true by construction for
    /// [`Grid::dilation_matched`].
    pub fn is_dilation_matched(&self) -> bool {
        (self.ht - self.hx * self.hx).abs() < 1e-12 * self.ht
    }
}

/// Node values over a full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Field { values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(HPoint) -> f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        for k in 0..grid.nt {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    values[grid.idx(i, j, k)] = f(grid.point(i, j, k));
                }
            }
        }
        Field { values }
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Trilinear interpolation; clamps to the box.
    pub fn interp(&self, grid: &Grid, p: HPoint) -> f64 {
        let fx = ((p.x - grid.x0) / grid.hx).clamp(0.0, (grid.nx - 1) as f64 - 1e-9);
        let fy = ((p.y - grid.y0) / grid.hy).clamp(0.0, (grid.ny - 1) as f64 - 1e-9);
        let ft = ((p.t - grid.t0) / grid.ht).clamp(0.0, (grid.nt - 1) as f64 - 1e-9);
        let (i, j, k) = (fx as usize, fy as usize, ft as usize);
        let (ax, ay, at) = (fx - i as f64, fy - j as f64, ft - k as f64);
        let mut out = 0.0;
        for (dk, wt) in [(0, 1.0 - at), (1, at)] {
            for (dj, wy) in [(0, 1.0 - ay), (1, ay)] {
                for (di, wx) in [(0, 1.0 - ax), (1, ax)] {
                    out += wt * wy * wx * self.values[grid.idx(i + di, j + dj, k + dk)];
                }
            }
        }
        out
    }
}

/// Discrete sublaplacian: expanded stencil rows for interior nodes with
/// the cross terms `4y d_xt`, `-4x d_yt` and the coefficient
/// `4(x^2+y^2) d_tt`, all scaled by the calibrated `KAPPA`. Entries are
/// split into interior-column and boundary-column parts so Dirichlet data
/// folds into right-hand sides; the interior block is exactly symmetric.
#[derive(Debug, Clone)]
pub struct SubLaplacian {
    pub grid: Grid,
    /// Full index of each interior unknown.
    interior: Vec<u32>,
    /// Interior number of a full index, or -1.
    interior_no: Vec<i32>,
    rows_int: Vec<Vec<(u32, f64)>>,
    rows_bnd: Vec<Vec<(u32, f64)>>,
    /// Diagonal of `L = -4 Delta` per interior unknown (positive).
    diag_l: Vec<f64>,
}

/// Assemble the discrete sublaplacian on a grid.
pub fn discretize_sublaplacian(grid: &Grid) -> SubLaplacian {
    let mut interior = Vec::new();
    let mut interior_no = vec![-1i32; grid.len()];
    for k in 1..grid.nt - 1 {
        for j in 1..grid.ny - 1 {
            for i in 1..grid.nx - 1 {
                let full = grid.idx(i, j, k);
                interior_no[full] = interior.len() as i32;
                interior.push(full as u32);
            }
        }
    }
    let n = interior.len();
    let mut rows_int = vec![Vec::with_capacity(15); n];
    let mut rows_bnd = vec![Vec::new(); n];
    let mut diag_l = vec![0.0; n];
    let (hx, hy, ht) = (grid.hx, grid.hy, grid.ht);
    let mut row = 0usize;
    for k in 1..grid.nt - 1 {
        for j in 1..grid.ny - 1 {
            for i in 1..grid.nx - 1 {
                let p = grid.point(i, j, k);
                let ctt = 4.0 * (p.x * p.x + p.y * p.y);
                let cxt = 4.0 * p.y / (4.0 * hx * ht);
                let cyt = -4.0 * p.x / (4.0 * hy * ht);
                let mut push = |ii: usize, jj: usize, kk: usize, c: f64| {
                    if c == 0.0 {
                        return;
                    }
                    let full = grid.idx(ii, jj, kk);
                    let coeff = KAPPA * c;
                    if interior_no[full] >= 0 {
                        rows_int[row].push((interior_no[full] as u32, coeff));
                    } else {
                        rows_bnd[row].push((full as u32, coeff));
                    }
                };
                // d_xx + d_yy + ctt d_tt
                push(i, j, k, -2.0 / (hx * hx) - 2.0 / (hy * hy) - 2.0 * ctt / (ht * ht));
                push(i - 1, j, k, 1.0 / (hx * hx));
                push(i + 1, j, k, 1.0 / (hx * hx));
                push(i, j - 1, k, 1.0 / (hy * hy));
                push(i, j + 1, k, 1.0 / (hy * hy));
                push(i, j, k - 1, ctt / (ht * ht));
                push(i, j, k + 1, ctt / (ht * ht));
                // 4y d_xt cross stencil
                push(i + 1, j, k + 1, cxt);
                push(i - 1, j, k - 1, cxt);
                push(i + 1, j, k - 1, -cxt);
                push(i - 1, j, k + 1, -cxt);
                // -4x d_yt cross stencil
                push(i, j + 1, k + 1, cyt);
                push(i, j - 1, k - 1, cyt);
                push(i, j + 1, k - 1, -cyt);
                push(i, j - 1, k + 1, -cyt);
                diag_l[row] =
                    -4.0 * KAPPA * (-2.0 / (hx * hx) - 2.0 / (hy * hy) - 2.0 * ctt / (ht * ht));
                row += 1;
            }
        }
    }
    SubLaplacian { grid: grid.clone(), interior, interior_no, rows_int, rows_bnd, diag_l }
}

impl SubLaplacian {
    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    /// `Delta_h v` on interior unknowns, boundary treated as zero.
    pub fn apply_delta_interior(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (r, row) in self.rows_int.iter().enumerate() {
            let mut acc = 0.0;
            for &(c, a) in row {
                acc += a * v[c as usize];
            }
            out[r] = acc;
        }
        out
    }

    /// Boundary contribution `Delta_h` rows applied to Dirichlet data.
    pub fn boundary_delta(&self, g: &Field) -> Vec<f64> {
        let mut out = vec![0.0; self.n_interior()];
        for (r, row) in self.rows_bnd.iter().enumerate() {
            let mut acc = 0.0;
            for &(c, a) in row {
                acc += a * g.values[c as usize];
            }
            out[r] = acc;
        }
        out
    }

    /// Full-field `Delta_h u` (zero on boundary rows).
    pub fn apply_delta(&self, u: &Field) -> Field {
        let mut out = vec![0.0; self.grid.len()];
        for (r, row) in self.rows_int.iter().enumerate() {
            let mut acc = 0.0;
            for &(c, a) in row {
                acc += a * u.values[self.interior[c as usize] as usize];
            }
            for &(c, a) in &self.rows_bnd[r] {
                acc += a * u.values[c as usize];
            }
            out[self.interior[r] as usize] = acc;
        }
        Field { values: out }
    }

    /// Full-field `L u = -4 Delta_h u` (zero on boundary rows).
    pub fn apply_l(&self, u: &Field) -> Field {
        let mut out = self.apply_delta(u);
        for v in &mut out.values {
            *v *= -4.0;
        }
        out
    }

    /// Interior restriction of a full field.
    pub fn restrict(&self, u: &Field) -> Vec<f64> {
        self.interior.iter().map(|&f| u.values[f as usize]).collect()
    }

    /// Assemble a full field from interior values plus Dirichlet data.
    pub fn embed(&self, v: &[f64], boundary: &Field) -> Field {
        let mut out = boundary.clone();
        for (r, &full) in self.interior.iter().enumerate() {
            out.values[full as usize] = v[r];
        }
        out
    }

    /// Discrete inner product with the volume weight, interior vectors.
    pub fn dot_w(&self, a: &[f64], b: &[f64]) -> f64 {
        let w = self.grid.cell_volume();
        a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>() * w
    }

    /// Solve `L x = rhs` (interior, zero Dirichlet) by conjugate
    /// gradients with symmetric diagonal scaling.
    pub fn solve_l(&self, rhs: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n = self.n_interior();
        let d: Vec<f64> = self.diag_l.iter().map(|&x| x.abs().sqrt().recip()).collect();
        // Scaled operator: A~ = D^-1/2 L D^-1/2.
        let apply = |v: &[f64]| -> Vec<f64> {
            let scaled: Vec<f64> = v.iter().zip(d.iter()).map(|(x, s)| x * s).collect();
            let mut out = self.apply_delta_interior(&scaled);
            for (o, s) in out.iter_mut().zip(d.iter()) {
                *o *= -4.0 * s;
            }
            out
        };
        let b: Vec<f64> = rhs.iter().zip(d.iter()).map(|(x, s)| x * s).collect();
        let y = cg(&apply, &b, tol, max_iter)?;
        Ok((0..n).map(|i| y[i] * d[i]).collect())
    }

    /// Solve the symmetric (possibly indefinite) system
    /// `(L - diag(shift)) x = rhs` by MINRES with diagonal scaling from L.
    pub fn solve_shifted(
        &self,
        shift: &[f64],
        rhs: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<Vec<f64>> {
        let n = self.n_interior();
        let d: Vec<f64> = self.diag_l.iter().map(|&x| x.abs().sqrt().recip()).collect();
        let apply = |v: &[f64]| -> Vec<f64> {
            let scaled: Vec<f64> = v.iter().zip(d.iter()).map(|(x, s)| x * s).collect();
            let mut out = self.apply_delta_interior(&scaled);
            for i in 0..n {
                out[i] = (-4.0 * out[i] - shift[i] * scaled[i]) * d[i];
            }
            out
        };
        let b: Vec<f64> = rhs.iter().zip(d.iter()).map(|(x, s)| x * s).collect();
        let y = minres(&apply, &b, tol, max_iter)?;
        Ok((0..n).map(|i| y[i] * d[i]).collect())
    }
}

/// Plain conjugate gradients for a symmetric positive definite operator.
pub fn cg(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(b, b).sqrt().max(1e-300);
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::LinearSolve(format!(
                "CG met nonpositive curvature {pap:.3e}; operator not positive definite"
            )));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    if rr.sqrt() <= tol * bnorm * 10.0 {
        return Ok(x);
    }
    Err(Error::LinearSolve(format!(
        "CG failed to reach tolerance: residual {:.3e} of {:.3e}",
        rr.sqrt(),
        tol * bnorm
    )))
}

/// MINRES for symmetric, possibly indefinite operators.
pub fn minres(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c.iter()).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; n];
    let beta1 = dot(b, b).sqrt();
    if beta1 == 0.0 {
        return Ok(x);
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|a| a * s).collect();
        y = apply(&v);
        if itn >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                y[i] -= f * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for i in 0..n {
            y[i] -= f * r2[i];
        }
        r1 = std::mem::take(&mut r2);
        r2 = y.clone();
        oldb = beta;
        beta = dot(&r2, &r2).sqrt();
        // Previous rotation applied to the new tridiagonal column.
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(1e-300);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        // Update the solution.
        let denom = 1.0 / gamma;
        let w1 = std::mem::take(&mut w2);
        w2 = std::mem::take(&mut w);
        w = (0..n)
            .map(|i| (v[i] - oldeps * w1[i] - delta * w2[i]) * denom)
            .collect();
        for i in 0..n {
            x[i] += phi * w[i];
        }
        if phibar <= tol * beta1 {
            return Ok(x);
        }
    }
    if phibar <= 10.0 * tol * beta1 {
        return Ok(x);
    }
    Err(Error::LinearSolve(format!(
        "MINRES failed to reach tolerance: residual {:.3e} of {:.3e}",
        phibar,
        tol * beta1
    )))
}

/// Configuration of the subcritical Newton solver.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Subcritical exponent, strictly below 3.
    pub p: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub continuation_schedule: Vec<f64>,
    pub damping: f64,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
}

impl SolverConfig {
    pub fn new(p: f64) -> Result<Self> {
        if !(1.0..3.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "subcritical exponent must lie in [1, 3), got {p}"
            )));
        }
        Ok(SolverConfig {
            p,
            newton_tol: 1e-10,
            max_newton: 40,
            continuation_schedule: vec![2.0, 2.5, 2.8, 2.9, 2.95, 2.975, 2.9875],
            damping: 1.0,
            linear_tol: 1e-11,
            linear_max_iter: 20_000,
        })
    }
}

/// Odd extension `sign(u) |u|^p` of the nonlinearity: keeps the Newton
/// linearization consistent when iterates dip below zero.
fn odd_pow(u: f64, p: f64) -> f64 {
    u.signum() * u.abs().powf(p)
}

/// Interior residual of `F(u) = L u - K sign(u) |u|^p` given full fields;
/// on positive solutions this is the subcritical equation.
pub fn residual(op: &SubLaplacian, u: &Field, k_field: &Field, p: f64) -> Vec<f64> {
    let ui = op.restrict(u);
    let mut f = op.apply_delta_interior(&ui);
    let bnd = op.boundary_delta(u);
    for (r, &full) in op.interior.iter().enumerate() {
        let uu = u.values[full as usize];
        f[r] = -4.0 * (f[r] + bnd[r]) - k_field.values[full as usize] * odd_pow(uu, p);
    }
    f
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton for `L u = K u^p` with Dirichlet data `boundary` at a
/// fixed exponent, starting from `start`.
pub fn newton_solve(
    op: &SubLaplacian,
    k_field: &Field,
    p: f64,
    boundary: &Field,
    start: &Field,
    cfg: &SolverConfig,
) -> Result<Field> {
    let mut u = start.clone();
    // Enforce the boundary data on the iterate.
    for (full, &no) in op.interior_no.iter().enumerate() {
        if no < 0 {
            u.values[full] = boundary.values[full];
        }
    }
    let mut trace = Vec::new();
    for _ in 0..cfg.max_newton {
        let f = residual(op, &u, k_field, p);
        let fn0 = norm2(&f);
        // Scale of the nonlinear term for the relative stopping rule.
        let scale: f64 = op
            .interior
            .iter()
            .map(|&full| {
                let uu = u.values[full as usize];
                (k_field.values[full as usize] * uu.abs().powf(p)).powi(2)
            })
            .sum::<f64>()
            .sqrt()
            .max(1e-300);
        trace.push(fn0 / scale);
        if fn0 <= cfg.newton_tol * scale {
            for &full in &op.interior {
                if u.values[full as usize] <= 0.0 {
                    return Err(Error::NewtonDiverged {
                        context: "converged iterate lost positivity".into(),
                        trace,
                    });
                }
            }
            return Ok(u);
        }
        // J = L - p K u^{p-1} (diagonal shift).
        let shift: Vec<f64> = op
            .interior
            .iter()
            .map(|&full| {
                let uu = u.values[full as usize].abs();
                p * k_field.values[full as usize] * uu.powf(p - 1.0)
            })
            .collect();
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let delta = op.solve_shifted(&shift, &rhs, cfg.linear_tol, cfg.linear_max_iter)?;
        // Backtracking: keep the residual decreasing and the interior
        // positive once the iterate is positive.
        let mut alpha = cfg.damping;
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand = u.clone();
            for (r, &full) in op.interior.iter().enumerate() {
                cand.values[full as usize] += alpha * delta[r];
            }
            let fc = norm2(&residual(op, &cand, k_field, p));
            if fc < (1.0 - 1e-4 * alpha) * fn0 {
                u = cand;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged {
                context: format!("line search stalled at residual {fn0:.3e}"),
                trace,
            });
        }
    }
    Err(Error::NewtonDiverged { context: "Newton iteration cap".into(), trace })
}

/// Solve the subcritical problem at `cfg.p` with Dirichlet data, starting
/// from the discrete L-harmonic lift of the boundary values.
pub fn solve_subcritical(
    k_field: &Field,
    cfg: &SolverConfig,
    grid: &Grid,
    boundary: &Field,
) -> Result<Field> {
    let op = discretize_sublaplacian(grid);
    for v in &k_field.values {
        if *v <= 0.0 {
            return Err(Error::KNotPositive(*v));
        }
    }
    let start = harmonic_lift(&op, boundary)?;
    newton_solve(&op, k_field, cfg.p, boundary, &start, cfg)
}

/// Discrete `L`-harmonic extension of boundary data.
pub fn harmonic_lift(op: &SubLaplacian, boundary: &Field) -> Result<Field> {
    let bnd = op.boundary_delta(boundary);
    let rhs: Vec<f64> = bnd.iter().map(|x| 4.0 * x).collect();
    // L u_i = -(-4 A_ib g) => A_ii u_i = -A_ib g in Delta form.
    let sol = op.solve_l(&rhs, 1e-12, 20_000)?;
    Ok(op.embed(&sol, boundary))
}

/// First Dirichlet eigenpair of `L` by inverse power iteration, with the
/// eigenfunction normalized so that its squared weighted norm is 1
/// (equivalently `int psi L psi = lambda_1`).
pub fn first_eigenpair(grid: &Grid) -> Result<(f64, Field)> {
    let op = discretize_sublaplacian(grid);
    first_eigenpair_with(&op)
}

pub fn first_eigenpair_with(op: &SubLaplacian) -> Result<(f64, Field)> {
    let n = op.n_interior();
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    let mut prev = f64::INFINITY;
    for _ in 0..300 {
        let w = op.solve_l(&v, 1e-13, 50_000)?;
        let norm = op.dot_w(&w, &w).sqrt();
        for (x, y) in v.iter_mut().zip(w.iter()) {
            *x = y / norm;
        }
        let lv = {
            let mut out = op.apply_delta_interior(&v);
            for o in &mut out {
                *o *= -4.0;
            }
            out
        };
        lambda = op.dot_w(&v, &lv) / op.dot_w(&v, &v);
        if (lambda - prev).abs() <= 1e-13 * lambda.abs() {
            break;
        }
        prev = lambda;
    }
    // Positive representative; the discretization must keep a signed
    // ground state.
    let total: f64 = v.iter().sum();
    if total < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    if v.iter().any(|&x| x <= 0.0) {
        return Err(Error::InvalidArgument(
            "first eigenfunction is not interior-positive; discretization too coarse".into(),
        ));
    }
    // Normalize the weighted L2 norm to one.
    let norm = op.dot_w(&v, &v).sqrt();
    for x in &mut v {
        *x /= norm;
    }
    let zero = Field::zeros(&op.grid);
    Ok((lambda, op.embed(&v, &zero)))
}

/// Output of the linearized spectral check.
#[derive(Debug, Clone)]
pub struct SpectrumCheck {
    /// Lowest computed eigenvalues of the modified operator, ascending.
    pub lowest: Vec<f64>,
    /// The single negative eigenvalue (expected -2).
    pub negative_eig: f64,
    /// Overlap of its eigenvector with the first eigenfunction.
    pub overlap: f64,
    pub lambda1: f64,
}

/// Assembles the operator `T u = u - 2 <u, psi_1> psi_1 - lambda_1 L^{-1} u`
/// and computes its lowest eigenvalues: one eigenvalue `-2` on the ground
/// state and values `1 - lambda_1/lambda_j` in `(0,1)` on the rest.
pub fn linearized_spectrum_check(grid: &Grid, count: usize) -> Result<SpectrumCheck> {
    let op = discretize_sublaplacian(grid);
    let (lambda1, psi_full) = first_eigenpair_with(&op)?;
    let psi = op.restrict(&psi_full);
    let n = op.n_interior();
    // B = I - T = 2 psi <psi, .>_w + lambda_1 L^{-1}: symmetric positive
    // in the weighted inner product; its top eigenvalues map to the
    // lowest of T.
    let apply_b = |v: &[f64]| -> Result<Vec<f64>> {
        let solve = op.solve_l(v, 1e-12, 50_000)?;
        let proj = op.dot_w(v, &psi);
        Ok((0..n).map(|i| 2.0 * proj * psi[i] + lambda1 * solve[i]).collect())
    };
    // Lanczos with full reorthogonalization in the weighted inner
    // product; the Krylov dimension grows until the leading Ritz values
    // stabilize (interior eigenvalues converge slowly when the spectrum
    // of L clusters).
    let lanczos = |m: usize| -> Result<Vec<f64>> {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        // Deterministic start overlapping everything.
        let mut q: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.3 * ((i * 2654435761usize) as f64 / usize::MAX as f64))
            .collect();
        let qn = op.dot_w(&q, &q).sqrt();
        for x in &mut q {
            *x /= qn;
        }
        basis.push(q);
        for j in 0..m {
            let mut w = apply_b(&basis[j])?;
            let alpha = op.dot_w(&w, &basis[j]);
            alphas.push(alpha);
            // Two orthogonalization passes for stability.
            for _ in 0..2 {
                for b in &basis {
                    let c = op.dot_w(&w, b);
                    for (x, y) in w.iter_mut().zip(b.iter()) {
                        *x -= c * y;
                    }
                }
            }
            let beta = op.dot_w(&w, &w).sqrt();
            if j + 1 == m || beta < 1e-13 {
                break;
            }
            betas.push(beta);
            for x in &mut w {
                *x /= beta;
            }
            basis.push(w);
        }
        let mm = alphas.len();
        let mut tri = vec![0.0; mm * mm];
        for i in 0..mm {
            tri[i * mm + i] = alphas[i];
            if i + 1 < mm {
                tri[i * mm + i + 1] = betas[i];
                tri[(i + 1) * mm + i] = betas[i];
            }
        }
        let (b_eigs, _) = linalg::jacobi_eigen(&tri, mm);
        Ok(b_eigs.into_iter().rev().collect()) // descending
    };
    let mut m = (count + 14).min(n);
    let mut top = lanczos(m)?;
    loop {
        if m >= n || m >= 240 {
            break;
        }
        let m_next = (m + 16).min(n).min(240);
        let next = lanczos(m_next)?;
        let stable = (0..(count + 1).min(top.len()).min(next.len())).all(|i| {
            (top[i] - next[i]).abs() <= 1e-9 * top[i].abs().max(1.0)
        });
        top = next;
        m = m_next;
        if stable {
            break;
        }
    }
    // T eigenvalues ascending = 1 - (B eigenvalues descending).
    let mut lowest: Vec<f64> = top.iter().map(|b| 1.0 - b).take(count).collect();
    lowest.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Independent route to the negative eigenpair: power iteration on B
    // converges to the dominant eigenvector (B eig 3 vs < 1 elsewhere).
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    for _ in 0..60 {
        let w = apply_b(&v)?;
        let norm = op.dot_w(&w, &w).sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
    }
    let bv = apply_b(&v)?;
    let theta_b = op.dot_w(&v, &bv) / op.dot_w(&v, &v);
    let negative_eig = 1.0 - theta_b;
    let overlap = op.dot_w(&v, &psi).abs() / (op.dot_w(&v, &v).sqrt());
    Ok(SpectrumCheck { lowest, negative_eig, overlap, lambda1 })
}

/// One member of a continuation family handed to the blow-up diagnostics.
pub struct FamilyMember<'a> {
    pub field: &'a Field,
    /// Grid of this member; blow-up families may zoom the box with the
    /// concentration scale, so each member carries its own.
    pub grid: &'a Grid,
    /// Subcritical defect used for the `tau M^2` bookkeeping.
    pub tau: f64,
    /// Exponent of the equation the member solves; the rescaling uses
    /// `M^{-(p-1)/2}` with this value (`3 - tau` for solver output, `3`
    /// for exact-bubble synthetic families).
    pub p: f64,
    /// Analytic evaluator for synthetic families; when present, profile
    /// sampling bypasses grid interpolation.
    pub analytic: Option<&'a dyn Fn(HPoint) -> f64>,
}

/// Aggregated diagnostics of a blow-up family.
#[derive(Debug, Clone)]
pub struct BlowupDiagnostics {
    /// Peaks of the last family member: locations and heights.
    pub peaks: Vec<(HPoint, f64)>,
    /// Main peak height per member.
    pub heights: Vec<f64>,
    /// `tau_i M_i^2` per member.
    pub tau_m_sq: Vec<f64>,
    /// Sup-norm deviation of the rescaled profile from the exact bubble
    /// profile, per member.
    pub profile_errors: Vec<f64>,
    /// Fitted far-field coefficients of `M u ~ c / d^2`, per member.
    pub green_coeffs: Vec<f64>,
    /// Least-squares slope of `log(tau M^2)` against `log M`.
    pub growth_exponent: f64,
}

/// Dilation parameter of the limiting profile `U o d_mu` for curvature
/// value `k` under the calibrated sublaplacian normalization:
/// `mu = sqrt(k / (16 kappa))`.
pub fn profile_dilation(k: f64) -> f64 {
    (k / (16.0 * KAPPA)).sqrt()
}

/// Strict local maxima over 3^3 neighborhoods with quadratic subgrid
/// refinement and gauge isolation radius `10 hx`.
pub fn extract_peaks(field: &Field, grid: &Grid) -> Vec<(HPoint, f64)> {
    let mut peaks = Vec::new();
    for k in 1..grid.nt - 1 {
        for j in 1..grid.ny - 1 {
            for i in 1..grid.nx - 1 {
                let c = field.values[grid.idx(i, j, k)];
                let mut strict = true;
                for dk in -1i64..=1 {
                    for dj in -1i64..=1 {
                        for di in -1i64..=1 {
                            if di == 0 && dj == 0 && dk == 0 {
                                continue;
                            }
                            let v = field.values[grid.idx(
                                (i as i64 + di) as usize,
                                (j as i64 + dj) as usize,
                                (k as i64 + dk) as usize,
                            )];
                            if v >= c {
                                strict = false;
                            }
                        }
                    }
                }
                if !strict {
                    continue;
                }
                // Quadratic refinement per axis.
                let refine = |m: f64, c0: f64, p: f64, h: f64| -> (f64, f64) {
                    let denom = m - 2.0 * c0 + p;
                    if denom >= 0.0 {
                        return (0.0, c0);
                    }
                    let off = 0.5 * (m - p) / denom;
                    let val = c0 - 0.25 * (m - p) * off;
                    (off.clamp(-0.5, 0.5) * h, val)
                };
                let (dx, v1) = refine(
                    field.values[grid.idx(i - 1, j, k)],
                    c,
                    field.values[grid.idx(i + 1, j, k)],
                    grid.hx,
                );
                let (dy, v2) = refine(
                    field.values[grid.idx(i, j - 1, k)],
                    c,
                    field.values[grid.idx(i, j + 1, k)],
                    grid.hy,
                );
                let (dt, v3) = refine(
                    field.values[grid.idx(i, j, k - 1)],
                    c,
                    field.values[grid.idx(i, j, k + 1)],
                    grid.ht,
                );
                let p0 = grid.point(i, j, k);
                let loc = HPoint::new(p0.x + dx, p0.y + dy, p0.t + dt);
                let height = v1.max(v2).max(v3).max(c);
                peaks.push((loc, height));
            }
        }
    }
    // Isolation: keep the highest peak within each 10 hx gauge ball.
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let mut kept: Vec<(HPoint, f64)> = Vec::new();
    for (loc, h) in peaks {
        if kept
            .iter()
            .all(|(l, _)| heisenberg::gauge_distance(loc, *l) >= 10.0 * grid.hx)
        {
            kept.push((loc, h));
        }
    }
    kept
}

/// Diagnostics for a decreasing-`tau` family of discrete solutions.
///
/// Per member: peak extraction, `tau M^2`, the sup-norm deviation of the
/// rescaled profile from the bubble on a gauge ball of radius
/// `0.3 log M`, and the far-field Green-shape coefficient fitted on the
/// gauge annulus `[0.2, 0.4]`.
pub fn blowup_diagnostics(
    family: &[FamilyMember<'_>],
    k_at: &dyn Fn(HPoint) -> f64,
) -> Result<BlowupDiagnostics> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty solution family".into()));
    }
    let mut heights = Vec::new();
    let mut tau_m_sq = Vec::new();
    let mut profile_errors = Vec::new();
    let mut green_coeffs = Vec::new();
    let mut last_peaks = Vec::new();
    for member in family {
        let grid = member.grid;
        let peaks = extract_peaks(member.field, grid);
        let Some(&(ploc, m)) = peaks.first() else {
            return Err(Error::NoBlowup);
        };
        heights.push(m);
        tau_m_sq.push(member.tau * m * m);

        let s = m.powf(-(member.p - 1.0) / 2.0);
        let mu = profile_dilation(k_at(ploc));
        let radius = (0.3 * m.ln()).max(0.4);
        let eval = |x: HPoint| -> f64 {
            match member.analytic {
                Some(f) => f(x),
                None => member.field.interp(grid, x),
            }
        };
        // Sup over a deterministic polar sample of the gauge ball.
        let mut err = 0.0_f64;
        let n_r = 8;
        let n_th = 6;
        let n_al = 8;
        for ir in 0..=n_r {
            let rho = radius * ir as f64 / n_r as f64;
            for it in 0..n_th {
                let theta = -std::f64::consts::FRAC_PI_2
                    + std::f64::consts::PI * (it as f64 + 0.5) / n_th as f64;
                for ia in 0..n_al {
                    let alpha = 2.0 * std::f64::consts::PI * ia as f64 / n_al as f64;
                    let c = theta.cos();
                    let xi = HPoint::new(
                        rho * c * alpha.cos(),
                        rho * c * alpha.sin(),
                        rho * rho * theta.sin() * (1.0 + c * c).sqrt(),
                    );
                    let phys = heisenberg::group_mul(
                        ploc,
                        heisenberg::dilate(s, xi).unwrap_or(HPoint::origin()),
                    );
                    let v = eval(phys) / m;
                    let model = bubble::eval_u(
                        heisenberg::dilate(mu, xi).unwrap_or(HPoint::origin()),
                    );
                    err = err.max((v - model).abs());
                }
            }
        }
        profile_errors.push(err);

        // Far-field fit of M u against c / d^2 on the gauge annulus,
        // scaled into the member's frame when the family zooms.
        let frame = (-grid.x0).min(1.0);
        let (d_lo, d_hi) = (0.2 * frame, 0.4 * frame);
        let mut num = 0.0;
        let mut den = 0.0;
        for kk in 1..grid.nt - 1 {
            for jj in 1..grid.ny - 1 {
                for ii in 1..grid.nx - 1 {
                    let x = grid.point(ii, jj, kk);
                    let d = heisenberg::gauge_distance(x, ploc);
                    if !(d_lo..=d_hi).contains(&d) {
                        continue;
                    }
                    let mu_val = m * member.field.values[grid.idx(ii, jj, kk)];
                    let shape = 1.0 / (d * d);
                    num += mu_val * shape;
                    den += shape * shape;
                }
            }
        }
        green_coeffs.push(if den > 0.0 { num / den } else { 0.0 });
        last_peaks = peaks;
    }
    if family.len() >= 2 {
        let first = heights.first().unwrap();
        let last = heights.last().unwrap();
        if last < &(1.05 * first) {
            return Err(Error::NoBlowup);
        }
    }
    let pts: Vec<(f64, f64)> = heights
        .iter()
        .zip(tau_m_sq.iter())
        .map(|(m, t)| (m.ln(), t.ln()))
        .collect();
    let growth_exponent = if pts.len() >= 2 { bubble::least_squares_slope(&pts) } else { 0.0 };
    Ok(BlowupDiagnostics {
        peaks: last_peaks,
        heights,
        tau_m_sq,
        profile_errors,
        green_coeffs,
        growth_exponent,
    })
}

/// Binary field snapshot: 64-byte header (magic, dims, spacings,
/// exponent) followed by the node values as little-endian doubles.
pub fn write_snapshot(path: &std::path::Path, field: &Field, grid: &Grid, p: f64) -> Result<()> {
    let mut header = Vec::with_capacity(64);
    header.extend_from_slice(b"WCPFLD01");
    for n in [grid.nx as u32, grid.ny as u32, grid.nt as u32] {
        header.extend_from_slice(&n.to_le_bytes());
    }
    for h in [grid.hx, grid.hy, grid.ht, p] {
        header.extend_from_slice(&h.to_le_bytes());
    }
    header.resize(64, 0);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&header)?;
    let mut buf = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&buf)?;
    Ok(())
}

/// Read a snapshot back: returns dims, spacings, exponent, and values.
pub fn read_snapshot(path: &std::path::Path) -> Result<([u32; 3], [f64; 3], f64, Vec<f64>)> {
    let mut file = std::fs::File::open(path)?;
    let mut header = [0u8; 64];
    file.read_exact(&mut header)?;
    if &header[0..8] != b"WCPFLD01" {
        return Err(Error::InvalidArgument("bad snapshot magic".into()));
    }
    let mut dims = [0u32; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        *d = u32::from_le_bytes(header[8 + 4 * i..12 + 4 * i].try_into().unwrap());
    }
    let mut spac = [0f64; 3];
    for (i, s) in spac.iter_mut().enumerate() {
        *s = f64::from_le_bytes(header[20 + 8 * i..28 + 8 * i].try_into().unwrap());
    }
    let p = f64::from_le_bytes(header[44..52].try_into().unwrap());
    let n = (dims[0] * dims[1] * dims[2]) as usize;
    let mut buf = vec![0u8; n * 8];
    file.read_exact(&mut buf)?;
    let values = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((dims, spac, p, values))
}
