//! Jerison-Lee bubbles, scalings, cutoffs, superpositions, the Appendix
//! integrals, and moment-scaling diagnostics.
//!
//! `U(z,t) = (t^2 + (1+|z|^2)^2)^(-1/2)` solves `-4 Delta_b U = U^3` on
//! `H^1` with the calibrated sublaplacian normalization; the scaled family
//! is `U_l = l * U o d_l` composed with left translation by the center.

use crate::error::{Error, Result};
use crate::heisenberg::{
    self, HPoint, QuadratureSpec, Tail, gauge_distance, group_mul, integrate, inverse,
};
use crate::jet::Jet;

/// `U` at a plain point.
pub fn eval_u(p: HPoint) -> f64 {
    let r2 = p.x * p.x + p.y * p.y;
    let a = 1.0 + r2;
    (p.t * p.t + a * a).powf(-0.5)
}

/// `U` on jets, for exact-derivative identity checks.
pub fn eval_u_jet(p: [Jet; 3]) -> Jet {
    let [x, y, t] = p;
    let a = x * x + y * y + 1.0;
    (t * t + a * a).sqrt().recip()
}

/// Parameters of a scaled Jerison-Lee solution plus its radial cutoff.
#[derive(Debug, Clone, Copy)]
pub struct Bubble {
    pub center: HPoint,
    pub lambda: f64,
    pub amplitude: f64,
    /// Gauge radius below which the cutoff equals 1 (rho/2 in the chart).
    pub cutoff_inner: f64,
    /// Gauge radius beyond which the bubble vanishes (rho in the chart).
    pub cutoff_outer: f64,
}

impl Bubble {
    pub fn new(
        center: HPoint,
        lambda: f64,
        amplitude: f64,
        cutoff_inner: f64,
        cutoff_outer: f64,
    ) -> Result<Self> {
        if lambda <= 0.0 || amplitude <= 0.0 {
            return Err(Error::InvalidArgument(
                "bubble scale and amplitude must be positive".into(),
            ));
        }
        if !(0.0 < cutoff_inner && cutoff_inner < cutoff_outer) {
            return Err(Error::InvalidArgument(
                "cutoff radii must satisfy 0 < inner < outer".into(),
            ));
        }
        Ok(Bubble { center, lambda, amplitude, cutoff_inner, cutoff_outer })
    }

    /// Default cutoff radii (0.5, 1.0) in chart units.
    pub fn standard(center: HPoint, lambda: f64, amplitude: f64) -> Result<Self> {
        Bubble::new(center, lambda, amplitude, 0.5, 1.0)
    }

    /// The bubble with the cutoff pushed past any point of interest,
    /// effectively `chi = 1` everywhere it is evaluated.
    pub fn uncut(center: HPoint, lambda: f64, amplitude: f64) -> Result<Self> {
        Bubble::new(center, lambda, amplitude, 1e12, 2e12)
    }
}

/// Quintic bump: 1 on [0, inner], 0 on [outer, inf), C^2 across both radii.
pub fn cutoff(rho: f64, inner: f64, outer: f64) -> f64 {
    if rho <= inner {
        1.0
    } else if rho >= outer {
        0.0
    } else {
        let s = (rho - inner) / (outer - inner);
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

/// `a * l * U(d_l(p^{-1} x)) * chi(|p^{-1} x|)`.
pub fn eval_bubble(b: &Bubble, x: HPoint) -> f64 {
    let w = group_mul(inverse(b.center), x);
    let rho = heisenberg::koranyi_norm(w);
    let chi = cutoff(rho, b.cutoff_inner, b.cutoff_outer);
    if chi == 0.0 {
        return 0.0;
    }
    let scaled = HPoint::new(b.lambda * w.x, b.lambda * w.y, b.lambda * b.lambda * w.t);
    b.amplitude * b.lambda * eval_u(scaled) * chi
}

/// The translated, dilated profile on jets with `chi = 1`; valid inside
/// the inner cutoff where all PDE identities are checked.
pub fn eval_bubble_jet(b: &Bubble, p: [Jet; 3]) -> Jet {
    let [x, y, t] = p;
    // w = center^{-1} * x, affine in the coordinates.
    let cx = b.center.x;
    let cy = b.center.y;
    let ct = b.center.t;
    let wx = x - cx;
    let wy = y - cy;
    // t-component: t - ct + 2*Im(-c * conj(z)) = t - ct - 2(cy*x - cx*y)
    let wt = t - ct - (x * (2.0 * cy) - y * (2.0 * cx));
    let l = b.lambda;
    let scaled = [wx.scale(l), wy.scale(l), wt.scale(l * l)];
    eval_u_jet(scaled).scale(b.amplitude * l)
}

/// A labelled finite sum of bubbles.
#[derive(Debug, Clone)]
pub struct Superposition {
    pub bubbles: Vec<Bubble>,
    /// Indices into a critical-point set; same length as `bubbles`.
    pub labels: Vec<usize>,
}

impl Superposition {
    pub fn new(bubbles: Vec<Bubble>, labels: Vec<usize>) -> Result<Self> {
        if bubbles.len() != labels.len() {
            return Err(Error::InvalidArgument("labels must match bubbles".into()));
        }
        for i in 0..bubbles.len() {
            for j in (i + 1)..bubbles.len() {
                if gauge_distance(bubbles[i].center, bubbles[j].center) == 0.0 {
                    return Err(Error::InvalidArgument(
                        "bubble centers must be pairwise distinct".into(),
                    ));
                }
            }
        }
        Ok(Superposition { bubbles, labels })
    }
}

pub fn eval_superposition(s: &Superposition, x: HPoint) -> f64 {
    s.bubbles.iter().map(|b| eval_bubble(b, x)).sum()
}

/// The three Appendix integrals `(I3, I4, IW) = (int U^3, int U^4,
/// int (x^2+y^2) U^4)`.
pub fn bubble_integrals(spec: &QuadratureSpec) -> Result<(f64, f64, f64)> {
    let i3 = integrate(|p| eval_u(p).powi(3), spec, Tail::PowerLaw(6.0))?;
    let i4 = integrate(|p| eval_u(p).powi(4), spec, Tail::PowerLaw(8.0))?;
    let iw = integrate(
        |p| (p.x * p.x + p.y * p.y) * eval_u(p).powi(4),
        spec,
        Tail::PowerLaw(6.0),
    )?;
    Ok((i3, i4, iw))
}

/// Max over `sample` of `|-4 Delta_b u - u^3|` for the uncut bubble `u`,
/// evaluated with exact jet derivatives.
pub fn pde_residual(b: &Bubble, sample: &[HPoint]) -> f64 {
    let mut worst = 0.0_f64;
    for &p in sample {
        let j = eval_bubble_jet(b, Jet::seed(p.x, p.y, p.t));
        let lap = heisenberg::horizontal_trace(&j, p);
        let res = (-4.0 * lap - j.v * j.v * j.v).abs();
        worst = worst.max(res);
    }
    worst
}

/// Least-squares slope of `log int |x|^alpha U_l^4` against `log l`;
/// the exact dilation change of variables gives slope `-alpha`.
pub fn moment_scaling(alpha: f64, lambdas: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    if !(0.0..4.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "moment exponent must lie in [0,4), got {alpha}"
        )));
    }
    if lambdas.len() < 2 {
        return Err(Error::InvalidArgument("need at least two scales".into()));
    }
    let mut logs = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let f = |p: HPoint| {
            let scaled = HPoint::new(l * p.x, l * p.y, l * l * p.t);
            let u = l * eval_u(scaled);
            heisenberg::koranyi_norm(p).powf(alpha) * u.powi(4)
        };
        let v = integrate(f, spec, Tail::PowerLaw(8.0 - alpha))?;
        logs.push((l.ln(), v.ln()));
    }
    Ok(least_squares_slope(&logs))
}

/// Slope of the least-squares line through `(x, y)` pairs.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(x, y) in points {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}
