//! Second-order forward-mode differentiation in three variables.
//!
//! A [`Jet`] carries a value, the gradient with respect to the three
//! Heisenberg coordinates `(x, y, t)`, and the packed symmetric Hessian.
//! All identity checks in the crate (vector field algebra, sublaplacian
//! calibration, PDE residuals) run on jets, so derivatives are exact up to
//! round-off instead of finite-difference noise.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Packed index of the symmetric 3x3 Hessian:
/// `[xx, xy, xt, yy, yt, tt]`.
pub const HESS_XX: usize = 0;
pub const HESS_XY: usize = 1;
pub const HESS_XT: usize = 2;
pub const HESS_YY: usize = 3;
pub const HESS_YT: usize = 4;
pub const HESS_TT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 3],
    pub h: [f64; 6],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet { v, g: [0.0; 3], h: [0.0; 6] }
    }

    /// Seed for the coordinate of index `i` (0 = x, 1 = y, 2 = t).
    pub fn variable(v: f64, i: usize) -> Self {
        let mut g = [0.0; 3];
        g[i] = 1.0;
        Jet { v, g, h: [0.0; 6] }
    }

    /// Seeds for a point `(x, y, t)`.
    pub fn seed(x: f64, y: f64, t: f64) -> [Jet; 3] {
        [Jet::variable(x, 0), Jet::variable(y, 1), Jet::variable(t, 2)]
    }

    pub fn grad(&self) -> [f64; 3] {
        self.g
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        match (a, b) {
            (0, 0) => self.h[HESS_XX],
            (0, 1) => self.h[HESS_XY],
            (0, 2) => self.h[HESS_XT],
            (1, 1) => self.h[HESS_YY],
            (1, 2) => self.h[HESS_YT],
            (2, 2) => self.h[HESS_TT],
            _ => unreachable!(),
        }
    }

    /// Chain rule for a scalar function with given first and second
    /// derivatives at `self.v`.
    fn lift(&self, f: f64, df: f64, d2f: f64) -> Jet {
        let mut h = [0.0; 6];
        let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            h[k] = df * self.h[k] + d2f * self.g[i] * self.g[j];
        }
        Jet { v: f, g: [df * self.g[0], df * self.g[1], df * self.g[2]], h }
    }

    pub fn sqrt(&self) -> Jet {
        let s = self.v.sqrt();
        self.lift(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn recip(&self) -> Jet {
        let r = 1.0 / self.v;
        self.lift(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(&self, n: i32) -> Jet {
        match n {
            0 => Jet::constant(1.0),
            1 => *self,
            _ if n < 0 => self.recip().powi(-n),
            _ => {
                let f = self.v.powi(n);
                let df = f64::from(n) * self.v.powi(n - 1);
                let d2f = f64::from(n) * f64::from(n - 1) * self.v.powi(n - 2);
                self.lift(f, df, d2f)
            }
        }
    }

    pub fn powf(&self, a: f64) -> Jet {
        let f = self.v.powf(a);
        self.lift(f, a * self.v.powf(a - 1.0), a * (a - 1.0) * self.v.powf(a - 2.0))
    }

    pub fn scale(&self, c: f64) -> Jet {
        let mut out = *self;
        out.v *= c;
        for g in &mut out.g {
            *g *= c;
        }
        for h in &mut out.h {
            *h *= c;
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut out = self;
        out.v += o.v;
        for i in 0..3 {
            out.g[i] += o.g[i];
        }
        for i in 0..6 {
            out.h[i] += o.h[i];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        let mut h = [0.0; 6];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            h[k] = self.h[k] * o.v
                + o.h[k] * self.v
                + self.g[i] * o.g[j]
                + self.g[j] * o.g[i];
        }
        Jet {
            v: self.v * o.v,
            g: [
                self.g[0] * o.v + o.g[0] * self.v,
                self.g[1] * o.v + o.g[1] * self.v,
                self.g[2] * o.v + o.g[2] * self.v,
            ],
            h,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        let mut out = self;
        out.v += c;
        out
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, c: f64) -> Jet {
        self + (-c)
    }
}

/// Complex number with [`Jet`] real and imaginary parts; used when pulling
/// functions back through the rational sphere charts.
#[derive(Debug, Clone, Copy)]
pub struct CJet {
    pub re: Jet,
    pub im: Jet,
}

impl CJet {
    pub fn new(re: Jet, im: Jet) -> Self {
        CJet { re, im }
    }

    pub fn constant(re: f64, im: f64) -> Self {
        CJet { re: Jet::constant(re), im: Jet::constant(im) }
    }

    pub fn conj(&self) -> CJet {
        CJet { re: self.re, im: -self.im }
    }

    pub fn norm_sq(&self) -> Jet {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(&self, c: f64) -> CJet {
        CJet { re: self.re.scale(c), im: self.im.scale(c) }
    }
}

impl Add for CJet {
    type Output = CJet;
    fn add(self, o: CJet) -> CJet {
        CJet { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for CJet {
    type Output = CJet;
    fn sub(self, o: CJet) -> CJet {
        CJet { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Mul for CJet {
    type Output = CJet;
    fn mul(self, o: CJet) -> CJet {
        CJet {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

impl Div for CJet {
    type Output = CJet;
    fn div(self, o: CJet) -> CJet {
        let d = o.norm_sq().recip();
        let n = self * o.conj();
        CJet { re: n.re * d, im: n.im * d }
    }
}

/// Plain complex scalar used by the complex vector fields `Z`, `Zbar`, `Zr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C64 {
    pub re: f64,
    pub im: f64,
}

impl C64 {
    pub fn new(re: f64, im: f64) -> Self {
        C64 { re, im }
    }

    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn conj(&self) -> C64 {
        C64 { re: self.re, im: -self.im }
    }

    pub fn norm_sq(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

impl Add for C64 {
    type Output = C64;
    fn add(self, o: C64) -> C64 {
        C64::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for C64 {
    type Output = C64;
    fn sub(self, o: C64) -> C64 {
        C64::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for C64 {
    type Output = C64;
    fn mul(self, o: C64) -> C64 {
        C64::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

impl Mul<f64> for C64 {
    type Output = C64;
    fn mul(self, c: f64) -> C64 {
        C64::new(self.re * c, self.im * c)
    }
}

impl Div for C64 {
    type Output = C64;
    fn div(self, o: C64) -> C64 {
        let d = o.norm_sq();
        let n = self * o.conj();
        C64::new(n.re / d, n.im / d)
    }
}

impl Neg for C64 {
    type Output = C64;
    fn neg(self) -> C64 {
        C64::new(-self.re, -self.im)
    }
}
