//! Factorized propagator for `H = C1 P^2 + C2 P + C3 (x - a) + C4`.
//!
//! The evolution operator is written as
//! `U = exp(g1 P^2) exp(g2 P) exp(g3 (x - a)) exp(g4)` with `P = -i d/dx`.
//! Conjugating each factor through the ones to its left gives
//!
//! ```text
//! g1' = -i C1
//! g3' = -i C3
//! g2' = -i C2 + 2 g1 C3
//! g4' = -i C4 + g2 C3
//! ```
//!
//! For constant `C1 = 1/2m`, `C2 = 0`, `C3 = eta1`, `C4 = eta0` these
//! integrate to `g1 = -it/2m`, `g2 = -i eta1 t^2/2m`, `g3 = -i eta1 t` and
//! `g4 = -i (eta0 t + eta1^2 t^3 / 6m)`. A commonly quoted form of the `g3`
//! equation has the opposite sign; it is inconsistent with the closed
//! solution and with direct grid propagation, which both agree with the
//! equations above.
//!
//! Gaussians `exp(-A x^2 + B x + C)` are closed under all four factors, so
//! packets are evolved symbolically.

use num_complex::Complex64;
use serde::Serialize;

use crate::propagation::{ComplexField1D, TransverseGrid};
use crate::{CoreError, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest allowed `dt * max|C_j|` for [`wn_integrate_odes`].
pub const MAX_STEP_PRODUCT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeiNormanCoeffs {
    pub g1: Complex64,
    pub g2: Complex64,
    pub g3: Complex64,
    pub g4: Complex64,
    pub t: f64,
    /// Effective mass `k_p / c`.
    pub m: f64,
    pub eta0: f64,
    pub eta1: f64,
}

impl WeiNormanCoeffs {
    pub fn identity(m: f64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            g1: zero,
            g2: zero,
            g3: zero,
            g4: zero,
            t: 0.0,
            m,
            eta0: 0.0,
            eta1: 0.0,
        }
    }

    pub fn as_array(&self) -> [Complex64; 4] {
        [self.g1, self.g2, self.g3, self.g4]
    }
}

pub fn wn_closed_coefficients(t: f64, m: f64, eta0: f64, eta1: f64) -> Result<WeiNormanCoeffs> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(CoreError::InvalidParameter(format!("mass m > 0 required, got {m}")));
    }
    Ok(WeiNormanCoeffs {
        g1: -I * (t / (2.0 * m)),
        g2: -I * (eta1 * t * t / (2.0 * m)),
        g3: -I * (eta1 * t),
        g4: -I * (eta0 * t + eta1 * eta1 * t.powi(3) / (6.0 * m)),
        t,
        m,
        eta0,
        eta1,
    })
}

/// Coefficients for the probe after a cell of length `length`: `t = L/c`,
/// `m = k_p/c`.
pub fn probe_coefficients(eta0: f64, eta1: f64, k_p: f64, c: f64, length: f64) -> Result<WeiNormanCoeffs> {
    if !(c > 0.0) {
        return Err(CoreError::InvalidParameter(format!("c > 0 required, got {c}")));
    }
    wn_closed_coefficients(length / c, k_p / c, eta0, eta1)
}

fn wn_rhs(g: &[Complex64; 4], c: [f64; 4]) -> [Complex64; 4] {
    let [c1, c2, c3, c4] = c;
    [-I * c1, -I * c2 + g[0] * (2.0 * c3), -I * c3, -I * c4 + g[1] * c3]
}

fn axpy(g: &[Complex64; 4], k: &[Complex64; 4], h: f64) -> [Complex64; 4] {
    std::array::from_fn(|j| g[j] + k[j] * h)
}

/// RK4 integration of the coefficient equations from `t = 0`.
///
/// `c(t)` returns `[C1, C2, C3, C4]`. The reported mass and potential
/// parameters are read from the coefficients at `t_end`.
pub fn wn_integrate_odes(c: impl Fn(f64) -> [f64; 4], t_end: f64, dt: f64) -> Result<WeiNormanCoeffs> {
    if !(dt > 0.0) || !dt.is_finite() || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(CoreError::Configuration(format!(
            "need dt > 0 and t_end >= 0, got dt = {dt}, t_end = {t_end}"
        )));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let mut g = [Complex64::new(0.0, 0.0); 4];
    let guarded = |t: f64| -> Result<[f64; 4]> {
        let v = c(t);
        let size = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !size.is_finite() {
            return Err(CoreError::Configuration(format!("non-finite coefficient at t = {t}")));
        }
        if dt * size >= MAX_STEP_PRODUCT {
            return Err(CoreError::Configuration(format!(
                "step guard violated: dt * max|C_j| = {} >= {MAX_STEP_PRODUCT} at t = {t}",
                dt * size
            )));
        }
        Ok(v)
    };
    let mut last = guarded(0.0)?;
    for n in 0..steps {
        let t = n as f64 * h;
        let c0 = guarded(t)?;
        let cm = guarded(t + 0.5 * h)?;
        let c1 = guarded(t + h)?;
        let k1 = wn_rhs(&g, c0);
        let k2 = wn_rhs(&axpy(&g, &k1, 0.5 * h), cm);
        let k3 = wn_rhs(&axpy(&g, &k2, 0.5 * h), cm);
        let k4 = wn_rhs(&axpy(&g, &k3, h), c1);
        g = std::array::from_fn(|j| g[j] + (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0));
        last = c1;
    }
    let [c1, _, c3, c4] = last;
    Ok(WeiNormanCoeffs {
        g1: g[0],
        g2: g[1],
        g3: g[2],
        g4: g[3],
        t: t_end,
        m: if c1 != 0.0 { 0.5 / c1 } else { f64::INFINITY },
        eta0: c4,
        eta1: c3,
    })
}

/// `exp(-w (x - center)^2 + i momentum (x - center) + global_phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianPacket {
    pub center: f64,
    pub momentum: f64,
    pub complex_width: Complex64,
    pub global_phase: Complex64,
}

impl GaussianPacket {
    /// Real Gaussian `exp(-(x - a)^2 / b^2)` scaled to unit norm.
    pub fn normalized(a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() || !a.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "packet needs finite a and b > 0, got a = {a}, b = {b}"
            )));
        }
        let w = 1.0 / (b * b);
        // int exp(-2 w x^2) dx = sqrt(pi / 2w)
        let log_norm = -0.25 * (std::f64::consts::PI / (2.0 * w)).ln();
        Ok(Self {
            center: a,
            momentum: 0.0,
            complex_width: Complex64::new(w, 0.0),
            global_phase: Complex64::new(log_norm, 0.0),
        })
    }

    pub fn value_at(&self, x: f64) -> Complex64 {
        let d = x - self.center;
        (-self.complex_width * d * d + I * (self.momentum * d) + self.global_phase).exp()
    }

    /// Exact `int |psi|^2 dx`.
    pub fn norm(&self) -> f64 {
        let w = self.complex_width.re;
        (2.0 * self.global_phase.re).exp() * (std::f64::consts::PI / (2.0 * w)).sqrt()
    }

    /// Standard deviation of `|psi|^2`.
    pub fn rms_width(&self) -> f64 {
        0.5 / self.complex_width.re.sqrt()
    }

    pub fn sample(&self, grid: TransverseGrid, z: f64) -> ComplexField1D {
        ComplexField1D::from_fn(grid, z, |x| self.value_at(x))
    }

    fn to_quadratic(self) -> Quadratic {
        let (w, c, k) = (self.complex_width, self.center, self.momentum);
        Quadratic {
            a: w,
            b: w * (2.0 * c) + I * k,
            c: self.global_phase - w * (c * c) - I * (k * c),
        }
    }
}

/// `exp(-a x^2 + b x + c)`.
#[derive(Debug, Clone, Copy)]
struct Quadratic {
    a: Complex64,
    b: Complex64,
    c: Complex64,
}

impl Quadratic {
    fn to_packet(self) -> Result<GaussianPacket> {
        if !(self.a.re > 0.0) || !self.a.re.is_finite() {
            return Err(CoreError::InvalidEvolution(format!(
                "packet lost normalizability: Re w = {}",
                self.a.re
            )));
        }
        let center = self.b.re / (2.0 * self.a.re);
        let momentum = (self.b - self.a * (2.0 * center)).im;
        Ok(GaussianPacket {
            center,
            momentum,
            complex_width: self.a,
            global_phase: self.c + self.a * (center * center) + I * (momentum * center),
        })
    }

    /// Multiplication by `exp(g (x - origin))`.
    fn multiply_linear(&mut self, g: Complex64, origin: f64) {
        self.b += g;
        self.c -= g * origin;
    }

    /// `exp(g P)` is the shift `psi(x) -> psi(x - i g)`.
    fn translate(&mut self, g: Complex64) {
        let s = -I * g;
        let (a, b) = (self.a, self.b);
        self.b = b - a * s * 2.0;
        self.c += -a * s * s + b * s;
    }

    /// `exp(g P^2) = exp(-g d^2/dx^2)`.
    fn diffuse(&mut self, g: Complex64) {
        let tau = -g;
        let d = Complex64::new(1.0, 0.0) + self.a * tau * 4.0;
        self.c = self.c + self.b * self.b * tau / d - 0.5 * d.ln();
        self.a /= d;
        self.b /= d;
    }
}

/// Applies `exp(g1 P^2) exp(g2 P) exp(g3 (x - origin)) exp(g4)` to `packet`.
pub fn evolve_gaussian_analytic(
    packet: &GaussianPacket,
    coeffs: &WeiNormanCoeffs,
    origin: f64,
) -> Result<GaussianPacket> {
    let mut q = packet.to_quadratic();
    q.c += coeffs.g4;
    q.multiply_linear(coeffs.g3, origin);
    q.translate(coeffs.g2);
    q.diffuse(coeffs.g1);
    q.to_packet()
}

/// Probe centre after a cell of length `l`: `(a - eta1 l^2 / (2 k_p c), l)`.
pub fn trajectory_endpoint(a: f64, eta1: f64, k_p: f64, c: f64, l: f64) -> (f64, f64) {
    (a - eta1 * l * l / (2.0 * k_p * c), l)
}
