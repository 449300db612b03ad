//! Propagation coefficients of the driven medium in the large-detuning regime,
//! the sech control profile and the probe potential it induces.
//!
//! Imaginary parts of the atomic response are dropped, so every potential
//! here is real and the propagators built on it conserve the beam norm.
//!
//! For red detuning (`delta_c < 0`) the control equation is self-focusing and
//! the sech profile is its exact bright soliton. For blue detuning the same
//! profile with `|Q|` in place of `Q` is used as the imposed control beam,
//! which keeps `L_c > 0` and `|Omega_c|^2 >= 0`.

use num_complex::Complex64;
use serde::Serialize;

use crate::bloch::AtomParams;
use crate::propagation::ComplexField1D;
use crate::{CoreError, Result};

/// Below this `|delta_c| / gamma2` the dispersive approximation is doubtful.
pub const LARGE_DETUNING_RATIO: f64 = 5.0;

/// Collective couplings `|g_c|^2`, `|g_p|^2` and the atom number weight `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Couplings {
    pub coupling_c: f64,
    pub coupling_p: f64,
    pub atom_line_density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wavenumbers {
    pub k_c: f64,
    pub k_p: f64,
    /// Speed of light in working units.
    pub c: f64,
}

impl Wavenumbers {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("k_c", self.k_c), ("k_p", self.k_p), ("c", self.c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CoreError::InvalidParameter(format!("{name} > 0 required, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MediumCoefficients {
    /// Control response coefficient (1/length).
    pub alpha_c: f64,
    /// Probe response coefficient (frequency).
    pub alpha_p: f64,
    /// Saturation coefficient (1/Rabi frequency^2).
    pub beta: f64,
    /// Soliton parameter `alpha_c * beta`.
    pub q: f64,
    /// Transverse control-beam size.
    pub l_c: f64,
    pub k_c: f64,
    pub k_p: f64,
    pub c: f64,
    pub coupling_c: f64,
    pub coupling_p: f64,
    pub atom_line_density: f64,
}

impl MediumCoefficients {
    /// Peak amplitude `sqrt(|Q|)/2` of the control profile.
    pub fn soliton_amplitude(&self) -> f64 {
        self.q.abs().sqrt() / 2.0
    }

    /// Longitudinal phase rate `Q^2/4 - alpha_c` of the control profile.
    pub fn soliton_phase_rate(&self) -> f64 {
        self.q * self.q / 4.0 - self.alpha_c
    }

    /// `2 beta |Omega_c(x)|^2` at the profile peak.
    pub fn peak_saturation(&self) -> f64 {
        self.beta * self.q.abs() / 2.0
    }

    pub fn couplings(&self) -> Couplings {
        Couplings {
            coupling_c: self.coupling_c,
            coupling_p: self.coupling_p,
            atom_line_density: self.atom_line_density,
        }
    }

    pub fn wavenumbers(&self) -> Wavenumbers {
        Wavenumbers {
            k_c: self.k_c,
            k_p: self.k_p,
            c: self.c,
        }
    }

    /// Re-derives the coefficients for other atom parameters (typically
    /// another detuning) with the same couplings and wavenumbers.
    pub fn for_atom(&self, params: &AtomParams) -> Result<Self> {
        derive_coefficients(params, &self.couplings(), &self.wavenumbers())
    }
}

fn saturation_beta(params: &AtomParams) -> f64 {
    2.0 * params.gamma2 / (params.gamma1 * (params.gamma2.powi(2) + params.delta_c.powi(2)))
}

fn finish(
    params: &AtomParams,
    alpha_c: f64,
    alpha_p: f64,
    couplings: Couplings,
    wavenumbers: &Wavenumbers,
) -> MediumCoefficients {
    let beta = saturation_beta(params);
    let q = alpha_c * beta;
    MediumCoefficients {
        alpha_c,
        alpha_p,
        beta,
        q,
        l_c: (2.0 / wavenumbers.k_c).sqrt() / q.abs(),
        k_c: wavenumbers.k_c,
        k_p: wavenumbers.k_p,
        c: wavenumbers.c,
        coupling_c: couplings.coupling_c,
        coupling_p: couplings.coupling_p,
        atom_line_density: couplings.atom_line_density,
    }
}

fn check_regime(params: &AtomParams) -> Result<()> {
    params.validate()?;
    if params.delta_c == 0.0 {
        return Err(CoreError::InvalidRegime(
            "delta_c = 0: the dispersive coefficients vanish and absorption cannot be neglected".into(),
        ));
    }
    Ok(())
}

/// Propagation coefficients from the collective couplings.
pub fn derive_coefficients(
    params: &AtomParams,
    couplings: &Couplings,
    wavenumbers: &Wavenumbers,
) -> Result<MediumCoefficients> {
    check_regime(params)?;
    wavenumbers.validate()?;
    for (name, v) in [
        ("coupling_c", couplings.coupling_c),
        ("coupling_p", couplings.coupling_p),
        ("atom_line_density", couplings.atom_line_density),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CoreError::InvalidParameter(format!("{name} > 0 required, got {v}")));
        }
    }
    let lorentz = params.delta_c / (params.delta_c.powi(2) + params.gamma2.powi(2));
    let n = couplings.atom_line_density;
    let alpha_c = -n / wavenumbers.c * couplings.coupling_c * lorentz;
    let alpha_p = -n * couplings.coupling_p * lorentz;
    Ok(finish(params, alpha_c, alpha_p, *couplings, wavenumbers))
}

/// Propagation coefficients from directly supplied `alpha_c`, `alpha_p`.
///
/// The couplings are backed out with `N = 1`, so that
/// [`derive_coefficients`] on the result reproduces the inputs.
pub fn coefficients_from_alphas(
    params: &AtomParams,
    alpha_c: f64,
    alpha_p: f64,
    wavenumbers: &Wavenumbers,
) -> Result<MediumCoefficients> {
    check_regime(params)?;
    wavenumbers.validate()?;
    let expected = -params.delta_c.signum();
    for (name, v) in [("alpha_c", alpha_c), ("alpha_p", alpha_p)] {
        if !v.is_finite() || v.signum() != expected || v == 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "{name} must be nonzero with sign opposite to delta_c = {}, got {v}",
                params.delta_c
            )));
        }
    }
    let lorentz = params.delta_c / (params.delta_c.powi(2) + params.gamma2.powi(2));
    let couplings = Couplings {
        coupling_c: -alpha_c * wavenumbers.c / lorentz,
        coupling_p: -alpha_p / lorentz,
        atom_line_density: 1.0,
    };
    Ok(finish(params, alpha_c, alpha_p, couplings, wavenumbers))
}

/// Warning when `|delta_c| < 5 gamma2`.
pub fn regime_warning(params: &AtomParams) -> Option<String> {
    (params.delta_c.abs() < LARGE_DETUNING_RATIO * params.gamma2).then(|| {
        format!(
            "|delta_c| = {} is below {LARGE_DETUNING_RATIO} gamma2 = {}; the dispersive approximation is marginal",
            params.delta_c.abs(),
            LARGE_DETUNING_RATIO * params.gamma2
        )
    })
}

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Control amplitude `(sqrt(Q)/2) exp(i (Q^2/4 - alpha_c) z) sech(x / L_c)`.
pub fn soliton_profile(x: f64, z: f64, coeffs: &MediumCoefficients) -> Complex64 {
    Complex64::from_polar(
        coeffs.soliton_amplitude() * sech(x / coeffs.l_c),
        coeffs.soliton_phase_rate() * z,
    )
}

/// Magnitude of the cubic control-equation residual of [`soliton_profile`]
/// at `(x, z)`, with centred differences of spacing `h` in both `x` and `z`.
pub fn cubic_residual(x: f64, z: f64, h: f64, coeffs: &MediumCoefficients) -> f64 {
    let f = |x: f64, z: f64| soliton_profile(x, z, coeffs);
    let dz = (f(x, z + h) - f(x, z - h)) / (2.0 * h);
    let dxx = (f(x + h, z) - 2.0 * f(x, z) + f(x - h, z)) / (h * h);
    let v = f(x, z);
    let r = Complex64::new(0.0, 1.0) * dz + dxx / (2.0 * coeffs.k_c)
        - coeffs.alpha_c * (1.0 - 2.0 * coeffs.beta * v.norm_sqr()) * v;
    r.norm()
}

/// Saturable probe potential `alpha_p (1 + 2 beta |Omega_c|^2)^-2` sampled on
/// the grid of `control`.
pub fn probe_potential(coeffs: &MediumCoefficients, control: &ComplexField1D) -> Vec<f64> {
    control
        .values
        .iter()
        .map(|v| saturable_potential(coeffs, v.norm_sqr()))
        .collect()
}

fn saturable_potential(coeffs: &MediumCoefficients, intensity: f64) -> f64 {
    coeffs.alpha_p / (1.0 + 2.0 * coeffs.beta * intensity).powi(2)
}

/// Probe potential of the centred sech control beam at position `x`.
pub fn soliton_potential_at(x: f64, coeffs: &MediumCoefficients) -> f64 {
    saturable_potential(coeffs, soliton_profile(x, 0.0, coeffs).norm_sqr())
}

/// First-order expansion `eta0 + eta1 (x - a)` of the probe potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearPotential {
    pub eta0: f64,
    pub eta1: f64,
    pub a: f64,
}

impl LinearPotential {
    pub fn at(&self, x: f64) -> f64 {
        self.eta0 + self.eta1 * (x - self.a)
    }
}

/// Expands the soliton-induced probe potential about `x = a`.
pub fn linearized_potential(a: f64, coeffs: &MediumCoefficients) -> LinearPotential {
    let u = a / coeffs.l_c;
    let sech2 = sech(u).powi(2);
    let sat = 1.0 + coeffs.peak_saturation() * sech2;
    let eta0 = coeffs.alpha_p / sat.powi(2);
    let eta1 =
        coeffs.alpha_p * coeffs.q.powi(2) * coeffs.beta * (2.0 * coeffs.k_c).sqrt() * sech2 * u.tanh() / sat.powi(3);
    LinearPotential { eta0, eta1, a }
}
