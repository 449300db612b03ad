//! Split-step spectral propagation of the control and probe envelopes along
//! `z` on a periodic transverse grid.
//!
//! Both beams obey `i dΩ/dz + (1/2k) d²Ω/dx² = V(x, |Ω|) Ω` with a real
//! potential; the probe equation is the stationary-beam form (time derivative
//! dropped, divided by `c`), so its potential is `V/c`. Each step is
//! half kinetic, full potential, half kinetic. The kinetic factor is applied
//! exactly in Fourier space and the potential factor is a pointwise phase, so
//! the discrete norm is conserved to rounding.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::medium::{self, LinearPotential, MediumCoefficients};
use crate::wei_norman::trajectory_endpoint;
use crate::{CoreError, Result};

/// Smallest supported grid.
pub const MIN_GRID_POINTS: usize = 64;

/// Largest allowed potential phase per step.
pub const MAX_STEP_PHASE: f64 = 0.1;

/// Default bound on `|Ω|` at the domain edges relative to the peak.
pub const DEFAULT_EDGE_TOLERANCE: f64 = 1e-6;

/// Edge bound for sech beams on a `16 L_c` domain. The tail at `8 L_c` is
/// `sech(8) = 6.7e-4` of the peak and the periodic images roughly double it.
pub const SOLITON_EDGE_TOLERANCE: f64 = 1e-2;

/// Uniform periodic grid `x_j = x_min + j dx`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransverseGrid {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

impl TransverseGrid {
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n < MIN_GRID_POINTS || !n.is_power_of_two() {
            return Err(CoreError::Configuration(format!(
                "grid size must be a power of two >= {MIN_GRID_POINTS}, got {n}"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(CoreError::Configuration(format!(
                "grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self {
            n,
            x_min,
            x_max,
            dx: (x_max - x_min) / n as f64,
        })
    }

    /// Grid of total width `width` centred on `x = 0`.
    pub fn centered(n: usize, width: f64) -> Result<Self> {
        Self::new(n, -0.5 * width, 0.5 * width)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn position(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.position(j))
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * std::f64::consts::PI / self.width();
        (0..self.n)
            .map(|j| {
                let m = if j < self.n / 2 {
                    j as f64
                } else {
                    j as f64 - self.n as f64
                };
                m * dk
            })
            .collect()
    }

    /// Fails when the domain is narrower than `8 L_c`.
    pub fn check_soliton_width(&self, l_c: f64) -> Result<()> {
        if self.width() < 8.0 * l_c {
            return Err(CoreError::Configuration(format!(
                "domain width {} is below 8 L_c = {}",
                self.width(),
                8.0 * l_c
            )));
        }
        Ok(())
    }
}

/// Sampled complex envelope at propagation distance `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField1D {
    pub grid: TransverseGrid,
    pub values: Vec<Complex64>,
    pub z: f64,
}

impl ComplexField1D {
    pub fn zeros(grid: TransverseGrid, z: f64) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.n],
            z,
        }
    }

    pub fn from_fn(grid: TransverseGrid, z: f64, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            grid,
            values: grid.positions().map(f).collect(),
            z,
        }
    }

    /// `sum |Ω|^2 dx`.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// `sqrt(sum |a - b|^2 dx)` against values on the same grid.
    pub fn l2_distance(&self, other: &[Complex64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            * self.grid.dx.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamDiagnostics {
    pub centroid: f64,
    pub rms_width: f64,
    pub norm: f64,
    pub peak_position: f64,
}

/// Moments of `|Ω|^2` by direct quadrature over the grid.
pub fn beam_diagnostics(field: &ComplexField1D) -> Result<BeamDiagnostics> {
    let grid = &field.grid;
    let mut power = 0.0;
    let mut first = 0.0;
    let mut peak = (0usize, 0.0f64);
    for (j, v) in field.values.iter().enumerate() {
        let p = v.norm_sqr();
        power += p;
        first += p * grid.position(j);
        if p > peak.1 {
            peak = (j, p);
        }
    }
    if !(power > 0.0) || !power.is_finite() {
        return Err(CoreError::UndefinedCentroid);
    }
    let centroid = first / power;
    let second: f64 = field
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| v.norm_sqr() * (grid.position(j) - centroid).powi(2))
        .sum();
    Ok(BeamDiagnostics {
        centroid,
        rms_width: (second / power).sqrt(),
        norm: power * grid.dx,
        peak_position: grid.position(peak.0),
    })
}

/// Gaussian `exp(-(x - a)^2 / b^2)` normalised to `sum |Ω|^2 dx = 1`.
pub fn make_gaussian(grid: TransverseGrid, a: f64, b: f64) -> Result<ComplexField1D> {
    if !(b > 0.0) || !b.is_finite() || !a.is_finite() {
        return Err(CoreError::InvalidParameter(format!(
            "Gaussian needs finite a and b > 0, got a = {a}, b = {b}"
        )));
    }
    if b < 4.0 * grid.dx {
        return Err(CoreError::UnderResolved(format!(
            "width b = {b} is below 4 dx = {}",
            4.0 * grid.dx
        )));
    }
    let mut field = ComplexField1D::from_fn(grid, 0.0, |x| Complex64::new((-((x - a) / b).powi(2)).exp(), 0.0));
    let scale = field.norm().sqrt().recip();
    field.values.iter_mut().for_each(|v| *v *= scale);
    Ok(field)
}

/// Nonlinearity of the control equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlModel {
    /// `alpha_c / (1 + 2 beta |Ω|^2)`.
    Saturable,
    /// Weak-intensity expansion `alpha_c (1 - 2 beta |Ω|^2)`.
    Cubic,
}

/// Potential seen by the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ProbePotential {
    /// `alpha_p (1 + 2 beta |Ω_c|^2)^-2` with the centred sech control beam.
    Full,
    /// `eta0 + eta1 (x - a)`.
    Linearized(LinearPotential),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationOptions {
    /// Bound on `|Ω|` at the two edge samples relative to the current peak.
    pub edge_tolerance: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            edge_tolerance: DEFAULT_EDGE_TOLERANCE,
        }
    }
}

struct SplitStep {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    half_kinetic: Vec<Complex64>,
    potential: Vec<f64>,
}

impl SplitStep {
    fn new(grid: &TransverseGrid, mass: f64, h: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n);
        let inverse = planner.plan_fft_inverse(grid.n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        let norm = 1.0 / grid.n as f64;
        let half_kinetic = grid
            .wavenumbers()
            .into_iter()
            .map(|k| Complex64::from_polar(norm, -k * k * h / (4.0 * mass)))
            .collect();
        Self {
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            half_kinetic,
            potential: vec![0.0; grid.n],
        }
    }

    fn kinetic(&mut self, values: &mut [Complex64]) {
        self.forward.process_with_scratch(values, &mut self.scratch);
        values.iter_mut().zip(&self.half_kinetic).for_each(|(v, k)| *v *= k);
        self.inverse.process_with_scratch(values, &mut self.scratch);
    }
}

fn check_edges(field: &ComplexField1D, tolerance: f64) -> Result<()> {
    let peak = field.max_abs();
    if peak == 0.0 {
        return Ok(());
    }
    let edge = field.values[0].norm().max(field.values[field.grid.n - 1].norm());
    if edge > tolerance * peak {
        return Err(CoreError::BoundaryContamination(format!(
            "edge amplitude {:.3e} of peak exceeds {tolerance:e} at z = {}",
            edge / peak,
            field.z
        )));
    }
    Ok(())
}

/// Runs the Strang splitting from `field.z` to `z_end` with steps no longer
/// than `dz`. `potential` fills the potential samples from the current
/// values; `observer` sees the initial field and the field after every step.
fn run_split_step(
    mut field: ComplexField1D,
    mass: f64,
    z_end: f64,
    dz: f64,
    options: &PropagationOptions,
    mut potential: impl FnMut(&[Complex64], &mut [f64]),
    observer: &mut dyn FnMut(&ComplexField1D),
) -> Result<ComplexField1D> {
    if !(dz > 0.0) || !dz.is_finite() {
        return Err(CoreError::Configuration(format!("dz > 0 required, got {dz}")));
    }
    if !(z_end >= field.z) {
        return Err(CoreError::Configuration(format!(
            "z_end = {z_end} precedes the field position {}",
            field.z
        )));
    }
    check_edges(&field, options.edge_tolerance)?;
    observer(&field);
    let z0 = field.z;
    let span = z_end - z0;
    let steps = (span / dz - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok(field);
    }
    let h = span / steps as f64;
    let mut stepper = SplitStep::new(&field.grid, mass, h);
    for n in 0..steps {
        stepper.kinetic(&mut field.values);
        potential(&field.values, &mut stepper.potential);
        field
            .values
            .iter_mut()
            .zip(&stepper.potential)
            .for_each(|(v, &u)| *v *= Complex64::from_polar(1.0, -u * h));
        stepper.kinetic(&mut field.values);
        field.z = if n + 1 == steps { z_end } else { z0 + (n + 1) as f64 * h };
        if !field.is_finite() {
            return Err(CoreError::Divergence(format!("non-finite field at z = {}", field.z)));
        }
        check_edges(&field, options.edge_tolerance)?;
        observer(&field);
    }
    Ok(field)
}

/// Default control step `0.01 / |alpha_c|`.
pub fn default_control_dz(coeffs: &MediumCoefficients) -> f64 {
    0.01 / coeffs.alpha_c.abs()
}

/// Default probe step `0.01 c / |alpha_p|`.
pub fn default_probe_dz(coeffs: &MediumCoefficients) -> f64 {
    0.01 * coeffs.c / coeffs.alpha_p.abs()
}

pub fn propagate_control(
    field: ComplexField1D,
    coeffs: &MediumCoefficients,
    z_end: f64,
    dz: f64,
    model: ControlModel,
    options: &PropagationOptions,
) -> Result<ComplexField1D> {
    propagate_control_observed(field, coeffs, z_end, dz, model, options, &mut |_| {})
}

/// [`propagate_control`] reporting every step to `observer`.
pub fn propagate_control_observed(
    field: ComplexField1D,
    coeffs: &MediumCoefficients,
    z_end: f64,
    dz: f64,
    model: ControlModel,
    options: &PropagationOptions,
    observer: &mut dyn FnMut(&ComplexField1D),
) -> Result<ComplexField1D> {
    if dz * coeffs.alpha_c.abs() >= MAX_STEP_PHASE {
        return Err(CoreError::Configuration(format!(
            "step guard violated: dz * |alpha_c| = {} >= {MAX_STEP_PHASE}",
            dz * coeffs.alpha_c.abs()
        )));
    }
    let (alpha, beta) = (coeffs.alpha_c, coeffs.beta);
    let potential = move |values: &[Complex64], out: &mut [f64]| {
        for (u, v) in out.iter_mut().zip(values) {
            let s = 2.0 * beta * v.norm_sqr();
            *u = match model {
                ControlModel::Saturable => alpha / (1.0 + s),
                ControlModel::Cubic => alpha * (1.0 - s),
            };
        }
    };
    run_split_step(field, coeffs.k_c, z_end, dz, options, potential, observer)
}

/// The centred control profile sampled on `grid` at `z`.
pub fn soliton_field(grid: TransverseGrid, z: f64, coeffs: &MediumCoefficients) -> ComplexField1D {
    ComplexField1D::from_fn(grid, z, |x| medium::soliton_profile(x, z, coeffs))
}

/// Potential samples (frequency units) for the probe on `grid`.
pub fn probe_potential_samples(
    grid: TransverseGrid,
    potential: &ProbePotential,
    coeffs: &MediumCoefficients,
) -> Vec<f64> {
    match potential {
        ProbePotential::Full => medium::probe_potential(coeffs, &soliton_field(grid, 0.0, coeffs)),
        ProbePotential::Linearized(eta) => grid.positions().map(|x| eta.at(x)).collect(),
    }
}

pub fn propagate_probe(
    field: ComplexField1D,
    potential: &ProbePotential,
    coeffs: &MediumCoefficients,
    z_end: f64,
    dz: f64,
    options: &PropagationOptions,
) -> Result<ComplexField1D> {
    propagate_probe_observed(field, potential, coeffs, z_end, dz, options, &mut |_| {})
}

/// [`propagate_probe`] reporting every step to `observer`.
pub fn propagate_probe_observed(
    field: ComplexField1D,
    potential: &ProbePotential,
    coeffs: &MediumCoefficients,
    z_end: f64,
    dz: f64,
    options: &PropagationOptions,
    observer: &mut dyn FnMut(&ComplexField1D),
) -> Result<ComplexField1D> {
    if let ProbePotential::Linearized(_) = potential {
        // width parameter b of exp(-(x-a)^2/b^2) is twice the rms width
        let b = 2.0 * beam_diagnostics(&field)?.rms_width;
        if b > coeffs.l_c {
            return Err(CoreError::InvalidRegime(format!(
                "linearized potential needs probe width b <= L_c, got b = {b} and L_c = {}",
                coeffs.l_c
            )));
        }
    }
    let samples = probe_potential_samples(field.grid, potential, coeffs);
    let scaled: Vec<f64> = samples.iter().map(|v| v / coeffs.c).collect();
    let max_phase = scaled.iter().fold(0.0f64, |m, v| m.max(v.abs())) * dz;
    if max_phase >= MAX_STEP_PHASE {
        return Err(CoreError::Configuration(format!(
            "step guard violated: dz * max|V|/c = {max_phase} >= {MAX_STEP_PHASE}"
        )));
    }
    run_split_step(
        field,
        coeffs.k_p,
        z_end,
        dz,
        options,
        |_, out| out.copy_from_slice(&scaled),
        observer,
    )
}

/// Transverse bend of the probe relative to its starting offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BendDirection {
    Left,
    Right,
    Straight,
}

impl BendDirection {
    /// Classifies a signed shift; `|shift| <= tolerance` is straight.
    pub fn from_shift(shift: f64, tolerance: f64) -> Self {
        if shift.abs() <= tolerance {
            Self::Straight
        } else if shift < 0.0 {
            Self::Left
        } else {
            Self::Right
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Left => "left",
            Self::Right => "right",
            Self::Straight => "straight",
        }
    }
}

/// Inputs shared by every cell of a deflection scan. Grid width, probe
/// width and the straight-line tolerance scale with each cell's `L_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeflectionSetup {
    /// Coefficient template; re-derived for each detuning.
    pub medium: MediumCoefficients,
    pub atom: crate::bloch::AtomParams,
    pub grid_points: usize,
    pub width_lc: f64,
    pub b_lc: f64,
    /// Propagation length `L`.
    pub length: f64,
    /// Probe step; `None` uses [`default_probe_dz`].
    pub dz: Option<f64>,
    pub options: PropagationOptions,
    /// Shifts below `straight_tolerance_lc * L_c` count as straight.
    pub straight_tolerance_lc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeflectionCell {
    pub a: f64,
    pub delta_c: f64,
    pub l_c: f64,
    pub dx: f64,
    pub dz: f64,
    pub eta: LinearPotential,
    /// Final centroid under the linearized potential.
    pub x_linear: f64,
    /// Final centroid under the full saturable potential.
    pub x_full: f64,
    /// Endpoint `a - eta1 L^2 / (2 k_p c)`.
    pub x_analytic: f64,
    pub direction: BendDirection,
    /// Largest relative norm change of the two runs.
    pub norm_drift: f64,
}

impl DeflectionCell {
    /// Numerical centroid of the physical (full potential) run.
    pub fn x_numeric(&self) -> f64 {
        self.x_full
    }

    pub fn shift(&self) -> f64 {
        self.x_full - self.a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionOutcome {
    pub a: f64,
    pub delta_c: f64,
    pub result: Result<DeflectionCell>,
}

/// Runs one `(a, delta_c)` cell: soliton control, linearized and full probe
/// propagation over `setup.length`, and the analytic endpoint.
pub fn deflection_cell(a: f64, delta_c: f64, setup: &DeflectionSetup) -> Result<DeflectionCell> {
    let atom = crate::bloch::AtomParams { delta_c, ..setup.atom };
    let coeffs = setup.medium.for_atom(&atom)?;
    let grid = TransverseGrid::centered(setup.grid_points, setup.width_lc * coeffs.l_c)?;
    grid.check_soliton_width(coeffs.l_c)?;
    let b = setup.b_lc * coeffs.l_c;
    let probe = make_gaussian(grid, a, b)?;
    let eta = medium::linearized_potential(a, &coeffs);
    let dz = setup.dz.unwrap_or_else(|| default_probe_dz(&coeffs));

    let norm0 = probe.norm();
    let linear = propagate_probe(
        probe.clone(),
        &ProbePotential::Linearized(eta),
        &coeffs,
        setup.length,
        dz,
        &setup.options,
    )?;
    let full = propagate_probe(probe, &ProbePotential::Full, &coeffs, setup.length, dz, &setup.options)?;
    let linear_diag = beam_diagnostics(&linear)?;
    let full_diag = beam_diagnostics(&full)?;
    let (x_analytic, _) = trajectory_endpoint(a, eta.eta1, coeffs.k_p, coeffs.c, setup.length);
    let norm_drift = ((linear_diag.norm - norm0).abs()).max((full_diag.norm - norm0).abs()) / norm0;
    Ok(DeflectionCell {
        a,
        delta_c,
        l_c: coeffs.l_c,
        dx: grid.dx,
        dz,
        eta,
        x_linear: linear_diag.centroid,
        x_full: full_diag.centroid,
        x_analytic,
        direction: BendDirection::from_shift(full_diag.centroid - a, setup.straight_tolerance_lc * coeffs.l_c),
        norm_drift,
    })
}

/// Scans all `(a, delta_c)` pairs in row-major order (`a` outer). Failed
/// cells are recorded and the scan continues.
pub fn deflection_experiment(
    a_values: &[f64],
    delta_values: &[f64],
    setup: &DeflectionSetup,
) -> Vec<DeflectionOutcome> {
    a_values
        .iter()
        .flat_map(|&a| delta_values.iter().map(move |&d| (a, d)))
        .map(|(a, delta_c)| DeflectionOutcome {
            a,
            delta_c,
            result: deflection_cell(a, delta_c, setup),
        })
        .collect()
}
