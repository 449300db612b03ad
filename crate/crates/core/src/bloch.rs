//! Optical Bloch equations of a closed two-level medium driven by a strong
//! control field and a weak probe detuned from it by the beat frequency
//! `delta`.
//!
//! Two independent routes to the steady state are provided:
//!
//! - closed forms for the zeroth order in the probe ([`steady_state_zeroth`])
//!   and the first-order probe sideband coherence ([`first_order_closed`]);
//! - a linear solve of the truncated Floquet equations with the time
//!   derivatives set to zero ([`floquet_steady_solve`]).
//!
//! [`integrate_bloch`] integrates the full time-dependent equations and is the
//! oracle for both.
//!
//! Sideband convention: the "minus" components are the `exp(-i delta t)`
//! harmonics (at the reference position `z = 0`). The probe enters the
//! `sigma_ge` equation as `i Omega_p exp(-i delta t) w`, which is the pairing
//! under which the first-order equations close on
//! `(w_minus, sigma_eg_minus, sigma_ge_minus)`.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::{CoreError, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest accepted condition number of the steady-state linear systems.
pub const MAX_CONDITION: f64 = 1e12;

/// Smallest accepted |D| in [`first_order_closed`].
pub const MIN_DENOMINATOR: f64 = 1e-12;

/// Probe Rabi frequency used internally by [`probe_spectrum`].
pub const SPECTRUM_PROBE_AMPLITUDE: f64 = 1e-3;

/// Decay rates, control detuning and equilibrium inversion of the medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomParams {
    /// Population decay rate `1/T1`.
    pub gamma1: f64,
    /// Dipole dephasing rate `1/T2`.
    pub gamma2: f64,
    /// Control detuning from the atomic transition.
    pub delta_c: f64,
    /// Thermal-equilibrium inversion, in `[-1, 0]`.
    pub w_eq: f64,
}

impl AtomParams {
    pub fn new(gamma1: f64, gamma2: f64, delta_c: f64, w_eq: f64) -> Result<Self> {
        let params = Self {
            gamma1,
            gamma2,
            delta_c,
            w_eq,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.gamma1, self.gamma2, self.delta_c, self.w_eq]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(CoreError::InvalidParameter("atom parameters must be finite".into()));
        }
        if self.gamma1 <= 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "gamma1 > 0 required, got {}",
                self.gamma1
            )));
        }
        if self.gamma2 <= 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "gamma2 > 0 required, got {}",
                self.gamma2
            )));
        }
        if self.gamma2 < 0.5 * self.gamma1 {
            return Err(CoreError::InvalidParameter(format!(
                "gamma2 >= gamma1/2 required, got gamma2 = {} and gamma1 = {}",
                self.gamma2, self.gamma1
            )));
        }
        if !(-1.0..=0.0).contains(&self.w_eq) {
            return Err(CoreError::InvalidParameter(format!(
                "-1 <= w_eq <= 0 required, got {}",
                self.w_eq
            )));
        }
        Ok(())
    }

    /// Population relaxation time `T1`.
    pub fn t1(&self) -> f64 {
        1.0 / self.gamma1
    }

    /// Dephasing time `T2`.
    pub fn t2(&self) -> f64 {
        1.0 / self.gamma2
    }

    fn saturation_denominator(&self, omega_c: Complex64) -> f64 {
        self.gamma1 * (self.delta_c.powi(2) + self.gamma2.powi(2)) + 4.0 * self.gamma2 * omega_c.norm_sqr()
    }
}

/// Control and probe Rabi frequencies and their beat detuning
/// `delta = nu_c - nu_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriveFields {
    pub omega_c: Complex64,
    pub omega_p: Complex64,
    pub delta: f64,
}

impl DriveFields {
    pub fn new(omega_c: Complex64, omega_p: Complex64, delta: f64) -> Self {
        Self {
            omega_c,
            omega_p,
            delta,
        }
    }

    /// Control field only.
    pub fn control_only(omega_c: Complex64) -> Self {
        Self::new(omega_c, Complex64::new(0.0, 0.0), 0.0)
    }

    /// The first-order treatment assumes `|Omega_p| << |Omega_c|`; returns a
    /// message when `|Omega_p| > 0.1 |Omega_c|`.
    pub fn weak_probe_warning(&self) -> Option<String> {
        if self.omega_p.norm() > 0.1 * self.omega_c.norm() {
            Some(format!(
                "probe not weak: |omega_p| = {:.3e} exceeds 0.1 |omega_c| = {:.3e}",
                self.omega_p.norm(),
                0.1 * self.omega_c.norm()
            ))
        } else {
            None
        }
    }
}

/// Inversion and coherence at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlochState {
    pub w: f64,
    pub sigma_eg: Complex64,
    pub time: f64,
}

impl BlochState {
    pub fn new(w: f64, sigma_eg: Complex64, time: f64) -> Self {
        Self { w, sigma_eg, time }
    }

    /// Thermal equilibrium of `params` at `t = 0`.
    pub fn equilibrium(params: &AtomParams) -> Self {
        Self::new(params.w_eq, Complex64::new(0.0, 0.0), 0.0)
    }

    pub fn sigma_ge(&self) -> Complex64 {
        self.sigma_eg.conj()
    }

    /// Density-matrix bounds `|w| <= 1`, `|sigma_eg| <= 1/2` within `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.w.abs() <= 1.0 + tol && self.sigma_eg.norm() <= 0.5 + tol
    }
}

/// Zeroth- and first-order Floquet components of the steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyResponse {
    pub w0: f64,
    pub sigma_ge0: Complex64,
    pub sigma_ge_minus: Complex64,
    pub w_minus: Complex64,
    pub sigma_eg_minus: Complex64,
    pub d_denominator: Complex64,
}

fn bloch_rhs(params: &AtomParams, fields: &DriveFields, t: f64, w: f64, sigma_eg: Complex64) -> (f64, Complex64) {
    // Total Rabi frequency seen by sigma_ge at z = 0.
    let omega = fields.omega_c + fields.omega_p * Complex64::from_polar(1.0, -fields.delta * t);
    let sigma_ge = sigma_eg.conj();
    let dw = -params.gamma1 * (w - params.w_eq) - 4.0 * (omega.conj() * sigma_ge).im;
    let dsigma = -(I * params.delta_c + params.gamma2) * sigma_eg - I * omega.conj() * w;
    (dw, dsigma)
}

/// Classic fourth-order Runge-Kutta integration of the Bloch equations from
/// `initial` to `t_end`.
///
/// The step is `dt` rounded down so that an integer number of steps lands on
/// `t_end`. Every `stride`-th state is recorded, plus the initial and final
/// states.
pub fn integrate_bloch(
    params: &AtomParams,
    fields: &DriveFields,
    initial: BlochState,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<Vec<BlochState>> {
    params.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(CoreError::Configuration(format!("dt > 0 required, got {dt}")));
    }
    if !(t_end >= initial.time) {
        return Err(CoreError::Configuration(format!(
            "t_end = {t_end} precedes the initial time {}",
            initial.time
        )));
    }
    let max_rate = [
        params.gamma1,
        params.gamma2,
        params.delta_c.abs(),
        fields.omega_c.norm() + fields.omega_p.norm(),
        fields.delta.abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if dt * max_rate >= 0.1 {
        return Err(CoreError::Configuration(format!(
            "step guard violated: dt * max_rate = {} * {} >= 0.1",
            dt, max_rate
        )));
    }
    let stride = stride.max(1);
    let span = t_end - initial.time;
    let steps = (span / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { span / steps as f64 };

    let mut out = Vec::with_capacity(steps / stride + 2);
    out.push(initial);
    let (mut w, mut s) = (initial.w, initial.sigma_eg);
    for n in 0..steps {
        let t = initial.time + n as f64 * h;
        let (k1w, k1s) = bloch_rhs(params, fields, t, w, s);
        let (k2w, k2s) = bloch_rhs(params, fields, t + 0.5 * h, w + 0.5 * h * k1w, s + 0.5 * h * k1s);
        let (k3w, k3s) = bloch_rhs(params, fields, t + 0.5 * h, w + 0.5 * h * k2w, s + 0.5 * h * k2s);
        let (k4w, k4s) = bloch_rhs(params, fields, t + h, w + h * k3w, s + h * k3s);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        s += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
        if !(w.is_finite() && s.re.is_finite() && s.im.is_finite()) {
            return Err(CoreError::Divergence(format!(
                "non-finite Bloch state at t = {}",
                t + h
            )));
        }
        let last = n + 1 == steps;
        if (n + 1) % stride == 0 || last {
            let time = if last { t_end } else { t + h };
            out.push(BlochState::new(w, s, time));
        }
    }
    Ok(out)
}

/// Closed-form zeroth-order steady state `(w0, sigma_ge0)` under the control
/// field alone.
pub fn steady_state_zeroth(params: &AtomParams, omega_c: Complex64) -> (f64, Complex64) {
    let den = params.saturation_denominator(omega_c);
    let detuning_sq = params.delta_c.powi(2) + params.gamma2.powi(2);
    let w0 = params.gamma1 * detuning_sq * params.w_eq / den;
    let sigma_ge0 = params.gamma1 * Complex64::new(-params.delta_c, params.gamma2) * omega_c / den * params.w_eq;
    (w0, sigma_ge0)
}

/// The CPO resonance denominator `D(delta)`.
pub fn cpo_denominator(params: &AtomParams, omega_c: Complex64, delta: f64) -> Complex64 {
    let (g1, g2, dc) = (params.gamma1, params.gamma2, params.delta_c);
    Complex64::new(delta, g1) * Complex64::new(delta - dc, g2) * Complex64::new(delta + dc, g2)
        - 4.0 * omega_c.norm_sqr() * Complex64::new(delta, g2)
}

/// Closed-form first-order probe coherence `sigma_ge_minus`, evaluated term
/// by term with the common factor of the first term kept explicit.
pub fn first_order_closed(
    params: &AtomParams,
    omega_c: Complex64,
    omega_p: Complex64,
    delta: f64,
) -> Result<Complex64> {
    params.validate()?;
    let d = cpo_denominator(params, omega_c, delta);
    if d.norm() < MIN_DENOMINATOR {
        return Err(CoreError::Singular(format!(
            "|D| = {:.3e} below {MIN_DENOMINATOR:e} at delta = {delta}",
            d.norm()
        )));
    }
    let (w0, _) = steady_state_zeroth(params, omega_c);
    let (g2, dc) = (params.gamma2, params.delta_c);
    let dephase = Complex64::new(-dc, g2); // i gamma2 - Delta
    let upper = Complex64::new(delta + dc, g2); // delta + Delta + i gamma2
    let lower = Complex64::new(delta - dc, g2); // delta - Delta + i gamma2
    let common = d * dephase * upper;
    let first = -(d * dephase) / common * w0 * omega_p;
    let second = -2.0 * omega_c.norm_sqr() * Complex64::new(delta, 2.0 * g2) * lower / common * w0 * omega_p;
    Ok(first + second)
}

type Complex3 = [[Complex64; 3]; 3];

/// Solves the complex 3x3 system through its real 6x6 embedding and reports
/// the 2-norm condition number of the embedded matrix.
fn solve_embedded(matrix: &Complex3, rhs: &[Complex64; 3]) -> Result<([Complex64; 3], f64)> {
    let mut real = SMatrix::<f64, 6, 6>::zeros();
    let mut b = SVector::<f64, 6>::zeros();
    for r in 0..3 {
        for c in 0..3 {
            let m = matrix[r][c];
            real[(r, c)] = m.re;
            real[(r, c + 3)] = -m.im;
            real[(r + 3, c)] = m.im;
            real[(r + 3, c + 3)] = m.re;
        }
        b[r] = rhs[r].re;
        b[r + 3] = rhs[r].im;
    }
    let singular = real.singular_values();
    let smax = singular.max();
    let smin = singular.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(CoreError::Singular(format!(
            "condition number {condition:.3e} exceeds {MAX_CONDITION:e}"
        )));
    }
    let x = real
        .lu()
        .solve(&b)
        .ok_or_else(|| CoreError::Singular("LU factorization failed".into()))?;
    Ok((
        [
            Complex64::new(x[0], x[3]),
            Complex64::new(x[1], x[4]),
            Complex64::new(x[2], x[5]),
        ],
        condition,
    ))
}

/// Steady state of the truncated Floquet equations by direct linear solves.
///
/// The zeroth order is solved for `(w, sigma_eg, sigma_ge)` as independent
/// unknowns; the first order for `(w_minus, sigma_eg_minus, sigma_ge_minus)`,
/// where the Hermitian-conjugate coupling in the inversion equation is
/// `Omega_c sigma_eg_minus` and the `plus` sidebands follow from
/// `w_plus = conj(w_minus)`, `sigma_eg_plus = conj(sigma_ge_minus)`.
pub fn floquet_steady_solve(
    params: &AtomParams,
    omega_c: Complex64,
    omega_p: Complex64,
    delta: f64,
) -> Result<SteadyResponse> {
    params.validate()?;
    let (g1, g2, dc) = (params.gamma1, params.gamma2, params.delta_c);
    let zero = Complex64::new(0.0, 0.0);
    let oc = omega_c;
    let occ = omega_c.conj();

    let zeroth: Complex3 = [
        [Complex64::from(-g1), -2.0 * I * oc, 2.0 * I * occ],
        [-I * occ, -(I * dc + g2), zero],
        [I * oc, zero, I * dc - g2],
    ];
    let (x0, _) = solve_embedded(&zeroth, &[Complex64::from(-g1 * params.w_eq), zero, zero])?;
    let w0 = x0[0].re;
    let sigma_eg0 = x0[1];
    let sigma_ge0 = x0[2];

    let first: Complex3 = [
        [Complex64::new(-g1, delta), -2.0 * I * oc, 2.0 * I * occ],
        [-I * occ, Complex64::new(-g2, delta - dc), zero],
        [I * oc, zero, Complex64::new(-g2, delta + dc)],
    ];
    let rhs = [2.0 * I * omega_p * sigma_eg0, zero, -I * omega_p * w0];
    let (x1, _) = solve_embedded(&first, &rhs)?;

    Ok(SteadyResponse {
        w0,
        sigma_ge0,
        sigma_ge_minus: x1[2],
        w_minus: x1[0],
        sigma_eg_minus: x1[1],
        d_denominator: cpo_denominator(params, omega_c, delta),
    })
}

/// One sample of the probe response `chi = sigma_ge_minus / Omega_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPoint {
    pub delta: f64,
    pub chi: Result<Complex64>,
}

impl SpectrumPoint {
    /// `(re chi, im chi)`, NaN for failed points.
    pub fn components(&self) -> (f64, f64) {
        match &self.chi {
            Ok(c) => (c.re, c.im),
            Err(_) => (f64::NAN, f64::NAN),
        }
    }
}

/// Probe response over a grid of beat detunings. Failed points are kept and
/// marked rather than aborting the scan.
pub fn probe_spectrum(params: &AtomParams, omega_c: Complex64, delta_grid: &[f64]) -> Result<Vec<SpectrumPoint>> {
    params.validate()?;
    if delta_grid.is_empty() {
        return Err(CoreError::InvalidParameter("empty detuning grid".into()));
    }
    if let Some(bad) = delta_grid.iter().find(|d| !d.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "non-finite detuning {bad} in grid"
        )));
    }
    let probe = Complex64::new(SPECTRUM_PROBE_AMPLITUDE, 0.0);
    Ok(delta_grid
        .iter()
        .map(|&delta| SpectrumPoint {
            delta,
            chi: floquet_steady_solve(params, omega_c, probe, delta).map(|r| r.sigma_ge_minus / probe),
        })
        .collect())
}

/// Evenly spaced detuning grid including both ends.
pub fn linear_grid(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (points - 1) as f64;
            (0..points).map(|i| start + step * i as f64).collect()
        }
    }
}

/// Geometry of the hole in `|Im chi|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DipMetrics {
    pub center: f64,
    pub fwhm: f64,
    pub depth: f64,
    pub minimum: f64,
    pub baseline: f64,
}

/// Locates the interior local minimum of `|Im chi|` nearest `delta = 0` and
/// measures it against the lower of its two flanking maxima.
pub fn dip_metrics(spectrum: &[SpectrumPoint]) -> Result<DipMetrics> {
    let points: Vec<(f64, f64)> = spectrum
        .iter()
        .filter_map(|p| p.chi.as_ref().ok().map(|c| (p.delta, c.im.abs())))
        .collect();
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(CoreError::InvalidParameter(
            "spectrum detunings must be strictly increasing".into(),
        ));
    }
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let n = y.len();

    let dip = (1..n.saturating_sub(1))
        .filter(|&i| y[i] < y[i - 1] && y[i] < y[i + 1])
        .min_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()))
        .ok_or_else(|| CoreError::NoDip("|Im chi| has no interior local minimum on the grid".into()))?;

    let mut left = dip;
    while left > 0 && y[left - 1] > y[left] {
        left -= 1;
    }
    let mut right = dip;
    while right + 1 < n && y[right + 1] > y[right] {
        right += 1;
    }
    let baseline = y[left].min(y[right]);
    let minimum = y[dip];
    let depth = baseline - minimum;
    let half = minimum + 0.5 * depth;

    let cross = |from: usize, to: usize| -> f64 {
        // y[from] < half <= y[to], adjacent samples
        x[from] + (half - y[from]) * (x[to] - x[from]) / (y[to] - y[from])
    };
    let mut j = dip;
    while y[j - 1] < half {
        j -= 1;
    }
    let left_cross = cross(j, j - 1);
    let mut k = dip;
    while y[k + 1] < half {
        k += 1;
    }
    let right_cross = cross(k, k + 1);

    Ok(DipMetrics {
        center: x[dip],
        fwhm: right_cross - left_cross,
        depth,
        minimum,
        baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_params() -> AtomParams {
        AtomParams::new(1.0, 1.0, 0.0, -1.0).unwrap()
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(AtomParams::new(0.0, 1.0, 0.0, -1.0).is_err());
        assert!(AtomParams::new(1.0, 0.0, 0.0, -1.0).is_err());
        assert!(AtomParams::new(1.0, 0.4, 0.0, -1.0).is_err());
        assert!(AtomParams::new(1.0, 1.0, 0.0, 0.5).is_err());
        assert!(AtomParams::new(1.0, 1.0, 0.0, -1.5).is_err());
        assert!(AtomParams::new(0.1, 1.0, f64::NAN, -1.0).is_err());
    }

    #[test]
    fn free_inversion_relaxes_exponentially() {
        let params = AtomParams::new(0.3, 1.0, 2.0, -0.7).unwrap();
        let fields = DriveFields::control_only(c(0.0, 0.0));
        let series = integrate_bloch(&params, &fields, BlochState::new(0.0, c(0.0, 0.0), 0.0), 5.0, 0.01, 1).unwrap();
        for s in series {
            let exact = params.w_eq * (1.0 - (-params.gamma1 * s.time).exp());
            assert!((s.w - exact).abs() < 1e-10, "t = {}", s.time);
        }
    }

    #[test]
    fn free_coherence_precesses_and_decays() {
        let params = AtomParams::new(0.3, 0.8, 2.0, -1.0).unwrap();
        let fields = DriveFields::control_only(c(0.0, 0.0));
        let s0 = c(0.2, -0.1);
        let series = integrate_bloch(&params, &fields, BlochState::new(-1.0, s0, 0.0), 4.0, 0.001, 7).unwrap();
        assert_eq!(series.last().unwrap().time, 4.0);
        for s in series {
            let exact = s0 * (-(I * params.delta_c + params.gamma2) * s.time).exp();
            assert!((s.sigma_eg - exact).norm() < 1e-10, "t = {}", s.time);
        }
    }

    #[test]
    fn long_time_limit_matches_closed_form() {
        let params = unit_params();
        let fields = DriveFields::control_only(c(1.0, 0.0));
        let series = integrate_bloch(&params, &fields, BlochState::equilibrium(&params), 50.0, 0.01, 1000).unwrap();
        let last = series.last().unwrap();
        assert!((last.w + 0.2).abs() < 1e-6);
        assert!((last.sigma_ge() - c(0.0, -0.2)).norm() < 1e-6);
    }

    #[test]
    fn step_guard_rejects_coarse_steps() {
        let params = AtomParams::new(0.1, 1.0, 20.0, -1.0).unwrap();
        let fields = DriveFields::control_only(c(1.0, 0.0));
        let err = integrate_bloch(&params, &fields, BlochState::equilibrium(&params), 1.0, 0.005, 1).unwrap_err();
        assert!(matches!(err, CoreError::Configuration(_)));
        assert!(integrate_bloch(&params, &fields, BlochState::equilibrium(&params), 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn integration_stays_on_bloch_ball() {
        let params = AtomParams::new(0.05, 0.5, -1.0, -1.0).unwrap();
        let fields = DriveFields::new(c(1.5, 0.5), c(0.1, 0.0), 0.3);
        let series = integrate_bloch(&params, &fields, BlochState::equilibrium(&params), 40.0, 0.01, 1).unwrap();
        assert!(series.iter().all(|s| s.is_physical(1e-9)));
    }

    #[test]
    fn zeroth_order_examples() {
        let params = unit_params();
        assert_eq!(steady_state_zeroth(&params, c(0.0, 0.0)), (-1.0, c(0.0, 0.0)));
        let (w0, s0) = steady_state_zeroth(&params, c(1.0, 0.0));
        assert!((w0 + 0.2).abs() < 1e-15);
        assert!((s0 - c(0.0, -0.2)).norm() < 1e-15);

        let far = AtomParams::new(1.0, 1.0, 1e6, -1.0).unwrap();
        let (w_far, _) = steady_state_zeroth(&far, c(1.0, 0.0));
        assert!((w_far + 1.0).abs() < 1e-10);
    }

    #[test]
    fn cpo_denominator_example() {
        let d = cpo_denominator(&unit_params(), c(1.0, 0.0), 0.0);
        assert!((d - c(0.0, -5.0)).norm() < 1e-15);
    }

    #[test]
    fn first_order_without_control_is_bare_linear_response() {
        let params = AtomParams::new(0.2, 1.0, 3.0, -0.8).unwrap();
        let omega_p = c(0.01, 0.002);
        for delta in [-4.0, -0.5, 0.0, 1.3] {
            let closed = first_order_closed(&params, c(0.0, 0.0), omega_p, delta).unwrap();
            let bare = -params.w_eq * omega_p / c(delta + params.delta_c, params.gamma2);
            assert!((closed - bare).norm() < 1e-15 * bare.norm().max(1.0));
        }
    }

    #[test]
    fn first_order_closed_is_linear_in_probe() {
        let params = AtomParams::new(0.1, 1.0, -2.0, -1.0).unwrap();
        let a = first_order_closed(&params, c(0.7, 0.1), c(0.01, 0.0), 0.05).unwrap();
        let b = first_order_closed(&params, c(0.7, 0.1), c(0.02, 0.0), 0.05).unwrap();
        assert!((b - 2.0 * a).norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn singular_denominator_is_reported() {
        // |D(0)| = g1 g2^2 without control
        let params = AtomParams::new(1e-7, 1e-7, 0.0, -1.0).unwrap();
        let err = first_order_closed(&params, c(0.0, 0.0), c(1e-3, 0.0), 0.0).unwrap_err();
        assert!(matches!(err, CoreError::Singular(_)));
    }

    #[test]
    fn floquet_without_probe_has_no_sidebands() {
        let params = AtomParams::new(0.05, 1.0, -3.0, -1.0).unwrap();
        let oc = c(0.8, -0.3);
        let r = floquet_steady_solve(&params, oc, c(0.0, 0.0), 0.2).unwrap();
        assert_eq!(r.sigma_ge_minus, c(0.0, 0.0));
        assert_eq!(r.w_minus, c(0.0, 0.0));
        assert_eq!(r.sigma_eg_minus, c(0.0, 0.0));
        let (w0, s0) = steady_state_zeroth(&params, oc);
        assert!((r.w0 - w0).abs() < 1e-14);
        assert!((r.sigma_ge0 - s0).norm() < 1e-14);
    }

    #[test]
    fn floquet_matches_closed_form() {
        let params = AtomParams::new(0.3, 1.0, 2.0, -0.9).unwrap();
        for (oc, delta) in [(c(0.7, 0.0), 0.3), (c(0.2, 1.1), -2.5), (c(2.0, 0.0), 0.0)] {
            let solve = floquet_steady_solve(&params, oc, c(0.01, 0.0), delta).unwrap();
            let closed = first_order_closed(&params, oc, c(0.01, 0.0), delta).unwrap();
            assert!((solve.sigma_ge_minus - closed).norm() < 1e-12 * closed.norm());
        }
    }

    #[test]
    fn floquet_halving_probe_halves_response() {
        let params = unit_params();
        let a = floquet_steady_solve(&params, c(1.0, 0.0), c(0.01, 0.0), 0.0).unwrap();
        let b = floquet_steady_solve(&params, c(1.0, 0.0), c(0.005, 0.0), 0.0).unwrap();
        assert!(a.sigma_ge_minus.norm().is_finite() && a.sigma_ge_minus.norm() > 0.0);
        assert!((a.sigma_ge_minus - 2.0 * b.sigma_ge_minus).norm() <= 1e-12 * a.sigma_ge_minus.norm());
    }

    #[test]
    fn probe_sideband_of_time_integration_matches_floquet() {
        // Project the exp(-i delta t) harmonic of sigma_ge out of a long run.
        let params = AtomParams::new(0.2, 1.0, 0.5, -1.0).unwrap();
        let (oc, op, delta) = (c(0.6, 0.0), c(1e-4, 0.0), 0.8);
        let period = 2.0 * std::f64::consts::PI / delta;
        let dt = period / 4000.0;
        let t_settle = 200.0;
        let fields = DriveFields::new(oc, op, delta);
        let series = integrate_bloch(
            &params,
            &fields,
            BlochState::equilibrium(&params),
            t_settle + period,
            dt,
            1,
        )
        .unwrap();
        let tail: Vec<_> = series.iter().filter(|s| s.time >= t_settle - 1e-12).collect();
        // the zeroth order is ~1e4 times larger than the sideband; remove it
        // before projecting so the sample window need not be an exact period
        let (_, sigma_ge0) = steady_state_zeroth(&params, oc);
        let mut acc = c(0.0, 0.0);
        for s in &tail[..tail.len() - 1] {
            acc += (s.sigma_ge() - sigma_ge0) * Complex64::from_polar(1.0, delta * s.time);
        }
        let harmonic = acc / (tail.len() - 1) as f64;
        let steady = floquet_steady_solve(&params, oc, op, delta).unwrap();
        let rel = (harmonic - steady.sigma_ge_minus).norm() / steady.sigma_ge_minus.norm();
        assert!(rel < 1e-3, "relative mismatch {rel}");
    }

    #[test]
    fn spectrum_without_control_is_lorentzian() {
        let params = AtomParams::new(0.01, 1.0, 1.5, -1.0).unwrap();
        let grid = linear_grid(-6.0, 3.0, 91);
        let spec = probe_spectrum(&params, c(0.0, 0.0), &grid).unwrap();
        for p in &spec {
            let (_, im) = p.components();
            let lorentz = params.w_eq * params.gamma2 / ((p.delta + params.delta_c).powi(2) + params.gamma2.powi(2));
            assert!((im - lorentz).abs() < 1e-12);
        }
        assert!(matches!(dip_metrics(&spec), Err(CoreError::NoDip(_))));
    }

    #[test]
    fn spectrum_has_cpo_hole_at_zero_beat() {
        let params = AtomParams::new(0.01, 1.0, 0.0, -1.0).unwrap();
        let grid = linear_grid(-3.0, 3.0, 3001);
        let spec = probe_spectrum(&params, c(0.2, 0.0), &grid).unwrap();
        let m = dip_metrics(&spec).unwrap();
        assert!(m.center.abs() < 1e-12);
        assert!(m.depth > 0.0 && m.fwhm > 0.0);
    }

    #[test]
    fn spectrum_symmetry_at_zero_detuning() {
        let params = AtomParams::new(0.05, 1.0, 0.0, -1.0).unwrap();
        let grid = linear_grid(-2.0, 2.0, 81);
        let spec = probe_spectrum(&params, c(0.4, 0.0), &grid).unwrap();
        let n = spec.len();
        for i in 0..n {
            let (re_a, im_a) = spec[i].components();
            let (re_b, im_b) = spec[n - 1 - i].components();
            // chi(-delta) = -conj(chi(delta)): Re odd, Im even
            assert!((re_a + re_b).abs() < 1e-12, "re at {}", spec[i].delta);
            assert!((im_a - im_b).abs() < 1e-12, "im at {}", spec[i].delta);
        }
    }

    #[test]
    fn spectrum_rejects_bad_grids() {
        let params = unit_params();
        assert!(probe_spectrum(&params, c(1.0, 0.0), &[]).is_err());
        assert!(probe_spectrum(&params, c(1.0, 0.0), &[0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn failed_points_are_marked() {
        let p = SpectrumPoint {
            delta: 0.1,
            chi: Err(CoreError::Singular("x".into())),
        };
        let (re, im) = p.components();
        assert!(re.is_nan() && im.is_nan());
        let mut spec = probe_spectrum(
            &AtomParams::new(0.01, 1.0, 0.0, -1.0).unwrap(),
            c(0.2, 0.0),
            &linear_grid(-3.0, 3.0, 601),
        )
        .unwrap();
        spec[10] = p.clone();
        spec[10].delta = -2.9;
        assert!(dip_metrics(&spec).is_ok());
    }

    #[test]
    fn dip_width_converges_with_grid() {
        let params = AtomParams::new(0.005, 1.0, 0.0, -1.0).unwrap();
        let coarse =
            dip_metrics(&probe_spectrum(&params, c(0.2, 0.0), &linear_grid(-3.0, 3.0, 3001)).unwrap()).unwrap();
        let fine = dip_metrics(&probe_spectrum(&params, c(0.2, 0.0), &linear_grid(-3.0, 3.0, 6001)).unwrap()).unwrap();
        assert!(((coarse.fwhm - fine.fwhm) / fine.fwhm).abs() < 0.01);
    }

    #[test]
    fn weak_probe_warning_threshold() {
        assert!(DriveFields::new(c(1.0, 0.0), c(0.05, 0.0), 0.0)
            .weak_probe_warning()
            .is_none());
        assert!(DriveFields::new(c(1.0, 0.0), c(0.2, 0.0), 0.0)
            .weak_probe_warning()
            .is_some());
    }
}
