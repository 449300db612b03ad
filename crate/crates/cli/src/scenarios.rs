//! Scenario runners. Each returns its tables, metadata entries and the
//! report of embedded consistency checks; nothing here touches the disk.

use cpo_core::bloch::{
    dip_metrics, first_order_closed, floquet_steady_solve, integrate_bloch, linear_grid, probe_spectrum,
    steady_state_zeroth, AtomParams, BlochState, DriveFields, SPECTRUM_PROBE_AMPLITUDE,
};
use cpo_core::medium::{cubic_residual, linearized_potential, MediumCoefficients};
use cpo_core::propagation::{
    beam_diagnostics, deflection_cell, make_gaussian, probe_potential_samples, propagate_control_observed,
    propagate_probe, propagate_probe_observed, soliton_field, BendDirection, ComplexField1D, ControlModel,
    DeflectionCell, DeflectionSetup, ProbePotential, PropagationOptions,
};
use cpo_core::wei_norman::{
    evolve_gaussian_analytic, probe_coefficients, trajectory_endpoint, wn_integrate_odes, GaussianPacket,
};
use cpo_core::{Complex64, CoreError};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{ResolvedConfig, Scenario};
use crate::output::{Cell, Check, Report, Table};
use crate::CliError;

/// Relative error allowed between long-time integration and the zeroth
/// order steady state.
pub const STEADY_STATE_TOL: f64 = 1e-6;
/// Relative error allowed between closed-form and linear-solve sidebands.
pub const CLOSED_FORM_TOL: f64 = 1e-8;
/// Relative deviation from exact linearity in the probe amplitude.
pub const LINEARITY_TOL: f64 = 1e-12;
/// Soliton amplitude deviation bound over the run.
pub const SOLITON_AMPLITUDE_TOL: f64 = 1e-3;
/// Relative rms-width drift bound for the soliton.
pub const SOLITON_WIDTH_TOL: f64 = 5e-3;
/// Relative norm drift bound for any propagation.
pub const NORM_DRIFT_TOL: f64 = 1e-8;
/// Smallest acceptable convergence order of the soliton residual.
pub const RESIDUAL_ORDER_MIN: f64 = 1.8;
/// Centroid error of the linearized run relative to the analytic shift.
pub const LINEAR_DEFLECTION_TOL: f64 = 0.01;
/// Centroid error of the full run relative to the analytic shift.
pub const FULL_DEFLECTION_TOL: f64 = 0.05;
/// Allowed asymmetry of shifts under `a -> -a`.
pub const MIRROR_TOL: f64 = 0.02;
/// Constant-coefficient ODE integration against the closed form.
pub const WN_ODE_TOL: f64 = 1e-8;
/// L2 distance between analytic and split-step packets.
pub const WN_L2_TOL: f64 = 1e-6;
/// Analytic packet centre against the endpoint formula.
pub const WN_ENDPOINT_TOL: f64 = 1e-12;
/// Composition of two half-length evolutions against one full evolution.
pub const WN_GROUP_TOL: f64 = 1e-10;
/// Norm preservation of the analytic evolution.
pub const WN_NORM_TOL: f64 = 1e-10;

/// Everything a scenario produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    /// Merged into `metadata.json`.
    pub metadata: Map<String, Value>,
    pub report: Report,
    /// False when some part of the scan failed and outputs are partial.
    pub complete: bool,
}

fn core(context: &str) -> impl FnOnce(CoreError) -> CliError + '_ {
    move |e| CliError::core(context, e)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn field_table(path: &str, field: &ComplexField1D) -> Table {
    let mut t = Table::new(path, &["x", "re", "im", "abs2"]);
    for (x, v) in field.grid.positions().zip(&field.values) {
        t.push(vec![x.into(), v.re.into(), v.im.into(), v.norm_sqr().into()]);
    }
    t
}

/// Bend direction implied by the sign rule `shift ~ sign(a) sign(delta_c)`.
pub fn expected_direction(a: f64, delta_c: f64) -> BendDirection {
    if a == 0.0 {
        BendDirection::Straight
    } else if (a > 0.0) == (delta_c > 0.0) {
        BendDirection::Right
    } else {
        BendDirection::Left
    }
}

pub fn run_scenario(resolved: &ResolvedConfig, jobs: Option<usize>) -> Result<RunOutput, CliError> {
    match resolved.scenario {
        Scenario::Spectrum => spectrum(resolved),
        Scenario::Soliton => soliton(resolved),
        Scenario::Deflect => deflect(resolved),
        Scenario::Sweep => sweep(resolved, jobs),
        Scenario::WnCheck => wn_check(resolved),
    }
}

fn spectrum(resolved: &ResolvedConfig) -> Result<RunOutput, CliError> {
    let cfg = &resolved.config;
    let params = resolved.atom();
    let omega_c = Complex64::from_polar(cfg.drive.omega_c, cfg.drive.omega_c_phase);
    let grid = linear_grid(cfg.spectrum.delta_min, cfg.spectrum.delta_max, cfg.spectrum.points);
    let points = probe_spectrum(&params, omega_c, &grid).map_err(core("spectrum"))?;

    let mut table = Table::new("spectrum.csv", &["delta", "re_chi", "im_chi"]);
    let mut residuals = Table::new(
        "spectrum_residuals.csv",
        &["delta", "re_chi_closed", "im_chi_closed", "rel_residual"],
    );
    let probe = Complex64::new(SPECTRUM_PROBE_AMPLITUDE, 0.0);
    let mut worst = 0.0f64;
    let mut failed = 0usize;
    for p in &points {
        let (re, im) = p.components();
        table.push(vec![p.delta.into(), re.into(), im.into()]);
        let closed = first_order_closed(&params, omega_c, probe, p.delta).map(|s| s / probe);
        let (cre, cim, r) = match (&p.chi, &closed) {
            (Ok(chi), Ok(c)) => (c.re, c.im, rel(*c, *chi)),
            (_, Ok(c)) => (c.re, c.im, f64::NAN),
            _ => (f64::NAN, f64::NAN, f64::NAN),
        };
        if p.chi.is_err() {
            failed += 1;
        }
        if r.is_nan() {
            worst = f64::NAN;
        } else if !worst.is_nan() {
            worst = worst.max(r);
        }
        residuals.push(vec![p.delta.into(), cre.into(), cim.into(), r.into()]);
    }

    let mut checks = vec![Check::below(
        "closed_form_vs_linear_solve",
        worst,
        CLOSED_FORM_TOL,
        "max relative difference of the closed-form and linear-solve probe sidebands",
    )];

    let mid = grid[grid.len() / 2];
    let once = floquet_steady_solve(&params, omega_c, probe, mid).map_err(core("linearity"))?;
    let twice = floquet_steady_solve(&params, omega_c, probe * 2.0, mid).map_err(core("linearity"))?;
    let linearity = if once.sigma_ge_minus.norm() > 0.0 {
        rel(twice.sigma_ge_minus, once.sigma_ge_minus * 2.0)
    } else {
        twice.sigma_ge_minus.norm()
    };
    checks.push(Check::below(
        "probe_linearity",
        linearity,
        LINEARITY_TOL,
        format!("sideband response at delta = {mid} with doubled probe amplitude"),
    ));

    let t_end = 20.0 / params.gamma1.min(params.gamma2);
    let states = integrate_bloch(
        &params,
        &DriveFields::control_only(omega_c),
        BlochState::equilibrium(&params),
        t_end,
        cfg.numerics.dt,
        usize::MAX,
    )
    .map_err(core("steady state integration"))?;
    let last = states.last().expect("integration returns the final state");
    let (w0, s0) = steady_state_zeroth(&params, omega_c);
    let steady_err = ((last.w - w0).abs() / w0.abs().max(f64::MIN_POSITIVE)).max(if s0.norm() > 0.0 {
        rel(last.sigma_ge(), s0)
    } else {
        last.sigma_ge().norm()
    });
    checks.push(Check::below(
        "steady_state_vs_integration",
        steady_err,
        STEADY_STATE_TOL,
        format!("long-time integration to t = {t_end} against the zeroth-order closed form"),
    ));
    checks.push(Check::flag(
        "no_failed_points",
        failed == 0,
        format!("{failed} of {} detunings failed", points.len()),
    ));

    let mut metadata = Map::new();
    let dip = match dip_metrics(&points) {
        Ok(d) => {
            json!({ "found": true, "center": d.center, "fwhm": d.fwhm, "depth": d.depth, "minimum": d.minimum, "baseline": d.baseline })
        }
        Err(e) => json!({ "found": false, "reason": e.to_string() }),
    };
    metadata.insert("dip_metrics".into(), dip);
    metadata.insert(
        "steady_state".into(),
        json!({ "w0": w0, "sigma_ge0": to_value(&s0), "t_end": t_end }),
    );
    Ok(RunOutput {
        tables: vec![table, residuals],
        metadata,
        report: Report::new(resolved.scenario.name(), checks),
        complete: failed == 0,
    })
}

fn soliton(resolved: &ResolvedConfig) -> Result<RunOutput, CliError> {
    let cfg = &resolved.config;
    let coeffs = resolved.medium()?;
    let grid = resolved.grid(coeffs.l_c)?;
    grid.check_soliton_width(coeffs.l_c).map_err(core("grid"))?;
    let model: ControlModel = cfg.numerics.control_model.into();
    let z_end = cfg.numerics.soliton_span / coeffs.alpha_c.abs();
    let dz = resolved.dz_control(&coeffs);
    let start = soliton_field(grid, 0.0, &coeffs);
    let d0 = beam_diagnostics(&start).map_err(core("soliton"))?;

    let mut history = Table::new(
        "soliton_history.csv",
        &["z", "rms_width", "norm", "peak_abs", "max_deviation"],
    );
    let mut snapshots = Vec::new();
    let (mut worst_dev, mut worst_width, mut worst_norm) = (0.0f64, 0.0f64, 0.0f64);
    let mut step = 0usize;
    let every = cfg.output.snapshot_every;
    let mut observe = |f: &ComplexField1D| {
        let d = match beam_diagnostics(f) {
            Ok(d) => d,
            Err(_) => return,
        };
        let dev = f
            .grid
            .positions()
            .zip(&f.values)
            .map(|(x, v)| (v.norm() - cpo_core::medium::soliton_profile(x, f.z, &coeffs).norm()).abs())
            .fold(0.0, f64::max);
        worst_dev = worst_dev.max(dev);
        worst_width = worst_width.max((d.rms_width - d0.rms_width).abs() / d0.rms_width);
        worst_norm = worst_norm.max((d.norm - d0.norm).abs() / d0.norm);
        history.push(vec![
            f.z.into(),
            d.rms_width.into(),
            d.norm.into(),
            f.max_abs().into(),
            dev.into(),
        ]);
        if every > 0 && step.is_multiple_of(every) {
            snapshots.push(field_table(&format!("snapshots/control_{step:06}.csv"), f));
        }
        step += 1;
    };
    let end = propagate_control_observed(
        start.clone(),
        &coeffs,
        z_end,
        dz,
        model,
        &PropagationOptions {
            edge_tolerance: cfg.numerics.soliton_edge_tolerance,
        },
        &mut observe,
    )
    .map_err(core("control propagation"))?;

    // centred-difference residual of the analytic profile at two spacings
    let xs: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.2 * coeffs.l_c).collect();
    let max_res = |h: f64| {
        xs.iter()
            .map(|&x| cubic_residual(x, 1.0, h, &coeffs))
            .fold(0.0, f64::max)
    };
    let h = 0.02 * coeffs.l_c;
    let (r1, r2) = (max_res(h), max_res(h / 2.0));
    let order = (r1 / r2).log2();

    let mut checks = vec![Check::below(
        "norm_drift",
        worst_norm,
        NORM_DRIFT_TOL,
        "largest relative change of sum |Omega|^2 dx",
    )];
    if model == ControlModel::Cubic {
        checks.push(Check::below(
            "amplitude_deviation",
            worst_dev,
            SOLITON_AMPLITUDE_TOL,
            "max pointwise | |Omega| - |Omega_soliton| | over the run",
        ));
        checks.push(Check::below(
            "rms_width_drift",
            worst_width,
            SOLITON_WIDTH_TOL,
            "largest relative change of the rms width",
        ));
    }
    checks.push(Check {
        name: "residual_order".into(),
        value: order.is_finite().then_some(order),
        tolerance: Some(RESIDUAL_ORDER_MIN),
        passed: order > RESIDUAL_ORDER_MIN,
        detail: format!("log2 of residual ratio at h = {h} and h/2 ({r1:e}, {r2:e}); must exceed the tolerance"),
    });

    let mut tables = vec![
        field_table("control_initial.csv", &start),
        field_table("control_final.csv", &end),
        history,
    ];
    tables.extend(snapshots);
    let mut metadata = Map::new();
    metadata.insert("medium".into(), to_value(&coeffs));
    metadata.insert(
        "soliton".into(),
        json!({
            "z_end": z_end,
            "dz": dz,
            "model": to_value(&model),
            "grid": to_value(&grid),
            "max_deviation": worst_dev,
            "rms_width_drift": worst_width,
            "norm_drift": worst_norm,
            "residual_order": order,
        }),
    );
    Ok(RunOutput {
        tables,
        metadata,
        report: Report::new(resolved.scenario.name(), checks),
        complete: true,
    })
}

/// Centroid error relative to the analytic shift; absolute error in units
/// of `dx` when the analytic shift vanishes.
fn deflection_error(x_numeric: f64, x_analytic: f64, a: f64) -> f64 {
    let shift = x_analytic - a;
    if shift == 0.0 {
        (x_numeric - x_analytic).abs()
    } else {
        (x_numeric - x_analytic).abs() / shift.abs()
    }
}

fn deflection_checks(cell: &DeflectionCell, prefix: &str) -> Vec<Check> {
    let label = |s: &str| format!("{prefix}{s}");
    let mut checks = Vec::new();
    if cell.a == 0.0 {
        checks.push(Check::below(
            &label("straight_line"),
            cell.shift().abs(),
            cell.dx,
            "|x_full - a| must stay below dx for a probe on the control axis",
        ));
    } else {
        checks.push(Check::below(
            &label("linearized_vs_analytic"),
            deflection_error(cell.x_linear, cell.x_analytic, cell.a),
            LINEAR_DEFLECTION_TOL,
            "linearized-run centroid error relative to the analytic shift",
        ));
        checks.push(Check::below(
            &label("full_vs_analytic"),
            deflection_error(cell.x_full, cell.x_analytic, cell.a),
            FULL_DEFLECTION_TOL,
            "full-potential centroid error relative to the analytic shift",
        ));
    }
    let expected = expected_direction(cell.a, cell.delta_c);
    checks.push(Check::flag(
        &label("direction"),
        cell.direction == expected,
        format!("observed {}, expected {}", cell.direction.as_str(), expected.as_str()),
    ));
    checks.push(Check::below(
        &label("norm_drift"),
        cell.norm_drift,
        NORM_DRIFT_TOL,
        "largest relative norm change of the two probe runs",
    ));
    checks
}

fn sweep_row(table: &mut Table, a: f64, delta_c: f64, cell: Option<&DeflectionCell>) {
    match cell {
        Some(c) => table.push(vec![
            a.into(),
            delta_c.into(),
            c.x_numeric().into(),
            c.x_analytic.into(),
            c.direction.as_str().into(),
        ]),
        None => table.push(vec![
            a.into(),
            delta_c.into(),
            f64::NAN.into(),
            f64::NAN.into(),
            "failed".into(),
        ]),
    }
}

const SWEEP_COLUMNS: [&str; 5] = ["a", "delta", "x_numeric", "x_analytic", "direction"];

fn deflection_setup(resolved: &ResolvedConfig, coeffs: MediumCoefficients) -> DeflectionSetup {
    let cfg = &resolved.config;
    DeflectionSetup {
        medium: coeffs,
        atom: resolved.atom(),
        grid_points: cfg.grid.n,
        width_lc: cfg.grid.width_lc,
        b_lc: cfg.beam.b_lc,
        length: cfg.beam.length,
        dz: cfg.numerics.dz_probe,
        options: PropagationOptions {
            edge_tolerance: cfg.numerics.edge_tolerance,
        },
        straight_tolerance_lc: cfg.numerics.straight_tolerance_lc,
    }
}

fn deflect(resolved: &ResolvedConfig) -> Result<RunOutput, CliError> {
    let cfg = &resolved.config;
    let coeffs = resolved.medium()?;
    let grid = resolved.grid(coeffs.l_c)?;
    let a = cfg.beam.a_lc * coeffs.l_c;
    let b = cfg.beam.b_lc * coeffs.l_c;
    let length = cfg.beam.length;
    let dz = resolved.dz_probe(&coeffs);
    let eta = linearized_potential(a, &coeffs);
    let options = PropagationOptions {
        edge_tolerance: cfg.numerics.edge_tolerance,
    };
    let probe = make_gaussian(grid, a, b).map_err(core("probe"))?;
    let norm0 = probe.norm();

    let mut lin_path = Vec::new();
    let linear = propagate_probe_observed(
        probe.clone(),
        &ProbePotential::Linearized(eta),
        &coeffs,
        length,
        dz,
        &options,
        &mut |f| lin_path.push(beam_diagnostics(f).map(|d| d.centroid).unwrap_or(f64::NAN)),
    )
    .map_err(core("linearized probe propagation"))?;

    let mut full_path = Vec::new();
    let mut zs = Vec::new();
    let mut snapshots = Vec::new();
    let every = cfg.output.snapshot_every;
    let full = propagate_probe_observed(
        probe.clone(),
        &ProbePotential::Full,
        &coeffs,
        length,
        dz,
        &options,
        &mut |f| {
            if every > 0 && zs.len() % every == 0 {
                snapshots.push(field_table(&format!("snapshots/probe_full_{:06}.csv", zs.len()), f));
            }
            zs.push(f.z);
            full_path.push(beam_diagnostics(f).map(|d| d.centroid).unwrap_or(f64::NAN));
        },
    )
    .map_err(core("full probe propagation"))?;

    let mut trajectory = Table::new("trajectory.csv", &["z", "x_linear", "x_full", "x_analytic"]);
    for ((z, xl), xf) in zs.iter().zip(&lin_path).zip(&full_path) {
        let (xa, _) = trajectory_endpoint(a, eta.eta1, coeffs.k_p, coeffs.c, *z);
        trajectory.push(vec![(*z).into(), (*xl).into(), (*xf).into(), xa.into()]);
    }

    let lin_d = beam_diagnostics(&linear).map_err(core("diagnostics"))?;
    let full_d = beam_diagnostics(&full).map_err(core("diagnostics"))?;
    let (x_analytic, _) = trajectory_endpoint(a, eta.eta1, coeffs.k_p, coeffs.c, length);
    let cell = DeflectionCell {
        a,
        delta_c: cfg.atom.delta_c,
        l_c: coeffs.l_c,
        dx: grid.dx,
        dz,
        eta,
        x_linear: lin_d.centroid,
        x_full: full_d.centroid,
        x_analytic,
        direction: BendDirection::from_shift(full_d.centroid - a, cfg.numerics.straight_tolerance_lc * coeffs.l_c),
        norm_drift: ((lin_d.norm - norm0).abs()).max((full_d.norm - norm0).abs()) / norm0,
    };

    let mut deflection = Table::new("deflection.csv", &SWEEP_COLUMNS);
    sweep_row(&mut deflection, a, cell.delta_c, Some(&cell));

    let mut potential = Table::new("potential.csv", &["x", "v_full", "v_linear", "control_abs"]);
    let v_full = probe_potential_samples(grid, &ProbePotential::Full, &coeffs);
    let v_lin = probe_potential_samples(grid, &ProbePotential::Linearized(eta), &coeffs);
    let control = soliton_field(grid, 0.0, &coeffs);
    for (j, x) in grid.positions().enumerate() {
        potential.push(vec![
            x.into(),
            v_full[j].into(),
            v_lin[j].into(),
            control.values[j].norm().into(),
        ]);
    }

    let mut tables = vec![
        deflection,
        trajectory,
        potential,
        field_table("probe_initial.csv", &probe),
        field_table("probe_linear_final.csv", &linear),
        field_table("probe_full_final.csv", &full),
    ];
    tables.extend(snapshots);
    let mut metadata = Map::new();
    metadata.insert("medium".into(), to_value(&coeffs));
    metadata.insert("deflection".into(), to_value(&cell));
    Ok(RunOutput {
        tables,
        metadata,
        report: Report::new(resolved.scenario.name(), deflection_checks(&cell, "")),
        complete: true,
    })
}

fn sweep(resolved: &ResolvedConfig, jobs: Option<usize>) -> Result<RunOutput, CliError> {
    let cfg = &resolved.config;
    let base = resolved.medium()?;
    let setup = deflection_setup(resolved, base);
    let atom = resolved.atom();
    let cells: Vec<(f64, f64)> = cfg
        .sweep
        .a_lc
        .iter()
        .flat_map(|&a| cfg.sweep.delta_c.iter().map(move |&d| (a, d)))
        .collect();
    let run = |&(a_lc, delta_c): &(f64, f64)| -> (f64, f64, f64, Result<DeflectionCell, CoreError>) {
        let l_c = match base.for_atom(&AtomParams { delta_c, ..atom }) {
            Ok(m) => m.l_c,
            Err(e) => return (a_lc, f64::NAN, delta_c, Err(e)),
        };
        let a = a_lc * l_c;
        (a_lc, a, delta_c, deflection_cell(a, delta_c, &setup))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    // par_iter preserves order on collect, so output does not depend on jobs
    let results: Vec<_> = pool.install(|| cells.par_iter().map(run).collect());

    let mut table = Table::new("sweep.csv", &SWEEP_COLUMNS);
    let mut detail = Table::new(
        "sweep_detail.csv",
        &[
            "a_lc",
            "a",
            "delta",
            "l_c",
            "eta0",
            "eta1",
            "x_linear",
            "x_full",
            "x_analytic",
            "norm_drift",
            "error",
        ],
    );
    let mut checks = Vec::new();
    let mut complete = true;
    for (a_lc, a, delta_c, result) in &results {
        match result {
            Ok(c) => {
                sweep_row(&mut table, *a, *delta_c, Some(c));
                detail.push(vec![
                    (*a_lc).into(),
                    (*a).into(),
                    (*delta_c).into(),
                    c.l_c.into(),
                    c.eta.eta0.into(),
                    c.eta.eta1.into(),
                    c.x_linear.into(),
                    c.x_full.into(),
                    c.x_analytic.into(),
                    c.norm_drift.into(),
                    "".into(),
                ]);
                checks.extend(deflection_checks(c, &format!("a_lc={a_lc},delta={delta_c}:")));
            }
            Err(e) => {
                complete = false;
                sweep_row(&mut table, *a, *delta_c, None);
                let mut row: Vec<Cell> = vec![(*a_lc).into(), (*a).into(), (*delta_c).into()];
                row.extend(std::iter::repeat_n(Cell::Float(f64::NAN), 7));
                row.push(Cell::Text(e.to_string().replace(',', ";")));
                detail.push(row);
                checks.push(Check::flag(
                    &format!("a_lc={a_lc},delta={delta_c}:run"),
                    false,
                    e.to_string(),
                ));
            }
        }
    }
    // a -> -a antisymmetry at fixed detuning
    for (a_lc, _, delta_c, r) in &results {
        let (Ok(cell), true) = (r, *a_lc > 0.0) else { continue };
        let mirror = results
            .iter()
            .find(|(m, _, d, _)| *m == -a_lc && d == delta_c)
            .and_then(|(_, _, _, r)| r.as_ref().ok());
        if let Some(m) = mirror {
            let asym = (cell.shift() + m.shift()).abs() / cell.shift().abs();
            checks.push(Check::below(
                &format!("a_lc=±{a_lc},delta={delta_c}:mirror"),
                asym,
                MIRROR_TOL,
                "|shift(a) + shift(-a)| / |shift(a)|",
            ));
        }
    }

    let mut metadata = Map::new();
    metadata.insert("medium".into(), to_value(&base));
    Ok(RunOutput {
        tables: vec![table, detail],
        metadata,
        report: Report::new(resolved.scenario.name(), checks),
        complete,
    })
}

fn packet_distance(a: &GaussianPacket, b: &GaussianPacket) -> f64 {
    let scale = |x: f64| 1.0 + x.abs();
    [
        (a.center - b.center).abs() / scale(b.center),
        (a.momentum - b.momentum).abs() / scale(b.momentum),
        (a.complex_width - b.complex_width).norm() / scale(b.complex_width.norm()),
        (a.global_phase - b.global_phase).norm() / scale(b.global_phase.norm()),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn wn_check(resolved: &ResolvedConfig) -> Result<RunOutput, CliError> {
    let cfg = &resolved.config;
    let coeffs = resolved.medium()?;
    let grid = resolved.grid(coeffs.l_c)?;
    let a = cfg.beam.a_lc * coeffs.l_c;
    let b = cfg.beam.b_lc * coeffs.l_c;
    let length = cfg.beam.length;
    let eta = linearized_potential(a, &coeffs);
    let closed = probe_coefficients(eta.eta0, eta.eta1, coeffs.k_p, coeffs.c, length).map_err(core("wei-norman"))?;
    let c1 = 0.5 / closed.m;
    let ode = wn_integrate_odes(|_| [c1, 0.0, eta.eta1, eta.eta0], closed.t, cfg.numerics.wn_dt)
        .map_err(core("wei-norman integration"))?;
    let ode_err = ode
        .as_array()
        .iter()
        .zip(closed.as_array())
        .map(|(o, c)| (o - c).norm() / (1.0 + c.norm()))
        .fold(0.0, f64::max);

    let packet = GaussianPacket::normalized(a, b).map_err(core("packet"))?;
    let evolved = evolve_gaussian_analytic(&packet, &closed, a).map_err(core("analytic evolution"))?;
    let half =
        probe_coefficients(eta.eta0, eta.eta1, coeffs.k_p, coeffs.c, 0.5 * length).map_err(core("wei-norman"))?;
    let composed = evolve_gaussian_analytic(&packet, &half, a)
        .and_then(|p| evolve_gaussian_analytic(&p, &half, a))
        .map_err(core("analytic evolution"))?;

    let numeric = propagate_probe(
        make_gaussian(grid, a, b).map_err(core("probe"))?,
        &ProbePotential::Linearized(eta),
        &coeffs,
        length,
        resolved.dz_probe(&coeffs),
        &PropagationOptions {
            edge_tolerance: cfg.numerics.edge_tolerance,
        },
    )
    .map_err(core("split-step propagation"))?;
    let analytic_field = evolved.sample(grid, length);
    let l2 = numeric.l2_distance(&analytic_field.values);
    let (x_end, z_end) = trajectory_endpoint(a, eta.eta1, coeffs.k_p, coeffs.c, length);

    let checks = vec![
        Check::below(
            "ode_vs_closed",
            ode_err,
            WN_ODE_TOL,
            "RK4 coefficients against the closed form",
        ),
        Check::below(
            "analytic_vs_split_step_l2",
            l2,
            WN_L2_TOL,
            "L2 distance of the evolved packets on the grid",
        ),
        Check::below(
            "endpoint",
            (evolved.center - x_end).abs() / (1.0 + x_end.abs()),
            WN_ENDPOINT_TOL,
            "analytic packet centre against a - eta1 L^2 / (2 k_p c)",
        ),
        Check::below(
            "group_property",
            packet_distance(&composed, &evolved),
            WN_GROUP_TOL,
            "two half-length evolutions against one full-length evolution",
        ),
        Check::below(
            "norm_preservation",
            (evolved.norm() - packet.norm()).abs(),
            WN_NORM_TOL,
            "exact packet norm before and after",
        ),
    ];
    let mut metadata = Map::new();
    metadata.insert("medium".into(), to_value(&coeffs));
    metadata.insert(
        "wei_norman".into(),
        json!({
            "closed": to_value(&closed),
            "integrated": to_value(&ode),
            "packet_initial": to_value(&packet),
            "packet_final": to_value(&evolved),
            "endpoint": { "x": x_end, "z": z_end },
            "eta": to_value(&eta),
        }),
    );
    Ok(RunOutput {
        tables: vec![
            field_table("wn_analytic.csv", &analytic_field),
            field_table("wn_numeric.csv", &numeric),
        ],
        metadata,
        report: Report::new(resolved.scenario.name(), checks),
        complete: true,
    })
}
