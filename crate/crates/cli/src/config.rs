//! Scenario configuration: TOML document, `--override` patches, defaults
//! and the guards checked before any run starts.
//!
//! Units: `gamma2 = 1`, `c = 1`, `hbar = 1` unless the document says
//! otherwise. Frequencies are in units of `gamma2`, lengths in units of
//! `c / gamma2`.

use std::fmt;

use cpo_core::bloch::AtomParams;
use cpo_core::medium::{coefficients_from_alphas, derive_coefficients, Couplings, MediumCoefficients, Wavenumbers};
use cpo_core::propagation::{
    default_control_dz, default_probe_dz, ControlModel, TransverseGrid, DEFAULT_EDGE_TOLERANCE, MAX_STEP_PHASE,
    SOLITON_EDGE_TOLERANCE,
};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Spectrum,
    Soliton,
    Deflect,
    Sweep,
    WnCheck,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Soliton => "soliton",
            Self::Deflect => "deflect",
            Self::Sweep => "sweep",
            Self::WnCheck => "wn-check",
        }
    }

    /// Blocks the document must contain.
    fn required_blocks(self) -> &'static [&'static str] {
        match self {
            Self::Spectrum => &["atom"],
            Self::Soliton | Self::Deflect | Self::Sweep | Self::WnCheck => &["atom", "medium"],
        }
    }

    /// Blocks the scenario reads; only these are listed as defaulted.
    fn used_blocks(self) -> &'static [&'static str] {
        match self {
            Self::Spectrum => &["atom", "drive", "spectrum", "numerics", "output"],
            Self::Soliton => &["atom", "medium", "grid", "numerics", "output"],
            Self::Deflect | Self::WnCheck => &["atom", "medium", "grid", "beam", "numerics", "output"],
            Self::Sweep => &["atom", "medium", "grid", "beam", "numerics", "sweep", "output"],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomBlock {
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta_c: f64,
    pub w_eq: f64,
}

impl Default for AtomBlock {
    fn default() -> Self {
        Self {
            gamma1: 0.01,
            gamma2: 1.0,
            delta_c: -10.0,
            w_eq: -1.0,
        }
    }
}

/// Control drive used by the spectrum scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveBlock {
    /// `|Omega_c|`.
    pub omega_c: f64,
    /// Phase of `Omega_c` in radians.
    pub omega_c_phase: f64,
}

impl Default for DriveBlock {
    fn default() -> Self {
        Self {
            omega_c: 0.3,
            omega_c_phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    pub delta_min: f64,
    pub delta_max: f64,
    pub points: usize,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        Self {
            delta_min: -0.1,
            delta_max: 0.1,
            points: 801,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediumMode {
    /// Coefficients from the couplings `|g|^2` and `N`.
    Derived,
    /// `alpha_c`, `alpha_p` given directly.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumBlock {
    pub mode: MediumMode,
    pub coupling_c: f64,
    pub coupling_p: f64,
    pub atom_line_density: f64,
    pub alpha_c: f64,
    pub alpha_p: f64,
    pub k_c: f64,
    pub k_p: f64,
    pub c: f64,
}

impl Default for MediumBlock {
    fn default() -> Self {
        Self {
            mode: MediumMode::Derived,
            coupling_c: 2.525,
            coupling_p: 10.1,
            atom_line_density: 1.0,
            alpha_c: 0.25,
            alpha_p: 1.0,
            k_c: 2.0,
            k_p: 270.0,
            c: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub n: usize,
    /// Domain width in units of `L_c`.
    pub width_lc: f64,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            n: 1024,
            width_lc: 16.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamBlock {
    /// Probe offset `a / L_c`.
    pub a_lc: f64,
    /// Probe width `b / L_c`.
    pub b_lc: f64,
    /// Cell length `L`.
    pub length: f64,
}

impl Default for BeamBlock {
    fn default() -> Self {
        Self {
            a_lc: 0.2,
            b_lc: 0.2,
            length: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    /// Bloch integration step.
    pub dt: f64,
    /// Control step; absent means `0.01 / |alpha_c|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dz_control: Option<f64>,
    /// Probe step; absent means `0.01 c / |alpha_p|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dz_probe: Option<f64>,
    /// Soliton run length in units of `1 / |alpha_c|`.
    pub soliton_span: f64,
    pub control_model: ControlModelName,
    pub edge_tolerance: f64,
    pub soliton_edge_tolerance: f64,
    /// Step of the Wei-Norman coefficient integration.
    pub wn_dt: f64,
    /// Shifts below this many `L_c` are reported as straight.
    pub straight_tolerance_lc: f64,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        Self {
            dt: 0.005,
            dz_control: None,
            dz_probe: None,
            soliton_span: 10.0,
            control_model: ControlModelName::Cubic,
            edge_tolerance: DEFAULT_EDGE_TOLERANCE,
            soliton_edge_tolerance: SOLITON_EDGE_TOLERANCE,
            wn_dt: 1e-3,
            straight_tolerance_lc: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlModelName {
    Saturable,
    Cubic,
}

impl From<ControlModelName> for ControlModel {
    fn from(m: ControlModelName) -> Self {
        match m {
            ControlModelName::Saturable => ControlModel::Saturable,
            ControlModelName::Cubic => ControlModel::Cubic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub a_lc: Vec<f64>,
    pub delta_c: Vec<f64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            a_lc: vec![-0.2, 0.0, 0.2],
            delta_c: vec![-10.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
    /// Write a field snapshot every this many steps; 0 writes only the
    /// initial and final fields.
    pub snapshot_every: usize,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: "cpo-output".into(),
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub atom: AtomBlock,
    pub drive: DriveBlock,
    pub spectrum: SpectrumBlock,
    pub medium: MediumBlock,
    pub grid: GridBlock,
    pub beam: BeamBlock,
    pub numerics: NumericsBlock,
    pub sweep: SweepBlock,
    pub output: OutputBlock,
}

/// A validated configuration plus the list of keys filled from defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub scenario: Scenario,
    pub config: ScenarioConfig,
    pub defaults: Vec<String>,
    pub warnings: Vec<String>,
}

impl ResolvedConfig {
    pub fn atom(&self) -> AtomParams {
        let a = &self.config.atom;
        AtomParams {
            gamma1: a.gamma1,
            gamma2: a.gamma2,
            delta_c: a.delta_c,
            w_eq: a.w_eq,
        }
    }

    pub fn medium(&self) -> Result<MediumCoefficients, CliError> {
        medium_for(&self.config.medium, &self.atom())
    }

    pub fn grid(&self, l_c: f64) -> Result<TransverseGrid, CliError> {
        TransverseGrid::centered(self.config.grid.n, self.config.grid.width_lc * l_c)
            .map_err(|e| CliError::core("grid", e))
    }

    pub fn dz_control(&self, coeffs: &MediumCoefficients) -> f64 {
        self.config
            .numerics
            .dz_control
            .unwrap_or_else(|| default_control_dz(coeffs))
    }

    pub fn dz_probe(&self, coeffs: &MediumCoefficients) -> f64 {
        self.config
            .numerics
            .dz_probe
            .unwrap_or_else(|| default_probe_dz(coeffs))
    }
}

fn medium_for(block: &MediumBlock, atom: &AtomParams) -> Result<MediumCoefficients, CliError> {
    let wavenumbers = Wavenumbers {
        k_c: block.k_c,
        k_p: block.k_p,
        c: block.c,
    };
    let result = match block.mode {
        MediumMode::Derived => derive_coefficients(
            atom,
            &Couplings {
                coupling_c: block.coupling_c,
                coupling_p: block.coupling_p,
                atom_line_density: block.atom_line_density,
            },
            &wavenumbers,
        ),
        MediumMode::Direct => coefficients_from_alphas(atom, block.alpha_c, block.alpha_p, &wavenumbers),
    };
    result.map_err(|e| CliError::core("medium", e))
}

fn guard(ok: bool, message: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(message()))
    }
}

/// Sets `path` (dotted, e.g. `atom.gamma1`) to `value` in `table`. The value
/// is read as a TOML literal and falls back to a plain string.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` has an empty key")))?;
    let mut node = table;
    for key in keys {
        node = node
            .entry(key.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override path `{path}`: `{key}` is not a block")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn merge_defaults(user: &mut Table, defaults: &Table, prefix: &str, filled: &mut Vec<String>) {
    for (key, default) in defaults {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match (user.get_mut(key), default) {
            (Some(Value::Table(u)), Value::Table(d)) => merge_defaults(u, d, &path, filled),
            (Some(_), _) => {}
            (None, Value::Table(d)) => {
                let mut fresh = Table::new();
                merge_defaults(&mut fresh, d, &path, filled);
                user.insert(key.clone(), Value::Table(fresh));
            }
            (None, d) => {
                filled.push(format!("{path}={d}"));
                user.insert(key.clone(), d.clone());
            }
        }
    }
}

/// Parses, patches, fills defaults and validates a configuration document.
pub fn parse_config(text: &str, scenario: Scenario, overrides: &[String]) -> Result<ResolvedConfig, CliError> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("malformed config: {e}")))?;
    for block in scenario.required_blocks() {
        if !table.contains_key(*block) {
            return Err(CliError::Config(format!(
                "missing required block [{block}] for scenario {scenario}"
            )));
        }
    }
    for assignment in overrides {
        apply_override(&mut table, assignment)?;
    }
    let defaults = Table::try_from(ScenarioConfig::default())
        .map_err(|e| CliError::Config(format!("cannot tabulate defaults: {e}")))?;
    let mut filled = Vec::new();
    merge_defaults(&mut table, &defaults, "", &mut filled);
    let config: ScenarioConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string().trim().to_string()))?;
    if let Some(declared) = config.scenario {
        guard(declared == scenario, || {
            format!("config declares scenario {declared} but {scenario} was requested")
        })?;
    }
    let used = scenario.used_blocks();
    let mut defaults: Vec<String> = filled
        .into_iter()
        .filter(|k| used.iter().any(|b| k.starts_with(&format!("{b}."))))
        .collect();
    if used.contains(&"numerics") {
        if config.numerics.dz_control.is_none() && scenario == Scenario::Soliton {
            defaults.push("numerics.dz_control=0.01/|alpha_c|".into());
        }
        if config.numerics.dz_probe.is_none()
            && matches!(scenario, Scenario::Deflect | Scenario::Sweep | Scenario::WnCheck)
        {
            defaults.push("numerics.dz_probe=0.01*c/|alpha_p|".into());
        }
    }
    defaults.sort();
    let mut resolved = ResolvedConfig {
        scenario,
        config,
        defaults,
        warnings: Vec::new(),
    };
    validate(&mut resolved)?;
    Ok(resolved)
}

fn validate(resolved: &mut ResolvedConfig) -> Result<(), CliError> {
    let scenario = resolved.scenario;
    let atom = resolved.atom();
    atom.validate().map_err(|e| CliError::core("atom", e))?;
    let cfg = resolved.config.clone();
    let n = &cfg.numerics;
    guard(n.dt > 0.0, || format!("numerics.dt > 0 required, got {}", n.dt))?;
    guard(n.edge_tolerance > 0.0 && n.soliton_edge_tolerance > 0.0, || {
        "edge tolerances must be > 0".into()
    })?;
    guard(!cfg.output.dir.is_empty(), || "output.dir must not be empty".into())?;

    match scenario {
        Scenario::Spectrum => {
            let s = &cfg.spectrum;
            guard(s.points >= 3, || {
                format!("spectrum.points >= 3 required, got {}", s.points)
            })?;
            guard(s.delta_min < s.delta_max, || {
                format!(
                    "spectrum.delta_min < spectrum.delta_max violated ({} >= {})",
                    s.delta_min, s.delta_max
                )
            })?;
            guard(cfg.drive.omega_c >= 0.0, || {
                format!("drive.omega_c >= 0 required, got {}", cfg.drive.omega_c)
            })?;
            let rate = [atom.gamma1, atom.gamma2, atom.delta_c.abs(), cfg.drive.omega_c]
                .into_iter()
                .fold(0.0f64, f64::max);
            guard(n.dt * rate < 0.1, || {
                format!(
                    "step guard violated: dt * max(gamma1, gamma2, |delta_c|, |omega_c|) = {} >= 0.1",
                    n.dt * rate
                )
            })?;
        }
        Scenario::Soliton | Scenario::Deflect | Scenario::Sweep | Scenario::WnCheck => {
            let deltas: Vec<f64> = if scenario == Scenario::Sweep {
                guard(!cfg.sweep.a_lc.is_empty() && !cfg.sweep.delta_c.is_empty(), || {
                    "sweep.a_lc and sweep.delta_c must be non-empty".into()
                })?;
                cfg.sweep.delta_c.clone()
            } else {
                vec![atom.delta_c]
            };
            let base = medium_for(&cfg.medium, &atom)?;
            for delta_c in deltas {
                let atom = AtomParams { delta_c, ..atom };
                let coeffs = base.for_atom(&atom).map_err(|e| CliError::core("medium", e))?;
                if let Some(w) = cpo_core::medium::regime_warning(&atom) {
                    resolved.warnings.push(w);
                }
                guard(cfg.grid.width_lc >= 8.0, || {
                    format!(
                        "grid.width_lc >= 8 required (domain >= 8 L_c), got {}",
                        cfg.grid.width_lc
                    )
                })?;
                let grid = resolved.grid(coeffs.l_c)?;
                if scenario == Scenario::Soliton {
                    let dz = resolved.dz_control(&coeffs);
                    guard(dz * coeffs.alpha_c.abs() < MAX_STEP_PHASE, || {
                        format!(
                            "step guard violated: dz_control * |alpha_c| = {} >= {MAX_STEP_PHASE}",
                            dz * coeffs.alpha_c.abs()
                        )
                    })?;
                    guard(n.soliton_span > 0.0, || {
                        format!("numerics.soliton_span > 0 required, got {}", n.soliton_span)
                    })?;
                } else {
                    let b = cfg.beam.b_lc * coeffs.l_c;
                    guard(cfg.beam.b_lc > 0.0 && cfg.beam.b_lc <= 1.0, || {
                        format!("probe width must satisfy 0 < b <= L_c (b < L_c is the width of the probe field), got b = {} L_c", cfg.beam.b_lc)
                    })?;
                    guard(b >= 4.0 * grid.dx, || {
                        format!("probe width b = {b} is below 4 dx = {}", 4.0 * grid.dx)
                    })?;
                    guard(cfg.beam.length >= 0.0, || {
                        format!("beam.length >= 0 required, got {}", cfg.beam.length)
                    })?;
                    let dz = resolved.dz_probe(&coeffs);
                    let phase = dz * coeffs.alpha_p.abs() / coeffs.c;
                    guard(dz > 0.0 && phase < MAX_STEP_PHASE, || {
                        format!("step guard violated: dz_probe * |alpha_p| / c = {phase} >= {MAX_STEP_PHASE}")
                    })?;
                    let offsets: Vec<f64> = if scenario == Scenario::Sweep {
                        cfg.sweep.a_lc.clone()
                    } else {
                        vec![cfg.beam.a_lc]
                    };
                    for a_lc in offsets {
                        guard(a_lc.abs() + 4.0 * cfg.beam.b_lc <= 0.5 * cfg.grid.width_lc, || {
                            format!(
                                "probe at a = {a_lc} L_c does not fit in the domain of width {} L_c",
                                cfg.grid.width_lc
                            )
                        })?;
                    }
                }
            }
            if scenario == Scenario::WnCheck {
                guard(n.wn_dt > 0.0, || {
                    format!("numerics.wn_dt > 0 required, got {}", n.wn_dt)
                })?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spectrum_config_records_defaults() {
        let r = parse_config("[atom]\ngamma1 = 0.02\n", Scenario::Spectrum, &[]).unwrap();
        assert_eq!(r.config.atom.gamma1, 0.02);
        assert_eq!(r.config.atom.gamma2, 1.0);
        assert!(r.defaults.iter().any(|d| d == "atom.gamma2=1.0"));
        assert!(r.defaults.iter().any(|d| d.starts_with("spectrum.points=")));
        assert!(!r.defaults.iter().any(|d| d.starts_with("atom.gamma1")));
        assert!(!r.defaults.iter().any(|d| d.starts_with("grid.")));
    }

    #[test]
    fn gamma2_zero_is_rejected() {
        let err = parse_config("[atom]\ngamma2 = 0.0\n", Scenario::Spectrum, &[]).unwrap_err();
        assert!(err.to_string().contains("gamma2 > 0"), "{err}");
    }

    #[test]
    fn wide_probe_is_rejected_for_deflect() {
        let err = parse_config("[atom]\n[medium]\n[beam]\nb_lc = 1.5\n", Scenario::Deflect, &[]).unwrap_err();
        assert!(err.to_string().contains("b <= L_c"), "{err}");
    }

    #[test]
    fn unknown_keys_and_missing_blocks_fail() {
        let err = parse_config("[atom]\ngama1 = 0.1\n", Scenario::Spectrum, &[]).unwrap_err();
        assert!(err.to_string().contains("gama1"), "{err}");
        let err = parse_config("[atom]\n[bogus]\n", Scenario::Spectrum, &[]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = parse_config("[atom]\n", Scenario::Soliton, &[]).unwrap_err();
        assert!(err.to_string().contains("[medium]"), "{err}");
    }

    #[test]
    fn overrides_patch_the_document() {
        let r = parse_config(
            "[atom]\n",
            Scenario::Spectrum,
            &["atom.gamma1=0.05".into(), "output.dir=elsewhere".into()],
        )
        .unwrap();
        assert_eq!(r.config.atom.gamma1, 0.05);
        assert_eq!(r.config.output.dir, "elsewhere");
        assert!(parse_config("[atom]\n", Scenario::Spectrum, &["nonsense".into()]).is_err());
        assert!(parse_config("[atom]\n", Scenario::Spectrum, &["atom.gamma1.x=1".into()]).is_err());
    }

    #[test]
    fn scenario_mismatch_fails() {
        let err = parse_config("scenario = \"soliton\"\n[atom]\n", Scenario::Spectrum, &[]).unwrap_err();
        assert!(err.to_string().contains("declares"), "{err}");
    }

    #[test]
    fn step_guards_name_the_inequality() {
        let err = parse_config("[atom]\n[numerics]\ndt = 0.1\n", Scenario::Spectrum, &[]).unwrap_err();
        assert!(err.to_string().contains(">= 0.1"), "{err}");
        let err = parse_config(
            "[atom]\n[medium]\n[numerics]\ndz_control = 1.0\n",
            Scenario::Soliton,
            &[],
        )
        .unwrap_err();
        assert!(err.to_string().contains("dz_control * |alpha_c|"), "{err}");
        let err = parse_config("[atom]\ndelta_c = 0.0\n[medium]\n", Scenario::Deflect, &[]).unwrap_err();
        assert!(err.to_string().contains("delta_c = 0"), "{err}");
    }

    #[test]
    fn dz_defaults_are_listed() {
        let r = parse_config("[atom]\n[medium]\n", Scenario::Deflect, &[]).unwrap();
        assert!(r.defaults.iter().any(|d| d.starts_with("numerics.dz_probe=")));
        let coeffs = r.medium().unwrap();
        assert!((coeffs.alpha_c - 0.25).abs() < 1e-12);
        assert!((coeffs.alpha_p - 1.0).abs() < 1e-12);
    }
}
