//! TOML experiment configs. Every physical key carries its unit in the name;
//! unknown keys are rejected and omitted ones take the reference defaults.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use epihom_core::geometry::{CellGeometry, CellShape};
use epihom_core::homogenization::KernelGrid;
use epihom_core::membrane::{beta_formula, MembraneModel, ModelParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Swept value: `sigma_i / sigma_e`, with `sigma_e` fixed.
    ConductivityRatio,
    /// Swept value: aspect ratio `a/b` at the volume fraction of the base cell.
    Excentricity,
    /// Swept value: volume fraction, the base shape rescaled.
    VolumeFraction,
    /// Swept value: rotation of the cell inside the unit cell (rad).
    LatticeAngle,
    /// Swept value: applied field strength (V/m).
    SingleCell,
    /// Swept value: cell scale `eps`.
    Convergence,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::ConductivityRatio => "conductivity_ratio",
            Self::Excentricity => "excentricity",
            Self::VolumeFraction => "volume_fraction",
            Self::LatticeAngle => "lattice_angle",
            Self::SingleCell => "single_cell",
            Self::Convergence => "convergence",
        }
    }

    /// Header of the swept-value column.
    pub fn value_column(self) -> &'static str {
        match self {
            Self::ConductivityRatio => "sigma_ratio",
            Self::Excentricity => "aspect_ratio",
            Self::VolumeFraction => "volume_fraction",
            Self::LatticeAngle => "lattice_angle_rad",
            Self::SingleCell => "field_V_per_m",
            Self::Convergence => "eps",
        }
    }

    pub fn is_sweep(self) -> bool {
        !matches!(self, Self::SingleCell | Self::Convergence)
    }

    /// Default swept values.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Self::ConductivityRatio => log_space(0.05, 20.0, 8),
            Self::Excentricity => lin_space(1.0, 4.0, 6),
            Self::VolumeFraction => lin_space(0.05, 0.45, 5),
            Self::LatticeAngle => lin_space(0.0, PI / 2.0, 7),
            Self::SingleCell => vec![4e4],
            Self::Convergence => vec![0.125, 0.25, 0.5],
        }
    }
}

fn lin_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    lin_space(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

/// `[params]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct ParamsSection {
    pub sigma_i_S_per_m: f64,
    pub sigma_e_S_per_m: f64,
    pub cell_size_m: f64,
    pub radius_m: f64,
    pub delta_m: f64,
    /// Pore radius; the reference table states no unit.
    pub r_p_table_units: f64,
    /// Pore conductivity; the reference table states no unit.
    pub sigma_p_table_units: f64,
    pub v_ep_V: f64,
    pub alpha_per_m2_s: f64,
    pub n0_per_m2: f64,
    pub cm_F_per_m2: f64,
    pub q_dimensionless: f64,
    pub sigma_m0_S_per_m: f64,
    /// Conductance per pore; derived from the pore geometry when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_S_m: Option<f64>,
    pub cutoff_V: f64,
    pub u_ref_V: f64,
    pub k_static_S_per_m: f64,
    pub beta_exp_per_V: f64,
    pub tau_ep_s: f64,
    pub tau_res_s: f64,
    pub k_ep_per_V: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self::from_params(&ModelParams::default(), None)
    }
}

impl ParamsSection {
    fn from_params(p: &ModelParams, beta: Option<f64>) -> Self {
        Self {
            sigma_i_S_per_m: p.sigma_i,
            sigma_e_S_per_m: p.sigma_e,
            cell_size_m: p.cell_size,
            radius_m: p.radius,
            delta_m: p.delta,
            r_p_table_units: p.r_p,
            sigma_p_table_units: p.sigma_p,
            v_ep_V: p.v_ep,
            alpha_per_m2_s: p.alpha,
            n0_per_m2: p.n0,
            cm_F_per_m2: p.c_m,
            q_dimensionless: p.q,
            sigma_m0_S_per_m: p.sigma_m0,
            beta_S_m: beta,
            cutoff_V: p.cutoff,
            u_ref_V: p.u_ref,
            k_static_S_per_m: p.k_static,
            beta_exp_per_V: p.beta_exp,
            tau_ep_s: p.tau_ep,
            tau_res_s: p.tau_res,
            k_ep_per_V: p.k_ep,
        }
    }

    fn to_params(&self) -> ModelParams {
        let mut p = ModelParams {
            sigma_i: self.sigma_i_S_per_m,
            sigma_e: self.sigma_e_S_per_m,
            cell_size: self.cell_size_m,
            radius: self.radius_m,
            delta: self.delta_m,
            r_p: self.r_p_table_units,
            sigma_p: self.sigma_p_table_units,
            v_ep: self.v_ep_V,
            alpha: self.alpha_per_m2_s,
            n0: self.n0_per_m2,
            c_m: self.cm_F_per_m2,
            q: self.q_dimensionless,
            sigma_m0: self.sigma_m0_S_per_m,
            beta: 0.0,
            cutoff: self.cutoff_V,
            u_ref: self.u_ref_V,
            k_static: self.k_static_S_per_m,
            beta_exp: self.beta_exp_per_V,
            tau_ep: self.tau_ep_s,
            tau_res: self.tau_res_s,
            k_ep: self.k_ep_per_V,
        };
        p.beta = self.beta_S_m.unwrap_or_else(|| beta_formula(&p));
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Circle,
    Ellipse,
}

/// `[geometry]` table. The unit-cell side is `params.cell_size_m`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeKind>,
    /// Circle radius; defaults to `params.radius_m`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice_angle_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_offset_m: Option<[f64; 2]>,
}

/// `[numerics]` table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    /// Target mesh size on the unit cell; `cell_size / 32` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh_h_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_substeps: Option<usize>,
    /// Last kernel sample; five linearized membrane relaxation times when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_t_end_s: Option<f64>,
}

/// `[single_cell]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SingleCellSection {
    pub dt_s: f64,
    pub t_end_s: f64,
}

impl Default for SingleCellSection {
    fn default() -> Self {
        Self { dt_s: 2e-9, t_end_s: 2e-6 }
    }
}

/// `[convergence]` table. Boundary data is
/// `g.(x - c) + s ((x-c)_1^2 - (x-c)_2^2)` about the domain center `c`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ConvergenceSection {
    /// Time step; half a linearized membrane relaxation time when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub macro_divisions: Option<usize>,
    /// Error window `[a, b]^2` as fractions of the domain side.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_V_per_m: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saddle_V_per_m2: Option<f64>,
    /// Side of the macroscopic domain; one unit cell when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain_size_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    experiment: Option<Experiment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<MembraneModel>,
    #[serde(default)]
    params: ParamsSection,
    #[serde(default)]
    geometry: GeometrySection,
    #[serde(default)]
    numerics: NumericsSection,
    #[serde(default)]
    single_cell: SingleCellSection,
    #[serde(default)]
    convergence: ConvergenceSection,
}

/// Settings of the convergence experiment, with defaults resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSettings {
    pub dt: f64,
    pub steps: usize,
    pub macro_divisions: usize,
    pub window: [f64; 2],
    pub gradient: [f64; 2],
    pub saddle: f64,
    pub domain_size: f64,
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub experiment: Experiment,
    /// Strictly increasing.
    pub values: Vec<f64>,
    pub model: MembraneModel,
    pub params: ModelParams,
    pub geometry: CellGeometry,
    pub mesh_h: f64,
    /// Kernel grid; `None` means the default for each point's parameters.
    pub kernel: Option<KernelGrid>,
    pub single_cell: SingleCellSection,
    pub convergence: ConvergenceSettings,
    pub output_dir: PathBuf,
    /// The config with every default filled in.
    normalized: String,
}

impl SweepSpec {
    /// Canonical TOML text of the resolved config; parsing it yields the same spec.
    pub fn normalized(&self) -> &str {
        &self.normalized
    }

    /// Kernel grid for one point.
    pub fn kernel_for(&self, params: &ModelParams) -> KernelGrid {
        self.kernel.unwrap_or_else(|| KernelGrid::default_for(params))
    }

    /// Same spec with other values and output directory, for programmatic use.
    pub fn with_values(&self, values: Vec<f64>, output_dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let mut raw: RawConfig = toml::from_str(&self.normalized).expect("normalized config parses");
        raw.values = Some(values);
        raw.output_dir = Some(output_dir.into());
        resolve(raw)
    }
}

fn invalid(detail: impl Into<String>) -> CliError {
    CliError::ConfigInvalid(detail.into())
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<SweepSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<SweepSpec, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| invalid(e.message().to_string()))?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<SweepSpec, CliError> {
    let experiment = raw.experiment.ok_or_else(|| CliError::ConfigMissingKey("experiment".into()))?;
    let output_dir = raw.output_dir.clone().ok_or_else(|| CliError::ConfigMissingKey("output_dir".into()))?;
    let model = raw.model.unwrap_or(MembraneModel::NeuKrassowska);
    let params = raw.params.to_params();
    params.validate().map_err(|e| invalid(e.to_string()))?;

    let values = raw.values.clone().unwrap_or_else(|| experiment.default_values());
    if values.is_empty() {
        return Err(invalid("values must not be empty"));
    }
    if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("values must be finite and strictly increasing"));
    }
    let bad = |what: &str| invalid(format!("{} value outside {what}", experiment.name()));
    match experiment {
        Experiment::ConductivityRatio | Experiment::Excentricity if values[0] <= 0.0 => return Err(bad("(0, inf)")),
        Experiment::VolumeFraction if values[0] <= 0.0 || values[values.len() - 1] >= 1.0 => return Err(bad("(0, 1)")),
        Experiment::LatticeAngle if values[0] < 0.0 || values[values.len() - 1] >= PI => return Err(bad("[0, pi)")),
        Experiment::SingleCell if values[0] < 0.0 => return Err(bad("[0, inf)")),
        Experiment::Convergence if values[0] <= 0.0 || values[values.len() - 1] > 1.0 => return Err(bad("(0, 1]")),
        _ => {}
    }

    let g = &raw.geometry;
    let shape_kind = g.shape.unwrap_or(if g.a_m.is_some() { ShapeKind::Ellipse } else { ShapeKind::Circle });
    let shape = match shape_kind {
        ShapeKind::Circle => {
            if g.a_m.is_some() || g.b_m.is_some() {
                return Err(invalid("circle geometry takes radius_m, not a_m/b_m"));
            }
            CellShape::Circle { radius: g.radius_m.unwrap_or(params.radius) }
        }
        ShapeKind::Ellipse => {
            if g.radius_m.is_some() {
                return Err(invalid("ellipse geometry takes a_m and b_m, not radius_m"));
            }
            let a = g.a_m.ok_or_else(|| CliError::ConfigMissingKey("geometry.a_m".into()))?;
            let b = g.b_m.ok_or_else(|| CliError::ConfigMissingKey("geometry.b_m".into()))?;
            CellShape::Ellipse { a, b }
        }
    };
    let geometry = CellGeometry {
        cell_size: params.cell_size,
        shape,
        lattice_angle: g.lattice_angle_rad.unwrap_or(0.0),
        center_offset: g.center_offset_m.unwrap_or([0.0, 0.0]),
    };
    geometry.validate().map_err(|e| invalid(e.to_string()))?;

    let n = &raw.numerics;
    let mesh_h = n.mesh_h_m.unwrap_or(params.cell_size / 32.0);
    if !(mesh_h > 0.0 && mesh_h < params.cell_size) {
        return Err(invalid(format!("numerics.mesh_h_m = {mesh_h} must lie in (0, cell_size)")));
    }
    let kernel = if n.kernel_samples.is_some() || n.kernel_substeps.is_some() || n.kernel_t_end_s.is_some() {
        let d = KernelGrid::default_for(&params);
        let samples = n.kernel_samples.unwrap_or(d.samples);
        let substeps = n.kernel_substeps.unwrap_or(d.substeps);
        if samples < 2 || substeps < 1 {
            return Err(invalid("kernel_samples must be >= 2 and kernel_substeps >= 1"));
        }
        let t_end = n.kernel_t_end_s.unwrap_or(d.end());
        if !(t_end > 0.0) {
            return Err(invalid("kernel_t_end_s must be positive"));
        }
        Some(KernelGrid { dt: t_end / (samples - 1) as f64, samples, substeps })
    } else {
        None
    };

    let sc = raw.single_cell.clone();
    if !(sc.dt_s > 0.0 && sc.t_end_s >= sc.dt_s) {
        return Err(invalid("single_cell needs dt_s > 0 and t_end_s >= dt_s"));
    }

    let c = &raw.convergence;
    let convergence = ConvergenceSettings {
        dt: c.dt_s.unwrap_or(0.5 * params.c_m / params.sigma_m_rest()),
        steps: c.steps.unwrap_or(10),
        macro_divisions: c.macro_divisions.unwrap_or(64),
        window: c.window.unwrap_or([0.25, 0.75]),
        gradient: c.gradient_V_per_m.unwrap_or([4e4, 1e4]),
        saddle: c.saddle_V_per_m2.unwrap_or(2e8),
        domain_size: c.domain_size_m.unwrap_or(params.cell_size),
    };
    let w = convergence.window;
    if !(convergence.dt > 0.0 && convergence.steps >= 1 && convergence.macro_divisions >= 2) {
        return Err(invalid("convergence needs dt_s > 0, steps >= 1, macro_divisions >= 2"));
    }
    if !(0.0 <= w[0] && w[0] < w[1] && w[1] <= 1.0) {
        return Err(invalid("convergence.window must satisfy 0 <= a < b <= 1"));
    }
    if experiment == Experiment::Convergence {
        for &eps in &values {
            let r = convergence.domain_size / (eps * params.cell_size);
            if (r - r.round()).abs() > 1e-9 * r || r.round() < 1.0 {
                return Err(invalid(format!("eps = {eps} does not tile the domain")));
            }
        }
    }

    let mut canonical = raw;
    canonical.values = Some(values.clone());
    canonical.model = Some(model);
    canonical.params = ParamsSection::from_params(&params, Some(params.beta));
    canonical.geometry = GeometrySection {
        shape: Some(shape_kind),
        radius_m: matches!(shape, CellShape::Circle { .. }).then(|| geometry.semi_axes().0),
        a_m: matches!(shape, CellShape::Ellipse { .. }).then(|| geometry.semi_axes().0),
        b_m: matches!(shape, CellShape::Ellipse { .. }).then(|| geometry.semi_axes().1),
        lattice_angle_rad: Some(geometry.lattice_angle),
        center_offset_m: Some(geometry.center_offset),
    };
    canonical.numerics = NumericsSection {
        mesh_h_m: Some(mesh_h),
        kernel_samples: kernel.map(|k| k.samples),
        kernel_substeps: kernel.map(|k| k.substeps),
        kernel_t_end_s: kernel.map(|k| k.end()),
    };
    canonical.convergence = ConvergenceSection {
        dt_s: Some(convergence.dt),
        steps: Some(convergence.steps),
        macro_divisions: Some(convergence.macro_divisions),
        window: Some(convergence.window),
        gradient_V_per_m: Some(convergence.gradient),
        saddle_V_per_m2: Some(convergence.saddle),
        domain_size_m: Some(convergence.domain_size),
    };
    let normalized = toml::to_string(&canonical).map_err(|e| invalid(e.to_string()))?;

    Ok(SweepSpec {
        experiment,
        values,
        model,
        params,
        geometry,
        mesh_h,
        kernel,
        single_cell: sc,
        convergence,
        output_dir,
        normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "experiment = \"volume_fraction\"\noutput_dir = \"out\"\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let s = parse_config_str(MINIMAL).unwrap();
        assert_eq!(s.params, ModelParams::default());
        assert_eq!(s.values, Experiment::VolumeFraction.default_values());
        assert_eq!(s.model, MembraneModel::NeuKrassowska);
        assert!(s.normalized().contains("delta_m = 0.000000005"));
        assert!(s.normalized().contains("cm_F_per_m2"));
    }

    #[test]
    fn normalized_dump_round_trips() {
        let text = format!("{MINIMAL}[geometry]\nshape = \"ellipse\"\na_m = 6e-5\nb_m = 3e-5\nlattice_angle_rad = 0.5\n[numerics]\nkernel_samples = 16\n");
        let s = parse_config_str(&text).unwrap();
        let again = parse_config_str(s.normalized()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn missing_and_unknown_keys() {
        let e = parse_config_str("output_dir = \"x\"").unwrap_err();
        assert_eq!(e.to_string(), "config-missing-key experiment");
        let e = parse_config_str("experiment = \"single_cell\"").unwrap_err();
        assert_eq!(e.to_string(), "config-missing-key output_dir");
        let e = parse_config_str(&format!("{MINIMAL}[params]\ndelta = 1e-9\n")).unwrap_err();
        assert!(e.to_string().starts_with("config-invalid") && e.to_string().contains("delta"), "{e}");
        let e = parse_config_str(&format!("{MINIMAL}colour = 1\n")).unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
    }

    #[test]
    fn physical_violations_are_rejected() {
        for extra in [
            "[geometry]\nradius_m = -1e-5\n",
            "[geometry]\nradius_m = 1.5e-4\n",
            "[params]\ndelta_m = 0.0\n",
            "values = [0.3, 0.2]\n",
            "values = []\n",
            "values = [0.5, 1.5]\n",
        ] {
            let text = if extra.starts_with('[') { format!("{MINIMAL}{extra}") } else { format!("{extra}{MINIMAL}") };
            let e = parse_config_str(&text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{extra}: {e}");
        }
    }

    #[test]
    fn convergence_scales_must_tile() {
        let e = parse_config_str("experiment = \"convergence\"\noutput_dir = \"o\"\nvalues = [0.3]\n").unwrap_err();
        assert!(e.to_string().contains("tile"), "{e}");
        assert!(parse_config_str("experiment = \"convergence\"\noutput_dir = \"o\"\nvalues = [0.25, 0.5]\n").is_ok());
    }

    #[test]
    fn default_grids() {
        let c = Experiment::ConductivityRatio.default_values();
        assert_eq!(c.len(), 8);
        assert!((c[0] - 0.05).abs() < 1e-15 && (c[7] - 20.0).abs() < 1e-12);
        let e = Experiment::Excentricity.default_values();
        assert_eq!(e.len(), 6);
        assert!(e.iter().zip([1.0, 1.6, 2.2, 2.8, 3.4, 4.0]).all(|(a, b)| (a - b).abs() < 1e-14));
        assert_eq!(Experiment::VolumeFraction.default_values().len(), 5);
        assert_eq!(Experiment::LatticeAngle.default_values().len(), 7);
    }
}
