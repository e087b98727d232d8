//! CSV tables, plots and the run manifest. CSV bytes depend only on the
//! config; wall times go to the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::SweepSpec;
use crate::demo::{ConvergenceResult, SingleCellResult};
use crate::svg::{line_plot, Axes, Series};
use crate::sweep::SweepResult;
use crate::CliError;

/// Fixed-width scientific notation used in every CSV cell.
pub fn num(x: f64) -> String {
    format!("{x:.15e}")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<(String, String)>) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Io { path, source: e })?;
    written.push((name.to_string(), sha256_hex(text.as_bytes())));
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct PointEntry {
    value: f64,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct Manifest {
    experiment: String,
    config_sha256: String,
    epihom_version: String,
    epihom_core_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    total_wall_time_s: f64,
    files: Vec<FileEntry>,
    points: Vec<PointEntry>,
    normalized_config: String,
}

fn write_manifest(
    dir: &Path,
    spec: &SweepSpec,
    workers: Option<usize>,
    total: f64,
    files: Vec<(String, String)>,
    points: Vec<PointEntry>,
) -> Result<PathBuf, CliError> {
    let m = Manifest {
        experiment: spec.experiment.name().into(),
        config_sha256: sha256_hex(spec.normalized().as_bytes()),
        epihom_version: env!("CARGO_PKG_VERSION").into(),
        epihom_core_version: epihom_core::VERSION.into(),
        workers,
        total_wall_time_s: total,
        files: files.into_iter().map(|(name, sha256)| FileEntry { name, sha256 }).collect(),
        points,
        normalized_config: spec.normalized().into(),
    };
    let text = toml::to_string(&m).map_err(|e| CliError::ConfigInvalid(format!("manifest: {e}")))?;
    let path = dir.join("manifest.toml");
    fs::write(&path, text).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    Ok(path)
}

/// Columns of `sweep.csv` after the swept value.
pub const SWEEP_COLUMNS: &str = "status,volume_fraction,sigma0_S_per_m,lam1_A0,lam2_A0,ratio_A0,degenerate_A0,lam1_A1_0,lam2_A1_0,ratio_A1_0,degenerate_A1_0";

/// Writes `sweep.csv`, `tensors.csv`, `kernel.csv`, one plot per table column
/// and `manifest.toml`. Returns the written paths.
pub fn emit_outputs(
    result: &SweepResult,
    spec: &SweepSpec,
    dir: &Path,
    workers: Option<usize>,
) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(dir)?;
    let col = result.experiment.value_column();
    let mut sweep = format!("{col},{SWEEP_COLUMNS}\n");
    let mut tensors = format!("{col},sigma0,A0_11,A0_12,A0_21,A0_22,lam1_A0,lam2_A0\n");
    let mut kernel = format!("{col},t_k,A1_11,A1_12,A1_21,A1_22\n");
    let mut sigma0 = Vec::new();
    let (mut r0, mut r1) = (Vec::new(), Vec::new());
    let mut points = Vec::new();
    for rec in &result.records {
        let v = num(rec.value);
        match &rec.outcome {
            Ok(p) => {
                sweep.push_str(&format!(
                    "{v},ok,{},{},{},{},{},{},{},{},{},{}\n",
                    num(p.volume_fraction),
                    num(p.sigma0),
                    num(p.a0_eig[0]),
                    num(p.a0_eig[1]),
                    num(p.a0_ratio),
                    p.a0_degenerate,
                    num(p.a1_eig[0]),
                    num(p.a1_eig[1]),
                    num(p.a1_ratio),
                    p.a1_degenerate,
                ));
                let a = p.a0;
                tensors.push_str(&format!(
                    "{v},{},{},{},{},{},{},{}\n",
                    num(p.sigma0),
                    num(a[0][0]),
                    num(a[0][1]),
                    num(a[1][0]),
                    num(a[1][1]),
                    num(p.a0_eig[0]),
                    num(p.a0_eig[1]),
                ));
                for (k, m) in p.kernel.iter().enumerate() {
                    kernel.push_str(&format!(
                        "{v},{},{},{},{},{}\n",
                        num(k as f64 * p.kernel_dt),
                        num(m[0][0]),
                        num(m[0][1]),
                        num(m[1][0]),
                        num(m[1][1]),
                    ));
                }
                sigma0.push((rec.value, p.sigma0));
                r0.push((rec.value, p.a0_ratio));
                r1.push((rec.value, p.a1_ratio));
                points.push(PointEntry { value: rec.value, status: "ok".into(), error: None, wall_time_s: rec.wall_time_s });
            }
            Err(e) => {
                sweep.push_str(&format!("{v},failed,,,,,,,,,,\n"));
                points.push(PointEntry {
                    value: rec.value,
                    status: "failed".into(),
                    error: Some(e.clone()),
                    wall_time_s: rec.wall_time_s,
                });
            }
        }
    }
    let log_x = result.experiment == crate::config::Experiment::ConductivityRatio;
    let axes = Axes { log_x, log_y: false };
    let plot = |title: &str, y: &str, pts: Vec<(f64, f64)>| {
        line_plot(title, col, y, &[Series { label: y.into(), points: pts }], axes)
    };
    let mut files = Vec::new();
    write(dir, "sweep.csv", &sweep, &mut files)?;
    write(dir, "tensors.csv", &tensors, &mut files)?;
    write(dir, "kernel.csv", &kernel, &mut files)?;
    write(dir, "sigma0.svg", &plot("Effective conductivity", "sigma0 (S/m)", sigma0), &mut files)?;
    write(dir, "ratio_A0.svg", &plot("Anisotropy of A0", "max|lam| / min|lam| of A0", r0), &mut files)?;
    write(dir, "ratio_A1_0.svg", &plot("Anisotropy of A1(0)", "max|lam| / min|lam| of A1(0)", r1), &mut files)?;
    let total = result.records.iter().map(|r| r.wall_time_s).sum();
    let mut paths: Vec<PathBuf> = files.iter().map(|(n, _)| dir.join(n)).collect();
    paths.push(write_manifest(dir, spec, workers, total, files, points)?);
    Ok(paths)
}

/// Writes `pole_trace.csv`, `profile.csv`, their plots and `manifest.toml`.
pub fn emit_single_cell(result: &SingleCellResult, spec: &SweepSpec, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(dir)?;
    let mut trace = String::from("field_V_per_m,t_s,v_pole_V,energy,v_norm_V_m05\n");
    let mut profile = String::from("field_V_per_m,theta_rad,v_V,N_per_m2\n");
    let (mut s_trace, mut s_prof) = (Vec::new(), Vec::new());
    let mut points = Vec::new();
    for ((e, t), wall) in result.fields.iter().zip(&result.traces).zip(&result.wall_time_s) {
        let f = num(*e);
        for k in 0..t.times.len() {
            trace.push_str(&format!("{f},{},{},{},{}\n", num(t.times[k]), num(t.v_pole[k]), num(t.energy[k]), num(t.v_norm[k])));
        }
        let rows = t.profile();
        for (theta, v, n) in &rows {
            profile.push_str(&format!("{f},{},{},{}\n", num(*theta), num(*v), num(*n)));
        }
        let label = format!("E = {e:.3e} V/m");
        s_trace.push(Series { label: label.clone(), points: t.times.iter().map(|x| x * 1e6).zip(t.v_pole.iter().copied()).collect() });
        s_prof.push(Series { label, points: rows.iter().map(|r| (r.0, r.1)).collect() });
        points.push(PointEntry {
            value: *e,
            status: format!("ok, {} cutoff events", t.cutoff_events.len()),
            error: None,
            wall_time_s: *wall,
        });
    }
    let mut files = Vec::new();
    write(dir, "pole_trace.csv", &trace, &mut files)?;
    write(dir, "profile.csv", &profile, &mut files)?;
    write(dir, "pole_trace.svg", &line_plot("Transmembrane potential at the pole", "t (us)", "v (V)", &s_trace, Axes::default()), &mut files)?;
    write(dir, "profile.svg", &line_plot("Transmembrane potential along the membrane", "theta (rad)", "v (V)", &s_prof, Axes::default()), &mut files)?;
    let total = result.wall_time_s.iter().sum();
    let mut paths: Vec<PathBuf> = files.iter().map(|(n, _)| dir.join(n)).collect();
    paths.push(write_manifest(dir, spec, None, total, files, points)?);
    Ok(paths)
}

/// Writes `convergence.csv`, its plot and `manifest.toml`.
pub fn emit_convergence(result: &ConvergenceResult, spec: &SweepSpec, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(dir)?;
    let r = &result.report;
    let mut csv = String::from("eps,l1_error,relative_l1_error,energy_lhs_max,scaled_jump_max\n");
    let mut idx: Vec<usize> = (0..r.eps.len()).collect();
    idx.sort_by(|&a, &b| r.eps[a].total_cmp(&r.eps[b]));
    for &k in &idx {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            num(r.eps[k]),
            num(r.errors[k]),
            num(r.relative_errors[k]),
            num(r.energy_lhs[k]),
            num(r.scaled_jump[k])
        ));
    }
    let pts: Vec<(f64, f64)> = idx.iter().map(|&k| (r.eps[k], r.relative_errors[k])).collect();
    let mut files = Vec::new();
    write(dir, "convergence.csv", &csv, &mut files)?;
    write(
        dir,
        "convergence.svg",
        &line_plot(
            "Distance to the homogenized solution",
            "eps",
            "relative L1 error",
            &[Series { label: "error".into(), points: pts }],
            Axes { log_x: true, log_y: true },
        ),
        &mut files,
    )?;
    let mut paths: Vec<PathBuf> = files.iter().map(|(n, _)| dir.join(n)).collect();
    paths.push(write_manifest(dir, spec, None, result.wall_time_s, files, Vec::new())?);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config_str, Experiment};
    use crate::sweep::{PointRecord, PointTensors};

    fn spec() -> SweepSpec {
        parse_config_str("experiment = \"excentricity\"\noutput_dir = \"x\"\n").unwrap()
    }

    fn point(v: f64) -> PointRecord {
        PointRecord {
            value: v,
            outcome: Ok(PointTensors {
                volume_fraction: 0.1,
                sigma0: 4.0,
                a0: [[-1.0, 0.0], [0.0, -2.0]],
                a0_eig: [-1.0, -2.0],
                a0_ratio: 2.0,
                a0_degenerate: false,
                a1_0: [[1.0, 0.0], [0.0, 1.0]],
                a1_eig: [1.0, 1.0],
                a1_ratio: 1.0,
                a1_degenerate: false,
                kernel_dt: 0.5,
                kernel: vec![[[1.0, 0.0], [0.0, 1.0]]; 2],
            }),
            wall_time_s: 1.0 + v,
        }
    }

    #[test]
    fn empty_result_gives_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let r = SweepResult { experiment: Experiment::Excentricity, records: vec![] };
        emit_outputs(&r, &spec(), dir.path(), None).unwrap();
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(csv, format!("aspect_ratio,{SWEEP_COLUMNS}\n"));
        assert!(dir.path().join("manifest.toml").exists());
    }

    #[test]
    fn rows_follow_records_and_wall_times_stay_out_of_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = SweepResult { experiment: Experiment::Excentricity, records: vec![point(1.0), point(2.0), point(3.0)] };
        r.records[1].outcome = Err("cell-intersects-boundary: x".into());
        let paths = emit_outputs(&r, &spec(), dir.path(), Some(2)).unwrap();
        assert_eq!(paths.len(), 7);
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].contains(",failed,"));
        assert_eq!(lines[2].split(',').count(), lines[1].split(',').count());
        let kernel = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
        assert_eq!(kernel.lines().count(), 5);

        let first = csv.clone();
        for rec in &mut r.records {
            rec.wall_time_s += 10.0;
        }
        emit_outputs(&r, &spec(), dir.path(), Some(2)).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("sweep.csv")).unwrap(), first);
        let manifest: toml::Table = fs::read_to_string(dir.path().join("manifest.toml")).unwrap().parse().unwrap();
        assert_eq!(manifest["experiment"].as_str(), Some("excentricity"));
        assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
        assert_eq!(manifest["points"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn unwritable_directory_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let r = SweepResult { experiment: Experiment::Excentricity, records: vec![] };
        let e = emit_outputs(&r, &spec(), &blocker.join("sub"), None).unwrap_err();
        assert!(e.to_string().contains("file"), "{e}");
    }
}
