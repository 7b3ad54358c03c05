//! Command implementations and run artifacts.
//!
//! A run directory holds `config.json`, `manifest.json`, `diagnostics.csv`,
//! `violations.json`, `wall_traces.csv`, and per-snapshot field and distribution
//! files. The manifest records a SHA-256 of the config and of every snapshot file.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::characteristics::{p_invariant, trace_path, FieldSampler, PhasePoint, TrajectoryPoint};
use crate::config::{validate_config, OutputFormat, SimConfig, ValidatedConfig};
use crate::diagnostics::{energy_density_from_moments, TheoreticalConstants};
use crate::driver::{run, SimulationRun};
use crate::error::{Error, Result};
use crate::grid::PhaseSpaceGrid;
use crate::quadrature::trapezoid;
use crate::vlasov::{moment_set, support_extents, DistributionState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_RUNTIME_VIOLATION: i32 = 3;
pub const EXIT_CORRUPT: i32 = 4;

/// Exit status for an error escaping a command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::Json(_) | Error::Domain(_) => EXIT_INVALID_CONFIG,
        Error::ConfinementViolated { .. }
        | Error::BoundViolation { .. }
        | Error::PicardNotConverged { .. }
        | Error::MissingBoundaryData(_) => EXIT_RUNTIME_VIOLATION,
        Error::Io(_) | Error::Corrupt(_) => EXIT_CORRUPT,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// 17 significant digits.
#[inline]
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub solver_mode: String,
    pub n_steps: usize,
    pub snapshot_steps: Vec<usize>,
    pub violations: usize,
    pub passed: bool,
    pub final_charge: f64,
    pub final_energy: f64,
    pub picard_residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub constants: TheoreticalConstants,
    pub summary: RunSummary,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub step: usize,
    pub t: f64,
    pub shape: [usize; 3],
    pub nx: usize,
    pub nv: usize,
    pub v_max: f64,
    pub dx: f64,
    pub dv: f64,
    pub layout: String,
}

fn fields_csv_name(step: usize) -> String {
    format!("fields_step{step:06}.csv")
}

fn fields_json_name(step: usize) -> String {
    format!("fields_step{step:06}.json")
}

fn f_bin_name(step: usize) -> String {
    format!("f_step{step:06}.bin")
}

fn f_meta_name(step: usize) -> String {
    format!("f_step{step:06}.json")
}

pub const DIAGNOSTICS_HEADER: &str =
    "t,charge,energy,flux_accum,maxf,e1max,e2max,bmax,p_radius,sigma_lo,sigma_hi,n_violations";

fn diagnostics_csv(run: &SimulationRun) -> String {
    let mut s = String::from(DIAGNOSTICS_HEADER);
    s.push('\n');
    for d in &run.diagnostics {
        let (lo, hi) = d.sigma.unwrap_or((f64::NAN, f64::NAN));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            num(d.t),
            num(d.total_charge),
            num(d.total_energy),
            num(d.boundary_flux_accum),
            num(d.max_f),
            num(d.e1_max),
            num(d.e2_max),
            num(d.b_max),
            num(d.p_radius),
            num(lo),
            num(hi),
            d.violations.len()
        );
    }
    s
}

fn fields_csv(run: &SimulationRun, step: usize) -> String {
    let f = &run.field_states[step];
    let mut s = format!("# t = {}, step = {step}\nx,E1,E2,B\n", num(f.t));
    for (i, x) in run.vcfg.grid.x_nodes.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            num(*x),
            num(f.e1[i]),
            num(f.e2_at(i)),
            num(f.b_at(i))
        );
    }
    s
}

fn wall_traces_csv(run: &SimulationRun) -> String {
    let mut s = String::from("t,E2_left,B_left,E2_right,B_right\n");
    for f in &run.field_states {
        let n = f.len() - 1;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            num(f.t),
            num(f.e2_at(0)),
            num(f.b_at(0)),
            num(f.e2_at(n)),
            num(f.b_at(n))
        );
    }
    s
}

fn f_bytes(f: &DistributionState) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * f.values.len());
    for v in &f.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn f_meta(grid: &PhaseSpaceGrid, step: usize, t: f64) -> SnapshotMeta {
    SnapshotMeta {
        step,
        t,
        shape: [grid.nx + 1, grid.nv + 1, grid.nv + 1],
        nx: grid.nx,
        nv: grid.nv,
        v_max: grid.v_max,
        dx: grid.dx,
        dv: grid.dv,
        layout: "row-major (x, v1, v2), little-endian f64".into(),
    }
}

/// Sample characteristics from the support of `f0`, traced forward over the run.
pub fn sample_trajectories(run: &SimulationRun, per_axis: usize) -> Vec<Vec<TrajectoryPoint>> {
    let Some(s) = run.vcfg.cfg.initial_data.f0.support() else {
        return Vec::new();
    };
    let sampler = FieldSampler::new(&run.field_states, run.vcfg.cfg.potential);
    let t_end = sampler.t_end();
    let max_substep = run.vcfg.grid.dt() / 4.0;
    let mut out = Vec::new();
    for a in 0..per_axis {
        let x = s.x_lo + (s.x_hi - s.x_lo) * (a as f64 + 0.5) / per_axis as f64;
        for b in 0..per_axis {
            let phi = 2.0 * std::f64::consts::PI * b as f64 / per_axis as f64;
            let r = 0.9 * s.v_radius;
            let p = PhasePoint::new(
                x,
                s.v_center[0] + r * phi.cos(),
                s.v_center[1] + r * phi.sin(),
            );
            match trace_path(0.0, p, &sampler, t_end, max_substep) {
                Ok(path) => out.push(path),
                Err(Error::ConfinementViolated { trajectory, .. }) => out.push(trajectory),
                Err(_) => {}
            }
        }
    }
    out
}

fn trajectories_csv(run: &SimulationRun) -> String {
    let sampler = FieldSampler::new(&run.field_states, run.vcfg.cfg.potential);
    let mut s = String::from("id,s,X,V1,V2,p_invariant\n");
    for (id, path) in sample_trajectories(run, 4).iter().enumerate() {
        for q in path {
            let _ = writeln!(
                s,
                "{id},{},{},{},{},{}",
                num(q.s),
                num(q.point.x),
                num(q.point.v1),
                num(q.point.v2),
                num(p_invariant(q.s, &q.point, &sampler))
            );
        }
    }
    s
}

#[derive(Serialize)]
struct ViolationRecord<'a> {
    step: usize,
    t: f64,
    check: &'a str,
    margin: f64,
}

/// Write every artifact of a finished run to `dir` and return the manifest.
pub fn write_run(run: &SimulationRun, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let cfg = &run.vcfg.cfg;
    let formats = &cfg.output.formats;
    let mut files = Vec::new();
    let mut put = |name: String, bytes: &[u8], hashed: bool| -> Result<()> {
        fs::write(dir.join(&name), bytes)?;
        if hashed {
            files.push(FileEntry {
                sha256: sha256_hex(bytes),
                name,
            });
        }
        Ok(())
    };

    let cfg_text = cfg.to_json_string();
    put("config.json".into(), cfg_text.as_bytes(), false)?;
    put(
        "wall_traces.csv".into(),
        wall_traces_csv(run).as_bytes(),
        true,
    )?;
    for (slot, &step) in run.snapshot_steps.iter().enumerate() {
        if formats.contains(&OutputFormat::Csv) {
            put(
                fields_csv_name(step),
                fields_csv(run, step).as_bytes(),
                true,
            )?;
        }
        if formats.contains(&OutputFormat::Json) {
            let f = &run.field_states[step];
            let v = serde_json::json!({
                "t": f.t,
                "step": step,
                "x": run.vcfg.grid.x_nodes,
                "E1": f.e1,
                "E2": f.e2(),
                "B": f.b(),
            });
            put(
                fields_json_name(step),
                serde_json::to_string(&v)?.as_bytes(),
                true,
            )?;
        }
        if formats.contains(&OutputFormat::Binary) {
            let f = &run.f_states[slot];
            put(f_bin_name(step), &f_bytes(f), true)?;
            let meta = f_meta(&run.vcfg.grid, step, f.t);
            put(
                f_meta_name(step),
                serde_json::to_string_pretty(&meta)?.as_bytes(),
                true,
            )?;
        }
    }
    put(
        "diagnostics.csv".into(),
        diagnostics_csv(run).as_bytes(),
        false,
    )?;
    let records: Vec<ViolationRecord> = run
        .diagnostics
        .iter()
        .flat_map(|d| {
            d.violations.iter().map(move |v| ViolationRecord {
                step: d.step,
                t: d.t,
                check: &v.check,
                margin: v.margin,
            })
        })
        .collect();
    put(
        "violations.json".into(),
        serde_json::to_string_pretty(&records)?.as_bytes(),
        false,
    )?;
    if cfg.output.emit_trajectories {
        put(
            "trajectories.csv".into(),
            trajectories_csv(run).as_bytes(),
            false,
        )?;
    }

    let last = run.diagnostics.last();
    let manifest = Manifest {
        config_hash: sha256_hex(cfg_text.as_bytes()),
        constants: run.vcfg.constants,
        summary: RunSummary {
            solver_mode: format!("{:?}", cfg.solver_mode).to_lowercase(),
            n_steps: run.n_steps(),
            snapshot_steps: run.snapshot_steps.clone(),
            violations: run.violation_count(),
            passed: run.violation_count() == 0,
            final_charge: last.map_or(0.0, |d| d.total_charge),
            final_energy: last.map_or(0.0, |d| d.total_energy),
            picard_residuals: run.picard_residuals.clone(),
            warnings: run.vcfg.warnings.clone(),
        },
        files,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Load, override and validate a configuration.
pub fn load_validated(config_path: &Path, overrides: &[String]) -> Result<ValidatedConfig> {
    let cfg = SimConfig::load(config_path, overrides).map_err(|e| match e {
        Error::Io(io) => {
            Error::InvalidConfig(format!("cannot read {}: {io}", config_path.display()))
        }
        other => other,
    })?;
    validate_config(&cfg)
}

/// `run`: validate, simulate, write artifacts. Returns the exit status.
pub fn cmd_run(config_path: &Path, overrides: &[String], out: Option<&Path>, quiet: bool) -> i32 {
    let vcfg = match load_validated(config_path, overrides) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if !quiet {
        for w in &vcfg.warnings {
            eprintln!("warning: {w}");
        }
    }
    let result = match run(&vcfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&vcfg.cfg.output.directory));
    let manifest = match write_run(&result, &dir) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if !quiet {
        println!(
            "{} steps, {} violations, artifacts in {}",
            manifest.summary.n_steps,
            manifest.summary.violations,
            dir.display()
        );
    }
    if let Some(d) = result.first_violation() {
        eprintln!(
            "bound check failed at step {} (t = {}): {}",
            d.step,
            d.t,
            d.violations
                .iter()
                .map(|v| format!("{} by {:e}", v.check, v.margin))
                .collect::<Vec<_>>()
                .join(", ")
        );
        return EXIT_CHECK_FAILED;
    }
    EXIT_OK
}

/// `constants`: print the a-priori constants as JSON.
pub fn cmd_constants(config_path: &Path, overrides: &[String]) -> i32 {
    match load_validated(config_path, overrides) {
        Ok(v) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&v.constants).expect("constants serialize")
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Outcome of an offline check of a run directory.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckOutcome {
    Consistent,
    /// Names of the failing checks.
    Failed(Vec<String>),
}

fn read_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Corrupt(format!("line {}: {e}", n + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Recompute every snapshot-level quantity from the files and compare with the
/// stored diagnostics series.
pub fn check_run_dir(dir: &Path) -> Result<CheckOutcome> {
    let read =
        |name: &str| fs::read(dir.join(name)).map_err(|e| Error::Corrupt(format!("{name}: {e}")));
    let manifest: Manifest = serde_json::from_slice(&read("manifest.json")?)
        .map_err(|e| Error::Corrupt(format!("manifest.json: {e}")))?;
    let cfg_bytes = read("config.json")?;
    if sha256_hex(&cfg_bytes) != manifest.config_hash {
        return Err(Error::Corrupt(
            "config.json does not match the manifest hash".into(),
        ));
    }
    for f in &manifest.files {
        let bytes = read(&f.name)?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(Error::Corrupt(format!(
                "{} does not match its manifest hash",
                f.name
            )));
        }
    }
    let cfg = SimConfig::from_json_str(
        std::str::from_utf8(&cfg_bytes).map_err(|e| Error::Corrupt(format!("config.json: {e}")))?,
    )
    .map_err(|e| Error::Corrupt(format!("config.json: {e}")))?;
    let vcfg = validate_config(&cfg).map_err(|e| Error::Corrupt(format!("config.json: {e}")))?;
    let grid = &vcfg.grid;
    let dt = grid.dt();

    let diag_text = String::from_utf8(read("diagnostics.csv")?)
        .map_err(|e| Error::Corrupt(format!("diagnostics.csv: {e}")))?;
    let diag = read_csv_rows(&diag_text)?;
    if diag.len() != manifest.summary.n_steps + 1 || diag.iter().any(|r| r.len() != 12) {
        return Err(Error::Corrupt("diagnostics.csv has the wrong shape".into()));
    }
    let mut failures = Vec::new();
    let n_viol: usize = diag.iter().map(|r| r[11] as usize).sum();
    if n_viol != manifest.summary.violations {
        failures.push(format!(
            "violation count: diagnostics.csv has {n_viol}, manifest has {}",
            manifest.summary.violations
        ));
    }

    let mut expect = |name: String, stored: f64, recomputed: f64| {
        if !close(stored, recomputed) {
            failures.push(format!(
                "{name}: stored {stored:e}, recomputed {recomputed:e}"
            ));
        }
    };

    let walls = read_csv_rows(
        &String::from_utf8(read("wall_traces.csv")?)
            .map_err(|e| Error::Corrupt(format!("wall_traces.csv: {e}")))?,
    )?;
    let mut flux = 0.0;
    for n in 0..walls.len() {
        if n > 0 {
            let p = |r: &Vec<f64>| r[1] * r[2] - r[3] * r[4];
            flux += 0.5 * dt * (p(&walls[n - 1]) + p(&walls[n]));
        }
        if let Some(row) = diag.get(n) {
            expect(format!("flux_accum at step {n}"), row[3], flux);
        }
    }

    for &step in &manifest.summary.snapshot_steps {
        let row = &diag[step];
        let fields_name = fields_csv_name(step);
        let fields = if dir.join(&fields_name).exists() {
            Some(read_csv_rows(
                &String::from_utf8(read(&fields_name)?)
                    .map_err(|e| Error::Corrupt(format!("{fields_name}: {e}")))?,
            )?)
        } else {
            None
        };
        let f = if dir.join(f_bin_name(step)).exists() {
            let bytes = read(&f_bin_name(step))?;
            if bytes.len() != 8 * grid.len() {
                return Err(Error::Corrupt(format!(
                    "{} has the wrong size",
                    f_bin_name(step)
                )));
            }
            let values = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            Some(DistributionState::with_support(
                grid,
                step as f64 * dt,
                values,
            ))
        } else {
            None
        };
        if let Some(fields) = &fields {
            if fields.len() != grid.nx + 1 {
                return Err(Error::Corrupt(format!("{fields_name} has the wrong shape")));
            }
            let col = |c: usize| fields.iter().map(|r| r[c]).collect::<Vec<f64>>();
            let sup = |v: Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            expect(format!("e1max at step {step}"), row[5], sup(col(1)));
            expect(format!("e2max at step {step}"), row[6], sup(col(2)));
            expect(format!("bmax at step {step}"), row[7], sup(col(3)));
        }
        if let Some(f) = &f {
            let m = moment_set(f, grid);
            expect(
                format!("charge at step {step}"),
                row[1],
                trapezoid(&m.rho, grid.dx),
            );
            expect(format!("maxf at step {step}"), row[4], f.max());
            let (sigma, p) = support_extents(f, grid, 0.0);
            expect(format!("p_radius at step {step}"), row[8], p);
            let (lo, hi) = sigma.unwrap_or((f64::NAN, f64::NAN));
            expect(format!("sigma_lo at step {step}"), row[9], lo);
            expect(format!("sigma_hi at step {step}"), row[10], hi);
            if let Some(fields) = &fields {
                let col = |c: usize| fields.iter().map(|r| r[c]).collect::<Vec<f64>>();
                let state =
                    crate::field::FieldState::from_e2_b(step as f64 * dt, col(1), &col(2), &col(3));
                let (e, _) = energy_density_from_moments(&state, &m);
                expect(
                    format!("energy at step {step}"),
                    row[2],
                    trapezoid(&e, grid.dx),
                );
            }
        }
    }

    Ok(if failures.is_empty() {
        CheckOutcome::Consistent
    } else {
        CheckOutcome::Failed(failures)
    })
}

/// `check`: offline consistency check of a run directory.
pub fn cmd_check(dir: &Path) -> i32 {
    match check_run_dir(dir) {
        Ok(CheckOutcome::Consistent) => EXIT_OK,
        Ok(CheckOutcome::Failed(names)) => {
            for n in names {
                eprintln!("check failed: {n}");
            }
            EXIT_CHECK_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) | Error::Corrupt(_) | Error::Json(_) => EXIT_CORRUPT,
                other => exit_code(&other),
            }
        }
    }
}
