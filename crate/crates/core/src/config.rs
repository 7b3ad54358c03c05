//! Simulation configuration, JSON ingestion with `--set` overrides, and validation.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

use crate::descriptors::{PhaseProfile, Profile};
use crate::diagnostics::{theoretical_constants, TheoreticalConstants};
use crate::error::{Error, Result};
use crate::grid::PhaseSpaceGrid;
use crate::potential::{ExternalPotential, PotentialForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    #[default]
    March,
    Picard,
}

/// How the distribution is carried from one time level to the next in march mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    /// Track the backward characteristic map to `t = 0` and evaluate `f0` there.
    #[default]
    Map,
    /// Classic step-by-step semi-Lagrangian update with trilinear interpolation of `f`.
    Trilinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataSpec {
    pub f0: PhaseProfile,
    pub eps0: f64,
    pub k0: f64,
    pub e2_0: Profile,
    pub b_0: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundaryDataSpec {
    pub e2_left: Profile,
    pub e2_right: Profile,
    pub b_left: Profile,
    pub b_right: Profile,
}

impl BoundaryDataSpec {
    /// Incoming light-cone value `E2 + B` at `x = 0`.
    #[inline]
    pub fn k_plus_left(&self, t: f64) -> f64 {
        self.e2_left.eval(t) + self.b_left.eval(t)
    }

    /// Incoming light-cone value `E2 - B` at `x = 1`.
    #[inline]
    pub fn k_minus_right(&self, t: f64) -> f64 {
        self.e2_right.eval(t) - self.b_right.eval(t)
    }

    /// Boundary data at time `t`, failing on non-finite values or negative time.
    pub fn at(&self, t: f64) -> Result<BoundaryValues> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::MissingBoundaryData(t));
        }
        let v = BoundaryValues {
            e2_left: self.e2_left.eval(t),
            e2_right: self.e2_right.eval(t),
            b_left: self.b_left.eval(t),
            b_right: self.b_right.eval(t),
        };
        if [v.e2_left, v.e2_right, v.b_left, v.b_right]
            .iter()
            .all(|x| x.is_finite())
        {
            Ok(v)
        } else {
            Err(Error::MissingBoundaryData(t))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryValues {
    pub e2_left: f64,
    pub e2_right: f64,
    pub b_left: f64,
    pub b_right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: String,
    pub snapshot_stride: usize,
    pub formats: Vec<OutputFormat>,
    pub emit_trajectories: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            snapshot_stride: 8,
            formats: vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Binary],
            emit_trajectories: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub nx: usize,
    pub nv: usize,
    pub v_max: f64,
    pub t_final: f64,
    pub lambda: f64,
    pub potential: ExternalPotential,
    pub initial_data: InitialDataSpec,
    pub boundary_data: BoundaryDataSpec,
    pub solver_mode: SolverMode,
    #[serde(default)]
    pub transport: Transport,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub output: OutputSpec,
}

impl SimConfig {
    /// Empty plasma, zero fields, `lambda = 0`, confining potential.
    pub fn vacuum(nx: usize, nv: usize, t_final: f64) -> Self {
        Self {
            nx,
            nv,
            v_max: 1.0,
            t_final,
            lambda: 0.0,
            potential: ExternalPotential::default(),
            initial_data: InitialDataSpec {
                f0: PhaseProfile::Zero,
                eps0: 0.25,
                k0: 0.5,
                e2_0: Profile::Zero,
                b_0: Profile::Zero,
            },
            boundary_data: BoundaryDataSpec::default(),
            solver_mode: SolverMode::March,
            transport: Transport::Map,
            picard_tol: 1e-10,
            picard_max_iter: 30,
            output: OutputSpec::default(),
        }
    }

    pub fn grid(&self) -> PhaseSpaceGrid {
        PhaseSpaceGrid::new(self.nx, self.nv, self.v_max)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final * self.nx as f64).round() as usize
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Read a config file and apply `key.path=value` overrides, last one wins.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut value: Value = serde_json::from_str(&text)?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Ok(serde_json::from_value(value)?)
    }
}

/// Apply one `a.b.c=value` override to a JSON tree. The value is parsed as JSON
/// when possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{assignment}` is not KEY=VALUE")))?;
    let parsed = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.into()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (n, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            Error::InvalidConfig(format!("override path `{key}` crosses a non-object"))
        })?;
        if n + 1 == parts.len() {
            obj.insert((*part).to_string(), parsed);
            return Ok(());
        }
        node = obj
            .entry((*part).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// A configuration that passed every check, plus derived data.
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub cfg: SimConfig,
    pub grid: PhaseSpaceGrid,
    pub constants: TheoreticalConstants,
    /// Non-fatal findings, e.g. corner incompatibility of initial and boundary data.
    pub warnings: Vec<String>,
}

const CORNER_TOL: f64 = 1e-12;

pub fn validate_config(cfg: &SimConfig) -> Result<ValidatedConfig> {
    let fail = |m: String| Err(Error::InvalidConfig(m));
    if cfg.nx < 2 {
        return fail(format!("nx = {} must be at least 2", cfg.nx));
    }
    if cfg.nv < 2 {
        return fail(format!("nv = {} must be at least 2", cfg.nv));
    }
    if !(cfg.v_max > 0.0) || !cfg.v_max.is_finite() {
        return fail(format!("v_max = {} must be positive", cfg.v_max));
    }
    if !(cfg.t_final > 0.0) || !cfg.t_final.is_finite() {
        return fail(format!("t_final = {} must be positive", cfg.t_final));
    }
    let steps = cfg.t_final * cfg.nx as f64;
    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
        return fail(format!(
            "t_final = {} is not an integer multiple of dt = dx = 1/{}",
            cfg.t_final, cfg.nx
        ));
    }
    if !cfg.lambda.is_finite() {
        return fail("lambda must be finite".into());
    }
    if !(cfg.picard_tol > 0.0) || cfg.picard_max_iter == 0 {
        return fail("picard_tol must be positive and picard_max_iter at least 1".into());
    }
    if cfg.output.snapshot_stride == 0 {
        return fail("output.snapshot_stride must be positive".into());
    }

    let pot = &cfg.potential;
    if !(pot.c0 > 0.0) || !(pot.gamma > 0.0) || !pot.c0.is_finite() || !pot.gamma.is_finite() {
        return fail(format!(
            "potential constants c0 = {}, gamma = {} must be positive",
            pot.c0, pot.gamma
        ));
    }
    if pot.enforce_blowup {
        if pot.form == PotentialForm::Zero {
            return fail("a zero external potential cannot satisfy the blow-up condition".into());
        }
        let grid = cfg.grid();
        for &x in &grid.x_nodes[1..cfg.nx] {
            let m = pot.blowup_margin(x);
            if m < -1e-12 * pot.c0 {
                return fail(format!(
                    "blow-up condition |psi_ext(x)| >= c0/dist(x)^gamma - 1/c0 fails at x = {x} (margin {m:e})"
                ));
            }
        }
    }

    let init = &cfg.initial_data;
    if !(init.eps0 > 0.0 && init.eps0 < 0.5) {
        return fail(format!("eps0 = {} must lie in (0, 1/2)", init.eps0));
    }
    if !(init.k0 > 0.0) || !init.k0.is_finite() {
        return fail(format!("k0 = {} must be positive", init.k0));
    }
    init.f0.check_parameters().map_err(Error::InvalidConfig)?;
    if let Some(s) = init.f0.support() {
        if s.x_lo < init.eps0 - 1e-14 || s.x_hi > 1.0 - init.eps0 + 1e-14 {
            return fail(format!(
                "f0 x-support [{}, {}] violates spt(f0) in [eps0, 1 - eps0] = [{}, {}]",
                s.x_lo,
                s.x_hi,
                init.eps0,
                1.0 - init.eps0
            ));
        }
        let reach = s.v_center[0].hypot(s.v_center[1]) + s.v_radius;
        if reach > init.k0 + 1e-14 {
            return fail(format!(
                "f0 velocity support reaches |v| = {reach}, beyond k0 = {}",
                init.k0
            ));
        }
    }
    for (name, p) in [
        ("e2_0", &init.e2_0),
        ("b_0", &init.b_0),
        ("e2_left", &cfg.boundary_data.e2_left),
        ("e2_right", &cfg.boundary_data.e2_right),
        ("b_left", &cfg.boundary_data.b_left),
        ("b_right", &cfg.boundary_data.b_right),
    ] {
        if !p.is_finite() {
            return fail(format!("{name} has non-finite parameters"));
        }
    }

    let constants = theoretical_constants(cfg);
    let required = init.k0 + constants.c2 * cfg.t_final;
    if cfg.v_max < required {
        return fail(format!(
            "v_max = {} cannot hold the momentum support bound k0 + C2 T; required v_max >= {}",
            cfg.v_max, required
        ));
    }

    let mut warnings = Vec::new();
    let bd = &cfg.boundary_data;
    let corners = [
        ("E2 at (0,0)", init.e2_0.eval(0.0), bd.e2_left.eval(0.0)),
        ("B at (0,0)", init.b_0.eval(0.0), bd.b_left.eval(0.0)),
        ("E2 at (0,1)", init.e2_0.eval(1.0), bd.e2_right.eval(0.0)),
        ("B at (0,1)", init.b_0.eval(1.0), bd.b_right.eval(0.0)),
    ];
    for (what, a, b) in corners {
        if (a - b).abs() > CORNER_TOL {
            warnings.push(format!(
                "corner mismatch: {what}: initial {a} vs boundary {b}"
            ));
        }
    }

    Ok(ValidatedConfig {
        grid: cfg.grid(),
        cfg: cfg.clone(),
        constants,
        warnings,
    })
}
