//! Coupled evolution: step-by-step marching and the fixed-point (Picard) iteration
//! over the whole time slab.

use crate::characteristics::FieldSampler;
use crate::config::{SolverMode, Transport, ValidatedConfig};
use crate::diagnostics::{check_every_step, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::field::{
    compute_e1, initial_field_state, light_cone_at, step_fields, CurrentSlice, FieldState,
    SpaceTimeSeries, WaveData,
};
use crate::vlasov::{
    advance_f, moment_set, pull_back_initial, CharacteristicMap, DistributionState, MapStats,
    MomentSet,
};

/// Cheap per-step summary of the distribution, kept even when `f` is not stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub max_f: f64,
    pub min_f: f64,
    pub support_x: Option<(f64, f64)>,
    pub p_radius: f64,
}

impl StepStats {
    pub fn of(f: &DistributionState) -> Self {
        Self {
            max_f: f.max(),
            min_f: f.min(),
            support_x: f.support_x,
            p_radius: f.support_v_radius,
        }
    }
}

/// Full history of one run. Fields, moments and stats are stored at every step;
/// the distribution only at the snapshot steps.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub vcfg: ValidatedConfig,
    pub field_states: Vec<FieldState>,
    pub moments: Vec<MomentSet>,
    pub step_stats: Vec<StepStats>,
    pub f_states: Vec<DistributionState>,
    pub snapshot_steps: Vec<usize>,
    pub diagnostics: Vec<DiagnosticsReport>,
    pub picard_residuals: Vec<f64>,
    pub map_stats: MapStats,
}

impl SimulationRun {
    pub fn n_steps(&self) -> usize {
        self.field_states.len() - 1
    }

    pub fn current_history(&self) -> Vec<CurrentSlice> {
        self.moments.iter().map(MomentSet::current).collect()
    }

    pub fn final_f(&self) -> &DistributionState {
        self.f_states
            .last()
            .expect("final snapshot is always stored")
    }

    pub fn violation_count(&self) -> usize {
        self.diagnostics.iter().map(|d| d.violations.len()).sum()
    }

    /// First step with a violation, if any.
    pub fn first_violation(&self) -> Option<&DiagnosticsReport> {
        self.diagnostics.iter().find(|d| !d.violations.is_empty())
    }
}

fn is_snapshot(n: usize, n_steps: usize, stride: usize) -> bool {
    n.is_multiple_of(stride) || n == n_steps
}

fn finish(mut run: SimulationRun) -> SimulationRun {
    run.diagnostics = check_every_step(&run);
    run
}

/// Run the configured solver.
pub fn run(vcfg: &ValidatedConfig) -> Result<SimulationRun> {
    match vcfg.cfg.solver_mode {
        SolverMode::March => run_time_marching(vcfg),
        SolverMode::Picard => run_picard(vcfg),
    }
}

fn add_stats(a: MapStats, b: MapStats) -> MapStats {
    MapStats {
        cubic: a.cubic + b.cubic,
        linear: a.linear + b.linear,
        full_trace: a.full_trace + b.full_trace,
        dead: a.dead + b.dead,
    }
}

/// Predictor-corrector marching.
///
/// Each step transports `f` with the fields frozen at `t`, advances the fields with
/// the predicted current, transports again with fields linear in time over the
/// step, and recomputes the fields from the corrected current.
pub fn run_time_marching(vcfg: &ValidatedConfig) -> Result<SimulationRun> {
    let cfg = &vcfg.cfg;
    let grid = &vcfg.grid;
    let dt = grid.dt();
    let n_steps = cfg.n_steps();
    let stride = cfg.output.snapshot_stride;
    let f0 = &cfg.initial_data.f0;
    let pot = cfg.potential;

    let mut f = DistributionState::initial(grid, f0);
    let mut map = CharacteristicMap::identity(grid, &f);
    let m0 = moment_set(&f, grid);
    let mut fields = vec![initial_field_state(vcfg, &m0.rho)];
    let mut moments = vec![m0];
    let mut step_stats = vec![StepStats::of(&f)];
    let mut f_states = vec![f.clone()];
    let mut snapshot_steps = vec![0];
    let mut map_stats = MapStats::default();

    for n in 0..n_steps {
        let t_next = (n + 1) as f64 * dt;
        let now = moments[n].current();

        let transport = |fields: &[FieldState], map: &CharacteristicMap, f: &DistributionState| {
            let step = FieldSampler::new(&fields[n..=n + 1], pot);
            match cfg.transport {
                Transport::Map => {
                    let history = FieldSampler::new(fields, pot);
                    map.advance(grid, f0, f, &step, &history, dt)
                }
                Transport::Trilinear => {
                    advance_f(f, grid, &step, dt).map(|g| (map.clone(), g, MapStats::default()))
                }
            }
        };

        let mut frozen = fields[n].clone();
        frozen.t = t_next;
        fields.push(frozen);
        let (_, f_pred, s1) = transport(&fields, &map, &f).map_err(|e| e.at_step(n + 1))?;
        let m_pred = moment_set(&f_pred, grid);
        fields[n + 1] = step_fields(
            &fields[n],
            &now,
            &m_pred.current(),
            &cfg.boundary_data,
            cfg.lambda,
        )
        .map_err(|e| e.at_step(n + 1))?;

        let (map_c, f_c, s2) = transport(&fields, &map, &f).map_err(|e| e.at_step(n + 1))?;
        let m_c = moment_set(&f_c, grid);
        fields[n + 1] = step_fields(
            &fields[n],
            &now,
            &m_c.current(),
            &cfg.boundary_data,
            cfg.lambda,
        )
        .map_err(|e| e.at_step(n + 1))?;

        map_stats = add_stats(add_stats(map_stats, s1), s2);
        map = map_c;
        f = f_c;
        moments.push(m_c);
        step_stats.push(StepStats::of(&f));
        if is_snapshot(n + 1, n_steps, stride) {
            f_states.push(f.clone());
            snapshot_steps.push(n + 1);
        }
    }

    Ok(finish(SimulationRun {
        vcfg: vcfg.clone(),
        field_states: fields,
        moments,
        step_stats,
        f_states,
        snapshot_steps,
        diagnostics: Vec::new(),
        picard_residuals: Vec::new(),
        map_stats,
    }))
}

/// One iterate `(f^n, E^n, B^n)` over every time level of the slab.
#[derive(Debug, Clone)]
pub struct PicardState {
    pub n: usize,
    pub f: Vec<DistributionState>,
    pub fields: Vec<FieldState>,
    pub moments: Vec<MomentSet>,
    /// Sup-norm distance to the previous iterate; infinite for iterate 0.
    pub residual: f64,
}

impl PicardState {
    /// Iterate 0: `f^0(t) = f0`, `E1^0` from the initial charge, `E2^0`, `B^0`
    /// frozen at their initial profiles.
    pub fn initial(vcfg: &ValidatedConfig) -> Self {
        let grid = &vcfg.grid;
        let n_steps = vcfg.cfg.n_steps();
        let f = DistributionState::initial(grid, &vcfg.cfg.initial_data.f0);
        let m = moment_set(&f, grid);
        let field0 = initial_field_state(vcfg, &m.rho);
        let mut fs = Vec::with_capacity(n_steps + 1);
        let mut fields = Vec::with_capacity(n_steps + 1);
        let mut moments = Vec::with_capacity(n_steps + 1);
        for n in 0..=n_steps {
            let t = n as f64 * grid.dt();
            let mut g = f.clone();
            g.t = t;
            fs.push(g);
            let mut h = field0.clone();
            h.t = t;
            fields.push(h);
            let mut mm = m.clone();
            mm.t = t;
            moments.push(mm);
        }
        Self {
            n: 0,
            f: fs,
            fields,
            moments,
            residual: f64::INFINITY,
        }
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Transport through the previous fields, then re-solve the fields.
pub fn picard_iterate_once(prev: &PicardState, vcfg: &ValidatedConfig) -> Result<PicardState> {
    let cfg = &vcfg.cfg;
    let grid = &vcfg.grid;
    let k = &vcfg.constants;
    let dt = grid.dt();
    let n_steps = cfg.n_steps();
    let f0 = &cfg.initial_data.f0;
    let sampler = FieldSampler::new(&prev.fields, cfg.potential);
    let confining = cfg.potential.is_confining();
    let support = f0.support();

    let mut fs = Vec::with_capacity(n_steps + 1);
    let mut moments = Vec::with_capacity(n_steps + 1);
    for n in 0..=n_steps {
        let t = n as f64 * dt;
        let f = match support {
            _ if n == 0 => DistributionState::initial(grid, f0),
            None => DistributionState::zeros(grid, t),
            Some(s) => {
                let radius = cfg.initial_data.k0 + k.c2 * t + grid.dv;
                let (mut lo, mut hi) = (s.x_lo - t, s.x_hi + t);
                if confining {
                    lo = lo.max(k.theta0);
                    hi = hi.min(1.0 - k.theta0);
                }
                let keep = move |x: f64, a: f64, b: f64| {
                    x >= lo - 1e-12 && x <= hi + 1e-12 && a * a + b * b <= radius * radius
                };
                pull_back_initial(grid, f0, &sampler, t, confining, keep)
                    .map_err(|e| e.at_step(n))?
            }
        };
        moments.push(moment_set(&f, grid));
        fs.push(f);
    }

    let data = WaveData::new(&cfg.initial_data, &cfg.boundary_data);
    let j2 = SpaceTimeSeries::new(0.0, dt, moments.iter().map(|m| m.j2.as_slice()).collect());
    let mut fields = Vec::with_capacity(n_steps + 1);
    for (n, m) in moments.iter().enumerate() {
        let t = n as f64 * dt;
        let mut kp = Vec::with_capacity(grid.nx + 1);
        let mut km = Vec::with_capacity(grid.nx + 1);
        for &x in &grid.x_nodes {
            let (a, b) = light_cone_at(t, x, &data, &j2);
            kp.push(a);
            km.push(b);
        }
        fields.push(FieldState {
            t,
            e1: compute_e1(&m.rho, cfg.lambda),
            k_plus: kp,
            k_minus: km,
        });
    }

    let mut residual: f64 = 0.0;
    for n in 0..=n_steps {
        residual = residual
            .max(sup_diff(&fs[n].values, &prev.f[n].values))
            .max(sup_diff(&fields[n].e1, &prev.fields[n].e1))
            .max(sup_diff(&fields[n].e2(), &prev.fields[n].e2()))
            .max(sup_diff(&fields[n].b(), &prev.fields[n].b()));
    }

    Ok(PicardState {
        n: prev.n + 1,
        f: fs,
        fields,
        moments,
        residual,
    })
}

/// Iterate until the residual drops to `picard_tol`, or once when `f0` vanishes.
pub fn run_picard(vcfg: &ValidatedConfig) -> Result<SimulationRun> {
    let cfg = &vcfg.cfg;
    // with f0 = 0 the fields decouple and iterate 1 is already the fixed point
    let decoupled = cfg.initial_data.f0.support().is_none();
    let mut state = PicardState::initial(vcfg);
    let mut residuals = Vec::new();
    loop {
        state = picard_iterate_once(&state, vcfg)?;
        residuals.push(state.residual);
        if state.residual <= cfg.picard_tol || decoupled {
            break;
        }
        if state.n >= cfg.picard_max_iter {
            return Err(Error::PicardNotConverged {
                iterations: state.n,
                last: state.residual,
                residuals,
            });
        }
    }
    Ok(picard_to_run(vcfg, state, residuals))
}

/// Reformat an iterate as a run.
pub fn picard_to_run(
    vcfg: &ValidatedConfig,
    state: PicardState,
    residuals: Vec<f64>,
) -> SimulationRun {
    let n_steps = vcfg.cfg.n_steps();
    let stride = vcfg.cfg.output.snapshot_stride;
    let step_stats = state.f.iter().map(StepStats::of).collect();
    let mut f_states = Vec::new();
    let mut snapshot_steps = Vec::new();
    for (n, f) in state.f.into_iter().enumerate() {
        if is_snapshot(n, n_steps, stride) {
            f_states.push(f);
            snapshot_steps.push(n);
        }
    }
    finish(SimulationRun {
        vcfg: vcfg.clone(),
        field_states: state.fields,
        moments: state.moments,
        step_stats,
        f_states,
        snapshot_steps,
        diagnostics: Vec::new(),
        picard_residuals: residuals,
        map_stats: MapStats::default(),
    })
}
