//! Kinetic half of the system: the distribution on the phase-space grid, its
//! velocity moments, and two backward semi-Lagrangian transports.
//!
//! * [`advance_f`] carries `f` one step by trilinear interpolation at the foot of
//!   each characteristic.
//! * [`CharacteristicMap`] carries the backward flow map `(x, v) -> (X, V)(0)`
//!   instead and sets `f = f0` at the foot. Interpolating a smooth map keeps the
//!   scheme high order, while `f` itself is only ever a sample of `f0`.

use rayon::prelude::*;

use crate::characteristics::{rk4_step, substep_count, trace, FieldSampler, PhasePoint};
use crate::descriptors::PhaseProfile;
use crate::error::{Error, Result};
use crate::field::CurrentSlice;
use crate::grid::PhaseSpaceGrid;
use crate::quadrature::locate;

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionState {
    pub t: f64,
    pub values: Vec<f64>,
    /// Bounding x interval of `{f > 0}`; `None` when `f` vanishes.
    pub support_x: Option<(f64, f64)>,
    pub support_v_radius: f64,
}

impl DistributionState {
    pub fn zeros(grid: &PhaseSpaceGrid, t: f64) -> Self {
        Self {
            t,
            values: vec![0.0; grid.len()],
            support_x: None,
            support_v_radius: 0.0,
        }
    }

    /// Sample `f0` at the grid nodes.
    pub fn initial(grid: &PhaseSpaceGrid, f0: &PhaseProfile) -> Self {
        let plane = grid.plane();
        let nvp = grid.nvp();
        let mut values = vec![0.0; grid.len()];
        values
            .par_chunks_mut(plane)
            .enumerate()
            .for_each(|(i, chunk)| {
                let x = grid.x(i);
                for j in 0..nvp {
                    for k in 0..nvp {
                        chunk[j * nvp + k] = f0.eval(x, grid.v(j), grid.v(k));
                    }
                }
            });
        Self::with_support(grid, 0.0, values)
    }

    pub fn with_support(grid: &PhaseSpaceGrid, t: f64, values: Vec<f64>) -> Self {
        let mut s = Self {
            t,
            values,
            support_x: None,
            support_v_radius: 0.0,
        };
        let (sx, r) = support_extents(&s, grid, 0.0);
        s.support_x = sx;
        s.support_v_radius = r;
        s
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Inclusive index box `[i0, i1] x [j0, j1] x [k0, k1]` on the phase-space grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeBox {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
    pub k0: usize,
    pub k1: usize,
}

impl NodeBox {
    pub fn dilate(&self, di: usize, dv: usize, grid: &PhaseSpaceGrid) -> Self {
        Self {
            i0: self.i0.saturating_sub(di),
            i1: (self.i1 + di).min(grid.nx),
            j0: self.j0.saturating_sub(dv),
            j1: (self.j1 + dv).min(grid.nv),
            k0: self.k0.saturating_sub(dv),
            k1: (self.k1 + dv).min(grid.nv),
        }
    }

    pub fn union(&self, o: &Self) -> Self {
        Self {
            i0: self.i0.min(o.i0),
            i1: self.i1.max(o.i1),
            j0: self.j0.min(o.j0),
            j1: self.j1.max(o.j1),
            k0: self.k0.min(o.k0),
            k1: self.k1.max(o.k1),
        }
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        i >= self.i0 && i <= self.i1 && j >= self.j0 && j <= self.j1 && k >= self.k0 && k <= self.k1
    }

    /// Whether the index ranges `[a, a+n)` per axis fit in the box.
    #[inline]
    fn holds(&self, i: isize, j: isize, k: isize, n: isize) -> bool {
        i >= self.i0 as isize
            && i + n - 1 <= self.i1 as isize
            && j >= self.j0 as isize
            && j + n - 1 <= self.j1 as isize
            && k >= self.k0 as isize
            && k + n - 1 <= self.k1 as isize
    }
}

/// Index box of `{f > tol}`.
pub fn support_box(f: &DistributionState, grid: &PhaseSpaceGrid, tol: f64) -> Option<NodeBox> {
    let nvp = grid.nvp();
    let mut b: Option<NodeBox> = None;
    for (i, plane) in f.values.chunks(grid.plane()).enumerate() {
        for (idx, &v) in plane.iter().enumerate() {
            if v > tol {
                let (j, k) = (idx / nvp, idx % nvp);
                let nb = NodeBox {
                    i0: i,
                    i1: i,
                    j0: j,
                    j1: j,
                    k0: k,
                    k1: k,
                };
                b = Some(b.map_or(nb, |o| o.union(&nb)));
            }
        }
    }
    b
}

/// Tight x interval and velocity radius of `{f > tol}`.
pub fn support_extents(
    f: &DistributionState,
    grid: &PhaseSpaceGrid,
    tol: f64,
) -> (Option<(f64, f64)>, f64) {
    let nvp = grid.nvp();
    let mut lo = usize::MAX;
    let mut hi = 0;
    let mut r2: f64 = 0.0;
    for (i, plane) in f.values.chunks(grid.plane()).enumerate() {
        for (idx, &v) in plane.iter().enumerate() {
            if v > tol {
                lo = lo.min(i);
                hi = hi.max(i);
                let (a, b) = (grid.v(idx / nvp), grid.v(idx % nvp));
                r2 = r2.max(a * a + b * b);
            }
        }
    }
    if lo == usize::MAX {
        (None, 0.0)
    } else {
        (Some((grid.x(lo), grid.x(hi))), r2.sqrt())
    }
}

/// Velocity moments on the x grid, all by tensor-product trapezoid in `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub t: f64,
    pub rho: Vec<f64>,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
    /// `int |v̂2| f dv`
    pub abs_j2: Vec<f64>,
    /// `int sqrt(1 + |v|^2) f dv`
    pub kinetic: Vec<f64>,
    /// `int v1 f dv`
    pub v1: Vec<f64>,
}

impl MomentSet {
    pub fn current(&self) -> CurrentSlice {
        CurrentSlice {
            t: self.t,
            rho: self.rho.clone(),
            j1: self.j1.clone(),
            j2: self.j2.clone(),
        }
    }
}

/// `rho = int f dv`, `j = int v̂ f dv`.
pub fn moments(f: &DistributionState, grid: &PhaseSpaceGrid) -> CurrentSlice {
    moment_set(f, grid).current()
}

pub fn moment_set(f: &DistributionState, grid: &PhaseSpaceGrid) -> MomentSet {
    let nvp = grid.nvp();
    let mut weights = vec![[0.0f64; 6]; grid.plane()];
    for j in 0..nvp {
        for k in 0..nvp {
            let (a, b) = (grid.v(j), grid.v(k));
            let w = grid.v_weight(j) * grid.v_weight(k);
            let g = (1.0 + a * a + b * b).sqrt();
            weights[j * nvp + k] = [w, w * a / g, w * b / g, w * (b / g).abs(), w * g, w * a];
        }
    }
    let rows: Vec<[f64; 6]> = f
        .values
        .par_chunks(grid.plane())
        .map(|plane| {
            let mut acc = [0.0; 6];
            for (v, w) in plane.iter().zip(&weights) {
                if *v != 0.0 {
                    for c in 0..6 {
                        acc[c] += w[c] * v;
                    }
                }
            }
            acc
        })
        .collect();
    let col = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<_>>();
    MomentSet {
        t: f.t,
        rho: col(0),
        j1: col(1),
        j2: col(2),
        abs_j2: col(3),
        kinetic: col(4),
        v1: col(5),
    }
}

/// Largest `|E| + |B̌|` over x nodes in `[i0, i1]` at the sampler's levels.
fn force_scale(fields: &FieldSampler, grid: &PhaseSpaceGrid, i0: usize, i1: usize) -> f64 {
    let mut m: f64 = 0.0;
    for level in fields.levels() {
        for i in i0..=i1 {
            let x = grid.x(i);
            let ext = if x > 0.0 && x < 1.0 {
                fields.potential.b_ext(x).abs()
            } else {
                f64::INFINITY
            };
            m = m.max(level.e1[i].abs() + level.e2_at(i).abs() + level.b_at(i).abs() + ext);
        }
    }
    m
}

/// Largest `|E|` inside `[i0, i1]`.
fn electric_scale(fields: &FieldSampler, i0: usize, i1: usize) -> f64 {
    fields
        .levels()
        .iter()
        .flat_map(|l| (i0..=i1).map(move |i| l.e1[i].hypot(l.e2_at(i))))
        .fold(0.0, f64::max)
}

/// Velocity cells a characteristic can cross in one step inside `[i0, i1]`.
fn velocity_reach(
    fields: &FieldSampler,
    grid: &PhaseSpaceGrid,
    i0: usize,
    i1: usize,
    dt: f64,
) -> usize {
    let k = force_scale(fields, grid, i0, i1);
    if k.is_finite() {
        (k * dt / grid.dv).ceil() as usize + 1
    } else {
        grid.nv
    }
}

/// Cells of margin kept around the support by the transports.
pub const REGION_MARGIN: usize = 4;

#[inline]
fn trilinear(values: &[f64], grid: &PhaseSpaceGrid, x: f64, v1: f64, v2: f64) -> f64 {
    let nv = grid.nv as f64;
    let uj = (v1 + grid.v_max) / grid.dv;
    let uk = (v2 + grid.v_max) / grid.dv;
    if !(uj >= 0.0 && uj <= nv && uk >= 0.0 && uk <= nv) {
        return 0.0;
    }
    let (i, a) = locate(x / grid.dx, grid.nx);
    let (j, b) = locate(uj, grid.nv);
    let (k, c) = locate(uk, grid.nv);
    let mut acc = 0.0;
    for (di, wi) in [(0, 1.0 - a), (1, a)] {
        for (dj, wj) in [(0, 1.0 - b), (1, b)] {
            for (dk, wk) in [(0, 1.0 - c), (1, c)] {
                let w = wi * wj * wk;
                if w != 0.0 {
                    acc += w * values[grid.index(i + di, j + dj, k + dk)];
                }
            }
        }
    }
    acc
}

/// One backward semi-Lagrangian step with trilinear interpolation of `f`.
///
/// `fields` must cover `[f.t, f.t + dt]`. Nodes farther than the one-step reach
/// plus [`REGION_MARGIN`] cells from the support are left at zero.
pub fn advance_f(
    f: &DistributionState,
    grid: &PhaseSpaceGrid,
    fields: &FieldSampler,
    dt: f64,
) -> Result<DistributionState> {
    let t_new = fields.t_end();
    let Some(sb) = support_box(f, grid, 0.0) else {
        return Ok(DistributionState::zeros(grid, t_new));
    };
    let reach = velocity_reach(
        fields,
        grid,
        sb.i0.saturating_sub(2),
        (sb.i1 + 2).min(grid.nx),
        dt,
    );
    let region = sb.dilate(REGION_MARGIN, reach + REGION_MARGIN, grid);
    let plane = grid.plane();
    let nvp = grid.nvp();
    let max_substep = dt / 4.0;
    let mut values = vec![0.0; grid.len()];
    values
        .par_chunks_mut(plane)
        .enumerate()
        .try_for_each(|(i, chunk)| -> Result<()> {
            if i < region.i0 || i > region.i1 || i == 0 || i == grid.nx {
                return Ok(());
            }
            let x = grid.x(i);
            for j in region.j0..=region.j1 {
                for k in region.k0..=region.k1 {
                    let p = PhasePoint::new(x, grid.v(j), grid.v(k));
                    let q = trace(t_new, p, fields, f.t, max_substep)?;
                    chunk[j * nvp + k] = trilinear(&f.values, grid, q.x, q.v1, q.v2);
                }
            }
            Ok(())
        })?;
    Ok(DistributionState::with_support(grid, t_new, values))
}

/// Evaluate `f0` at the backward foot `(X, V)(0)` of every node selected by `keep`,
/// tracing through `fields` from time `t`. Other nodes are zero.
///
/// With `strict` a characteristic reaching a wall is an error; otherwise the node
/// reads zero (no inflow of particles).
pub fn pull_back_initial(
    grid: &PhaseSpaceGrid,
    f0: &PhaseProfile,
    fields: &FieldSampler,
    t: f64,
    strict: bool,
    keep: impl Fn(f64, f64, f64) -> bool + Sync,
) -> Result<DistributionState> {
    let plane = grid.plane();
    let nvp = grid.nvp();
    let max_substep = grid.dt() / 4.0;
    let mut values = vec![0.0; grid.len()];
    values
        .par_chunks_mut(plane)
        .enumerate()
        .try_for_each(|(i, chunk)| -> Result<()> {
            if i == 0 || i == grid.nx {
                return Ok(());
            }
            let x = grid.x(i);
            for j in 0..nvp {
                for k in 0..nvp {
                    let (a, b) = (grid.v(j), grid.v(k));
                    if !keep(x, a, b) {
                        continue;
                    }
                    match trace(t, PhasePoint::new(x, a, b), fields, 0.0, max_substep) {
                        Ok(q) => chunk[j * nvp + k] = f0.eval(q.x, q.v1, q.v2),
                        Err(Error::ConfinementViolated { .. }) if !strict => {}
                        Err(e) => return Err(e),
                    }
                }
            }
            Ok(())
        })?;
    Ok(DistributionState::with_support(grid, t, values))
}

#[inline]
fn cubic_weights(w: f64) -> [f64; 4] {
    // Lagrange basis on nodes -1, 0, 1, 2.
    let a = w + 1.0;
    let b = w;
    let c = w - 1.0;
    let d = w - 2.0;
    [
        -b * c * d / 6.0,
        a * c * d / 2.0,
        -a * b * d / 2.0,
        a * b * c / 6.0,
    ]
}

/// Backward flow map to `t = 0`, sampled on an index box of the grid.
///
/// Entries are `NaN` where the map is not tracked.
#[derive(Debug, Clone)]
pub struct CharacteristicMap {
    pub t: f64,
    pub region: Option<NodeBox>,
    pub x0: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    /// `|V|^2`, interpolated separately from the components.
    pub speed2: Vec<f64>,
}

/// Counters from one map update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MapStats {
    pub cubic: usize,
    pub linear: usize,
    pub full_trace: usize,
    pub dead: usize,
}

enum Foot {
    Cubic([f64; 3]),
    Linear([f64; 3]),
    Fallback,
}

/// Foot from interpolated `(X, V1, V2, |V|^2)`: the velocity is rescaled to the
/// interpolated speed.
#[inline]
fn on_shell(acc: [f64; 4]) -> Option<[f64; 3]> {
    if !acc.iter().all(|v| v.is_finite()) {
        return None;
    }
    let norm = acc[1].hypot(acc[2]);
    let speed = acc[3].max(0.0).sqrt();
    if norm == 0.0 {
        return (speed == 0.0).then_some([acc[0], 0.0, 0.0]);
    }
    let r = speed / norm;
    Some([acc[0], r * acc[1], r * acc[2]])
}

impl CharacteristicMap {
    /// Identity map around the support of `f0`.
    pub fn identity(grid: &PhaseSpaceGrid, f: &DistributionState) -> Self {
        let n = grid.len();
        let mut m = Self {
            t: f.t,
            region: None,
            x0: vec![f64::NAN; n],
            v1: vec![f64::NAN; n],
            v2: vec![f64::NAN; n],
            speed2: vec![f64::NAN; n],
        };
        if let Some(sb) = support_box(f, grid, 0.0) {
            let r = sb.dilate(REGION_MARGIN, REGION_MARGIN, grid);
            for i in r.i0..=r.i1 {
                for j in r.j0..=r.j1 {
                    for k in r.k0..=r.k1 {
                        let idx = grid.index(i, j, k);
                        m.x0[idx] = grid.x(i);
                        m.v1[idx] = grid.v(j);
                        m.v2[idx] = grid.v(k);
                        m.speed2[idx] = grid.v(j).powi(2) + grid.v(k).powi(2);
                    }
                }
            }
            m.region = Some(r);
        }
        m
    }

    #[inline]
    fn interpolate(
        &self,
        grid: &PhaseSpaceGrid,
        region: &NodeBox,
        x: f64,
        v1: f64,
        v2: f64,
    ) -> Foot {
        let ux = x / grid.dx;
        let uj = (v1 + grid.v_max) / grid.dv;
        let uk = (v2 + grid.v_max) / grid.dv;
        let (fi, fj, fk) = (ux.floor(), uj.floor(), uk.floor());
        let (i, j, k) = (fi as isize, fj as isize, fk as isize);
        let (a, b, c) = (ux - fi, uj - fj, uk - fk);
        if region.holds(i - 1, j - 1, k - 1, 4) {
            let (wa, wb, wc) = (cubic_weights(a), cubic_weights(b), cubic_weights(c));
            let mut acc = [0.0; 4];
            for (di, wi) in wa.iter().enumerate() {
                for (dj, wj) in wb.iter().enumerate() {
                    let wij = wi * wj;
                    let base = grid.index(
                        (i - 1) as usize + di,
                        (j - 1) as usize + dj,
                        (k - 1) as usize,
                    );
                    for (dk, wk) in wc.iter().enumerate() {
                        self.accumulate(&mut acc, base + dk, wij * wk);
                    }
                }
            }
            if let Some(foot) = on_shell(acc) {
                return Foot::Cubic(foot);
            }
        }
        if region.holds(i, j, k, 2) {
            let mut acc = [0.0; 4];
            for (di, wi) in [(0, 1.0 - a), (1, a)] {
                for (dj, wj) in [(0, 1.0 - b), (1, b)] {
                    for (dk, wk) in [(0, 1.0 - c), (1, c)] {
                        let idx = grid.index(i as usize + di, j as usize + dj, k as usize + dk);
                        self.accumulate(&mut acc, idx, wi * wj * wk);
                    }
                }
            }
            if let Some(foot) = on_shell(acc) {
                return Foot::Linear(foot);
            }
        }
        Foot::Fallback
    }

    /// Trilinear weights renormalized over the tracked corners of the cell.
    fn partial(&self, grid: &PhaseSpaceGrid, x: f64, v1: f64, v2: f64) -> Option<[f64; 3]> {
        let ux = x / grid.dx;
        let uj = (v1 + grid.v_max) / grid.dv;
        let uk = (v2 + grid.v_max) / grid.dv;
        let nv = grid.nv as f64;
        if !(ux >= 0.0 && ux <= grid.nx as f64 && uj >= 0.0 && uj <= nv && uk >= 0.0 && uk <= nv) {
            return None;
        }
        let (i, a) = locate(ux, grid.nx);
        let (j, b) = locate(uj, grid.nv);
        let (k, c) = locate(uk, grid.nv);
        let mut acc = [0.0; 4];
        let mut total = 0.0;
        for (di, wi) in [(0, 1.0 - a), (1, a)] {
            for (dj, wj) in [(0, 1.0 - b), (1, b)] {
                for (dk, wk) in [(0, 1.0 - c), (1, c)] {
                    let idx = grid.index(i + di, j + dj, k + dk);
                    let w = wi * wj * wk;
                    if w > 0.0 && self.x0[idx].is_finite() {
                        self.accumulate(&mut acc, idx, w);
                        total += w;
                    }
                }
            }
        }
        if total < 1e-3 {
            return None;
        }
        on_shell(acc.map(|v| v / total))
    }

    #[inline]
    fn accumulate(&self, acc: &mut [f64; 4], idx: usize, w: f64) {
        acc[0] += w * self.x0[idx];
        acc[1] += w * self.v1[idx];
        acc[2] += w * self.v2[idx];
        acc[3] += w * self.speed2[idx];
    }

    /// Advance the map from `self.t` to `self.t + dt`.
    ///
    /// `step_fields` covers `[t, t + dt]`; `history` covers `[0, t + dt]` and is
    /// used for full traces where the stored map cannot be interpolated. `f` is the
    /// distribution at `t`, whose support decides where the map is needed.
    pub fn advance(
        &self,
        grid: &PhaseSpaceGrid,
        f0: &PhaseProfile,
        f: &DistributionState,
        step_fields: &FieldSampler,
        history: &FieldSampler,
        dt: f64,
    ) -> Result<(CharacteristicMap, DistributionState, MapStats)> {
        let t_new = step_fields.t_end();
        let n = grid.len();
        let (Some(prev_region), Some(sb)) = (self.region, support_box(f, grid, 0.0)) else {
            return Ok((
                CharacteristicMap {
                    t: t_new,
                    region: None,
                    x0: vec![f64::NAN; n],
                    v1: vec![f64::NAN; n],
                    v2: vec![f64::NAN; n],
                    speed2: vec![f64::NAN; n],
                },
                DistributionState::zeros(grid, t_new),
                MapStats::default(),
            ));
        };
        let reach = velocity_reach(
            step_fields,
            grid,
            sb.i0.saturating_sub(2),
            (sb.i1 + 2).min(grid.nx),
            dt,
        );
        let region = prev_region.union(&sb.dilate(REGION_MARGIN, reach + REGION_MARGIN, grid));
        let keep = sb.dilate(1, reach, grid);
        let e_sup = electric_scale(step_fields, keep.i0, keep.i1);
        let speed_cap = f.support_v_radius + e_sup * dt + 2.0 * grid.dv;
        let track_cap = speed_cap + 4.0 * grid.dv;
        let in_keep = |i: usize, j: usize, k: usize| {
            keep.contains(i, j, k) && grid.v(j).hypot(grid.v(k)) <= speed_cap
        };
        let near = sb.dilate(3, reach + 2, grid);
        let max_substep = dt / 4.0;
        let steps = substep_count(dt, max_substep);
        let h = -dt / steps as f64;

        let plane = grid.plane();
        let nvp = grid.nvp();
        let mut x0 = vec![f64::NAN; n];
        let mut v1 = vec![f64::NAN; n];
        let mut v2 = vec![f64::NAN; n];
        let mut speed2 = vec![f64::NAN; n];
        let mut values = vec![0.0; n];
        let stats: Vec<MapStats> = x0
            .par_chunks_mut(plane)
            .zip(v1.par_chunks_mut(plane))
            .zip(v2.par_chunks_mut(plane))
            .zip(speed2.par_chunks_mut(plane))
            .zip(values.par_chunks_mut(plane))
            .enumerate()
            .map(|(i, ((((cx, cv1), cv2), cs), cf))| -> Result<MapStats> {
                let mut st = MapStats::default();
                if i < region.i0 || i > region.i1 || i == 0 || i == grid.nx {
                    return Ok(st);
                }
                let x = grid.x(i);
                for j in region.j0..=region.j1 {
                    for k in region.k0..=region.k1 {
                        let idx = j * nvp + k;
                        let p = PhasePoint::new(x, grid.v(j), grid.v(k));
                        if p.speed() > track_cap {
                            continue;
                        }
                        let is_near = near.contains(i, j, k);
                        let mut q = Some(p);
                        for s in 0..steps {
                            q = q.and_then(|q| rk4_step(t_new + s as f64 * h, q, h, step_fields));
                        }
                        let foot = match q {
                            Some(q) => self.interpolate(grid, &prev_region, q.x, q.v1, q.v2),
                            None if is_near => {
                                return Err(trace(t_new, p, step_fields, self.t, max_substep)
                                    .err()
                                    .unwrap_or_else(|| Error::Domain("inconsistent trace".into())))
                            }
                            None => {
                                st.dead += 1;
                                continue;
                            }
                        };
                        let (a, b, c) = match foot {
                            Foot::Cubic([a, b, c]) => {
                                st.cubic += 1;
                                (a, b, c)
                            }
                            Foot::Linear([a, b, c]) => {
                                st.linear += 1;
                                (a, b, c)
                            }
                            Foot::Fallback if in_keep(i, j, k) => {
                                st.full_trace += 1;
                                let r = trace(t_new, p, history, 0.0, max_substep)?;
                                (r.x, r.v1, r.v2)
                            }
                            Foot::Fallback if is_near => {
                                let q = q.expect("one-step foot exists");
                                match self.partial(grid, q.x, q.v1, q.v2) {
                                    Some([a, b, c]) => {
                                        st.linear += 1;
                                        (a, b, c)
                                    }
                                    None => {
                                        st.dead += 1;
                                        continue;
                                    }
                                }
                            }
                            Foot::Fallback => {
                                st.dead += 1;
                                continue;
                            }
                        };
                        cx[idx] = a;
                        cv1[idx] = b;
                        cv2[idx] = c;
                        cs[idx] = b * b + c * c;
                        if in_keep(i, j, k) {
                            cf[idx] = f0.eval(a, b, c).max(0.0);
                        }
                    }
                }
                Ok(st)
            })
            .collect::<Result<Vec<_>>>()?;
        let total = stats.iter().fold(MapStats::default(), |acc, s| MapStats {
            cubic: acc.cubic + s.cubic,
            linear: acc.linear + s.linear,
            full_trace: acc.full_trace + s.full_trace,
            dead: acc.dead + s.dead,
        });
        Ok((
            CharacteristicMap {
                t: t_new,
                region: Some(region),
                x0,
                v1,
                v2,
                speed2,
            },
            DistributionState::with_support(grid, t_new, values),
            total,
        ))
    }
}
