//! Maxwell half of the system.
//!
//! `E1` comes from Gauss's law by quadrature of the charge density. The transverse
//! pair is carried in light-cone variables `k+ = E2 + B` and `k- = E2 - B`, which
//! move right and left at unit speed with source `-j2`. With `dt = dx` one step is
//! an exact array shift plus a trapezoid source integral and inflow injection.
//!
//! At the walls only the incoming family is prescribed: `k+` at `x = 0` and `k-`
//! at `x = 1` come from the boundary data, the outgoing family is whatever
//! arrives from the interior.

use crate::config::{BoundaryDataSpec, InitialDataSpec, ValidatedConfig};
use crate::descriptors::Profile;
use crate::error::{Error, Result};
use crate::quadrature::cumulative_trapezoid;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub e1: Vec<f64>,
    pub k_plus: Vec<f64>,
    pub k_minus: Vec<f64>,
}

impl FieldState {
    pub fn zeros(t: f64, n: usize) -> Self {
        Self {
            t,
            e1: vec![0.0; n],
            k_plus: vec![0.0; n],
            k_minus: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.e1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e1.is_empty()
    }

    #[inline]
    pub fn e2_at(&self, i: usize) -> f64 {
        0.5 * (self.k_plus[i] + self.k_minus[i])
    }

    #[inline]
    pub fn b_at(&self, i: usize) -> f64 {
        0.5 * (self.k_plus[i] - self.k_minus[i])
    }

    pub fn e2(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.e2_at(i)).collect()
    }

    pub fn b(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.b_at(i)).collect()
    }

    pub fn from_e2_b(t: f64, e1: Vec<f64>, e2: &[f64], b: &[f64]) -> Self {
        Self {
            t,
            e1,
            k_plus: e2.iter().zip(b).map(|(e, b)| e + b).collect(),
            k_minus: e2.iter().zip(b).map(|(e, b)| e - b).collect(),
        }
    }
}

/// Charge and current densities on the x grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentSlice {
    pub t: f64,
    pub rho: Vec<f64>,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
}

impl CurrentSlice {
    pub fn zeros(t: f64, n: usize) -> Self {
        Self {
            t,
            rho: vec![0.0; n],
            j1: vec![0.0; n],
            j2: vec![0.0; n],
        }
    }
}

/// `E1(x_i) = int_0^{x_i} rho + lambda` by composite trapezoid on the uniform grid.
pub fn compute_e1(rho: &[f64], lambda: f64) -> Vec<f64> {
    if rho.len() < 2 {
        return vec![lambda; rho.len()];
    }
    let dx = 1.0 / (rho.len() - 1) as f64;
    let mut e1 = cumulative_trapezoid(rho, dx);
    for v in &mut e1 {
        *v += lambda;
    }
    e1
}

/// Times at which the backward light rays from `(t, x)`, `0 < x <= 1/2`, leave the
/// initial line: `t_plus` for the ray towards `x = 0`, `t_minus` for the ray towards
/// `x = 1`. Zero means the ray reaches `t = 0` inside the domain.
pub fn retarded_times(t: f64, x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0 && x <= 0.5, "retarded_times needs 0 < x <= 1/2");
    let t_plus = if t <= x { 0.0 } else { t - x };
    let t_minus = if t <= 1.0 - x { 0.0 } else { t - 1.0 + x };
    (t_plus, t_minus)
}

/// Initial fields: `k+- = E2^0 +- B^0` sampled, `E1` from the initial charge density.
pub fn initial_field_state(vcfg: &ValidatedConfig, rho0: &[f64]) -> FieldState {
    let init = &vcfg.cfg.initial_data;
    let xs = &vcfg.grid.x_nodes;
    FieldState {
        t: 0.0,
        e1: compute_e1(rho0, vcfg.cfg.lambda),
        k_plus: xs
            .iter()
            .map(|&x| init.e2_0.eval(x) + init.b_0.eval(x))
            .collect(),
        k_minus: xs
            .iter()
            .map(|&x| init.e2_0.eval(x) - init.b_0.eval(x))
            .collect(),
    }
}

/// Advance the fields one step `dt = dx`.
///
/// `now` and `next` are the currents at `t` and `t + dt`; `next.rho` also feeds
/// the new `E1`.
pub fn step_fields(
    state: &FieldState,
    now: &CurrentSlice,
    next: &CurrentSlice,
    boundary: &BoundaryDataSpec,
    lambda: f64,
) -> Result<FieldState> {
    let n = state.len();
    let nx = n - 1;
    let dt = 1.0 / nx as f64;
    let t_next = next.t;
    let bv = boundary.at(t_next)?;
    let half = 0.5 * dt;
    let (j_now, j_next) = (&now.j2, &next.j2);

    let mut k_plus = vec![0.0; n];
    let mut k_minus = vec![0.0; n];
    k_plus[0] = bv.e2_left + bv.b_left;
    for i in 1..n {
        k_plus[i] = state.k_plus[i - 1] - half * (j_now[i - 1] + j_next[i]);
    }
    for i in 0..nx {
        k_minus[i] = state.k_minus[i + 1] - half * (j_now[i + 1] + j_next[i]);
    }
    k_minus[nx] = bv.e2_right - bv.b_right;

    Ok(FieldState {
        t: t_next,
        e1: compute_e1(&next.rho, lambda),
        k_plus,
        k_minus,
    })
}

/// Uniformly sampled scalar history `u(t_n, x_i)` with bilinear evaluation.
#[derive(Debug, Clone)]
pub struct SpaceTimeSeries<'a> {
    pub t0: f64,
    pub dt: f64,
    pub dx: f64,
    pub levels: Vec<&'a [f64]>,
}

const SNAP: f64 = 1e-9;

#[inline]
fn split(u: f64, n_cells: usize) -> (usize, f64) {
    let r = u.round();
    if (u - r).abs() < SNAP && r >= 0.0 && (r as usize) <= n_cells {
        let i = r as usize;
        if i == n_cells && n_cells > 0 {
            return (n_cells - 1, 1.0);
        }
        return (i, 0.0);
    }
    crate::quadrature::locate(u, n_cells.max(1))
}

impl<'a> SpaceTimeSeries<'a> {
    pub fn new(t0: f64, dt: f64, levels: Vec<&'a [f64]>) -> Self {
        let nx = levels.first().map_or(1, |l| l.len() - 1);
        Self {
            t0,
            dt,
            dx: 1.0 / nx as f64,
            levels,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.levels.len().saturating_sub(1)) as f64
    }

    #[inline]
    fn at_level(&self, n: usize, x: f64) -> f64 {
        let lvl = self.levels[n];
        let (i, w) = split(x / self.dx, lvl.len() - 1);
        if w == 0.0 {
            lvl[i]
        } else {
            (1.0 - w) * lvl[i] + w * lvl[i + 1]
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        if self.levels.len() == 1 {
            return self.at_level(0, x);
        }
        let (n, w) = split((t - self.t0) / self.dt, self.levels.len() - 1);
        if w == 0.0 {
            self.at_level(n, x)
        } else {
            (1.0 - w) * self.at_level(n, x) + w * self.at_level(n + 1, x)
        }
    }

    /// Trapezoid integral of `u(tau, y(tau))` over `[a, b]` with `y` affine in `tau`,
    /// using the grid times inside the interval as nodes.
    pub fn integrate_line(&self, a: f64, b: f64, y_at: impl Fn(f64) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let first = ((a - self.t0) / self.dt + SNAP).ceil().max(0.0) as usize;
        let last_f = ((b - self.t0) / self.dt - SNAP).floor();
        let mut prev_t = a;
        let mut prev_v = self.eval(a, y_at(a));
        let mut acc = 0.0;
        if last_f >= first as f64 {
            for n in first..=(last_f as usize) {
                let tau = self.t0 + n as f64 * self.dt;
                if tau <= a {
                    continue;
                }
                let v = self.eval(tau, y_at(tau));
                acc += 0.5 * (tau - prev_t) * (prev_v + v);
                prev_t = tau;
                prev_v = v;
            }
        }
        let vb = self.eval(b, y_at(b));
        acc + 0.5 * (b - prev_t) * (prev_v + vb)
    }
}

/// Data needed by the direct light-cone representation.
#[derive(Debug, Clone, Copy)]
pub struct WaveData<'a> {
    pub e2_0: &'a Profile,
    pub b_0: &'a Profile,
    pub boundary: &'a BoundaryDataSpec,
}

impl<'a> WaveData<'a> {
    pub fn new(init: &'a InitialDataSpec, boundary: &'a BoundaryDataSpec) -> Self {
        Self {
            e2_0: &init.e2_0,
            b_0: &init.b_0,
            boundary,
        }
    }

    #[inline]
    fn k_plus_initial(&self, y: f64) -> f64 {
        self.e2_0.eval(y) + self.b_0.eval(y)
    }

    #[inline]
    fn k_minus_initial(&self, y: f64) -> f64 {
        self.e2_0.eval(y) - self.b_0.eval(y)
    }
}

/// Right-moving value `k+(t, x)`, from the retarded time `t_from` of its ray.
fn k_plus_direct(t: f64, x: f64, t_from: f64, data: &WaveData, j2: &SpaceTimeSeries) -> f64 {
    let base = if t <= x {
        data.k_plus_initial(x - t)
    } else {
        data.boundary.k_plus_left(t - x)
    };
    base - j2.integrate_line(t_from, t, |tau| x - t + tau)
}

/// Left-moving value `k-(t, x)`.
fn k_minus_direct(t: f64, x: f64, t_from: f64, data: &WaveData, j2: &SpaceTimeSeries) -> f64 {
    let base = if t <= 1.0 - x {
        data.k_minus_initial(x + t)
    } else {
        data.boundary.k_minus_right(t - 1.0 + x)
    };
    base - j2.integrate_line(t_from, t, |tau| x + t - tau)
}

/// Light-cone values `(k+, k-)` at any `x` in `[0, 1]`, including wall traces.
pub fn light_cone_at(t: f64, x: f64, data: &WaveData, j2: &SpaceTimeSeries) -> (f64, f64) {
    if t <= 0.0 {
        return (data.k_plus_initial(x), data.k_minus_initial(x));
    }
    let t_plus = if t <= x { 0.0 } else { t - x };
    let t_minus = if t <= 1.0 - x { 0.0 } else { t - 1.0 + x };
    (
        k_plus_direct(t, x, t_plus, data, j2),
        k_minus_direct(t, x, t_minus, data, j2),
    )
}

/// Closed-form `(E2, B)(t, x)` from initial data, boundary data and the `j2` history.
///
/// For `x <= 1/2` the ray towards the left wall is the near one; for `x > 1/2` the
/// picture is reflected: the near wall is `x = 1` and the roles of `k+` and `k-`
/// swap.
pub fn solve_e2_b_direct(
    t: f64,
    x: f64,
    data: &WaveData,
    j2: &SpaceTimeSeries,
) -> Result<(f64, f64)> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!(
            "direct field solve at negative time t = {t}"
        )));
    }
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!(
            "direct field solve at x = {x} outside (0, 1)"
        )));
    }
    if t == 0.0 {
        let (kp, km) = (data.k_plus_initial(x), data.k_minus_initial(x));
        return Ok((0.5 * (kp + km), 0.5 * (kp - km)));
    }
    let (kp, km) = if x <= 0.5 {
        let (t_plus, t_minus) = retarded_times(t, x);
        (
            k_plus_direct(t, x, t_plus, data, j2),
            k_minus_direct(t, x, t_minus, data, j2),
        )
    } else {
        let (t_near, t_far) = retarded_times(t, 1.0 - x);
        (
            k_plus_direct(t, x, t_far, data, j2),
            k_minus_direct(t, x, t_near, data, j2),
        )
    };
    Ok((0.5 * (kp + km), 0.5 * (kp - km)))
}
