//! Particle characteristics: the relativistic Lorentz-force ODE in the self-consistent
//! fields plus the external magnetic field, its fixed-step RK4 integrator, the
//! generalized canonical momentum and the certified distance to the walls.

use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::potential::{dist_to_boundary, ExternalPotential};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub v1: f64,
    pub v2: f64,
}

impl PhasePoint {
    pub fn new(x: f64, v1: f64, v2: f64) -> Self {
        Self { x, v1, v2 }
    }

    pub fn speed(&self) -> f64 {
        self.v1.hypot(self.v2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub s: f64,
    pub point: PhasePoint,
}

/// Relativistic velocity `v / sqrt(1 + |v|^2)`.
#[inline]
pub fn v_hat(v1: f64, v2: f64) -> (f64, f64) {
    let g = (1.0 + v1 * v1 + v2 * v2).sqrt().recip();
    (v1 * g, v2 * g)
}

/// Internal fields sampled from stored time levels, linear in `t` and in `x`,
/// together with the analytic external field.
#[derive(Debug, Clone, Copy)]
pub struct FieldSampler<'a> {
    levels: &'a [FieldState],
    t0: f64,
    dt: f64,
    inv_dx: f64,
    nx: usize,
    pub potential: ExternalPotential,
}

#[inline]
fn lerp_index(u: f64, n: usize) -> (usize, f64) {
    let r = u.round();
    if (u - r).abs() < 1e-10 && r >= 0.0 && (r as usize) < n {
        return (r as usize, 0.0);
    }
    crate::quadrature::locate(u, n)
}

impl<'a> FieldSampler<'a> {
    /// `levels` must be consecutive time levels spaced by `dx`. A single level
    /// gives fields frozen in time.
    pub fn new(levels: &'a [FieldState], potential: ExternalPotential) -> Self {
        assert!(!levels.is_empty(), "field sampler needs at least one level");
        let nx = levels[0].len() - 1;
        let dt = if levels.len() > 1 {
            levels[1].t - levels[0].t
        } else {
            1.0 / nx as f64
        };
        Self {
            levels,
            t0: levels[0].t,
            dt,
            inv_dx: nx as f64,
            nx,
            potential,
        }
    }

    pub fn levels(&self) -> &'a [FieldState] {
        self.levels
    }

    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.levels.last().map(|l| l.t).unwrap_or(self.t0)
    }

    /// Time level index and weight, clamped to the stored range.
    #[inline]
    fn time_weights(&self, s: f64) -> (usize, f64) {
        if self.levels.len() == 1 {
            return (0, 0.0);
        }
        let u = ((s - self.t0) / self.dt).clamp(0.0, (self.levels.len() - 1) as f64);
        lerp_index(u, self.levels.len() - 1)
    }

    #[inline]
    fn level_at(level: &FieldState, i: usize, w: f64) -> (f64, f64, f64) {
        let e1 = level.e1[i] + w * (level.e1[i + 1] - level.e1[i]);
        let kp = level.k_plus[i] + w * (level.k_plus[i + 1] - level.k_plus[i]);
        let km = level.k_minus[i] + w * (level.k_minus[i + 1] - level.k_minus[i]);
        (e1, 0.5 * (kp + km), 0.5 * (kp - km))
    }

    /// Internal `(E1, E2, B)` at `(s, x)`, `x` in `[0, 1]`.
    #[inline]
    pub fn internal(&self, s: f64, x: f64) -> (f64, f64, f64) {
        let (i, w) = crate::quadrature::locate(x * self.inv_dx, self.nx);
        let (n, wt) = self.time_weights(s);
        let a = Self::level_at(&self.levels[n], i, w);
        if wt == 0.0 {
            return a;
        }
        let b = Self::level_at(&self.levels[n + 1], i, w);
        (
            a.0 + wt * (b.0 - a.0),
            a.1 + wt * (b.1 - a.1),
            a.2 + wt * (b.2 - a.2),
        )
    }

    /// Internal magnetic field at `(s, x)`.
    #[inline]
    pub fn b(&self, s: f64, x: f64) -> f64 {
        self.internal(s, x).2
    }

    /// `(E1, E2, B + B_ext)`; the external part is always evaluated analytically.
    #[inline]
    pub fn force_fields(&self, s: f64, x: f64) -> (f64, f64, f64) {
        let (e1, e2, b) = self.internal(s, x);
        (e1, e2, b + self.potential.b_ext(x))
    }

    /// `psi(s, x) = int_{1/2}^{x} B(s, z) dz`, exact for the piecewise-linear field.
    pub fn psi(&self, s: f64, x: f64) -> f64 {
        self.b_antiderivative(s, x) - self.b_antiderivative(s, 0.5)
    }

    fn b_antiderivative(&self, s: f64, x: f64) -> f64 {
        let (n, wt) = self.time_weights(s);
        let at = |level: &FieldState| {
            let dx = 1.0 / self.inv_dx;
            let (i, w) = crate::quadrature::locate(x * self.inv_dx, self.nx);
            let mut acc = 0.0;
            for c in 0..i {
                acc += 0.5 * dx * (level.b_at(c) + level.b_at(c + 1));
            }
            let (b0, b1) = (level.b_at(i), level.b_at(i + 1));
            acc + dx * (w * b0 + 0.5 * w * w * (b1 - b0))
        };
        let a = at(&self.levels[n]);
        if wt == 0.0 {
            a
        } else {
            a + wt * (at(&self.levels[n + 1]) - a)
        }
    }

    /// `int_a^b E2(tau, 1/2) dtau`, exact for fields linear in time between levels.
    pub fn midline_e2_integral(&self, a: f64, b: f64) -> f64 {
        let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
        let g = |tau: f64| self.internal(tau, 0.5).1;
        let mut knots = vec![lo];
        for level in self.levels {
            if level.t > lo && level.t < hi {
                knots.push(level.t);
            }
        }
        knots.push(hi);
        let mut acc = 0.0;
        for w in knots.windows(2) {
            acc += 0.5 * (w[1] - w[0]) * (g(w[0]) + g(w[1]));
        }
        sign * acc
    }
}

/// Right-hand side `(v̂1, E1 + v̂2 B̌, E2 - v̂1 B̌)` of the characteristic system.
#[inline]
fn rhs(s: f64, x: f64, v1: f64, v2: f64, fields: &FieldSampler) -> Option<[f64; 3]> {
    if !(x > 0.0 && x < 1.0) {
        return None;
    }
    let (e1, e2, bc) = fields.force_fields(s, x);
    let (u1, u2) = v_hat(v1, v2);
    Some([u1, e1 + u2 * bc, e2 - u1 * bc])
}

pub fn characteristic_rhs(
    s: f64,
    p: &PhasePoint,
    fields: &FieldSampler,
) -> Result<(f64, f64, f64)> {
    rhs(s, p.x, p.v1, p.v2, fields)
        .map(|r| (r[0], r[1], r[2]))
        .ok_or_else(|| Error::Domain(format!("characteristic evaluated at the wall x = {}", p.x)))
}

/// Classical RK4 step of signed length `h`; `None` if a stage leaves `(0, 1)`.
#[inline]
pub fn rk4_step(s: f64, p: PhasePoint, h: f64, fields: &FieldSampler) -> Option<PhasePoint> {
    let k1 = rhs(s, p.x, p.v1, p.v2, fields)?;
    let hh = 0.5 * h;
    let k2 = rhs(
        s + hh,
        p.x + hh * k1[0],
        p.v1 + hh * k1[1],
        p.v2 + hh * k1[2],
        fields,
    )?;
    let k3 = rhs(
        s + hh,
        p.x + hh * k2[0],
        p.v1 + hh * k2[1],
        p.v2 + hh * k2[2],
        fields,
    )?;
    let k4 = rhs(
        s + h,
        p.x + h * k3[0],
        p.v1 + h * k3[1],
        p.v2 + h * k3[2],
        fields,
    )?;
    let c = h / 6.0;
    let q = PhasePoint {
        x: p.x + c * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        v1: p.v1 + c * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        v2: p.v2 + c * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    };
    (q.x > 0.0 && q.x < 1.0).then_some(q)
}

/// Number of equal substeps of length at most `max_substep` covering `|span|`.
#[inline]
pub fn substep_count(span: f64, max_substep: f64) -> usize {
    ((span.abs() / max_substep) - 1e-9).ceil().max(1.0) as usize
}

/// Integrate the characteristic through `(t, p)` to time `s_target`.
///
/// Fails with `ConfinementViolated`, carrying the recorded trajectory, if the
/// path leaves `(0, 1)`.
pub fn trace(
    t: f64,
    p: PhasePoint,
    fields: &FieldSampler,
    s_target: f64,
    max_substep: f64,
) -> Result<PhasePoint> {
    if !(p.x > 0.0 && p.x < 1.0) {
        return Err(Error::Domain(format!(
            "trace started at x = {} outside (0, 1)",
            p.x
        )));
    }
    if s_target == t {
        return Ok(p);
    }
    let n = substep_count(s_target - t, max_substep);
    let h = (s_target - t) / n as f64;
    let mut q = p;
    for k in 0..n {
        let s = t + k as f64 * h;
        match rk4_step(s, q, h, fields) {
            Some(next) => q = next,
            None => return Err(confinement_error(t, p, fields, s_target, max_substep)),
        }
    }
    Ok(q)
}

/// Like [`trace`] but keeps every substep, starting with `(t, p)`.
pub fn trace_path(
    t: f64,
    p: PhasePoint,
    fields: &FieldSampler,
    s_target: f64,
    max_substep: f64,
) -> Result<Vec<TrajectoryPoint>> {
    let (path, ok) = record_path(t, p, fields, s_target, max_substep);
    if ok {
        Ok(path)
    } else {
        let last = path
            .last()
            .copied()
            .unwrap_or(TrajectoryPoint { s: t, point: p });
        Err(Error::ConfinementViolated {
            s: last.s,
            x: last.point.x,
            trajectory: path,
        })
    }
}

fn record_path(
    t: f64,
    p: PhasePoint,
    fields: &FieldSampler,
    s_target: f64,
    max_substep: f64,
) -> (Vec<TrajectoryPoint>, bool) {
    let n = substep_count(s_target - t, max_substep);
    let h = (s_target - t) / n as f64;
    let mut path = Vec::with_capacity(n + 1);
    path.push(TrajectoryPoint { s: t, point: p });
    let mut q = p;
    for k in 0..n {
        let s = t + k as f64 * h;
        match rk4_step(s, q, h, fields) {
            Some(next) => {
                q = next;
                path.push(TrajectoryPoint { s: s + h, point: q });
            }
            None => return (path, false),
        }
    }
    (path, true)
}

fn confinement_error(
    t: f64,
    p: PhasePoint,
    fields: &FieldSampler,
    s_target: f64,
    max_substep: f64,
) -> Error {
    let (path, _) = record_path(t, p, fields, s_target, max_substep);
    let last = path
        .last()
        .copied()
        .unwrap_or(TrajectoryPoint { s: t, point: p });
    Error::ConfinementViolated {
        s: last.s,
        x: last.point.x,
        trajectory: path,
    }
}

/// Generalized momentum `v2 + psi(s, x) + psi_ext(x)`.
pub fn p_invariant(s: f64, p: &PhasePoint, fields: &FieldSampler) -> f64 {
    p.v2 + fields.psi(s, p.x) + fields.potential.psi(p.x)
}

/// Certified lower bound on `dist(X(s), walls)` for `|s - t| <= alpha`, given
/// `|E| <= c0_field` and `|B| <= c0p_field` on the slab.
pub fn confinement_bound(
    x: f64,
    v: (f64, f64),
    alpha: f64,
    c0_field: f64,
    c0p_field: f64,
    pot: &ExternalPotential,
) -> f64 {
    let denom = pot.c0.recip()
        + 2.0 * v.0.hypot(v.1)
        + c0p_field
        + 3.0 * c0_field * alpha
        + pot.psi(x).abs();
    (pot.c0 / denom).powf(pot.gamma.recip())
}

/// Minimum distance to the walls along a recorded path.
pub fn min_wall_distance(path: &[TrajectoryPoint]) -> f64 {
    path.iter()
        .map(|p| dist_to_boundary(p.point.x))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::ExternalPotential;

    fn constant_levels(nx: usize, e1: f64, e2: f64, b: f64, t_end: f64) -> Vec<FieldState> {
        let dt = 1.0 / nx as f64;
        let n = (t_end / dt).round() as usize;
        (0..=n)
            .map(|k| FieldState {
                t: k as f64 * dt,
                e1: vec![e1; nx + 1],
                k_plus: vec![e2 + b; nx + 1],
                k_minus: vec![e2 - b; nx + 1],
            })
            .collect()
    }

    #[test]
    fn v_hat_examples() {
        assert_eq!(v_hat(0.0, 0.0), (0.0, 0.0));
        let (a, b) = v_hat(1.0, 0.0);
        assert!((a - 0.5f64.sqrt()).abs() < 1e-15 && b == 0.0);
        let (a, b) = v_hat(1e6, 0.0);
        assert!(a.hypot(b) < 1.0);
    }

    #[test]
    fn rhs_examples() {
        let lv = constant_levels(16, 0.0, 0.0, 0.0, 1.0);
        let fs = FieldSampler::new(&lv, ExternalPotential::free());
        let r = characteristic_rhs(0.3, &PhasePoint::new(0.5, 1.0, 0.0), &fs).unwrap();
        assert!((r.0 - 0.5f64.sqrt()).abs() < 1e-15 && r.1 == 0.0 && r.2 == 0.0);

        let lv = constant_levels(16, 1.0, 0.0, 0.0, 1.0);
        let fs = FieldSampler::new(&lv, ExternalPotential::free());
        let r = characteristic_rhs(0.3, &PhasePoint::new(0.5, 0.0, 0.0), &fs).unwrap();
        assert_eq!(r, (0.0, 1.0, 0.0));

        let lv = constant_levels(16, 0.0, 0.0, 2.5, 1.0);
        let fs = FieldSampler::new(&lv, ExternalPotential::free());
        let p = PhasePoint::new(0.5, 0.3, -0.7);
        let r = characteristic_rhs(0.3, &p, &fs).unwrap();
        assert!((p.v1 * r.1 + p.v2 * r.2).abs() < 1e-15);

        assert!(characteristic_rhs(0.0, &PhasePoint::new(0.0, 0.0, 0.0), &fs).is_err());
    }

    #[test]
    fn free_streaming_backward() {
        let lv = constant_levels(32, 0.0, 0.0, 0.0, 1.0);
        let fs = FieldSampler::new(&lv, ExternalPotential::free());
        let t = 0.5;
        let p = PhasePoint::new(0.6, 0.4, -0.3);
        let q = trace(t, p, &fs, 0.0, 1.0 / 128.0).unwrap();
        let (u1, _) = v_hat(p.v1, p.v2);
        assert!((q.x - (p.x - u1 * t)).abs() < 1e-14);
        assert_eq!((q.v1, q.v2), (p.v1, p.v2));
    }

    #[test]
    fn magnetic_gyration_preserves_speed() {
        let lv = constant_levels(32, 0.0, 0.0, 3.0, 1.0);
        let fs = FieldSampler::new(&lv, ExternalPotential::free());
        let p = PhasePoint::new(0.5, 0.5, 0.2);
        let q = trace(1.0, p, &fs, 0.0, 1.0 / 128.0).unwrap();
        assert!((q.speed() - p.speed()).abs() < 1e-10);
    }

    #[test]
    fn leaving_the_domain_reports_the_trajectory() {
        let lv = constant_levels(32, 0.0, 0.0, 0.0, 1.0);
        let fs = FieldSampler::new(&lv, ExternalPotential::free());
        let p = PhasePoint::new(0.1, 5.0, 0.0);
        match trace(1.0, p, &fs, 0.0, 1.0 / 128.0) {
            Err(Error::ConfinementViolated { trajectory, .. }) => assert!(trajectory.len() > 1),
            other => panic!("expected confinement error, got {other:?}"),
        }
    }

    #[test]
    fn p_invariant_examples() {
        let lv = constant_levels(32, 0.0, 0.0, 0.0, 1.0);
        let fs = FieldSampler::new(&lv, ExternalPotential::default());
        let p = p_invariant(0.2, &PhasePoint::new(0.5, 0.0, -1.0), &fs);
        assert!((p - 3.0).abs() < 1e-15);

        let lv = constant_levels(32, 0.0, 0.0, 1.0, 1.0);
        let fs = FieldSampler::new(&lv, ExternalPotential::free());
        assert!((fs.psi(0.2, 0.75) - 0.25).abs() < 1e-15);
        assert!((fs.psi(0.2, 0.3) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn confinement_bound_examples() {
        let pot = ExternalPotential::default();
        let b = confinement_bound(0.5, (1.0, 0.0), 0.0, 0.0, 0.0, &pot);
        assert!((b - 1.0 / 7.0).abs() < 1e-15);
        let b = confinement_bound(0.5, (0.0, 0.0), 1.0, 1.0, 1.0, &pot);
        assert!((b - 1.0 / 9.0).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for k in 0..10 {
            let b = confinement_bound(0.4, (0.3 * k as f64, 0.1), 0.5, 0.2, 0.3, &pot);
            assert!(b < last);
            last = b;
        }
    }
}
