//! A-priori constants, energy bookkeeping and the runtime bound checks.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::config::SimConfig;
use crate::descriptors::PhaseProfile;
use crate::driver::SimulationRun;
use crate::field::{retarded_times, FieldState, SpaceTimeSeries};
use crate::grid::PhaseSpaceGrid;
use crate::potential::{ExternalPotential, PotentialForm};
use crate::quadrature::{trapezoid, CompositeRule};
use crate::vlasov::{moment_set, DistributionState, MomentSet};

/// Norms of the data entering the a-priori constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct DataNorms {
    /// `||f0||_1`
    pub f0_l1: f64,
    /// `||sqrt(1 + |v|^2) f0||_1`
    pub f0_kinetic_l1: f64,
    /// `||f0||_inf`
    pub f0_sup: f64,
    pub e2_0_sup: f64,
    pub b_0_sup: f64,
    /// `||E2^b||` over `[0, T]` and both walls.
    pub e2_b_sup: f64,
    pub b_b_sup: f64,
    /// Bound on the electromagnetic power entering through the walls.
    pub boundary_power: f64,
    /// `||psi_ext||` over `[eps0, 1 - eps0]`.
    pub psi_ext_support: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TheoreticalConstants {
    pub c1: f64,
    pub c2: f64,
    pub c0: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub r: f64,
    /// Bound on `||rho||` and `||j||` at the final time.
    pub rho_j_bound: f64,
    pub norms: DataNorms,
}

const X_PANELS: usize = 32;
const R_PANELS: usize = 32;
const GL_ORDER: usize = 8;
const PHI_POINTS: usize = 128;
const POWER_SAMPLES: usize = 20_001;

/// `int int f0(x, v) g(v) dx dv` for a separable catalog profile.
pub fn phase_integral(f0: &PhaseProfile, g: impl Fn(f64, f64) -> f64) -> f64 {
    let Some(s) = f0.support() else { return 0.0 };
    let xr = CompositeRule::new(s.x_lo, s.x_hi, X_PANELS, GL_ORDER);
    let ix = xr.integrate(|x| f0.x_factor(x));
    let rr = CompositeRule::new(0.0, s.v_radius, R_PANELS, GL_ORDER);
    let dphi = 2.0 * PI / PHI_POINTS as f64;
    let iv = rr.integrate(|r| {
        let ring: f64 = (0..PHI_POINTS)
            .map(|m| {
                let phi = m as f64 * dphi;
                g(s.v_center[0] + r * phi.cos(), s.v_center[1] + r * phi.sin())
            })
            .sum::<f64>()
            * dphi;
        f0.v_factor(r) * r * ring
    });
    f0.sup() * ix * iv
}

pub fn data_norms(cfg: &SimConfig) -> DataNorms {
    let init = &cfg.initial_data;
    let bd = &cfg.boundary_data;
    let t = cfg.t_final;
    let mut power: f64 = 0.0;
    for n in 0..POWER_SAMPLES {
        let s = t * n as f64 / (POWER_SAMPLES - 1) as f64;
        let (el, er, bl, br) = (
            bd.e2_left.eval(s),
            bd.e2_right.eval(s),
            bd.b_left.eval(s),
            bd.b_right.eval(s),
        );
        let inflow_l = 0.25 * (el + bl) * (el + bl);
        let inflow_r = 0.25 * (er - br) * (er - br);
        power = power
            .max((el * bl).abs())
            .max((er * br).abs())
            .max(inflow_l)
            .max(inflow_r);
    }
    let pot = &cfg.potential;
    DataNorms {
        f0_l1: phase_integral(&init.f0, |_, _| 1.0),
        f0_kinetic_l1: phase_integral(&init.f0, |a, b| (1.0 + a * a + b * b).sqrt()),
        f0_sup: init.f0.sup(),
        e2_0_sup: init.e2_0.sup_abs(0.0, 1.0),
        b_0_sup: init.b_0.sup_abs(0.0, 1.0),
        e2_b_sup: bd.e2_left.sup_abs(0.0, t).max(bd.e2_right.sup_abs(0.0, t)),
        b_b_sup: bd.b_left.sup_abs(0.0, t).max(bd.b_right.sup_abs(0.0, t)),
        boundary_power: power,
        psi_ext_support: psi_sup(pot, init.eps0),
    }
}

fn psi_sup(pot: &ExternalPotential, a: f64) -> f64 {
    if pot.form == PotentialForm::Zero {
        0.0
    } else {
        pot.sup_abs_symmetric(a)
    }
}

/// Constants from precomputed norms.
pub fn constants_from_norms(
    n: &DataNorms,
    lambda: f64,
    k0: f64,
    t_final: f64,
    pot: &ExternalPotential,
) -> TheoreticalConstants {
    let charge = n.f0_l1 + lambda.abs();
    let c1 = n.e2_0_sup
        + n.e2_b_sup
        + n.b_0_sup
        + n.b_b_sup
        + 0.25
            * (charge * charge
                + n.e2_0_sup * n.e2_0_sup
                + n.b_0_sup * n.b_0_sup
                + 4.0 * t_final * n.boundary_power)
        + 0.5 * n.f0_kinetic_l1;
    let c0 = charge + c1;
    let c2 = 4.0 * c0;
    let base = pot.c0.recip() + 2.0 * k0 + c1 + 3.0 * c2 * t_final;
    let theta0 = (pot.c0 / (base + n.psi_ext_support)).powf(pot.gamma.recip());
    let theta1 = (pot.c0 / (base + psi_sup(pot, theta0))).powf(pot.gamma.recip());
    let r = k0 + c2 * t_final;
    TheoreticalConstants {
        c1,
        c2,
        c0,
        theta0,
        theta1,
        r,
        rho_j_bound: PI * n.f0_sup * r * r,
        norms: *n,
    }
}

/// Pure function of the configuration; sup norms come from the closed forms.
pub fn theoretical_constants(cfg: &SimConfig) -> TheoreticalConstants {
    constants_from_norms(
        &data_norms(cfg),
        cfg.lambda,
        cfg.initial_data.k0,
        cfg.t_final,
        &cfg.potential,
    )
}

/// Relative slack on every bound.
pub const REL_SLACK: f64 = 1e-8;
/// Discretization allowance `C` in `C h^2`, `h = max(dx, dv)`.
pub const DISCRETIZATION_ALLOWANCE: f64 = 1.0;

pub fn allowance(bound: f64, grid: &PhaseSpaceGrid) -> f64 {
    let h = grid.dx.max(grid.dv);
    REL_SLACK * bound.abs() + DISCRETIZATION_ALLOWANCE * h * h * bound.abs().max(1.0)
}

/// Energy density `e` and flux `m` on the x grid.
pub fn energy_density_from_moments(field: &FieldState, m: &MomentSet) -> (Vec<f64>, Vec<f64>) {
    let n = field.len();
    let mut e = vec![0.0; n];
    let mut flux = vec![0.0; n];
    for i in 0..n {
        let (e1, e2, b) = (field.e1[i], field.e2_at(i), field.b_at(i));
        e[i] = 0.5 * (e1 * e1 + e2 * e2 + b * b) + m.kinetic[i];
        flux[i] = -m.v1[i] - e2 * b;
    }
    (e, flux)
}

pub fn energy_density(
    field: &FieldState,
    f: &DistributionState,
    grid: &PhaseSpaceGrid,
) -> (Vec<f64>, Vec<f64>) {
    energy_density_from_moments(field, &moment_set(f, grid))
}

/// `int e(t_n, y) dy` for every stored step.
pub fn total_energies(run: &SimulationRun) -> Vec<f64> {
    let dx = run.vcfg.grid.dx;
    run.field_states
        .iter()
        .zip(&run.moments)
        .map(|(f, m)| trapezoid(&energy_density_from_moments(f, m).0, dx))
        .collect()
}

/// `(E2 B)` at `x = 0` and `x = 1` for every stored step.
pub fn wall_power(run: &SimulationRun) -> Vec<(f64, f64)> {
    run.field_states
        .iter()
        .map(|f| {
            let n = f.len() - 1;
            (f.e2_at(0) * f.b_at(0), f.e2_at(n) * f.b_at(n))
        })
        .collect()
}

/// `int_0^{t_n} [(E2 B)(tau, 0) - (E2 B)(tau, 1)] dtau` by trapezoid over steps.
pub fn flux_accumulated(run: &SimulationRun) -> Vec<f64> {
    let dt = run.vcfg.grid.dt();
    let p = wall_power(run);
    let mut acc = vec![0.0; p.len()];
    for n in 1..p.len() {
        let a = p[n - 1].0 - p[n - 1].1;
        let b = p[n].0 - p[n].1;
        acc[n] = acc[n - 1] + 0.5 * dt * (a + b);
    }
    acc
}

/// `|int e(t) - int e(0) - flux| / max(1, |int e(0) + flux|)`.
pub fn check_energy_balance(run: &SimulationRun, t_index: usize) -> f64 {
    let e = total_energies(run);
    let flux = flux_accumulated(run);
    let rhs = e[0] + flux[t_index];
    (e[t_index] - rhs).abs() / rhs.abs().max(1.0)
}

/// Both sides of the cone estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeEstimate {
    pub t: f64,
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl ConeEstimate {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

/// Linear interpolation of a series sampled at `n dt`, clamped to its range.
fn sample_at(values: &[f64], dt: f64, s: f64) -> f64 {
    if values.len() == 1 {
        return values[0];
    }
    let u = (s / dt).clamp(0.0, (values.len() - 1) as f64);
    let (i, w) = crate::quadrature::locate(u, values.len() - 1);
    values[i] + w * (values[i + 1] - values[i])
}

/// Integral of a uniformly sampled series, linear between samples, over `[a, b]`.
fn integrate_samples(values: &[f64], dt: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let at = |s: f64| sample_at(values, dt, s);
    let mut knots = vec![a];
    let first = (a / dt).floor() as usize + 1;
    let mut n = first;
    while (n as f64) * dt < b {
        knots.push(n as f64 * dt);
        n += 1;
    }
    knots.push(b);
    knots
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (at(w[0]) + at(w[1])))
        .sum()
}

/// Evaluate both sides of the cone estimate at `(t_n, x)`, `0 < x <= 1/2`.
pub fn check_cone_estimate(run: &SimulationRun, t_index: usize, x: f64) -> ConeEstimate {
    let dt = run.vcfg.grid.dt();
    let t = t_index as f64 * dt;
    let (t_plus, t_minus) = retarded_times(t, x);
    let levels: Vec<&[f64]> = run.moments[..=t_index]
        .iter()
        .map(|m| m.abs_j2.as_slice())
        .collect();
    let a = SpaceTimeSeries::new(0.0, dt, levels);
    let lhs = a.integrate_line(t_plus, t, |tau| x - t + tau)
        + a.integrate_line(t_minus, t, |tau| x + t - tau);
    let energies = total_energies(run);
    let e_minus = sample_at(&energies, dt, t_minus);
    let left: Vec<f64> = wall_power(run).iter().map(|p| p.0).collect();
    let rhs = e_minus + integrate_samples(&left[..=t_index], dt, t_minus, t_plus);
    ConeEstimate { t, x, lhs, rhs }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    /// `measured - bound`; positive when violated.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub step: usize,
    pub t: f64,
    pub total_charge: f64,
    pub total_energy: f64,
    pub boundary_flux_accum: f64,
    pub energy_margin: f64,
    pub max_f: f64,
    pub min_f: f64,
    pub e1_max: f64,
    pub e2_max: f64,
    pub b_max: f64,
    pub rho_max: f64,
    pub j_max: f64,
    pub p_radius: f64,
    pub sigma: Option<(f64, f64)>,
    pub violations: Vec<Violation>,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Evaluate every tracked bound at step `t_index`.
pub fn check_all(run: &SimulationRun, t_index: usize) -> DiagnosticsReport {
    let energies = total_energies(run);
    let flux = flux_accumulated(run);
    check_step(run, t_index, &energies, &flux)
}

/// Reports for every step, sharing the energy and flux series.
pub fn check_every_step(run: &SimulationRun) -> Vec<DiagnosticsReport> {
    let energies = total_energies(run);
    let flux = flux_accumulated(run);
    (0..run.field_states.len())
        .map(|n| check_step(run, n, &energies, &flux))
        .collect()
}

fn check_step(run: &SimulationRun, n: usize, energies: &[f64], flux: &[f64]) -> DiagnosticsReport {
    let cfg = &run.vcfg.cfg;
    let grid = &run.vcfg.grid;
    let k = &run.vcfg.constants;
    let field = &run.field_states[n];
    let m = &run.moments[n];
    let st = &run.step_stats[n];
    let t = n as f64 * grid.dt();
    let mut violations = Vec::new();
    let mut check = |name: &str, measured: f64, bound: f64, slack: f64| {
        if !(measured <= bound + slack) {
            violations.push(Violation {
                check: name.to_string(),
                margin: measured - bound,
            });
        }
    };

    let charge = trapezoid(&m.rho, grid.dx);
    let q0 = k.norms.f0_l1;
    check(
        "charge_conservation",
        (charge - q0).abs(),
        0.0,
        allowance(q0, grid),
    );

    let e1_max = sup(&field.e1);
    let e2_max = sup(&field.e2());
    let b_max = sup(&field.b());
    let e1_bound = q0 + cfg.lambda.abs();
    check("e1_bound", e1_max, e1_bound, allowance(e1_bound, grid));
    check("e2_bound", e2_max, k.c1, allowance(k.c1, grid));
    check("b_bound", b_max, k.c1, allowance(k.c1, grid));

    check("max_principle", st.max_f, k.norms.f0_sup, 0.0);
    check("nonnegativity", -st.min_f, 0.0, 0.0);

    let rho_max = sup(&m.rho);
    let j_max =
        m.j1.iter()
            .zip(&m.j2)
            .fold(0.0f64, |a, (x, y)| a.max(x.hypot(*y)));
    let rad = cfg.initial_data.k0 + k.c2 * t;
    let rj = PI * k.norms.f0_sup * rad * rad;
    check("rho_bound", rho_max, rj, allowance(rj, grid));
    check("j_bound", j_max, rj, allowance(rj, grid));

    check("momentum_support", st.p_radius, rad, allowance(rad, grid));
    if cfg.potential.is_confining() {
        if let Some((lo, hi)) = st.support_x {
            let pot = &cfg.potential;
            let need = pot.c0
                / (pot.c0.recip()
                    + 2.0 * cfg.initial_data.k0
                    + k.c1
                    + 3.0 * k.c2 * t
                    + k.norms.psi_ext_support);
            let d = lo.min(1.0 - hi).powf(pot.gamma);
            check("spatial_support", need, d, allowance(need, grid));
        }
    }

    let rhs = energies[0] + flux[n];
    let energy_margin = (energies[n] - rhs).abs() / rhs.abs().max(1.0);
    check("energy_balance", energy_margin, 0.0, allowance(1.0, grid));

    DiagnosticsReport {
        step: n,
        t,
        total_charge: charge,
        total_energy: energies[n],
        boundary_flux_accum: flux[n],
        energy_margin,
        max_f: st.max_f,
        min_f: st.min_f,
        e1_max,
        e2_max,
        b_max,
        rho_max,
        j_max,
        p_radius: st.p_radius,
        sigma: st.support_x,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_example_from_unit_norms() {
        let n = DataNorms {
            f0_l1: 1.0,
            f0_kinetic_l1: 1.5,
            ..Default::default()
        };
        let pot = ExternalPotential::default();
        let k = constants_from_norms(&n, 0.0, 1.0, 1.0, &pot);
        assert!((k.c1 - 1.0).abs() < 1e-15);
        assert!((k.c2 - 8.0).abs() < 1e-15);
        let n4 = DataNorms {
            psi_ext_support: 4.0,
            ..n
        };
        let k = constants_from_norms(&n4, 0.0, 1.0, 1.0, &pot);
        assert!((k.theta0 - 1.0 / 32.0).abs() < 1e-15);
        assert!(k.theta1 <= k.theta0);
    }

    #[test]
    fn vacuum_constants_vanish() {
        let k = theoretical_constants(&SimConfig::vacuum(16, 8, 1.0));
        assert_eq!((k.c1, k.c2, k.c0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn gamma_two_takes_square_roots() {
        let n = DataNorms {
            f0_l1: 1.0,
            f0_kinetic_l1: 1.5,
            psi_ext_support: 4.0,
            ..Default::default()
        };
        let p1 = ExternalPotential::default();
        let p2 = ExternalPotential { gamma: 2.0, ..p1 };
        let a = constants_from_norms(&n, 0.0, 1.0, 1.0, &p1);
        let b = constants_from_norms(&n, 0.0, 1.0, 1.0, &p2);
        assert!((b.theta0 - a.theta0.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn energy_density_examples() {
        let f = FieldState::from_e2_b(0.0, vec![0.0; 5], &[1.0; 5], &[0.0; 5]);
        let m = MomentSet {
            t: 0.0,
            rho: vec![0.0; 5],
            j1: vec![0.0; 5],
            j2: vec![0.0; 5],
            abs_j2: vec![0.0; 5],
            kinetic: vec![0.0; 5],
            v1: vec![0.0; 5],
        };
        let (e, flux) = energy_density_from_moments(&f, &m);
        assert!(e.iter().all(|&v| v == 0.5) && flux.iter().all(|&v| v == 0.0));
        let f = FieldState::from_e2_b(0.0, vec![0.0; 5], &[1.0; 5], &[1.0; 5]);
        let (e, flux) = energy_density_from_moments(&f, &m);
        assert!(e.iter().all(|&v| v == 1.0) && flux.iter().all(|&v| v == -1.0));
    }
}
