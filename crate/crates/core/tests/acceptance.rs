//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::time::Instant;

use rvm::characteristics::{
    confinement_bound, min_wall_distance, p_invariant, trace, FieldSampler, PhasePoint,
};
use rvm::diagnostics::{
    allowance, check_cone_estimate, check_energy_balance, theoretical_constants,
};
use rvm::field::{light_cone_at, solve_e2_b_direct, FieldState, SpaceTimeSeries, WaveData};
use rvm::io::sample_trajectories;
use rvm::potential::ExternalPotential;
use rvm::vlasov::DistributionState;
use rvm::{run, SimulationRun, ValidatedConfig};

use common::validated;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn simulate(vcfg: &ValidatedConfig) -> SimulationRun {
    run(vcfg).expect("run completes")
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn charge_drift(r: &SimulationRun) -> f64 {
    let q0 = r.vcfg.constants.norms.f0_l1;
    r.diagnostics
        .iter()
        .map(|d| (d.total_charge - q0).abs() / q0)
        .fold(0.0, f64::max)
}

fn c1_exact_transport() -> Outcome {
    let vcfg = validated("wave", &[]);
    let r = simulate(&vcfg);
    let bd = &vcfg.cfg.boundary_data;
    let dt = vcfg.grid.dt();
    let nx = vcfg.grid.nx;
    let k0 = &r.field_states[0];
    let mut mismatches = 0usize;
    for (n, s) in r.field_states.iter().enumerate() {
        for i in 0..=nx {
            let kp = if i >= n {
                k0.k_plus[i - n]
            } else {
                let t = (n - i) as f64 * dt;
                bd.e2_left.eval(t) + bd.b_left.eval(t)
            };
            let km = if i + n <= nx {
                k0.k_minus[i + n]
            } else {
                let t = (i + n - nx) as f64 * dt;
                bd.e2_right.eval(t) - bd.b_right.eval(t)
            };
            mismatches += (s.k_plus[i].to_bits() != kp.to_bits()) as usize;
            mismatches += (s.k_minus[i].to_bits() != km.to_bits()) as usize;
        }
    }
    outcome(
        mismatches == 0,
        format!("{} steps, {mismatches} non-identical entries", r.n_steps()),
    )
}

fn c2_cross_oracle() -> Outcome {
    let vcfg = validated("driven", &[]);
    let r = simulate(&vcfg);
    let dt = vcfg.grid.dt();
    let levels: Vec<&[f64]> = r.moments.iter().map(|m| m.j2.as_slice()).collect();
    let j2 = SpaceTimeSeries::new(0.0, dt, levels);
    let data = WaveData::new(&vcfg.cfg.initial_data, &vcfg.cfg.boundary_data);
    let nx = vcfg.grid.nx;
    let mut err: f64 = 0.0;
    for (n, s) in r.field_states.iter().enumerate() {
        let t = n as f64 * dt;
        for i in 0..=nx {
            let x = vcfg.grid.x(i);
            let (kp, km) = if i == 0 || i == nx {
                light_cone_at(t, x, &data, &j2)
            } else {
                let (e, b) = solve_e2_b_direct(t, x, &data, &j2).expect("direct solve");
                (e + b, e - b)
            };
            err = err
                .max((s.k_plus[i] - kp).abs())
                .max((s.k_minus[i] - km).abs());
        }
    }
    outcome(
        err <= 1e-10 && nx == 128 && r.n_steps() == 100,
        format!("nx = {nx}, {} steps, sup error {err:.3e}", r.n_steps()),
    )
}

fn c3_charge() -> Outcome {
    let coarse = simulate(&validated("confined_bump", &[]));
    let fine = simulate(&validated("confined_bump", &["nx=128", "nv=128"]));
    let (a, b) = (charge_drift(&coarse), charge_drift(&fine));
    outcome(
        a <= 1e-3 && a / b >= 3.5,
        format!(
            "drift {a:.3e} at 64/64, {b:.3e} at 128/128, ratio {:.2}",
            a / b
        ),
    )
}

fn c4_energy(coarse: &SimulationRun, fine: &SimulationRun) -> Outcome {
    let margin = |r: &SimulationRun| {
        (0..=r.n_steps())
            .map(|n| check_energy_balance(r, n))
            .fold(0.0, f64::max)
    };
    let (a, b) = (margin(coarse), margin(fine));
    outcome(
        b <= 1e-3 && a / b >= 3.5,
        format!(
            "margin {a:.3e} at nx = {}, {b:.3e} at nx = {}, ratio {:.2}",
            coarse.vcfg.grid.nx,
            fine.vcfg.grid.nx,
            a / b
        ),
    )
}

fn field_sup(r: &SimulationRun) -> (f64, f64) {
    let mut e: f64 = 0.0;
    let mut b: f64 = 0.0;
    for s in &r.field_states {
        let e2 = s.e2();
        for (e1, e2) in s.e1.iter().zip(&e2) {
            e = e.max(e1.hypot(*e2));
        }
        b = b.max(sup(&s.b()));
    }
    (e, b)
}

fn c5_confinement(r: &SimulationRun) -> Outcome {
    let paths = sample_trajectories(r, 12);
    let (e_max, b_max) = field_sup(r);
    let pot = r.vcfg.cfg.potential;
    let alpha = r.vcfg.cfg.t_final;
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    for path in &paths {
        let p0 = path[0].point;
        let bound = confinement_bound(p0.x, (p0.v1, p0.v2), alpha, e_max, b_max, &pot);
        let reached = path.last().map_or(0.0, |q| q.s);
        let d = min_wall_distance(path);
        if d < bound || (reached - alpha).abs() > 1e-12 {
            failures += 1;
        }
        worst = worst.min(d - bound);
    }
    let violations = r.violation_count();
    outcome(
        failures == 0 && violations == 0 && !paths.is_empty(),
        format!(
            "{} characteristics, min(dist - bound) = {worst:.3e}, run violations {violations}",
            paths.len()
        ),
    )
}

fn c6_support(runs: &[&SimulationRun]) -> Outcome {
    let mut failures = 0;
    let mut checked = 0;
    let mut slack_p = f64::INFINITY;
    let mut slack_x = f64::INFINITY;
    for r in runs {
        let cfg = &r.vcfg.cfg;
        let k = theoretical_constants(cfg);
        let pot = cfg.potential;
        let k0 = cfg.initial_data.k0;
        for d in &r.diagnostics {
            checked += 1;
            let rad = k0 + k.c2 * d.t;
            slack_p = slack_p.min(rad - d.p_radius);
            if d.p_radius > rad {
                failures += 1;
            }
            if let Some((lo, hi)) = d.sigma {
                let need = pot.c0
                    / (pot.c0.recip()
                        + 2.0 * k0
                        + k.c1
                        + 3.0 * k.c2 * d.t
                        + k.norms.psi_ext_support);
                let dist = lo.min(1.0 - hi).powf(pot.gamma);
                slack_x = slack_x.min(dist - need);
                if dist < need {
                    failures += 1;
                }
            }
        }
    }
    outcome(
        failures == 0,
        format!("{checked} steps, min slack p_radius {slack_p:.3e}, sigma {slack_x:.3e}"),
    )
}

fn c7_field_bounds(runs: &[&SimulationRun]) -> Outcome {
    let mut failures = Vec::new();
    let mut steps = 0;
    let mut e1_excess = f64::NEG_INFINITY;
    for r in runs {
        let cfg = &r.vcfg.cfg;
        let k = theoretical_constants(cfg);
        let e1_bound = k.norms.f0_l1 + cfg.lambda.abs();
        let eb_bound = k.c1 + allowance(k.c1, &r.vcfg.grid);
        for (n, s) in r.field_states.iter().enumerate() {
            steps += 1;
            let st = &r.step_stats[n];
            e1_excess = e1_excess.max(sup(&s.e1) - e1_bound);
            let checks = [
                ("E1", sup(&s.e1) <= e1_bound),
                ("E2", sup(&s.e2()) <= eb_bound),
                ("B", sup(&s.b()) <= eb_bound),
                ("max f", st.max_f <= k.norms.f0_sup),
                ("min f", st.min_f >= 0.0),
            ];
            for (name, ok) in checks {
                if !ok {
                    failures.push(format!("{name} at step {n} of {}", cfg.output.directory));
                }
            }
        }
    }
    let detail = match failures.first() {
        None => format!(
            "{} runs, {steps} steps, max E1 excess {e1_excess:.3e}",
            runs.len()
        ),
        Some(first) => format!(
            "{} failures, first: {first}; max E1 excess {e1_excess:.3e}",
            failures.len()
        ),
    };
    outcome(failures.is_empty(), detail)
}

fn c8_cone(r: &SimulationRun) -> Outcome {
    let n = r.n_steps();
    let mut failures = 0;
    let mut min_gap = f64::INFINITY;
    for a in 0..5 {
        let t_index = (n * (a + 1)) / 5;
        for b in 0..4 {
            let x = 0.05 + 0.15 * b as f64;
            let c = check_cone_estimate(r, t_index, x);
            min_gap = min_gap.min(c.rhs - c.lhs);
            if !c.holds(0.0) {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!("20 points, min(rhs - lhs) = {min_gap:.3e}"),
    )
}

fn longest_contracting_run(residuals: &[f64]) -> usize {
    let mut best = 0;
    let mut cur = 0;
    for w in residuals.windows(2) {
        if w[0] > 0.0 && w[1] / w[0] < 0.8 {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

/// Sup difference on the coarse nodes, `fine` having twice the resolution.
fn coarse_sup(coarse: &[f64], fine: &[f64], map: impl Fn(usize) -> usize) -> f64 {
    coarse
        .iter()
        .enumerate()
        .map(|(i, c)| (c - fine[map(i)]).abs())
        .fold(0.0, f64::max)
}

fn quantity_diffs(a: &SimulationRun, b: &SimulationRun) -> [f64; 4] {
    let (ga, gb) = (&a.vcfg.grid, &b.vcfg.grid);
    let r = gb.nx / ga.nx;
    let rv = gb.nv / ga.nv;
    let (fa, fb): (&DistributionState, &DistributionState) = (a.final_f(), b.final_f());
    let f_map = |idx: usize| {
        let nva = ga.nvp();
        let i = idx / (nva * nva);
        let j = (idx / nva) % nva;
        let k = idx % nva;
        gb.index(i * r, j * rv, k * rv)
    };
    let (sa, sb): (&FieldState, &FieldState) = (
        a.field_states.last().unwrap(),
        b.field_states.last().unwrap(),
    );
    let x_map = |i: usize| i * r;
    [
        coarse_sup(&fa.values, &fb.values, f_map),
        coarse_sup(&sa.e1, &sb.e1, x_map),
        coarse_sup(&sa.e2(), &sb.e2(), x_map),
        coarse_sup(&sa.b(), &sb.b(), x_map),
    ]
}

fn c9_picard() -> Outcome {
    let picard = simulate(&validated("picard_small", &[]));
    let march = simulate(&validated("picard_small", &["solver_mode=march"]));
    let march_fine = simulate(&validated(
        "picard_small",
        &["solver_mode=march", "nx=128", "nv=64"],
    ));
    let contracting = longest_contracting_run(&picard.picard_residuals);
    let d_pm = quantity_diffs(&picard, &march);
    let d_self = quantity_diffs(&march, &march_fine);
    let names = ["f", "E1", "E2", "B"];
    let mut ok = contracting >= 5;
    let mut parts = vec![format!("{contracting} contracting ratios")];
    for q in 0..4 {
        ok &= d_pm[q] <= 5.0 * d_self[q];
        parts.push(format!("{} {:.2e}/{:.2e}", names[q], d_pm[q], d_self[q]));
    }
    outcome(ok, parts.join(", "))
}

fn c10_p_invariant() -> Outcome {
    let r = simulate(&validated("drift_wave", &[]));
    let sampler = FieldSampler::new(&r.field_states, r.vcfg.cfg.potential);
    let paths = sample_trajectories(&r, 10);
    let mut err: f64 = 0.0;
    for path in &paths {
        let q0 = path[0];
        let p0 = p_invariant(q0.s, &q0.point, &sampler);
        for q in path {
            let drift = p_invariant(q.s, &q.point, &sampler) - p0;
            err = err.max((drift - sampler.midline_e2_integral(q0.s, q.s)).abs());
        }
    }
    outcome(
        err <= 1e-4 && paths.len() == 100 && r.vcfg.grid.nx == 128,
        format!(
            "{} trajectories at nx = {}, max deviation {err:.3e}",
            paths.len(),
            r.vcfg.grid.nx
        ),
    )
}

fn c11_rk4_order() -> Outcome {
    let nx = 64;
    let b0 = 4.0;
    let level = FieldState::from_e2_b(
        0.0,
        vec![0.0; nx + 1],
        &vec![0.0; nx + 1],
        &vec![b0; nx + 1],
    );
    let levels = [level];
    let sampler = FieldSampler::new(&levels, ExternalPotential::free());
    let (x0, v1, v2): (f64, f64, f64) = (0.5, 0.5, 0.3);
    let span = 1.0;
    let gamma = (1.0 + v1 * v1 + v2 * v2).sqrt();
    let w = b0 / gamma;
    let (c, s) = ((w * span).cos(), (w * span).sin());
    let exact = [
        x0 + (v1 * s + v2 * (1.0 - c)) / b0,
        v1 * c + v2 * s,
        -v1 * s + v2 * c,
    ];
    let errs: Vec<f64> = [8.0, 16.0, 32.0, 64.0]
        .iter()
        .map(|n| {
            let q = trace(0.0, PhasePoint::new(x0, v1, v2), &sampler, span, span / n)
                .expect("stays inside");
            (q.x - exact[0])
                .abs()
                .max((q.v1 - exact[1]).abs())
                .max((q.v2 - exact[2]).abs())
        })
        .collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|r| (12.0..=20.0).contains(r));
    let fmt = |v: &[f64], p: usize| {
        v.iter()
            .map(|r| format!("{r:.p$e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        ok,
        format!("errors {}, ratios {}", fmt(&errs, 2), fmt(&ratios, 3)),
    )
}

fn main() {
    let t0 = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id: usize, name: &'static str, o: Outcome| {
        println!(
            "{} criterion {id:>2} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed().as_secs_f64()
        );
        results.push((id, name, o));
    };

    record(1, "exact transport", c1_exact_transport());
    record(2, "cross-oracle fields", c2_cross_oracle());
    record(3, "charge conservation", c3_charge());

    let box_coarse = simulate(&validated("closed_box", &["nx=64", "nv=32"]));
    let box_fine = simulate(&validated("closed_box", &[]));
    record(4, "energy balance", c4_energy(&box_coarse, &box_fine));

    let confined = simulate(&validated("confined_bump", &[]));
    record(5, "confinement certificate", c5_confinement(&confined));

    let driven = simulate(&validated("driven", &[]));
    let drift = simulate(&validated("drift_wave", &[]));
    let all = [&confined, &box_coarse, &box_fine, &driven, &drift];
    record(6, "support bounds", c6_support(&all));
    record(7, "field and maximum bounds", c7_field_bounds(&all));
    record(8, "cone estimate", c8_cone(&confined));
    record(9, "picard convergence", c9_picard());
    record(10, "p-invariant", c10_p_invariant());
    record(11, "integrator order", c11_rk4_order());

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "{} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
