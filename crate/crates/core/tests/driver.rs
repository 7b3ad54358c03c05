mod common;

use rvm::config::SolverMode;
use rvm::diagnostics::theoretical_constants;
use rvm::field::initial_field_state;
use rvm::vlasov::{moment_set, DistributionState};
use rvm::{run, validate_config, Error, SimConfig};

use common::{load, validated};

#[test]
fn vacuum_stays_zero() {
    for mode in [SolverMode::March, SolverMode::Picard] {
        let mut cfg = SimConfig::vacuum(16, 8, 1.0);
        cfg.solver_mode = mode;
        let r = run(&validate_config(&cfg).unwrap()).unwrap();
        assert_eq!(r.n_steps(), 16);
        for s in &r.field_states {
            assert!(s
                .e1
                .iter()
                .chain(&s.k_plus)
                .chain(&s.k_minus)
                .all(|&v| v == 0.0));
        }
        assert!(r
            .f_states
            .iter()
            .all(|f| f.values.iter().all(|&v| v == 0.0)));
        assert_eq!(r.violation_count(), 0);
        if mode == SolverMode::Picard {
            assert_eq!(r.picard_residuals.len(), 1);
        }
    }
}

#[test]
fn wave_run_is_the_dalembert_translate() {
    for mode in ["march", "picard"] {
        let vcfg = validated("wave", &[&format!("solver_mode={mode}")]);
        let r = run(&vcfg).unwrap();
        let dt = vcfg.grid.dt();
        for (n, s) in r.field_states.iter().enumerate() {
            let t = n as f64 * dt;
            for (i, &x) in vcfg.grid.x_nodes.iter().enumerate() {
                let exact = (2.0 * std::f64::consts::PI * (x - t)).cos();
                assert!((s.e2_at(i) - exact).abs() < 1e-12);
                assert!((s.b_at(i) - exact).abs() < 1e-12);
            }
        }
        if mode == "picard" {
            assert_eq!(r.picard_residuals.len(), 1);
        }
    }
}

#[test]
fn initial_state_examples() {
    let mut cfg = SimConfig::vacuum(16, 8, 1.0);
    cfg.v_max = 12.0;
    cfg.initial_data.e2_0 = rvm::descriptors::Profile::Constant { value: 1.0 };
    cfg.boundary_data.e2_left = rvm::descriptors::Profile::Constant { value: 1.0 };
    cfg.boundary_data.e2_right = rvm::descriptors::Profile::Constant { value: 1.0 };
    let vcfg = validate_config(&cfg).unwrap();
    let s = initial_field_state(&vcfg, &[0.0; 17]);
    assert!(s.k_plus.iter().chain(&s.k_minus).all(|&v| v == 1.0));

    let vcfg = validated(
        "confined_bump",
        &[
            "lambda=0.1",
            r#"initial_data.f0={"kind":"gaussian","amplitude":2.0,"x_center":0.5,"x_sigma":0.04,"x_halfwidth":0.15,"v_center":[0.0,0.0],"v_sigma":0.1,"v_radius":0.4}"#,
        ],
    );
    let f = DistributionState::initial(&vcfg.grid, &vcfg.cfg.initial_data.f0);
    let s = initial_field_state(&vcfg, &moment_set(&f, &vcfg.grid).rho);
    assert!(s.e1.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(s.e1[0], 0.1);
    let total = vcfg.constants.norms.f0_l1;
    assert!((s.e1.last().unwrap() - 0.1 - total).abs() < 1e-3 * total);
}

#[test]
fn undersized_velocity_box_reports_the_requirement() {
    let mut cfg = load("confined_bump", &[]);
    cfg.v_max = 0.45;
    let k = theoretical_constants(&cfg);
    let required = cfg.initial_data.k0 + k.c2 * cfg.t_final;
    match validate_config(&cfg) {
        Err(Error::InvalidConfig(msg)) => {
            assert!(msg.contains("required v_max"), "{msg}");
            let tail = msg.rsplit(">=").next().unwrap().trim();
            let stated: f64 = tail.parse().unwrap();
            assert!((stated - required).abs() <= 1e-12 * required);
        }
        other => panic!("expected rejection, got {other:?}"),
    }
}
