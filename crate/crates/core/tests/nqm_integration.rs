use autodrop_core::noisy_quadratic::{nqm_empirical_limits_from, simulate_curve};
use autodrop_core::*;
use rayon::prelude::*;

#[test]
fn empirical_variance_matches_steady_state() {
    let a: Vec<f64> = (1..=12).map(|i| i as f64 * 0.25).collect();
    let sigma2: Vec<f64> = (0..12).map(|i| if i == 5 { 0.0 } else { 0.5 + 0.1 * i as f64 }).collect();
    let cfg = NqmConfig::new(a, sigma2, 0.2).unwrap();
    let oracle = nqm_oracle(&cfg).unwrap();
    let emp = nqm_empirical_limits(&cfg, cfg.default_burn_in(), 200_000, 31).unwrap();
    for (i, (&m, &v)) in emp.second_moment.iter().zip(&oracle.v_star).enumerate() {
        if cfg.sigma2[i] > 0.0 {
            assert!((m - v).abs() / v <= 0.10, "coordinate {i}: {m} vs {v}");
        } else {
            assert!(m < 1e-20, "noise-free coordinate should collapse, got {m}");
        }
    }
}

#[test]
fn oracle_agrees_with_simulation_across_rates() {
    let results: Vec<(f64, f64, f64)> = [0.06, 0.03, 0.01]
        .par_iter()
        .map(|&alpha| {
            let cfg = NqmConfig::standard(alpha).unwrap();
            let oracle = nqm_oracle(&cfg).unwrap();
            let emp = nqm_empirical_limits(&cfg, cfg.default_burn_in(), 20_000, 1).unwrap();
            (alpha, oracle.c_star, emp.c_hat)
        })
        .collect();
    for (alpha, c_star, c_hat) in results {
        assert!((c_star - c_hat).abs() < 0.02, "α = {alpha}: {c_star} vs {c_hat}");
    }
}

#[test]
fn trajectories_are_reproducible_bit_for_bit() {
    let cfg = NqmConfig::standard(0.03).unwrap();
    let run = |seed| {
        let mut st = NqmState::at_origin(&cfg, seed);
        (0..500).for_each(|_| {
            nqm_step(&cfg, &mut st);
        });
        st.x.iter().map(|v| v.to_bits()).collect::<Vec<u64>>()
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}

#[test]
fn shared_seed_shares_noise_across_rates() {
    // Noise-only coordinates: with x0 = 0 and the same draws, the iterate of a
    // chain at rate α after one step is α a c, so ratios expose the draw.
    let cfg = NqmConfig::new(vec![1.0, 2.0], vec![1.0, 1.0], 0.1).unwrap();
    let mut slow = NqmState::at_origin(&cfg, 5);
    let mut fast = NqmState::at_origin(&cfg, 5);
    slow.step_with_rate(&cfg, 0.1);
    fast.step_with_rate(&cfg, 0.2);
    for i in 0..2 {
        assert!((fast.x[i] - 2.0 * slow.x[i]).abs() < 1e-15);
    }
}

#[test]
fn autodrop_curves_are_deterministic_per_seed() {
    let model = NqmConfig::standard(0.06).unwrap();
    let cfg = NqmAutoDropConfig::default();
    let run = |seed| {
        autodrop_nqm_experiment(&model, &cfg, ParamVector::filled(200, 1.0), 3000, seed).unwrap()
    };
    let (a, b) = (run(3), run(3));
    assert_eq!(format!("{:?}", a.curve), format!("{:?}", b.curve));
    assert_eq!(a.drop_iterations, b.drop_iterations);
    assert!(!a.drop_iterations.is_empty());
}

#[test]
fn autodrop_rate_halves_down_to_floor() {
    let model = NqmConfig::standard(0.06).unwrap();
    let cfg = NqmAutoDropConfig::default();
    let run = autodrop_nqm_experiment(&model, &cfg, ParamVector::filled(200, 1.0), 20_000, 0).unwrap();
    let mut expected = 0.06;
    for w in run.curve.windows(2) {
        if w[1].alpha != w[0].alpha {
            expected = (expected * 0.5f64).max(0.001);
            assert_eq!(w[1].alpha, expected);
        }
    }
    assert_eq!(run.final_alpha(), 0.001);
    // Every drop is recorded at the iteration whose successor runs slower.
    for &t in &run.drop_iterations {
        let before = run.curve[t as usize - 1].alpha;
        let after = run.curve[t as usize].alpha;
        assert!(after < before);
    }
}

#[test]
fn loss_curve_decays_from_large_start() {
    let cfg = NqmConfig::standard(0.03).unwrap();
    let curve = simulate_curve(&cfg, ParamVector::filled(200, 1.0), 2000, 20, 2).unwrap();
    let oracle = nqm_oracle(&cfg).unwrap();
    let floor = 0.5 * cfg.a.iter().zip(&oracle.v_star).map(|(a, v)| a * v).sum::<f64>();
    let tail = &curve[1000..];
    let mean_tail = tail.iter().map(|p| p.loss).sum::<f64>() / tail.len() as f64;
    assert!(nqm_loss(&cfg, &[1.0; 200]) > 3.0 * floor);
    assert!((mean_tail - floor).abs() / floor < 0.15, "{mean_tail} vs {floor}");
    assert!(curve[0].omega.is_none());
    assert!(curve[1].omega.is_some());
}

#[test]
fn offset_start_reaches_the_same_steady_state() {
    let cfg = NqmConfig::new(vec![1.0, 3.0, 5.0], vec![1.0; 3], 0.2).unwrap();
    let oracle = nqm_oracle(&cfg).unwrap();
    let emp = nqm_empirical_limits_from(&cfg, ParamVector::filled(3, 50.0), 500, 200_000, 4).unwrap();
    assert!((emp.n_hat - oracle.n_star).abs() / oracle.n_star < 0.03);
}
