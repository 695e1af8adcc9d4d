use pauli_tomo_core::analysis::rip_epsilon_sampled;
use pauli_tomo_core::matrix::random_rank_r_state;
use pauli_tomo_core::noise::{measure_exact, measure_gaussian};
use pauli_tomo_core::solvers::{dantzig, lasso};
use pauli_tomo_core::{SamplingOperator, SolverConfig};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[test]
fn pure_states_recovered_from_fresh_operators() {
    let config = SolverConfig::default();
    let mut ok = 0;
    for trial in 0..20u64 {
        let op = SamplingOperator::draw(4, 128, 700 + trial).unwrap();
        let rho = random_rank_r_state(16, 1, 900 + trial).unwrap();
        let y = measure_exact(&op, &rho).unwrap().y;
        let res = lasso(&op, &y, 1e-6, &config).unwrap();
        if (res.estimate.as_matrix() - rho.as_matrix()).norm() < 1e-3 {
            ok += 1;
        }
    }
    assert!(ok >= 18, "{ok}/20");
}

#[test]
fn dantzig_and_lasso_agree_under_noise() {
    let sigma = 1e-3;
    let root_d = 8f64.sqrt();
    let config = SolverConfig {
        max_iters: 20_000,
        ..SolverConfig::default()
    };
    for trial in 0..5u64 {
        let op = SamplingOperator::draw(3, 48, 40 + trial).unwrap();
        let rho = random_rank_r_state(8, 1, 50 + trial).unwrap();
        let y = measure_gaussian(&op, &rho, sigma, 60 + trial).unwrap().y;
        let dz = dantzig(&op, &y, 8.0 * root_d * sigma, &config).unwrap();
        let la = lasso(&op, &y, 16.0 * root_d * sigma, &config).unwrap();
        let e_dz = (dz.estimate.as_matrix() - rho.as_matrix()).norm();
        let e_la = (la.estimate.as_matrix() - rho.as_matrix()).norm();
        assert!(
            e_dz <= 3.0 * e_la && e_la <= 3.0 * e_dz,
            "dantzig {e_dz} lasso {e_la}"
        );
    }
}

#[test]
fn isometry_defect_falls_with_more_measurements() {
    let mut last = f64::INFINITY;
    for m in [32, 64, 128, 224] {
        let eps: Vec<f64> = (0..5u64)
            .map(|k| {
                let op = SamplingOperator::draw(4, m, 31 * m as u64 + k).unwrap();
                rip_epsilon_sampled(&op, 2, 100, k).unwrap().epsilon_hat
            })
            .collect();
        let med = median(eps);
        assert!(med < last, "m = {m}: {med} !< {last}");
        last = med;
    }
}
