use earlydetect_core::lmm::{
    fit_lmm, posterior_random_effects, subject_marginal_loglik, LmmFit, LmmSpec,
};
use earlydetect_core::numerics::{mvn_logpdf, CorrelatedScales};
use earlydetect_core::SubjectRecord;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn cn3_truth() -> LmmFit {
    LmmFit::from_parameters(
        LmmSpec::Cn3,
        vec![2.158, 0.019, 0.002],
        CorrelatedScales::new(vec![0.451, 0.039], vec![-0.147]),
        0.215,
    )
    .unwrap()
}

/// Draw subjects from a fitted model with annual visits.
fn simulate(fit: &LmmFit, n: usize, seed: u64) -> Vec<SubjectRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = fit.scales.factor();
    let q = fit.spec.q();
    (0..n)
        .map(|i| {
            let k = rng.random_range(1..=6);
            let times: Vec<f64> = (0..k).map(f64::from).collect();
            let age = rng.random_range(55.0..74.0);
            let z = DVector::from_fn(q, |_, _| normal(&mut rng));
            let b = &l * z;
            let (x, zd) = fit.spec.design(&times, age);
            let mean = x * DVector::from_column_slice(&fit.theta) + zd * b;
            let y = mean
                .iter()
                .map(|m| m + fit.sigma_xi * normal(&mut rng))
                .collect();
            SubjectRecord::new(format!("c{i}"), times, y, age, k as f64 + 0.5, false).unwrap()
        })
        .collect()
}

fn dense_loglik(s: &SubjectRecord, fit: &LmmFit) -> f64 {
    let (x, z) = fit.spec.design(&s.times, s.age);
    let mean = x * DVector::from_column_slice(&fit.theta);
    let n = s.n_obs();
    let v = &z * fit.cov_b() * z.transpose() + DMatrix::identity(n, n) * fit.sigma_xi.powi(2);
    mvn_logpdf(&DVector::from_column_slice(&s.y), &mean, &v).unwrap()
}

#[test]
fn marginal_matches_dense_mvn() {
    let fit = cn3_truth();
    for s in simulate(&fit, 50, 1) {
        let a = subject_marginal_loglik(&s, &fit).unwrap();
        assert!((a - dense_loglik(&s, &fit)).abs() < 1e-10);
    }
}

#[test]
fn single_observation_random_intercept() {
    let fit =
        LmmFit::from_parameters(LmmSpec::Cn1, vec![2.3], CorrelatedScales::independent(vec![0.4]), 0.2)
            .unwrap();
    let s = SubjectRecord::new("a", vec![0.0], vec![2.9], 60.0, 1.0, false).unwrap();
    let var: f64 = 0.4 * 0.4 + 0.2 * 0.2;
    let want = -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * 0.6 * 0.6 / var;
    assert!((subject_marginal_loglik(&s, &fit).unwrap() - want).abs() < 1e-12);
}

#[test]
fn zero_random_effects_give_independent_normals() {
    let fit = LmmFit::from_parameters(
        LmmSpec::Cn2,
        vec![2.0, 0.1],
        CorrelatedScales::new(vec![0.0, 0.0], vec![0.3]),
        0.25,
    )
    .unwrap();
    let s = SubjectRecord::new("a", vec![0.0, 1.0, 2.0], vec![2.1, 1.9, 2.5], 60.0, 2.5, false)
        .unwrap();
    let want: f64 = s
        .times
        .iter()
        .zip(&s.y)
        .map(|(t, y)| {
            let z = (y - 2.0 - 0.1 * t) / 0.25;
            -0.5 * z * z - 0.25f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
        })
        .sum();
    assert!((subject_marginal_loglik(&s, &fit).unwrap() - want).abs() < 1e-12);
}

#[test]
fn marginal_matches_monte_carlo_over_random_effects() {
    let fit = cn3_truth();
    let s = SubjectRecord::new(
        "mc",
        vec![0.0, 1.0, 2.0, 3.0],
        vec![2.5, 2.45, 2.6, 2.55],
        63.0,
        3.4,
        false,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let l = fit.scales.factor();
    let draws = 1_000_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    let base = 2.158 + 0.002 * 63.0;
    for _ in 0..draws {
        let (z0, z1) = (normal(&mut rng), normal(&mut rng));
        let b0 = l[(0, 0)] * z0;
        let b1 = l[(1, 0)] * z0 + l[(1, 1)] * z1;
        let mut lp = 0.0;
        for (t, y) in s.times.iter().zip(&s.y) {
            let r = (y - base - 0.019 * t - b0 - b1 * t) / 0.215;
            lp += -0.5 * r * r;
        }
        let v = lp.exp();
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / draws as f64;
    let se = ((sum2 / draws as f64 - mean * mean) / draws as f64).sqrt();
    let norm = 4.0 * ((2.0 * std::f64::consts::PI).sqrt() * 0.215).ln();
    let exact = (subject_marginal_loglik(&s, &fit).unwrap() + norm).exp();
    assert!((exact - mean).abs() < 3.0 * se, "{exact} vs {mean} ± {se}");
}

#[test]
fn balanced_random_intercept_mean_is_grand_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data: Vec<SubjectRecord> = (0..40)
        .map(|i| {
            let b = 0.5 * normal(&mut rng);
            let y = (0..4).map(|_| 2.0 + b + 0.2 * normal(&mut rng)).collect();
            SubjectRecord::new(format!("{i}"), vec![0.0, 1.0, 2.0, 3.0], y, 60.0, 3.5, false)
                .unwrap()
        })
        .collect();
    let fit = fit_lmm(&data, &LmmSpec::Cn1).unwrap();
    let grand = data.iter().flat_map(|s| s.y.iter()).sum::<f64>() / 160.0;
    assert!(fit.mle.converged);
    assert!((fit.theta[0] - grand).abs() < 1e-8);
}

#[test]
fn cn3_recovers_truth() {
    let truth = cn3_truth();
    let data = simulate(&truth, 5000, 2024);
    let fit = fit_lmm(&data, &LmmSpec::Cn3).unwrap();
    assert!(fit.mle.converged);
    let se = fit.mle.std_errors();
    let est = &fit.mle.estimate;
    let want = [2.158, 0.019, 0.002, 0.451, 0.039, -0.147, 0.215];
    for i in 0..7 {
        assert!((est[i] - want[i]).abs() < 3.0 * se[i], "param {i}: {} ± {} vs {}", est[i], se[i], want[i]);
    }
}

#[test]
fn constant_data_is_flagged() {
    let data: Vec<SubjectRecord> = (0..10)
        .map(|i| SubjectRecord::new(format!("{i}"), vec![0.0, 1.0, 2.0], vec![2.0; 3], 60.0, 2.5, false).unwrap())
        .collect();
    let fit = fit_lmm(&data, &LmmSpec::Cn1).unwrap();
    assert!(fit.mle.flagged());
    assert!(fit.mle.at_bound[2], "{:?}", fit.mle.at_bound);
}

#[test]
fn nested_models_increase_likelihood() {
    let data = simulate(&cn3_truth(), 600, 8);
    let l1 = fit_lmm(&data, &LmmSpec::Cn1).unwrap().loglik();
    let l2 = fit_lmm(&data, &LmmSpec::Cn2).unwrap().loglik();
    let l3 = fit_lmm(&data, &LmmSpec::Cn3).unwrap().loglik();
    assert!(l2 >= l1 - 1e-6 && l3 >= l2 - 1e-6, "{l1} {l2} {l3}");
}

#[test]
fn fit_is_invariant_to_subject_order() {
    let data = simulate(&cn3_truth(), 300, 5);
    let mut rev = data.clone();
    rev.reverse();
    let a = fit_lmm(&data, &LmmSpec::Cn2).unwrap();
    let b = fit_lmm(&rev, &LmmSpec::Cn2).unwrap();
    for (x, y) in a.mle.estimate.iter().zip(&b.mle.estimate) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn posterior_limits() {
    let fit = cn3_truth();
    let (m, c) = fit.posterior_obs(&[], &[], 60.0);
    assert!(m.iter().all(|v| *v == 0.0));
    assert!((c - fit.cov_b()).amax() < 1e-14);

    let vague = LmmFit::from_parameters(LmmSpec::Cn3, fit.theta.clone(), fit.scales.clone(), 1e6).unwrap();
    let s = SubjectRecord::new("a", vec![0.0, 1.0], vec![3.0, 3.5], 60.0, 1.5, false).unwrap();
    let (m, c) = posterior_random_effects(&s, &vague).unwrap();
    assert!(m.amax() < 1e-6);
    assert!((c - fit.cov_b()).amax() < 1e-6);

    let ri = LmmFit::from_parameters(LmmSpec::Cn1, vec![2.0], CorrelatedScales::independent(vec![0.5]), 0.3).unwrap();
    let s = SubjectRecord::new("b", vec![0.0], vec![2.8], 60.0, 0.5, false).unwrap();
    let (m, c) = posterior_random_effects(&s, &ri).unwrap();
    let shrink = 0.25 / (0.25 + 0.09);
    assert!((m[0] - shrink * 0.8).abs() < 1e-12);
    assert!((c[(0, 0)] - 0.25 * 0.09 / 0.34).abs() < 1e-12);
}

#[test]
fn posterior_matches_importance_sampling() {
    let fit = cn3_truth();
    let s = SubjectRecord::new("is", vec![0.0, 1.0, 2.0], vec![2.9, 3.0, 3.2], 66.0, 2.5, false).unwrap();
    let (m, c) = posterior_random_effects(&s, &fit).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let l = fit.scales.factor();
    let base = 2.158 + 0.002 * 66.0;
    let n = 200_000;
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        let z = DVector::from_fn(2, |_, _| normal(&mut rng));
        let b = &l * z;
        let lw: f64 = s
            .times
            .iter()
            .zip(&s.y)
            .map(|(t, y)| -0.5 * ((y - base - 0.019 * t - b[0] - b[1] * t) / 0.215).powi(2))
            .sum();
        draws.push((b, lw.exp()));
    }
    let wsum: f64 = draws.iter().map(|d| d.1).sum();
    let ess = wsum * wsum / draws.iter().map(|d| d.1 * d.1).sum::<f64>();
    for k in 0..2 {
        let mean = draws.iter().map(|d| d.1 * d.0[k]).sum::<f64>() / wsum;
        let var = draws.iter().map(|d| d.1 * (d.0[k] - mean).powi(2)).sum::<f64>() / wsum;
        let se = (var / ess).sqrt();
        assert!((mean - m[k]).abs() < 3.0 * se, "mean {k}: {mean} vs {} (se {se})", m[k]);
        let se_var = var * (2.0 / ess).sqrt();
        assert!((var - c[(k, k)]).abs() < 3.0 * se_var, "var {k}: {var} vs {}", c[(k, k)]);
    }
}
