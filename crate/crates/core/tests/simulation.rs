use earlydetect_core::lmm::LmmSpec;
use earlydetect_core::roca::{CaseVariant, ChangepointModel};
use earlydetect_core::simulation::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn survival_moments_and_cap() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1_000_000;
    let (mut sum_t, mut events) = (0.0, 0usize);
    for _ in 0..n {
        let d = simulate_survival(&mut rng);
        assert!(d.c <= MAX_FOLLOWUP);
        assert_eq!(d.t, d.t_star.min(d.c));
        assert_eq!(d.s, d.t_star < d.c);
        sum_t += d.t_star;
        events += d.s as usize;
    }
    let mean = sum_t / n as f64;
    assert!((mean - 1.0 / EVENT_RATE).abs() < 0.01 / EVENT_RATE, "mean T* {mean}");

    // P(T* < C) = E[1 − exp(−λC)] by trapezoid integration over each lognormal
    // component, with the mass beyond the cap placed at 8.9.
    let mut p = 0.0;
    for (w, mu, sd) in CENSOR_MIXTURE {
        let (a, b, m) = (1e-6f64, MAX_FOLLOWUP, 200_000);
        let h = (b - a) / m as f64;
        let dens = |c: f64| {
            let z = (c.ln() - mu) / sd;
            (-0.5 * z * z).exp() / (c * sd * (2.0 * std::f64::consts::PI).sqrt())
        };
        let f = |c: f64| dens(c) * (1.0 - (-EVENT_RATE * c).exp());
        let mut s = 0.5 * (f(a) + f(b));
        let mut mass = 0.5 * (dens(a) + dens(b));
        for i in 1..m {
            s += f(a + i as f64 * h);
            mass += dens(a + i as f64 * h);
        }
        p += w * (s * h + (1.0 - mass * h) * (1.0 - (-EVENT_RATE * MAX_FOLLOWUP).exp()));
    }
    let observed = events as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((observed - p).abs() < 3.0 * se, "{observed} vs {p} (se {se})");
}

#[test]
fn gap_bounds_and_fallback_ages() {
    assert_eq!(gap_bounds(0.4), (0.0, 0.4));
    assert_eq!(gap_bounds(8.0), (2.0, 3.0));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pool = GapAgePool::fallback();
    for i in 0..10_000 {
        let t = 0.01 + 8.8 * (i as f64 / 10_000.0);
        let (g, age) = sample_gap_and_age(t, &pool, &mut rng).unwrap();
        let (lo, hi) = gap_bounds(t);
        assert!(g >= lo && g <= hi);
        assert!((55.0..=74.0).contains(&age));
    }
    let (g, _) = sample_gap_and_age(0.4, &pool, &mut rng).unwrap();
    assert!((0.0..=0.4).contains(&g));
}

#[test]
fn empirical_pool_restriction() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pool = GapAgePool::empirical(vec![(0.2, 60.0), (2.5, 70.0)], false);
    for _ in 0..100 {
        assert_eq!(sample_gap_and_age(8.0, &pool, &mut rng).unwrap(), (2.5, 70.0));
    }
    let err = sample_gap_and_age(8.95, &GapAgePool::empirical(vec![(0.2, 60.0)], false), &mut rng).unwrap_err();
    assert!(err.to_string().contains("8.95"));
    // restricted pool empty with fallback allowed: uniform fallback
    let (g, _) = sample_gap_and_age(8.0, &GapAgePool::empirical(vec![(0.2, 60.0)], true), &mut rng).unwrap();
    assert!((2.0..=3.0).contains(&g));
}

#[test]
fn literal_schedule_examples() {
    let (n, a) = schedule_screenings(5.7, 0.5, Frequency::Annual, ScheduleRule::Literal).unwrap();
    assert_eq!(n, 5);
    assert_eq!(a, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    let (_, b) = schedule_screenings(5.7, 0.5, Frequency::Biannual, ScheduleRule::Literal).unwrap();
    assert_eq!(b.len(), 9);
    assert_eq!(*b.last().unwrap(), 4.0);
    let (_, q) = schedule_screenings(5.7, 0.5, Frequency::Quarterly, ScheduleRule::Literal).unwrap();
    assert_eq!(q.len(), 17);
    assert_eq!(q[1], 0.25);
    assert!(schedule_screenings(1.2, 0.5, Frequency::Annual, ScheduleRule::Literal).is_none());
}

#[test]
fn default_schedule_runs_through_the_floor() {
    let (n, a) = schedule_screenings(5.7, 0.5, Frequency::Annual, ScheduleRule::ThroughFloor).unwrap();
    assert_eq!(n, 5);
    assert_eq!(a, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    let (_, q) = schedule_screenings(5.7, 0.5, Frequency::Quarterly, ScheduleRule::ThroughFloor).unwrap();
    assert_eq!(q.len(), 21);
    // one visit even when T − G < 1
    assert_eq!(schedule_screenings(0.4, 0.1, Frequency::Annual, ScheduleRule::ThroughFloor).unwrap().1, vec![0.0]);
}

#[test]
fn visit_times_and_realized_gaps() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pool = GapAgePool::fallback();
    for _ in 0..1_000_000 {
        let d = simulate_survival(&mut rng);
        let (g, _) = sample_gap_and_age(d.t, &pool, &mut rng).unwrap();
        let (_, times) = schedule_screenings(d.t, g, Frequency::Quarterly, ScheduleRule::ThroughFloor).unwrap();
        let last = *times.last().unwrap();
        assert!(times[0] == 0.0 && last < 6.0);
        // realized gap = configured gap + fractional remainder of T − G
        let realized = d.t - last;
        let frac = (d.t - g) - (d.t - g).floor();
        assert!((realized - g - frac).abs() < 1e-9);
    }
}

#[test]
fn degenerate_truth_gives_constant_values() {
    let case = ChangepointModel {
        variant: CaseVariant::Cs2,
        theta0: 2.4,
        gamma0: 0.0,
        sigma_b0: 0.0,
        sigma_b1: 0.0,
        rho_b0b1: 0.0,
        sigma_xi: 0.0,
        mu_tau: 1.0,
        sigma_tau: 0.3,
    };
    let truth = Truth {
        case: CaseTruth::Changepoint(case),
        control: truth_cn3(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y = generate_trajectory(&[0.0, 1.0, 2.0, 3.0], 60.0, 4.0, true, &truth, &mut rng);
    assert_eq!(y, vec![2.4; 4]);
}

#[test]
fn control_baseline_variance() {
    let truth = scenario1_truth();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 100_000;
    let ys: Vec<f64> = (0..n)
        .map(|_| generate_trajectory(&[0.0], 65.0, 5.0, false, &truth, &mut rng)[0])
        .collect();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let expect = 0.451f64.powi(2) + 0.215f64.powi(2);
    assert!((var / expect - 1.0).abs() < 0.02, "{var} vs {expect}");
}

#[test]
fn case_slope_after_the_changepoint() {
    let truth = scenario1_truth();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let times = [4.0, 5.0, 6.0, 7.0];
    let (mut sxy, mut sxx) = (0.0, 0.0);
    let tbar = 5.5;
    let n = 100_000;
    for _ in 0..n {
        // T = 3 puts τ near 2, well before the visits
        let y = generate_trajectory(&times, 60.0, 3.0, true, &truth, &mut rng);
        let ybar = y.iter().sum::<f64>() / 4.0;
        for (t, v) in times.iter().zip(&y) {
            sxy += (t - tbar) * (v - ybar);
            sxx += (t - tbar).powi(2);
        }
    }
    let slope = sxy / sxx;
    assert!((slope - 2.365).abs() < 0.02, "slope {slope}");
}

#[test]
fn scenario1_quotas_and_determinism() {
    let cfg = SimConfig::scenario1(Frequency::Annual, 7);
    let a = generate_dataset(&cfg).unwrap();
    for split in [&a.train, &a.test] {
        assert_eq!(split.iter().filter(|s| s.event).count(), 500);
        assert_eq!(split.iter().filter(|s| !s.event).count(), 1000);
        assert!(split.iter().all(|s| s.times.iter().all(|t| (0.0..6.0).contains(t))));
    }
    let b = generate_dataset(&cfg).unwrap();
    assert_eq!(a, b);
    let c = generate_dataset(&SimConfig::scenario1(Frequency::Annual, 8)).unwrap();
    assert_ne!(a.train, c.train);
}

#[test]
fn desk_scale_scenario2_prevalence() {
    let reps = 20;
    let mut total = 0usize;
    for seed in 0..reps {
        let d = generate_dataset(&SimConfig::scenario2(Frequency::Annual, 3041, seed)).unwrap();
        assert_eq!(d.train.len(), 3041);
        total += d.train.iter().filter(|s| s.event).count();
    }
    let mean = total as f64 / reps as f64;
    // expected 3041 × 133/30402 ≈ 13.3 with binomial SD ≈ 3.6 per split
    let sd = (3041.0 * 0.004375 * (1.0 - 0.004375) / reps as f64).sqrt();
    assert!((mean - 13.3).abs() < 3.5 * sd, "mean cases {mean}");
}

#[test]
fn seeds_do_not_bias_moments() {
    let mean_y = |seed| {
        let d = generate_dataset(&SimConfig { n_cases: 200, n_controls: 400, ..SimConfig::scenario1(Frequency::Annual, seed) }).unwrap();
        let ys: Vec<f64> = d.train.iter().filter(|s| !s.event).map(|s| s.y[0]).collect();
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        let v = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (ys.len() - 1) as f64;
        (m, (v / ys.len() as f64).sqrt())
    };
    let (a, sa) = mean_y(100);
    let (b, sb) = mean_y(200);
    assert!((a - b).abs() < 4.0 * (sa * sa + sb * sb).sqrt());
}

#[test]
fn frozen_spline_truth_is_reproducible() {
    let derived = derive_pmm_case_truth(PMM_TRUTH_CASES, PMM_TRUTH_SEED).unwrap();
    let CaseTruth::Spline(frozen) = scenario2_truth().case else {
        panic!("scenario 2 uses a spline case truth");
    };
    let (LmmSpec::Spline { age: a1, time: t1 }, LmmSpec::Spline { age: a2, time: t2 }) = (&derived.spec, &frozen.spec) else {
        panic!("spline specs");
    };
    assert_eq!((a1.boundary, a1.internal), (a2.boundary, a2.internal));
    assert_eq!((t1.boundary, t1.internal), (t2.boundary, t2.internal));
    let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-6);
    assert!(close(&derived.theta, &frozen.theta));
    assert!(close(&derived.scales.sd, &frozen.scales.sd));
    assert!(close(&derived.scales.cpc, &frozen.scales.cpc));
    assert!((derived.sigma_xi - frozen.sigma_xi).abs() < 1e-6);
}
