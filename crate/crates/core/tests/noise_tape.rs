use mpsim::noise::{generate_tape, CompoundPoissonSpec, TapeSpec};
use mpsim::stats::{ks_p_value, ks_statistic, mean};

fn spec(lambda: f64, horizon: f64, n_ref: usize) -> TapeSpec {
    TapeSpec {
        horizon,
        n_ref,
        lambda,
        brownian_dim: 1,
        compound_poisson: vec![],
    }
}

#[test]
fn atom_counts_are_poisson() {
    let (lambda, horizon) = (3.0, 2.0);
    let counts: Vec<f64> = (0..4000)
        .map(|i| generate_tape(11, i, &spec(lambda, horizon, 8)).unwrap().atoms().len() as f64)
        .collect();
    let m = mean(&counts).unwrap();
    let var = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    let se = (lambda * horizon / counts.len() as f64).sqrt();
    assert!((m - lambda * horizon).abs() < 4.0 * se, "mean count {m}");
    assert!((var / (lambda * horizon) - 1.0).abs() < 0.1, "dispersion {var}");
}

#[test]
fn interarrivals_are_exponential_and_marks_uniform() {
    let lambda = 5.0;
    let mut gaps = Vec::new();
    let mut marks = Vec::new();
    for i in 0..400 {
        let tape = generate_tape(5, i, &spec(lambda, 10.0, 4)).unwrap();
        let mut last = 0.0;
        for a in tape.atoms() {
            gaps.push(a.time - last);
            last = a.time;
            marks.push(a.mark);
        }
    }
    let d = ks_statistic(&gaps, |x| 1.0 - (-lambda * x).exp());
    assert!(ks_p_value(gaps.len(), d) > 0.01, "gaps KS d={d}");
    let d = ks_statistic(&marks, |u| (u / lambda).clamp(0.0, 1.0));
    assert!(ks_p_value(marks.len(), d) > 0.01, "marks KS d={d}");
}

fn normal_cdf(x: f64) -> f64 {
    // Simpson's rule from -10
    let n = 4000;
    let lo = -10.0_f64;
    if x <= lo {
        return 0.0;
    }
    let h = (x - lo) / n as f64;
    let f = |s: f64| (-0.5 * s * s).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = f(lo) + f(x);
    for k in 1..n {
        acc += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn brownian_increments_are_gaussian() {
    let n_ref = 64;
    let mut z = Vec::new();
    for i in 0..60 {
        let tape = generate_tape(3, i, &spec(1.0, 1.0, n_ref)).unwrap();
        let dt = tape.fine_step();
        z.extend(tape.coarsen_brownian(8).unwrap()[0].iter().map(|w| w / (8.0 * dt).sqrt()));
    }
    let d = ks_statistic(&z, normal_cdf);
    assert!(ks_p_value(z.len(), d) > 0.01, "Brownian KS d={d}");
}

#[test]
fn compound_jumps_have_the_configured_rate() {
    let cp = CompoundPoissonSpec {
        rate_per_time: 0.5,
        p_up: 0.4,
        mean_up: 0.18,
        mean_down: 0.22,
    };
    let mut s = spec(2.0, 10.0, 16);
    s.compound_poisson = vec![cp];
    let mut counts = Vec::new();
    let mut ups = 0usize;
    let mut total = 0usize;
    for i in 0..2000 {
        let tape = generate_tape(17, i, &s).unwrap();
        let jumps = tape.jumps_between(0.0, 10.0);
        counts.push(jumps.len() as f64);
        ups += jumps.iter().filter(|j| j.2 > 0.0).count();
        total += jumps.len();
    }
    let m = mean(&counts).unwrap();
    let se = (5.0 / counts.len() as f64).sqrt();
    assert!((m - 5.0).abs() < 4.0 * se, "mean jump count {m}");
    let p = ups as f64 / total as f64;
    let se = (0.4 * 0.6 / total as f64).sqrt();
    assert!((p - 0.4).abs() < 4.0 * se, "up fraction {p}");
}
