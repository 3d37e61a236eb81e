//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{extend_randomly, probe_times, random_path, Table, TICK};
use mpsim::config::RunConfig;
use mpsim::engine::simulate;
use mpsim::functionals::{age, drawdown_left, occupation_by_mode, occupation_time, transition_count, FunctionalTerm};
use mpsim::io::sha256_hex;
use mpsim::kernel::{canonical_partition, RateRow};
use mpsim::lab::{micro_order_study, run_convergence_study, StudyConfig};
use mpsim::noise::generate_tape;
use mpsim::scenarios::{build_insurance, build_reinforcement, build_reliability};
use mpsim::Mode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Verdict = (bool, String);

const CTMC: &str = r#"
[model]
lambda_per_time = 2.0
noise_dimension = 0
initial = { mode = 0, position = [0.0] }

[model.intensity]
kind = "direct"

[[model.intensity.entries]]
from = 0
to = 1
expr = { form = "affine", terms = [{ coef = 0.3, term = { kind = "constant" } }] }

[[model.intensity.entries]]
from = 1
to = 0
expr = { form = "affine", terms = [{ coef = 0.7, term = { kind = "constant" } }] }

[model.dynamics.default]

[run]
horizon_time = 1.0
level = 1
seed = 20240101
"#;

fn ctmc_oracle() -> Verdict {
    let cfg = RunConfig::parse(CTMC).unwrap();
    let model = cfg.model.build().unwrap();
    let paths = 100_000u64;
    let spec = model.tape_spec(1.0, 1);
    let hits: usize = (0..paths)
        .into_par_iter()
        .map(|i| {
            let tape = generate_tape(cfg.run.seed, i, &spec).unwrap();
            usize::from(simulate(&model, 1.0, 1, &tape).unwrap().path.current_mode() == 1)
        })
        .sum();
    let p = hits as f64 / paths as f64;
    let exact = 0.3 * (1.0 - (-1.0f64).exp());
    let se = (exact * (1.0 - exact) / paths as f64).sqrt();
    let z = (p - exact) / se;
    (z.abs() <= 3.0, format!("P(J_1=1)={p:.5} vs {exact:.5}, z={z:.2}"))
}

fn micro_order() -> Verdict {
    let levels: Vec<usize> = (4..=10).map(|k| 1 << k).collect();
    let r = micro_order_study(0.05, 0.2, 1.0, 1.0, &levels, 200, 7).unwrap();
    let ok = (-0.6..=-0.4).contains(&r.fit.slope) && r.fit.r_squared >= 0.95;
    (ok, format!("slope {:.4}, r^2 {:.4}", r.fit.slope, r.fit.r_squared))
}

fn insurance_study() -> mpsim::lab::ConvergenceReport {
    let model = build_insurance().model_spec().unwrap();
    let study = StudyConfig {
        horizon: 1.0,
        levels: (4..=9).map(|k| 1 << k).collect(),
        n_fine: 1 << 12,
        paths: 500,
        seed: 2024,
    };
    run_convergence_study(&model, &study).unwrap()
}

/// Same study where decoupling is frequent enough to give the trend test something to see.
fn long_horizon_study() -> mpsim::lab::ConvergenceReport {
    let model = build_insurance().model_spec().unwrap();
    let study = StudyConfig {
        horizon: 10.0,
        levels: (4..=9).map(|k| 1 << k).collect(),
        n_fine: 1 << 12,
        paths: 500,
        seed: 2024,
    };
    run_convergence_study(&model, &study).unwrap()
}

fn convergence(report: &mpsim::lab::ConvergenceReport) -> Verdict {
    let medians: Vec<String> = report
        .levels
        .iter()
        .map(|l| l.median_error.map_or("-".into(), |m| format!("{m:.3e}")))
        .collect();
    let freqs: Vec<String> = report.levels.iter().map(|l| format!("{:.3}", l.decoupling_frequency)).collect();
    let a = report.errors_strictly_decreasing();
    let b = report.trend.non_increasing();
    (
        a && b,
        format!(
            "(a) medians [{}] decreasing={a}; (b) freqs [{}] slope upper95 {:.4} non-increasing={b}",
            medians.join(", "),
            freqs.join(", "),
            report.trend.slope_upper
        ),
    )
}

fn coupling_invariant(report: &mpsim::lab::ConvergenceReport) -> Verdict {
    let v = report.coupling_violations();
    let pairs = report.config.paths * report.levels.len();
    (v == 0, format!("{v} violations over {pairs} coupled pairs"))
}

/// `H(a) = int_0^a min(2, 0.3 + 0.25 s) ds` by the trapezoid rule on a fine grid.
struct CumulativeHazard {
    h: f64,
    table: Vec<f64>,
}

impl CumulativeHazard {
    fn new(h: f64, up_to: f64) -> Self {
        let rate = |s: f64| (0.3 + 0.25 * s).min(2.0);
        let n = (up_to / h).ceil() as usize;
        let mut table = vec![0.0; n + 1];
        for k in 1..=n {
            let (a, b) = ((k - 1) as f64 * h, k as f64 * h);
            table[k] = table[k - 1] + 0.5 * h * (rate(a) + rate(b));
        }
        Self { h, table }
    }

    fn at(&self, a: f64) -> f64 {
        let x = a / self.h;
        let k = (x.floor() as usize).min(self.table.len() - 2);
        let w = x - k as f64;
        self.table[k] * (1.0 - w) + self.table[k + 1] * w
    }
}

fn sojourn_law() -> Verdict {
    let scenario = build_reliability();
    let model = scenario.model_spec().unwrap();
    let (horizon, last_start, wanted) = (60.0, 40.0, 10_000usize);
    let spec = model.tape_spec(horizon, 4);
    let mut sojourns = Vec::with_capacity(wanted);
    let mut index = 0u64;
    while sojourns.len() < wanted {
        let batch: Vec<Vec<f64>> = (index..index + 256)
            .into_par_iter()
            .map(|i| {
                let tape = generate_tape(31, i, &spec).unwrap();
                let path = simulate(&model, horizon, 4, &tape).unwrap().path;
                let ev = path.events();
                ev.windows(2)
                    .filter(|w| w[0].post_mode == 1 && w[0].time < last_start)
                    .map(|w| w[1].time - w[0].time)
                    .collect()
            })
            .collect();
        index += 256;
        sojourns.extend(batch.into_iter().flatten());
    }
    sojourns.truncate(wanted);
    let hazard = CumulativeHazard::new(1e-4, horizon);
    let d = mpsim::stats::ks_statistic(&sojourns, |a| 1.0 - (-hazard.at(a)).exp());
    let p = mpsim::stats::ks_p_value(sojourns.len(), d);
    (p > 0.01, format!("{} sojourns, KS D={d:.4}, p={p:.3}", sojourns.len()))
}

fn softmax_bound() -> Verdict {
    let model = build_reinforcement().model_spec().unwrap();
    let spec = model.tape_spec(20.0, 1);
    let (worst, evaluated, violations) = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let tape = generate_tape(5, i, &spec).unwrap();
            let out = simulate(&model, 20.0, 1, &tape).unwrap();
            let totals: Vec<f64> = out.audit.iter().map(|r| r.q_total()).collect();
            let worst = totals.iter().copied().fold(0.0, f64::max);
            (worst, totals.len(), totals.iter().filter(|&&q| q >= 2.0).count())
        })
        .reduce(|| (0.0, 0, 0), |a, b| (a.0.max(b.0), a.1 + b.1, a.2 + b.2));
    (
        violations == 0,
        format!("{evaluated} evaluated rows, max total {worst:?}, {violations} at or above 2.0"),
    )
}

fn ulp(x: f64) -> f64 {
    x.abs().next_up() - x.abs()
}

/// Enclosure of `a / b` for positive finite operands.
fn div_interval(a: (f64, f64), b: f64) -> (f64, f64) {
    ((a.0 / b).next_down(), (a.1 / b).next_up())
}

fn partition_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut violations = 0;
    let mut rows = 0;
    while rows < 10_000 {
        let k = rng.random_range(1..9);
        let lambda = 10f64.powf(rng.random_range(-3.0..3.0));
        let raw: Vec<f64> = (0..k)
            .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..1.0) })
            .collect();
        let fill = rng.random_range(0.0..=1.0);
        let total: f64 = raw.iter().sum();
        let rates: Vec<(Mode, f64)> = raw
            .iter()
            .enumerate()
            .map(|(i, &r)| ((i + 1) as Mode, if total > 0.0 { r / total * fill * lambda } else { 0.0 }))
            .collect();
        let Ok(row) = RateRow::new(0, rates.clone(), lambda) else {
            continue;
        };
        rows += 1;
        let part = canonical_partition(&row);
        let tol = 2.0 * ulp(lambda);
        for (cell, &(_, q)) in part.cells().iter().zip(&rates) {
            // length within 2 ulp of the rate
            if (cell.len() - q).abs() > tol {
                violations += 1;
                continue;
            }
            // thinning probability len/lambda encloses q/lambda up to the same 2 ulp
            let len = ((cell.hi - cell.lo).next_down().max(0.0), (cell.hi - cell.lo).next_up());
            let p = div_interval(len, lambda);
            let target = div_interval((q, q), lambda);
            let gap = (p.0 - target.1).max(target.0 - p.1).max(0.0);
            if gap > div_interval((tol, tol), lambda).1 {
                violations += 1;
            }
        }
        if part.cells().last().unwrap().hi != lambda || part.cells()[0].lo != 0.0 {
            violations += 1;
        }
    }
    (violations == 0, format!("{rows} rows, {violations} violations"))
}

fn functional_oracles() -> Verdict {
    let mut mismatches = 0usize;
    let mut checks = 0usize;
    let mut moved = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for seed in 0..100 {
        let p = random_path(seed);
        let tbl = Table::of(&p);
        let ts = probe_times(&p, seed);
        for &t in &ts {
            let mut cmp = |a: f64, b: f64| {
                checks += 1;
                if (a - b).abs() > 1e-12 {
                    mismatches += 1;
                }
            };
            for c in 0..p.dim() {
                cmp(occupation_time(&p, t, 0.5, 0.3, c, false).unwrap(), tbl.occupation(t, 0.5, 0.3, c, false));
                cmp(drawdown_left(&p, t, c).unwrap(), tbl.drawdown_left(t, c));
            }
            cmp(age(&p, t).unwrap(), tbl.age(t));
            for m in 0..3 {
                cmp(occupation_by_mode(&p, t, m).unwrap(), tbl.loc(t, m));
                for n in (0..3).filter(|&n| n != m) {
                    cmp(transition_count(&p, t, m, n).unwrap() as f64, tbl.cnt(t, m, n) as f64);
                }
            }
        }
        let terms = [
            FunctionalTerm::Occupation {
                barrier: 0.5,
                window_time: 0.3,
                component: 0,
                prehistory: false,
            },
            FunctionalTerm::Drawdown { component: 0 },
            FunctionalTerm::Age,
            FunctionalTerm::Loc { mode: 1 },
            FunctionalTerm::Cnt { from: 0, to: 1 },
        ];
        for &t in ts.iter().step_by(5) {
            let mut q = p.truncated(t).unwrap();
            if t > 0.0 && rng.random_bool(0.5) {
                let next = (q.current_mode() + 1) % 3;
                q.push_event(next).unwrap();
            }
            extend_randomly(&mut rng, &mut q, (t / TICK).floor() as u32 + 100, 3);
            for term in &terms {
                if term.evaluate(&p, t).unwrap().to_bits() != term.evaluate(&q, t).unwrap().to_bits() {
                    moved += 1;
                }
            }
        }
    }
    (
        mismatches == 0 && moved == 0,
        format!("{checks} oracle checks, {mismatches} mismatches; {moved} future-mutation failures"),
    )
}

fn hashes(dir: &Path, files: &[&str]) -> Vec<String> {
    files.iter().map(|f| sha256_hex(&std::fs::read(dir.join(f)).unwrap())).collect()
}

fn determinism() -> Verdict {
    let tmp = tempfile::TempDir::new().unwrap();
    let bin = env!("CARGO_BIN_EXE_mpsim");
    let run = |args: &[&str]| {
        let st = Command::new(bin).args(args).output().unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    };
    let d = |name: &str| tmp.path().join(name);
    let ds = |name: &str| d(name).to_str().unwrap().to_owned();
    let mut same = true;
    for rep in ["a", "b"] {
        run(&["scenario", "levy_financial", "--seed", "3", "--n", "512", "--outdir", &ds(&format!("scen_{rep}"))]);
    }
    let csvs = ["path.csv", "audit.csv", "indicators.csv"];
    same &= hashes(&d("scen_a"), &csvs) == hashes(&d("scen_b"), &csvs);
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/two_state.toml");
    for rep in ["a", "b"] {
        run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", &ds(&format!("sim_{rep}"))]);
    }
    same &= hashes(&d("sim_a"), &csvs[..2]) == hashes(&d("sim_b"), &csvs[..2]);
    for threads in ["1", "3", "8"] {
        run(&[
            "converge", "--scenario", "insurance", "--levels", "8,16,32,64", "--n-fine", "256", "--paths", "96",
            "--horizon", "1", "--threads", threads, "--outdir", &ds(&format!("conv_{threads}")),
        ]);
    }
    let r = ["report.csv", "summary.txt"];
    same &= hashes(&d("conv_1"), &r) == hashes(&d("conv_3"), &r);
    same &= hashes(&d("conv_1"), &r) == hashes(&d("conv_8"), &r);
    (same, "scenario and simulate reruns, converge at 1/3/8 threads".into())
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &dyn Fn() -> Verdict| {
        let start = Instant::now();
        let (ok, detail) = f();
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {n} [{name}]: {} ({detail}; {:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };
    report(1, "ctmc oracle", &ctmc_oracle);
    report(2, "micro-solver strong order", &micro_order);
    let start = Instant::now();
    let study = insurance_study();
    println!("(insurance coupled study: {:.1}s)", start.elapsed().as_secs_f64());
    report(3, "coupled convergence", &|| convergence(&study));
    report(4, "disagreement/decoupling invariant", &|| coupling_invariant(&study));
    let long = long_horizon_study();
    println!(
        "(insurance over horizon 10, informational: decoupled {:?} of {} paths, slope upper95 {:.4}, {} invariant violations)",
        long.levels.iter().map(|l| l.decoupled).collect::<Vec<_>>(),
        long.config.paths,
        long.trend.slope_upper,
        long.coupling_violations()
    );
    report(5, "semi-Markov sojourn law", &sojourn_law);
    report(6, "softmax bound", &softmax_bound);
    report(7, "partition exactness", &partition_exactness);
    report(8, "functional oracles", &functional_oracles);
    report(9, "determinism", &determinism);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
