//! Acceptance criteria. Runs as a plain binary so every criterion prints its
//! own PASS/FAIL line; exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use srdsa::cli::validate::{fixed_point, gap_bound, nash_oracle, potential_oracle, stationary, SuiteReport};
use srdsa::cli::{parse_config, run_to_csv};
use srdsa::engine::{run_experiment, Policy, PointSummary, SimConfig, Sweep, SweepAxis};

struct Verdict {
    passed: bool,
    detail: String,
}

fn suite(report: SuiteReport) -> Verdict {
    let worst = report
        .lines
        .iter()
        .find(|l| l.starts_with("FAIL"))
        .or(report.lines.last())
        .cloned()
        .unwrap_or_default();
    Verdict {
        passed: report.ok(),
        detail: format!("{} passed, {} failed; {worst}", report.passed, report.failed),
    }
}

fn reference(policy: Policy, replications: usize, horizon: usize) -> SimConfig {
    let mut c = SimConfig::reference(policy);
    c.replications = replications;
    c.horizon_slots = horizon;
    c
}

fn iterations(point: &PointSummary) -> Vec<usize> {
    point
        .replications
        .iter()
        .flat_map(|r| r.iterations.iter().copied())
        .collect()
}

fn iteration_scaling() -> Verdict {
    let base = reference(Policy::Strong, 50, 200);
    let sweep = Sweep {
        axis: SweepAxis::NUsers,
        values: vec![10.0, 20.0, 40.0],
    };
    let points = run_experiment(&base, &[Policy::Strong], Some(&sweep)).expect("runs");
    let xs: Vec<f64> = sweep.values.clone();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_iterations.expect("strong")).collect();
    let below = xs.iter().zip(&ys).all(|(n, y)| *y < 2.0 * n);
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    Verdict {
        passed: below && r2 >= 0.95,
        detail: format!(
            "mean iterations N=10: {:.2}, N=20: {:.2}, N=40: {:.2} (limits 20, 40, 80); linear fit R^2 = {r2:.4} (need >= 0.95)",
            ys[0], ys[1], ys[2]
        ),
    }
}

fn convergence_speed() -> Verdict {
    let base = reference(Policy::Strong, 20, 1000);
    let points = run_experiment(&base, &[Policy::Strong], None).expect("runs");
    let all = iterations(&points[0]);
    let within = all.iter().filter(|&&i| i <= 30).count() as f64 / all.len() as f64;
    Verdict {
        passed: within >= 0.9,
        detail: format!(
            "{:.2}% of {} slots reach equilibrium within 30 iterations (need >= 90%)",
            100.0 * within,
            all.len()
        ),
    }
}

/// `ys` nondecreasing up to one standard error (the larger of the two points').
fn nondecreasing(points: &[&PointSummary]) -> bool {
    points.windows(2).all(|w| {
        w[1].mean_throughput >= w[0].mean_throughput - w[0].std_error.max(w[1].std_error)
    })
}

fn fmt_points(points: &[&PointSummary]) -> String {
    points
        .iter()
        .map(|p| format!("{:.1}+/-{:.1}", p.mean_throughput, p.std_error))
        .collect::<Vec<_>>()
        .join(", ")
}

const P_LINKS: [f64; 4] = [0.05, 0.2, 0.5, 1.0];

fn social_density(points: &[PointSummary]) -> Verdict {
    let pick = |policy: Policy| -> Vec<&PointSummary> {
        points.iter().filter(|p| p.policy == policy).collect()
    };
    let (strong, weak) = (pick(Policy::Strong), pick(Policy::Weak));
    let trend = nondecreasing(&strong) && nondecreasing(&weak);
    let shortfalls: Vec<f64> = strong
        .iter()
        .zip(&weak)
        .map(|(s, w)| 1.0 - w.mean_throughput / s.mean_throughput)
        .collect();
    let ordered = shortfalls.iter().all(|&x| x >= 0.0);
    let close = shortfalls.iter().all(|&x| x <= 0.20);
    Verdict {
        passed: trend && ordered && close,
        detail: format!(
            "P_L {P_LINKS:?}: strong [{}], weak [{}]; trend {}; weak shortfall [{}] (need <= 20%)",
            fmt_points(&strong),
            fmt_points(&weak),
            if trend { "nondecreasing" } else { "VIOLATED" },
            shortfalls
                .iter()
                .map(|x| format!("{:.1}%", 100.0 * x))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn interference_range() -> Verdict {
    let mut base = reference(Policy::Strong, 20, 5000);
    base.n_users = 60;
    let sweep = Sweep {
        axis: SweepAxis::Delta,
        values: vec![100.0, 200.0, 300.0, 400.0],
    };
    let points = run_experiment(&base, &[Policy::Strong, Policy::Weak], Some(&sweep)).expect("runs");
    let mut passed = true;
    let mut parts = Vec::new();
    for policy in [Policy::Strong, Policy::Weak] {
        let ps: Vec<&PointSummary> = points.iter().filter(|p| p.policy == policy).collect();
        let falling = ps.windows(2).all(|w| {
            w[1].mean_throughput <= w[0].mean_throughput + w[0].std_error.max(w[1].std_error)
        });
        let first = ps[0].mean_throughput - ps[1].mean_throughput;
        let last = ps[2].mean_throughput - ps[3].mean_throughput;
        passed &= falling && last < first;
        parts.push(format!(
            "{}: [{}], 100->200 drop {first:.1}, 300->400 drop {last:.1}",
            policy.name(),
            fmt_points(&ps)
        ));
    }
    Verdict {
        passed,
        detail: parts.join("; "),
    }
}

fn baseline_ordering(points: &[PointSummary]) -> Verdict {
    let mut passed = true;
    let mut parts = Vec::new();
    for &pl in &P_LINKS[1..] {
        let at = |policy: Policy| {
            points
                .iter()
                .find(|p| p.policy == policy && p.axis_value == Some(pl))
                .expect("point present")
                .mean_throughput
        };
        let mut base = reference(Policy::StaticRec, 20, 5000);
        base.social = srdsa::engine::SocialGraphSpec::ErdosRenyi { p_link: pl };
        let grid = Sweep {
            axis: SweepAxis::PRec,
            values: srdsa::cli::p_rec_grid(),
        };
        let statics = run_experiment(&base, &[Policy::StaticRec], Some(&grid)).expect("runs");
        let best = statics
            .iter()
            .max_by(|a, b| a.mean_throughput.total_cmp(&b.mean_throughput))
            .expect("grid");
        let (s, w, b) = (at(Policy::Strong), at(Policy::Weak), at(Policy::Belief));
        let ok = s >= 1.25 * b && w >= 1.25 * b && s > best.mean_throughput && w > best.mean_throughput;
        passed &= ok;
        parts.push(format!(
            "P_L={pl}: strong {s:.1} (+{:.0}%), weak {w:.1} (+{:.0}%) over belief {b:.1}; best static {:.1} at p_rec={}",
            100.0 * (s / b - 1.0),
            100.0 * (w / b - 1.0),
            best.mean_throughput,
            best.axis_value.unwrap()
        ));
    }
    Verdict {
        passed,
        detail: parts.join("; "),
    }
}

fn determinism() -> Verdict {
    let source = r#"
[channels]
count = 3
lambda = [0.2, 0.3, 0.1]
mu = 0.2

[users]
count = 8

[topology]
delta = 150.0
p_link = 0.3

[policy]
policies = ["strong", "weak", "static-rec", "belief"]

[run]
experiment_id = "determinism"
horizon_slots = 400
replications = 3
seed = 99
sweep = { delta = [100, 200] }
"#;
    let spec = parse_config(source, None).expect("valid");
    std::env::set_var(srdsa::engine::WORKERS_ENV, "1");
    let a = run_to_csv(&spec).expect("runs").0;
    std::env::set_var(srdsa::engine::WORKERS_ENV, "3");
    let b = run_to_csv(&spec).expect("runs").0;
    std::env::remove_var(srdsa::engine::WORKERS_ENV);
    let c = run_to_csv(&spec).expect("runs").0;
    Verdict {
        passed: a == b && b == c,
        detail: format!(
            "three runs ({} bytes, {} rows) with 1, 3 and default workers are {}",
            a.len(),
            a.lines().count() - 1,
            if a == b && b == c { "byte-identical" } else { "DIFFERENT" }
        ),
    }
}

fn main() {
    // `cargo test` passes harness flags such as `--list`; honour listing so
    // test discovery tools do not run the whole suite.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let density_points = std::cell::OnceCell::new();
    let density = || -> &Vec<PointSummary> {
        density_points.get_or_init(|| {
            let base = reference(Policy::Strong, 20, 5000);
            let sweep = Sweep {
                axis: SweepAxis::PLink,
                values: P_LINKS.to_vec(),
            };
            run_experiment(&base, &[Policy::Strong, Policy::Weak, Policy::Belief], Some(&sweep))
                .expect("runs")
        })
    };

    type Check<'a> = (&'a str, u64, Box<dyn FnOnce() -> Verdict + 'a>);
    let checks: Vec<Check> = vec![
        ("1 potential-game oracle", 60, Box::new(|| suite(potential_oracle(500, 1)))),
        ("2 nash oracle", 60, Box::new(|| suite(nash_oracle(500, 2)))),
        ("3 iteration scaling", 300, Box::new(iteration_scaling)),
        ("4 convergence speed", 120, Box::new(convergence_speed)),
        ("5 channel ergodicity", 60, Box::new(|| suite(stationary(1_000_000, 5)))),
        ("6 fixed point", 300, Box::new(|| suite(fixed_point(12, 100_000, 200_000, 6)))),
        ("7 gap bound", 300, Box::new(|| suite(gap_bound(12, 100_000, 200_000, 7)))),
        ("8 social density trend", 900, Box::new(|| social_density(density()))),
        ("9 interference range trend", 900, Box::new(interference_range)),
        ("10 baseline ordering", 900, Box::new(|| baseline_ordering(density()))),
        ("11 determinism", 60, Box::new(determinism)),
    ];
    let mut failures = 0;
    for (name, budget, check) in checks {
        let start = Instant::now();
        let v = check();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(budget);
        let passed = v.passed && in_time;
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {name}: {} ({:.1}s of {budget}s) {}",
            if passed { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
