//! Acceptance checks. Prints one PASS/FAIL line per criterion (with indented
//! detail lines below it) and exits non-zero if any criterion fails.
//!
//!     cargo test -p driftmle-cli --test acceptance              default tier
//!     cargo test -p driftmle-cli --test acceptance -- --full    adds the n = 5000 table cells
//!
//! `DRIFTMLE_FULL=1` selects the full tier too (useful with `--workspace`).
//! All seeds below were fixed before the first run and are never tuned.

use std::f64::consts::PI;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use driftmle::mc::{ergodic_average, ks_critical_5pct, ks_statistic, run_experiment_with_info};
use driftmle::model::{AssumptionId, CheckStatus};
use driftmle::quad::integrate_real_line;
use driftmle::tables::{self, CASES};
use driftmle::{
    check_assumptions, derive_seed, invariant_law, parse, DiffusionModel, Execution, ExperimentConfig, Method,
    ProbeSpec,
};

struct Verdict {
    pass: bool,
    details: Vec<String>,
}

type Criterion = fn(bool) -> Verdict;

fn main() {
    let full = std::env::args().any(|a| a == "--full") || std::env::var("DRIFTMLE_FULL").is_ok_and(|v| v == "1");
    let criteria: [(&str, Criterion); 9] = [
        ("table reproduction", table_reproduction),
        ("asymptotic normality of standardized errors", asymptotic_normality),
        ("std decay rate", rate),
        ("information consistency", information),
        ("D_n diagnostic", dn_diagnostic),
        ("quadrature oracles", quadrature),
        ("parser and derivative corpus", parser_corpus),
        ("determinism across thread counts", determinism),
        ("assumption validator", validator),
    ];
    println!("acceptance tier: {}", if full { "full" } else { "default" });
    let mut failures = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let verdict = panic::catch_unwind(AssertUnwindSafe(|| check(full))).unwrap_or_else(|e| Verdict {
            pass: false,
            details: vec![format!(
                "panicked: {}",
                e.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default()
            )],
        });
        failures += usize::from(!verdict.pass);
        println!(
            "{} criterion {}: {name} ({:.1}s)",
            if verdict.pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
        for d in verdict.details {
            println!("    {d}");
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}

fn experiment(
    model: DiffusionModel,
    ns: Vec<u64>,
    alphas: Vec<f64>,
    replicates: u32,
    master_seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        label: "acceptance".into(),
        model,
        alphas,
        ns,
        replicates,
        method: Method::Milstein,
        master_seed,
        substeps: 1,
    }
}

fn ou() -> DiffusionModel {
    DiffusionModel::parse("-x", "1", 2.0, 1.0).unwrap()
}

fn table_reproduction(full: bool) -> Verdict {
    let mut grids = vec![(vec![1000], vec![0.5, 0.9], 1_000)];
    if full {
        grids.push((vec![5000], vec![0.9], 1_100));
    }
    let mut pass = true;
    let mut details = Vec::new();
    for case in &CASES {
        for (ns, alphas, seed) in &grids {
            let cfg = experiment(
                case.model(),
                ns.clone(),
                alphas.clone(),
                tables::REPLICATES,
                seed + case.id as u64,
            );
            let out = run_experiment_with_info(&cfg, None, Execution::Parallel).unwrap();
            for c in &out.cells {
                let (pm, ps) = case.cell(c.n, c.alpha).unwrap();
                let band = (0.35 * ps).max(4.0 * ps / (tables::REPLICATES as f64).sqrt());
                let ratio = c.std_theta_hat / ps;
                let ok = (c.mean_theta_hat - pm).abs() <= band && (0.6..=1.6).contains(&ratio) && c.failures == 0;
                pass &= ok;
                details.push(format!(
                    "{} case {} (n={}, alpha={}): mean {:.5} vs {pm} (band {band:.5}), std {:.5} = {ratio:.3} x {ps}",
                    if ok { "ok  " } else { "MISS" },
                    case.id,
                    c.n,
                    c.alpha,
                    c.mean_theta_hat,
                    c.std_theta_hat
                ));
            }
        }
    }
    if !full {
        details.push("(n=5000, alpha=0.9) cells run with --full".into());
    }
    Verdict { pass, details }
}

fn asymptotic_normality(_: bool) -> Verdict {
    let (n, alpha, replicates, info) = (1000, 0.8, 500, 0.25);
    let critical = ks_critical_5pct(replicates as usize);
    let mut rejections = 0;
    let mut stats = Vec::new();
    for meta in 0..10 {
        let cfg = experiment(ou(), vec![n], vec![alpha], replicates, 2_000 + meta);
        let out = run_experiment_with_info(&cfg, Some(info), Execution::Parallel).unwrap();
        // recompute from the raw estimates rather than trusting the summary
        let errors: Vec<f64> = out
            .replicates
            .iter()
            .map(|r| (n as f64).powf(alpha / 2.0) * (r.theta_hat.unwrap() - 2.0) * info.sqrt())
            .collect();
        let d = ks_statistic(&errors);
        assert_eq!(Some(d), out.cells[0].ks_statistic);
        rejections += usize::from(d >= critical);
        stats.push(format!("{d:.4}"));
    }
    Verdict {
        pass: rejections <= 1,
        details: vec![format!(
            "KS D over 10 meta-runs: [{}], critical {critical:.4}, rejections {rejections} (allowed 1)",
            stats.join(", ")
        )],
    }
}

fn rate(_: bool) -> Verdict {
    let alpha = 0.9;
    let ns = vec![250, 1000, 4000];
    let cfg = experiment(ou(), ns.clone(), vec![alpha], 500, 3_000);
    let out = run_experiment_with_info(&cfg, Some(0.25), Execution::Parallel).unwrap();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = out.cells.iter().map(|c| c.std_theta_hat.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    Verdict {
        pass: (slope + alpha / 2.0).abs() <= 0.15,
        details: vec![format!(
            "std at n = {ns:?}: {:?}; slope {slope:.4}, target {} +/- 0.15",
            out.cells
                .iter()
                .map(|c| format!("{:.5}", c.std_theta_hat))
                .collect::<Vec<_>>(),
            -alpha / 2.0
        )],
    }
}

fn information(_: bool) -> Verdict {
    let mut pass = true;
    let mut details = Vec::new();
    let ou_info = invariant_law(&ou()).unwrap().info;
    let ok = (ou_info - 0.25).abs() < 1e-6;
    pass &= ok;
    details.push(format!(
        "{} OU: quadrature info {ou_info:.12} vs closed form 0.25",
        if ok { "ok  " } else { "MISS" }
    ));
    for case in &CASES {
        let model = case.model();
        let info = invariant_law(&model).unwrap().info;
        let avg = ergodic_average(
            &model,
            |x| model.d(x).unwrap(),
            1e4,
            1e-3,
            Method::Milstein,
            4_000 + case.id as u64,
        )
        .unwrap();
        let rel = (avg / info - 1.0).abs();
        let ok = rel < 0.03;
        pass &= ok;
        details.push(format!(
            "{} case {}: quadrature {info:.6}, ergodic average {avg:.6}, relative gap {rel:.4}",
            if ok { "ok  " } else { "MISS" },
            case.id
        ));
    }
    Verdict { pass, details }
}

fn dn_diagnostic(_: bool) -> Verdict {
    let cfg = experiment(ou(), vec![2000], vec![0.9], tables::REPLICATES, 5_000);
    let out = run_experiment_with_info(&cfg, Some(0.25), Execution::Parallel).unwrap();
    let mean_dn = out.cells[0].mean_dn;
    let rel = (mean_dn / 0.25 - 1.0).abs();
    Verdict {
        pass: rel < 0.05,
        details: vec![format!(
            "mean D_n {mean_dn:.6} over {} paths, relative gap {rel:.4}",
            tables::REPLICATES
        )],
    }
}

fn quadrature(_: bool) -> Verdict {
    let mut pass = true;
    let mut details = Vec::new();
    for (name, f, exact) in [
        ("exp(-x^2)", (|x: f64| (-x * x).exp()) as fn(f64) -> f64, PI.sqrt()),
        ("exp(-2x^2)", |x: f64| (-2.0 * x * x).exp(), (PI / 2.0).sqrt()),
    ] {
        let v = integrate_real_line(f, 1e-10, 1e-12).unwrap().value;
        let ok = (v - exact).abs() <= 1e-8;
        pass &= ok;
        details.push(format!(
            "{} integral of {name} over R: {v:.15} vs {exact:.15}",
            if ok { "ok  " } else { "MISS" }
        ));
    }
    for case in &CASES {
        let mass = invariant_law(&case.model()).unwrap().total_mass().unwrap();
        let ok = (mass - 1.0).abs() <= 1e-6;
        pass &= ok;
        details.push(format!(
            "{} case {}: integral of the invariant density {mass:.12}",
            if ok { "ok  " } else { "MISS" },
            case.id
        ));
    }
    Verdict { pass, details }
}

const CORPUS: &str = include_str!("../../core/tests/data/expr_corpus.txt");

/// Uniform draw in `[lo, hi]` from a counter-based stream.
fn uniform(seed: u64, i: u64, lo: f64, hi: f64) -> f64 {
    let u = (derive_seed(seed, i) >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * u
}

fn parser_corpus(_: bool) -> Verdict {
    let mut expressions = 0;
    let mut problems = Vec::new();
    for (line_no, line) in CORPUS.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        expressions += 1;
        let parts: Vec<&str> = line.split('|').map(str::trim).collect();
        let (src, lo, hi) = (
            parts[0],
            parts[1].parse::<f64>().unwrap(),
            parts[2].parse::<f64>().unwrap(),
        );
        let e = match parse(src) {
            Ok(e) => e,
            Err(err) => {
                problems.push(format!("{src}: {err}"));
                continue;
            }
        };
        let back = parse(&e.to_string());
        let Ok(back) = back else {
            problems.push(format!("{src}: rendering `{e}` does not parse"));
            continue;
        };
        for i in 0..100 {
            let x = uniform(7_000 + line_no as u64, i, -10.0, 10.0);
            let same = match (e.evaluate(x), back.evaluate(x)) {
                (Ok(u), Ok(v)) => u.to_bits() == v.to_bits(),
                (Err(_), Err(_)) => true,
                _ => false,
            };
            if !same {
                problems.push(format!("{src}: round trip differs at x = {x}"));
                break;
            }
        }
        let de = e.differentiate();
        for i in 0..50 {
            let x = uniform(7_500 + line_no as u64, i, lo, hi);
            let h = 1e-6;
            let fd = (e.evaluate(x + h).unwrap() - e.evaluate(x - h).unwrap()) / (2.0 * h);
            match de.evaluate(x) {
                Ok(d) if (d - fd).abs() <= 1e-5 * d.abs().max(1.0) => {}
                other => {
                    problems.push(format!(
                        "{src}: derivative {other:?} vs finite difference {fd} at x = {x}"
                    ));
                    break;
                }
            }
        }
    }
    let mut details = vec![format!("{expressions} expressions, {} problems", problems.len())];
    details.extend(problems.iter().cloned());
    Verdict {
        pass: problems.is_empty(),
        details,
    }
}

fn determinism(_: bool) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
      "model": {"a": "1-x", "b": "2+sin(x)", "theta": 2, "x0": 1},
      "scheme": {"substeps": 1, "method": "milstein"},
      "experiment": {"ns": [50, 200], "alphas": [0.5, 0.9], "replicates": 40, "master_seed": 8000},
      "io": {"out_dir": "out", "formats": ["csv", "json"]}
    }"#;
    fs::write(dir.path().join("config.json"), config).unwrap();
    let mut runs = Vec::new();
    for threads in ["1", "4", "16"] {
        let status = Command::new(env!("CARGO_BIN_EXE_driftmle"))
            .args(["experiment", "--config", "config.json", "--threads", threads])
            .current_dir(dir.path())
            .output()
            .unwrap()
            .status;
        assert!(status.success(), "experiment --threads {threads} exited with {status}");
        runs.push((
            fs::read(dir.path().join("out/replicates.csv")).unwrap(),
            fs::read(dir.path().join("out/summary.json")).unwrap(),
        ));
    }
    let identical = runs.iter().all(|r| *r == runs[0]);
    Verdict {
        pass: identical,
        details: vec![format!(
            "replicates.csv ({} bytes) and summary.json ({} bytes) {} across --threads 1/4/16",
            runs[0].0.len(),
            runs[0].1.len(),
            if identical { "identical" } else { "DIFFER" }
        )],
    }
}

fn validator(_: bool) -> Verdict {
    use AssumptionId::*;
    use CheckStatus::{Fail, Inconclusive, Pass};
    // Closed forms: OU satisfies everything. a = 0 has Phi(x) = x (A2 holds) but
    // G = inf, no drift and c = 0. a = 1, b = 1 has Phi(+inf) = 1/(2 theta) finite,
    // G = inf and c sgn(x) -> 1. Without an invariant law A5 cannot be decided.
    let expectations = [
        ("OU a=-x b=1", "-x", [Pass, Pass, Pass, Pass, Pass, Pass, Pass]),
        ("a=0 b=1", "0", [Pass, Pass, Fail, Pass, Inconclusive, Fail, Fail]),
        ("a=1 b=1", "1", [Pass, Fail, Fail, Pass, Inconclusive, Pass, Fail]),
    ];
    let ids = [A1, A2, A3, A4, A5, A6, C7];
    let mut pass = true;
    let mut details = Vec::new();
    for (name, a, expected) in expectations {
        let model = DiffusionModel::parse(a, "1", 2.0, 0.0).unwrap();
        let report = check_assumptions(&model, ProbeSpec::default());
        let got: Vec<CheckStatus> = ids.iter().map(|&id| report.status(id)).collect();
        let ok = got == expected;
        pass &= ok;
        let shown: Vec<String> = ids.iter().zip(&got).map(|(id, s)| format!("{id}={s:?}")).collect();
        details.push(format!(
            "{} {name}: {}",
            if ok { "ok  " } else { "MISS" },
            shown.join(" ")
        ));
    }
    Verdict { pass, details }
}
