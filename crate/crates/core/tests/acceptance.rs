//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any
//! criterion fails.

use std::cell::OnceCell;
use std::process::ExitCode;
use std::time::Instant;

use avgcons::harness::{monte_carlo, ExperimentConfig, ScheduleSpec, Summary};
use avgcons::protocol::RbarProtocol;
use avgcons::quantization::quantize;
use avgcons::sampling::params_rbar;
use avgcons::{run_trial, verify, DynamicSchedule, ProtocolTag, Result, Simulation, TrialTrace};

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Result<Outcome> + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn verdict_line(s: &Summary, name: &str) -> (bool, String) {
    let v = &s.verdicts[name];
    (v.pass, format!("{name} {:.4} {} {:.4}", v.measured, v.comparison, v.threshold))
}

fn r_experiment(n: usize, trials: usize, schedule: ScheduleSpec, seed: u64) -> ExperimentConfig {
    let mut e = ExperimentConfig::new(ProtocolTag::R, n, 0.3, 0.2, schedule);
    e.trials = trials;
    e.seed = seed;
    e
}

/// Agreement on bit-identical, constant estimates from round n − 1 on.
fn r_time_bound() -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [4, 8, 16] {
        let exp = r_experiment(n, 100, ScheduleSpec::Csc, 101);
        let ell = exp.params()?.ell;
        let s = monte_carlo(&exp)?.summary;
        let (ok, line) = verdict_line(&s, "time_bound");
        pass &= ok;
        parts.push(format!("n={n} ell={ell} {line}"));
    }
    outcome(pass, parts.join("; "))
}

fn r_accuracy() -> Result<Outcome> {
    let s = monte_carlo(&r_experiment(8, 200, ScheduleSpec::Csc, 202))?.summary;
    let (ok, line) = verdict_line(&s, "accuracy");
    outcome(ok && s.verdicts["accuracy"].threshold <= 0.285, line)
}

fn min_of_exponentials() -> Result<Outcome> {
    let m = verify::min_of_exponentials(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.02, 0.05, 0.1], 100_000, 303)?;
    let err = m.max_survival_error();
    let mean = m.mean_relative_error();
    outcome(
        err <= 0.01 && mean <= 0.01,
        format!("max |empirical - e^(-15x)| = {err:.4} <= 0.01; mean off by {:.2}% <= 1%", 100.0 * mean),
    )
}

fn concentration() -> Result<Outcome> {
    let checks = verify::concentration_suite(
        &[(50, 0.1), (100, 0.2), (300, 0.1)],
        &[1.0, 3.0],
        &[None, Some(0.1)],
        10_000,
        3.0,
        404,
    )?;
    let passed = checks.iter().filter(|c| c.passed()).count();
    let worst = checks.iter().map(|c| c.frequency - c.bound - c.slack).fold(f64::NEG_INFINITY, f64::max);
    outcome(passed == checks.len(), format!("{passed}/{} checks, worst margin {worst:.4}", checks.len()))
}

/// The quantized protocol on CSC graphs; shared by two criteria.
fn rbar_experiment() -> Result<(ExperimentConfig, Summary)> {
    let n = 6;
    let mut exp = ExperimentConfig::new(ProtocolTag::Rbar, n, 0.4, 0.4, ScheduleSpec::Csc);
    exp.trials = 50;
    exp.seed = 505;
    let ell = exp.params()?.ell as u64;
    exp.t_max = Some(ell * (n as u64 + 1));
    let s = monte_carlo(&exp)?.summary;
    Ok((exp, s))
}

fn rbar_time_and_accuracy(exp: &ExperimentConfig, s: &Summary) -> Result<Outcome> {
    let p = exp.params()?;
    let (t_ok, t_line) = verdict_line(s, "time_bound");
    let (a_ok, a_line) = verdict_line(s, "accuracy");
    outcome(t_ok && a_ok, format!("ell={} beta={} {t_line}; {a_line}", p.ell, p.beta.unwrap_or(f64::NAN)))
}

fn rbar_levels(s: &Summary) -> Result<Outcome> {
    let (ok, line) = verdict_line(s, "quantization_levels");
    outcome(ok, format!("{line}; max distinct exponents {}", s.max_distinct_exponents))
}

fn rbard_experiment(trials: usize, s_max: u64, seed: u64) -> ExperimentConfig {
    let n = 8;
    let mut exp = ExperimentConfig::new(ProtocolTag::Rbard, n, 0.4, 0.3, ScheduleSpec::Csc);
    exp.big_n = Some(12);
    exp.trials = trials;
    exp.s_max = s_max;
    exp.seed = seed;
    exp.t_max = Some(2 * (s_max + 2 * n as u64));
    exp
}

fn rbard_decisions() -> Result<Outcome> {
    let exp = rbard_experiment(100, 5, 707);
    let ell = exp.params()?.ell;
    let s = monte_carlo(&exp)?.summary;
    let (d_ok, d_line) = verdict_line(&s, "decision");
    let (i_ok, i_line) = verdict_line(&s, "irrevocability");
    let last = s.decision_rounds.keys().max().copied().unwrap_or(0);
    outcome(d_ok && i_ok, format!("ell={ell} {d_line}; {i_line}; latest decision round {last}"))
}

fn counters(trace: &TrialTrace, check: impl Fn(u64, Option<u64>) -> bool) -> bool {
    (0..trace.n()).all(|u| trace.counters(u).all(|(t, c)| check(t, c)))
}

fn firing_counter() -> Result<Outcome> {
    let sync = rbard_experiment(20, 0, 808);
    let mut sync_ok = 0;
    for i in 0..sync.trials {
        let trace = run_trial(&sync.trial_config(i)?)?;
        sync_ok += counters(&trace, |t, c| c == Some(t)) as usize;
    }
    let staggered = rbard_experiment(20, 5, 809);
    let n = staggered.n as u64;
    let mut stag_ok = 0;
    for i in 0..staggered.trials {
        let trace = run_trial(&staggered.trial_config(i)?)?;
        stag_ok += counters(&trace, |t, c| t > staggered.s_max || c.unwrap_or(0) < n) as usize;
    }
    outcome(
        sync_ok == 20 && stag_ok == 20,
        format!("synchronous C(t) = t in {sync_ok}/20; staggered C(t) < n up to s_max in {stag_ok}/20"),
    )
}

fn graph_lemmas() -> Result<Outcome> {
    let products = verify::product_completeness(5, 500, 909)?;
    let speedup = verify::c_connected_speedup(6, &[1, 2, 3], 200, 910)?;
    outcome(
        products.passed() && speedup.passed(),
        format!(
            "{}/{} n-1 products complete; {}/{} ceil(n/c) products complete",
            products.cases - products.failures,
            products.cases,
            speedup.cases - speedup.failures,
            speedup.cases
        ),
    )
}

/// Under the blocking schedule the odd-indexed entries are only ever
/// exchanged in rounds where every agent hears itself alone.
fn blocking_adversary() -> Result<Outcome> {
    let (n, ell) = (3, 4);
    let params = params_rbar(0.4, 0.4, 0.0, 1.0)?.with_ell(ell)?;
    let beta = params.beta.expect("quantized parameters carry a ratio");
    let mut held = 0;
    let seeds = 10;
    for seed in 0..seeds {
        let schedule = DynamicSchedule::blocking_adversary(n, ell)?;
        let inputs = [0.1, 0.5, 0.9];
        let mut sim = Simulation::new(RbarProtocol::new(params.clone())?, &inputs, &[1; 3], schedule, seed, 0)?;
        let initial: Vec<_> = sim
            .initial_samples()
            .iter()
            .map(|s| {
                let xs = s.sigma.iter().map(|&v| quantize(v, beta)).collect::<Result<Vec<_>>>()?;
                let ys = s.nu.iter().map(|&v| quantize(v, beta)).collect::<Result<Vec<_>>>()?;
                Ok((xs, ys))
            })
            .collect::<Result<_>>()?;
        for _ in 0..50 * ell {
            sim.step()?;
        }
        let untouched = sim
            .states()
            .iter()
            .zip(&initial)
            .all(|(s, (xs, ys))| (0..ell).step_by(2).all(|i| s.xs[i] == xs[i] && s.ys[i] == ys[i]));
        held += untouched as u64;
    }
    outcome(held == seeds, format!("odd entries unchanged after {} rounds in {held}/{seeds} seeds", 50 * ell))
}

fn delayed_schedule() -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [4, 6] {
        let s = monte_carlo(&r_experiment(n, 50, ScheduleSpec::Delayed { delay: 3 }, 1111))?.summary;
        let (ok, line) = verdict_line(&s, "time_bound");
        pass &= ok;
        parts.push(format!("n={n} bound {} {line}", 3 * (n - 1)));
    }
    outcome(pass, parts.join("; "))
}

fn quantization_algebra() -> Result<Outcome> {
    let suites = verify::quantization_suites(100_000, 1212)?;
    let violations: usize = suites.iter().map(|s| s.failures).sum();
    let cases: usize = suites.iter().map(|s| s.cases).sum();
    outcome(violations == 0, format!("{violations} violations in {cases} cases over {} properties", suites.len()))
}

fn main() -> ExitCode {
    // cargo passes harness flags such as --list; only a full run is supported
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let rbar = OnceCell::new();
    let rbar = || rbar.get_or_init(rbar_experiment).as_ref().map_err(Clone::clone);
    let criteria: Vec<Criterion> = vec![
        ("R stationary agreement by round n-1", Box::new(r_time_bound)),
        ("R failure fraction within eta + 3 sigma", Box::new(r_accuracy)),
        ("minimum of exponentials is exponential", Box::new(min_of_exponentials)),
        ("concentration tails under analytic bound", Box::new(concentration)),
        (
            "Rbar agreement by round ell*n and accuracy",
            Box::new(|| rbar().and_then(|(e, s)| rbar_time_and_accuracy(e, s))),
        ),
        ("Rbar samples admissible and levels bounded", Box::new(|| rbar().and_then(|(_, s)| rbar_levels(s)))),
        ("RbarD decides correctly by s_max + 2n", Box::new(rbard_decisions)),
        ("firing counter properties", Box::new(firing_counter)),
        ("graph product lemmas", Box::new(graph_lemmas)),
        ("blocking adversary stalls odd entries", Box::new(blocking_adversary)),
        ("delay-3 schedule agreement by 3(n-1)", Box::new(delayed_schedule)),
        ("quantization algebra", Box::new(quantization_algebra)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !pass as usize;
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
