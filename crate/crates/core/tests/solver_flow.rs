use smoothflow::flow::{integrate_rk45, write_flow_csv};
use smoothflow::harness::{generate_problem, GeneratedProblem, ProblemConfig, Smoothing};
use smoothflow::schedule::{MuDesign, Schedule};
use smoothflow::solver::{run_sgm, SgmOptions, TerminationStatus};
use smoothflow::Error;

fn problem() -> GeneratedProblem {
    generate_problem(&ProblemConfig { n_x: 6, n_a: 10, n_c: 15, rng_seed: 5 }, Smoothing::Huber).unwrap()
}

#[test]
fn gradient_budget_caps_the_run() {
    let g = problem();
    let opts = SgmOptions { grad_eval_budget: Some(25), ..SgmOptions::with_steps(1000) };
    let tr = run_sgm(&g.problem, &Schedule::PowerDecay { mu0: 1.0, gamma: 0.5 }, &[0.0; 6], &opts).unwrap();
    assert_eq!(tr.grad_evals, 25);
    assert_eq!(tr.status, TerminationStatus::BudgetExhausted);
}

#[test]
fn stride_thins_records_but_keeps_the_last() {
    let g = problem();
    let opts = SgmOptions { stride: 10, ..SgmOptions::with_steps(95) };
    let tr = run_sgm(&g.problem, &Schedule::Constant { mu0: 0.1 }, &[1.0; 6], &opts).unwrap();
    assert_eq!(tr.last().k, 95);
    assert!(tr.records.iter().rev().skip(1).all(|r| r.k % 10 == 0));
}

#[test]
fn bound_holds_on_huber_problem() {
    let g = problem();
    let tr = run_sgm(&g.problem, &Schedule::PowerDecay { mu0: 2.0, gamma: 1.0 }, &[3.0; 6], &SgmOptions::with_steps(2000))
        .unwrap();
    for r in tr.records.iter().skip(1) {
        let b = r.bound.unwrap();
        assert!(r.f_true <= b + 1e-9 * (1.0 + b), "k={} {} > {}", r.k, r.f_true, b);
    }
}

#[test]
fn rk45_rejects_interval_where_mu_vanishes() {
    let g = problem();
    let design = MuDesign::Linear { mu0: 1.0, rate: 1.0, t0: 1.0 };
    let err = integrate_rk45(&g.problem, &design, &[0.0; 6], 1.0, 2.5, 1e-6, 1e-9).unwrap_err();
    assert!(matches!(err, Error::IllPosedInterval { .. }), "{err:?}");
}

#[test]
fn rk45_samples_are_ordered_and_serialise() {
    let g = problem();
    let design = MuDesign::Reciprocal { mu0: 1.0, power: 1.0, t0: 1.0 };
    let run = integrate_rk45(&g.problem, &design, &[0.0; 6], 1.0, 1.5, 1e-5, 1e-8).unwrap();
    assert!(run.samples.windows(2).all(|w| w[0].t < w[1].t && w[0].grad_evals < w[1].grad_evals));
    assert_eq!(run.samples.last().unwrap().t, 1.5);
    let mut buf = Vec::new();
    write_flow_csv(&run.samples, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,mu,f_true,lyapunov_v,bound_ct,grad_evals\n"));
    assert_eq!(text.lines().count(), run.samples.len() + 1);
}
