use cubicqn::dataio::synth_dataset;
use cubicqn::oracle::{CountingOracle, LogisticProblem, Objective};
use cubicqn::solvers::{
    adaptive_accelerated_crn, adaptive_condition_holds, adaptive_inexact_crn, alt_adaptive_cubic, classical_lbfgs,
    classical_lsr1, damped_newton, exact_crn, gradient_descent, HessianPolicy, SolverConfig, SolverTrace, StopCriteria,
};

fn problem(separation: f64) -> LogisticProblem {
    synth_dataset(200, 20, 11, separation).unwrap().to_problem(0.0).unwrap()
}

fn config(p: &LogisticProblem, policy: HessianPolicy, iters: usize) -> SolverConfig {
    let mut cfg = SolverConfig::for_problem(p, policy).unwrap();
    cfg.stop.max_iters = iters;
    cfg
}

fn values(t: &SolverTrace) -> Vec<f64> {
    t.records.iter().map(|r| r.f).collect()
}

#[test]
fn monotone_methods_never_increase_f() {
    let p = problem(f64::INFINITY);
    let x0 = vec![1.0; 20];
    for policy in [
        HessianPolicy::LbfgsHistory,
        HessianPolicy::LbfgsHistoryDamped,
        HessianPolicy::Lsr1History,
        HessianPolicy::BroydenSampling { upsilon: 0.5 },
        HessianPolicy::Combined { upsilon: 1.0, samples: 2 },
    ] {
        let cfg = config(&p, policy, 100);
        for run in [adaptive_inexact_crn, alt_adaptive_cubic, exact_crn] {
            let mut o = CountingOracle::new(&p);
            let trace = run(&mut o, &cfg, &x0).unwrap();
            assert_eq!(trace.iterations(), 100, "{policy:?} {}", trace.method);
            let f = values(&trace);
            assert!(f.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{policy:?} {}", trace.method);
        }
    }
}

#[test]
fn certificates_replay_on_noisy_data() {
    let p = problem(2.0);
    let x0 = vec![1.0; 20];
    for policy in [HessianPolicy::LbfgsHistory, HessianPolicy::BroydenSampling { upsilon: 1.0 }] {
        let cfg = config(&p, policy, 150);
        for run in [adaptive_inexact_crn, adaptive_accelerated_crn] {
            let mut o = CountingOracle::new(&p);
            let trace = run(&mut o, &cfg, &x0).unwrap();
            assert_eq!(trace.certificates.len(), trace.iterations());
            for c in &trace.certificates {
                let g = p.gradient(&c.point).unwrap();
                assert!(adaptive_condition_holds(&g, &c.reference, &c.point, c.delta, cfg.cubic_weight));
            }
            assert!(trace.final_f() < values(&trace)[0]);
        }
    }
}

#[test]
fn sampled_run_cost_is_exact() {
    let p = problem(2.0);
    let mut cfg = config(&p, HessianPolicy::BroydenSampling { upsilon: 1.0 }, 40);
    cfg.memory = 5;
    let mut o = CountingOracle::new(&p);
    let trace = adaptive_inexact_crn(&mut o, &cfg, &[1.0; 20]).unwrap();
    let t = trace.iterations() as u64;
    let repeats = trace.total_inner_repeats() as u64;
    assert_eq!(trace.counters.n_hvp, 5 * t);
    assert_eq!(trace.counters.n_grad, 1 + t + repeats);
    assert_eq!(trace.counters.n_full_hessian, 0);
}

#[test]
fn runs_are_reproducible() {
    let p = problem(2.0);
    let cfg = config(&p, HessianPolicy::Combined { upsilon: 0.5, samples: 3 }, 30);
    let run = || {
        let mut o = CountingOracle::new(&p);
        adaptive_accelerated_crn(&mut o, &cfg, &[1.0; 20]).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn baselines_decrease_the_loss() {
    let p = problem(2.0);
    let x0 = vec![1.0; 20];
    let stop = StopCriteria { max_iters: 50, grad_tol: 1e-10, timing: false };
    let l1 = p.smoothness().unwrap().l1;
    let mut o = CountingOracle::new(&p);
    let gd = gradient_descent(&mut o, 1.0 / l1, &x0, &stop).unwrap();
    let f = values(&gd);
    assert!(f.windows(2).all(|w| w[1] < w[0]));
    let mut o = CountingOracle::new(&p);
    let newton = damped_newton(&mut o, 1.0, &[0.0; 20], &stop).unwrap();
    assert!(newton.records.last().unwrap().gnorm <= 1e-10);
    for run in [classical_lbfgs, classical_lsr1] {
        let mut o = CountingOracle::new(&p);
        let trace = run(&mut o, 0.5, 10, &x0, &stop).unwrap();
        assert!(trace.final_f() < f[0], "{}", trace.method);
    }
}
