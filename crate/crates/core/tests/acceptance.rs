//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::time::{Duration, Instant};

use common::{Dims, Options};
use rand::Rng;
use robust_mdp::ambiguity::{convex_combinations, AmbiguitySet};
use robust_mdp::apps::{
    energy_build, energy_st_reduction_check, lq_grid_tolerance, lq_solve_closed_form, lq_verify_stagewise, EnergyParams,
    Interval, LQParams, ParamBox, WindLaw,
};
use robust_mdp::bounds::{check_bounding, check_envelope, BoundingData};
use robust_mdp::game::{build_counterexample, gap, lower_value, mixing_value, upper_value};
use robust_mdp::model::{uniform_points, FiniteRobustMDP};
use robust_mdp::risk::{dual_value, ordering_generators, solve_risk_form, spectral_rho};
use robust_mdp::solver::{
    check_value_monotone, oracle_history_value, oracle_min_max, Monotonicity, DEFAULT_ENUMERATION_CAP,
};
use robust_mdp::{evaluate_pair, solve_robust, DiscreteDistribution, QExponent, Spectrum};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn counterexample_triple() -> Outcome {
    for step in [0.5, 0.25, 0.1, 0.01] {
        let ce = build_counterexample(step).map_err(|e| e.to_string())?;
        let up = upper_value(&ce.game).0;
        let lo = lower_value(&ce.game).0;
        ensure(up == -0.25 && lo == -0.5, || format!("step {step}: upper {up}, lower {lo}"))?;
    }
    let ce = build_counterexample(0.001).map_err(|e| e.to_string())?;
    let n = ce.game.actions.len();
    ensure(n == 1001, || format!("{n} actions"))?;
    let mix = mixing_value(&ce.game, &vec![1.0 / n as f64; n]).map_err(|e| e.to_string())?;
    ensure((mix + 1.0 / 3.0).abs() <= 1e-3, || format!("uniform mixing value {mix}"))?;
    Ok(format!("upper -0.25, lower -0.5, mixing {mix:.6}"))
}

fn oracle_equivalence() -> Outcome {
    let limits = Dims {
        states: 4,
        actions: 3,
        support: 3,
        gens: 3,
        horizon: 3,
    };
    let mut rng = common::rng(2);
    let mut worst: f64 = 0.0;
    let mut redraws = 0;
    let mut done = 0;
    while done < 200 {
        let d = limits.sample(&mut rng);
        let m = common::random_instance(&mut rng, d, &Options::default());
        if common::oracle_count(&m) > DEFAULT_ENUMERATION_CAP {
            redraws += 1;
            continue;
        }
        let o = oracle_min_max(&m, DEFAULT_ENUMERATION_CAP).map_err(|e| e.to_string())?;
        let j = solve_robust(&m).map_err(|e| e.to_string())?;
        for (a, b) in o.values.iter().zip(j.initial_values()) {
            worst = worst.max((a - b).abs());
        }
        done += 1;
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("200 instances, max deviation {worst:e}, {redraws} redrawn above the cap"))
}

fn history_sufficiency() -> Outcome {
    let limits = Dims {
        states: 2,
        actions: 2,
        support: 2,
        gens: 2,
        horizon: 2,
    };
    let mut rng = common::rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d = Dims {
            horizon: 2,
            ..limits.sample(&mut rng)
        };
        let m = common::random_instance(&mut rng, d, &Options::default());
        let h = oracle_history_value(&m, DEFAULT_ENUMERATION_CAP).map_err(|e| e.to_string())?;
        let j = solve_robust(&m).map_err(|e| e.to_string())?;
        for (a, b) in h.iter().zip(j.initial_values()) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("50 instances, max deviation {worst:e}"))
}

fn hull_invariance() -> Outcome {
    let limits = Dims {
        states: 6,
        actions: 4,
        support: 4,
        gens: 4,
        horizon: 4,
    };
    let mut rng = common::rng(4);
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let masks = i % 2 == 1;
        let d = limits.sample(&mut rng);
        let m = common::random_instance(&mut rng, d, &Options { masks, ..Options::default() });
        let mut aug = m.clone();
        for (n, st) in aug.stages.iter_mut().enumerate() {
            st.ambiguity = convex_combinations(&st.ambiguity, 10, 1000 * i + n as u64).map_err(|e| e.to_string())?;
            if let Some(mask) = &mut st.generator_mask {
                // Combinations are appended after the originals; keep them
                // available wherever every original generator is.
                let g = m.stages[n].ambiguity.as_generators().unwrap().len();
                for row in mask.iter_mut().flatten() {
                    if row.len() == g {
                        row.extend(g..g + 10);
                    }
                }
            }
        }
        let a = solve_robust(&m).map_err(|e| e.to_string())?;
        let b = solve_robust(&aug).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&a.values, &b.values));
    }
    ensure(worst <= 1e-12, || format!("max change {worst:e}"))?;
    Ok(format!("100 instances, max change {worst:e}"))
}

fn weak_duality_and_interchange() -> Outcome {
    let limits = Dims {
        states: 5,
        actions: 4,
        support: 4,
        gens: 4,
        horizon: 3,
    };
    let mut rng = common::rng(5);
    let mut min_gap = f64::INFINITY;
    for _ in 0..100 {
        let d = limits.sample(&mut rng);
        let m = common::random_instance(&mut rng, d, &Options::default());
        let g = gap(&m).map_err(|e| e.to_string())?;
        min_gap = min_gap.min(g.iter().flatten().copied().fold(f64::INFINITY, f64::min));
    }
    ensure(min_gap >= -1e-12, || format!("negative gap {min_gap:e}"))?;

    let max_gap = |m: &FiniteRobustMDP| -> Result<f64, String> {
        Ok(gap(m).map_err(|e| e.to_string())?.iter().flatten().copied().fold(0.0, f64::max))
    };
    let (mut coarse_max, mut fine_max) = (0.0f64, 0.0f64);
    for i in 0..20u64 {
        let coarse = common::convex_lq_instance(&mut common::rng(500 + i), 0.01, 2);
        let fine = common::convex_lq_instance(&mut common::rng(500 + i), 0.005, 2);
        coarse_max = coarse_max.max(max_gap(&coarse)?);
        fine_max = fine_max.max(max_gap(&fine)?);
    }
    ensure(coarse_max <= 1e-3, || format!("convex gap {coarse_max:e} at resolution 0.01"))?;
    ensure(2.0 * fine_max <= coarse_max, || {
        format!("convex gap {coarse_max:e} -> {fine_max:e} on halving the resolution")
    })?;
    Ok(format!(
        "min random gap {min_gap:e}; convex max gap {coarse_max:e} -> {fine_max:e} (ratio {:.2})",
        coarse_max / fine_max
    ))
}

fn spectral_duality() -> Outcome {
    let mut rng = common::rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let k = rng.gen_range(1..=20);
        let values: Vec<f64> = (0..k).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let probs = common::random_probs(&mut rng, k);
        let phi = common::random_spectrum(&mut rng, 10);
        let d = DiscreteDistribution::from_parts(&values, &probs);
        worst = worst.max((dual_value(&d, &phi) - spectral_rho(&d, &phi)).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    let es = Spectrum::expected_shortfall(0.5).map_err(|e| e.to_string())?;
    let v = spectral_rho(&DiscreteDistribution::uniform(&[1.0, 2.0, 3.0, 4.0]), &es);
    ensure(v == 3.5, || format!("ES_0.5 = {v}"))?;
    Ok(format!("500 pairs, max deviation {worst:e}; ES_0.5 = {v}"))
}

fn spectral_generator_consistency() -> Outcome {
    let limits = Dims {
        states: 5,
        actions: 4,
        support: 4,
        gens: 1,
        horizon: 1,
    };
    let mut rng = common::rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let d = limits.sample(&mut rng);
        let base = common::random_instance(&mut rng, d, &Options::default());
        let phi = common::random_spectrum(&mut rng, 6);
        let mut spectral = base.clone();
        spectral.stages[0].ambiguity = AmbiguitySet::spectral(phi.clone());
        let mut expanded = base;
        let probs = expanded.stages[0].disturbance.probs.clone();
        expanded.stages[0].ambiguity = AmbiguitySet::generators(ordering_generators(&probs, &phi));
        let a = solve_risk_form(&spectral).map_err(|e| e.to_string())?;
        let b = solve_robust(&expanded).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&a.values, &b.values));
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("200 models, max deviation {worst:e}"))
}

fn energy_params(rng: &mut impl Rng) -> EnergyParams {
    let step = [0.5, 1.0][rng.gen_range(0..2)];
    EnergyParams {
        horizon: rng.gen_range(1..=4),
        capacity: step * rng.gen_range(1..=8) as f64,
        max_wind: step * rng.gen_range(1..=6) as f64,
        price: rng.gen_range(0.1..3.0),
        penalty: rng.gen_range(0.1..3.0),
        step,
        wind: (0..rng.gen_range(1..=3))
            .map(|_| match rng.gen_range(0..2) {
                0 => WindLaw::Binomial { p: rng.gen_range(0.05..0.95) },
                _ => WindLaw::Beta {
                    a: rng.gen_range(0.5..4.0),
                    b: rng.gen_range(0.5..4.0),
                },
            })
            .collect(),
    }
}

fn stochastic_order_reduction() -> Outcome {
    let limits = Dims {
        states: 6,
        actions: 3,
        support: 4,
        gens: 3,
        horizon: 3,
    };
    let mut rng = common::rng(8);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d = limits.sample(&mut rng);
        let mut m = common::random_monotone_instance(&mut rng, d);
        let mut single = m.clone();
        for (st, one) in m.stages.iter_mut().zip(&mut single.stages) {
            let mut gens = st.ambiguity.as_generators().unwrap().to_vec();
            let top = common::st_max_density(&gens, &st.disturbance.probs);
            let at = rng.gen_range(0..=gens.len());
            gens.insert(at, top.clone());
            st.ambiguity = AmbiguitySet::generators(gens);
            one.ambiguity = AmbiguitySet::generators(vec![top]);
        }
        let a = solve_robust(&m).map_err(|e| e.to_string())?;
        let b = solve_robust(&single).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&a.values, &b.values));
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    let chain = EnergyParams {
        horizon: 4,
        capacity: 5.0,
        max_wind: 4.0,
        price: 1.0,
        penalty: 1.5,
        step: 1.0,
        wind: vec![
            WindLaw::Binomial { p: 0.6 },
            WindLaw::Binomial { p: 0.2 },
            WindLaw::Binomial { p: 0.4 },
        ],
    };
    let ok = energy_st_reduction_check(&chain).map_err(|e| e.to_string())?;
    ensure(ok, || "energy reduction check failed on the binomial chain".into())?;
    Ok(format!("50 instances, max deviation {worst:e}; energy chain reduces"))
}

fn bounding_envelope() -> Outcome {
    let limits = Dims {
        states: 5,
        actions: 3,
        support: 4,
        gens: 3,
        horizon: 4,
    };
    let mut rng = common::rng(9);
    let mut checked = 0;
    for _ in 0..100 {
        let c = rng.gen_range(0.1..5.0);
        let d = limits.sample(&mut rng);
        let m = common::random_instance(&mut rng, d, &Options { masks: false, cost_scale: c });
        let c = f64::max(c, 0.5);
        let s = m.num_states();
        let norm_bound = m
            .stages
            .iter()
            .flat_map(|st| st.ambiguity.as_generators().unwrap().iter().flat_map(|g| g.weights().iter().copied()))
            .fold(1.0, f64::max);
        let data = BoundingData {
            lower: (0..s).map(|_| -c * (1.0 + 0.1 * rng.gen::<f64>())).collect(),
            upper: (0..s).map(|_| c * (1.0 + 0.1 * rng.gen::<f64>())).collect(),
            alpha: rng.gen_range(1.2..2.0),
            norm_bound,
            q: QExponent::Infinity,
            eps_lower: 0.5,
            eps_upper: 0.5,
        };
        let v = check_bounding(&m, &data);
        ensure(v.is_empty(), || format!("bounding check rejected a bounded instance: {v:?}"))?;
        let j = solve_robust(&m).map_err(|e| e.to_string())?;
        ensure(check_envelope(&m, &data, &j.values), || "robust values leave the envelope".into())?;
        for _ in 0..20 {
            let pi = common::random_controller(&mut rng, &m);
            let gamma = common::random_nature(&mut rng, &m);
            let v = evaluate_pair(&m, &pi, &gamma).map_err(|e| e.to_string())?;
            ensure(check_envelope(&m, &data, &v), || "policy pair values leave the envelope".into())?;
            checked += 1;
        }
    }
    Ok(format!("100 instances, {checked} policy pairs inside the envelope"))
}

fn random_lq(rng: &mut impl Rng) -> LQParams {
    let horizon = rng.gen_range(1..=3);
    let boxes = (0..horizon)
        .map(|_| {
            let su = rng.gen_range(0.05..0.3);
            let sv = rng.gen_range(0.05..0.3);
            ParamBox {
                mu_u: Interval::point(rng.gen_range(0.5..1.5)),
                sigma_u: Interval::new(su, su + rng.gen_range(0.0..0.3)),
                mu_v: Interval::point(rng.gen_range(0.5..1.5)),
                sigma_v: Interval::new(sv, sv + rng.gen_range(0.0..0.3)),
                sigma_uv: Interval::point(rng.gen_range(-1.0..1.0) * su * sv),
                w2: Interval::new(0.0, rng.gen_range(0.0..0.5)),
            }
        })
        .collect();
    LQParams {
        horizon,
        q: (0..=horizon).map(|_| rng.gen_range(0.1..2.0)).collect(),
        r: (0..horizon).map(|_| rng.gen_range(0.1..2.0)).collect(),
        boxes,
        resolution: 5,
        trust_bracket_monotonicity: false,
    }
}

fn lq_recursion() -> Outcome {
    let hand = LQParams {
        horizon: 1,
        q: vec![1.0, 1.0],
        r: vec![1.0],
        boxes: vec![ParamBox::degenerate(1.0, 0.0, 1.0, 0.0, 0.0, 0.0)],
        resolution: 5,
        trust_bracket_monotonicity: false,
    };
    let sol = lq_solve_closed_form(&hand).map_err(|e| e.to_string())?;
    ensure(sol.k[0] == 1.5 && sol.l[0] == -0.5, || format!("K_0 = {}, L_0 = {}", sol.k[0], sol.l[0]))?;
    let v = lq_verify_stagewise(&hand, &sol, &[-1.0, 0.0, 1.0], &uniform_points(-2.0, 2.0, 4001))
        .map_err(|e| e.to_string())?;
    ensure(v.max_deviation <= 1e-6, || format!("hand case deviation {:e}", v.max_deviation))?;

    let states = [-2.0, -1.0, 1.0, 2.0];
    let mut rng = common::rng(10);
    let (mut coarse_dev, mut fine_dev) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let p = random_lq(&mut rng);
        let sol = lq_solve_closed_form(&p).map_err(|e| e.to_string())?;
        for (h, dev) in [(0.01f64, &mut coarse_dev), (0.005, &mut fine_dev)] {
            let actions = uniform_points(-10.0, 10.0, (20.0 / h).round() as usize + 1);
            let v = lq_verify_stagewise(&p, &sol, &states, &actions).map_err(|e| e.to_string())?;
            let tol = lq_grid_tolerance(&p, &sol, h);
            ensure(v.max_deviation <= tol, || format!("deviation {:e} above tolerance {tol:e} at step {h}", v.max_deviation))?;
            let same = v.theta_argmax.iter().all(|row| row.windows(2).all(|w| w[0] == w[1]));
            ensure(v.theta_consistent && same, || "nature's maximizer depends on the state".into())?;
            *dev = dev.max(v.max_deviation);
        }
    }
    ensure(2.0 * fine_dev <= coarse_dev, || format!("deviation {coarse_dev:e} -> {fine_dev:e} on refinement"))?;
    Ok(format!(
        "K_0 = 1.5, L_0 = -0.5; random boxes deviation {coarse_dev:e} -> {fine_dev:e} (ratio {:.2})",
        coarse_dev / fine_dev
    ))
}

fn energy_model() -> Outcome {
    let mut rng = common::rng(11);
    let mut p = energy_params(&mut rng);
    p.price = 0.0;
    p.penalty = 0.0;
    let j = solve_robust(&energy_build(&p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(j.values.iter().flatten().all(|&v| v == 0.0), || "free energy has a nonzero value".into())?;

    let z0 = 2usize;
    let mut probs = vec![0.0; 5];
    probs[z0] = 1.0;
    let det = EnergyParams {
        horizon: 1,
        capacity: 6.0,
        max_wind: 4.0,
        price: 1.3,
        penalty: 0.7,
        step: 1.0,
        wind: vec![WindLaw::Pmf { probs }],
    };
    let m = energy_build(&det).map_err(|e| e.to_string())?;
    let j = solve_robust(&m).map_err(|e| e.to_string())?;
    for (s, &x) in m.states.points.iter().enumerate() {
        let a = m.stages[0].actions.points[j.controller.actions[0][s]];
        let expect = (z0 as f64 + x).min(det.max_wind);
        ensure(a == expect, || format!("x = {x}: bid {a}, expected {expect}"))?;
    }

    for _ in 0..20 {
        let p = energy_params(&mut rng);
        let j = solve_robust(&energy_build(&p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure(check_value_monotone(&j.values, Monotonicity::Decreasing), || format!("not decreasing: {p:?}"))?;
    }
    Ok("zero prices, deterministic bids and 20 monotone parameterizations".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, u64); 11] = [
        ("counterexample triple", counterexample_triple, 1),
        ("oracle equivalence", oracle_equivalence, 60),
        ("history sufficiency", history_sufficiency, 60),
        ("convex hull invariance", hull_invariance, 30),
        ("weak duality and convex interchange", weak_duality_and_interchange, 120),
        ("spectral duality", spectral_duality, 10),
        ("spectral/generator consistency", spectral_generator_consistency, 30),
        ("stochastic-order reduction", stochastic_order_reduction, 30),
        ("bounding envelope", bounding_envelope, 60),
        ("LQ recursion", lq_recursion, 60),
        ("energy model", energy_model, 30),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > Duration::from_secs(*budget) => {
                Err(format!("{detail}; exceeded the {budget} s budget"))
            }
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({:.2} s): {detail}", i + 1, elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({:.2} s): {detail}", i + 1, elapsed.as_secs_f64());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
