//! `robust-mdp`: batch front end for the robust MDP solver.
//!
//! Exit status: 0 success, 2 validation violations, 3 enumeration cap
//! exceeded, 4 schema error, 1 anything else. Errors are also written to
//! stderr as one JSON object.

mod report;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_mdp::apps::{
    energy_build, energy_st_reduction_check, lq_grid_tolerance, lq_solve_closed_form, lq_verify_stagewise,
    EnergyParams, LQParams,
};
use robust_mdp::bounds::{check_bounding, check_envelope, LOCAL_DOMINATION_NOTE};
use robust_mdp::game::{build_counterexample, gap, lower_value, mixing_value, saddle_search, upper_value};
use robust_mdp::model::{check_flags, uniform_points};
use robust_mdp::risk::solve_risk_form;
use robust_mdp::schema::InstanceSpec;
use robust_mdp::solver::{check_value_monotone, oracle_min_max, Monotonicity, DEFAULT_ENUMERATION_CAP};
use robust_mdp::{
    evaluate_pair, evaluate_robust_policy, solve_nature_first, solve_robust, validate, Error, FiniteRobustMDP,
    MarkovControllerPolicy, Tolerances, Violation,
};
use serde_json::json;

use report::{Body, Format, Report, Settings};

#[derive(Parser, Debug)]
#[command(name = "robust-mdp", version, about = "Finite-horizon distributionally robust MDP solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Instance (or parameter) JSON file.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Seed for the randomized parts of a command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Policy evaluation budget of `oracle`.
    #[arg(long, global = true, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u128,
    /// Tolerance for report verdicts (zero gap, saddle points, LQ deviation).
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Structural checks of an instance.
    Validate,
    /// Controller-first robust backward induction.
    Solve,
    /// Backward induction with nature moving first.
    SolveNatureFirst,
    /// Values of the instance's `policy` block (or of a seeded random
    /// controller against the worst case).
    Evaluate,
    /// Exhaustive min-max over Markov policy pairs.
    Oracle,
    /// Controller-first minus nature-first values.
    Gap,
    /// Bounding conditions and the value envelope.
    Bounds,
    /// Backward induction in spectral risk-measure form.
    Risk,
    /// The static game without a saddle point, on a grid of the given step.
    Counterexample {
        #[arg(long, default_value_t = 0.5)]
        step: f64,
    },
    /// Closed-form robust LQ recursion with a brute-force check.
    Lq {
        /// Spacing of the verification action grid on [-10, 10].
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Wind/storage model.
    Energy,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Solve => "solve",
            Command::SolveNatureFirst => "solve-nature-first",
            Command::Evaluate => "evaluate",
            Command::Oracle => "oracle",
            Command::Gap => "gap",
            Command::Bounds => "bounds",
            Command::Risk => "risk",
            Command::Counterexample { .. } => "counterexample",
            Command::Lq { .. } => "lq",
            Command::Energy => "energy",
        }
    }
}

/// A command failure with its exit status.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    violations: Vec<Violation>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Invalid(_) => (2, "invalid"),
            Error::EnumerationCap { .. } => (3, "enumeration_cap"),
            Error::Schema(_) => (4, "schema"),
            _ => (1, "error"),
        };
        let violations = match &e {
            Error::Invalid(v) => v.clone(),
            _ => Vec::new(),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
            violations,
        }
    }
}

impl Failure {
    fn io(context: &str, e: std::io::Error) -> Self {
        Failure {
            code: 1,
            kind: "io",
            message: format!("{context}: {e}"),
            violations: Vec::new(),
        }
    }
}

fn read_input(cli: &Cli) -> Result<Vec<u8>, Failure> {
    let path = cli.input.as_ref().ok_or_else(|| Failure::from(Error::Schema("--input is required".into())))?;
    fs::read(path).map_err(|e| Failure::io(&format!("reading {}", path.display()), e))
}

fn parse<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, Failure> {
    serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()).into())
}

fn load_instance(bytes: &[u8]) -> Result<(InstanceSpec, FiniteRobustMDP), Failure> {
    let text = std::str::from_utf8(bytes).map_err(|e| Failure::from(Error::Schema(e.to_string())))?;
    let spec = InstanceSpec::from_json(text)?;
    let model = spec.to_model()?;
    Ok((spec, model))
}

fn seeded_controller(model: &FiniteRobustMDP, seed: u64) -> MarkovControllerPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MarkovControllerPolicy {
        actions: model
            .stages
            .iter()
            .map(|st| st.admissible.iter().map(|d| *d.choose(&mut rng).expect("nonempty admissible set")).collect())
            .collect(),
    }
}

/// Runs the command; the flag says whether the report carries violations.
fn run(cli: &Cli) -> Result<(Report, bool), Failure> {
    let settings = Settings {
        seed: cli.seed,
        tol: cli.tol,
        tolerances: Tolerances::default(),
    };
    let command = cli.command.name();
    let make = |digest: String, body: Body, model: Option<&FiniteRobustMDP>| Report {
        command,
        digest,
        settings: settings.clone(),
        body,
        action_points: model
            .map(|m| m.stages.iter().map(|s| s.actions.points.clone()).collect())
            .unwrap_or_default(),
        state_points: model.map(|m| m.states.points.clone()).unwrap_or_default(),
    };

    match cli.command {
        Command::Counterexample { step } => {
            let digest = report::digest(format!("counterexample step={step}").as_bytes());
            let ce = build_counterexample(step)?;
            let n = ce.game.actions.len();
            let (upper, a) = upper_value(&ce.game);
            let (lower, p) = lower_value(&ce.game);
            let mixing = mixing_value(&ce.game, &vec![1.0 / n as f64; n])?;
            let saddle = saddle_search(&ce.game, cli.tol);
            let body = Body::Plain(json!({
                "upper_value": upper,
                "upper_action": ce.game.actions[a],
                "lower_value": lower,
                "lower_param": ce.game.params[p],
                "uniform_mixing_value": mixing,
                "saddle_point": saddle,
            }));
            return Ok((make(digest, body, None), false));
        }
        Command::Lq { step } => {
            let bytes = read_input(cli)?;
            let p: LQParams = parse(&bytes)?;
            let sol = lq_solve_closed_form(&p)?;
            if !(step > 0.0) {
                return Err(Error::InvalidArgument(format!("step {step} must be positive")).into());
            }
            let actions = uniform_points(-10.0, 10.0, (20.0 / step).round() as usize + 1);
            let v = lq_verify_stagewise(&p, &sol, &[-2.0, -1.0, 0.0, 1.0, 2.0], &actions)?;
            let tol = lq_grid_tolerance(&p, &sol, step);
            let extra = json!({
                "verification": {
                    "action_step": step,
                    "max_deviation": v.max_deviation,
                    "grid_tolerance": tol,
                    "within_tolerance": v.max_deviation <= tol.max(cli.tol),
                    "max_interchange_gap": v.max_interchange_gap,
                    "theta_consistent": v.theta_consistent,
                }
            });
            return Ok((make(report::digest(&bytes), Body::Lq(sol, extra), None), false));
        }
        Command::Energy => {
            let bytes = read_input(cli)?;
            let p: EnergyParams = parse(&bytes)?;
            let model = energy_build(&p)?;
            let r = solve_robust(&model)?;
            let reduction = match energy_st_reduction_check(&p) {
                Ok(b) => json!(b),
                Err(Error::NoExtremeElement(_)) => json!(null),
                Err(e) => return Err(e.into()),
            };
            let extra = json!({
                "value_decreasing": check_value_monotone(&r.values, Monotonicity::Decreasing),
                "st_reduction_holds": reduction,
            });
            return Ok((make(report::digest(&bytes), Body::Solve(r, extra), Some(&model)), false));
        }
        _ => {}
    }

    let bytes = read_input(cli)?;
    let digest = report::digest(&bytes);
    let (spec, model) = load_instance(&bytes)?;
    match cli.command {
        Command::Validate => {
            let mut violations = validate(&model);
            if violations.is_empty() {
                violations = check_flags(&model);
            }
            let bad = !violations.is_empty();
            let body = Body::Violations {
                violations,
                extra: json!({ "valid": !bad }),
            };
            Ok((make(digest, body, Some(&model)), bad))
        }
        Command::Solve => Ok((make(digest, Body::Solve(solve_robust(&model)?, json!({})), Some(&model)), false)),
        Command::SolveNatureFirst => {
            Ok((make(digest, Body::Solve(solve_nature_first(&model)?, json!({})), Some(&model)), false))
        }
        Command::Risk => Ok((make(digest, Body::Solve(solve_risk_form(&model)?, json!({})), Some(&model)), false)),
        Command::Evaluate => {
            let (values, source) = match &spec.policy {
                Some(p) => match &p.nature {
                    Some(nature) => (evaluate_pair(&model, &p.controller, nature)?, "pair"),
                    None => (evaluate_robust_policy(&model, &p.controller)?, "controller"),
                },
                None => {
                    let pi = seeded_controller(&model, cli.seed);
                    (evaluate_robust_policy(&model, &pi)?, "seeded_controller")
                }
            };
            let body = Body::Table {
                name: "values",
                values,
                extra: json!({ "policy": source }),
            };
            Ok((make(digest, body, Some(&model)), false))
        }
        Command::Oracle => {
            let o = oracle_min_max(&model, cli.cap)?;
            let actions: Vec<usize> = o.controllers.iter().enumerate().map(|(s, c)| c.actions[0][s]).collect();
            let witnesses = o
                .natures
                .iter()
                .zip(&actions)
                .enumerate()
                .map(|(s, (g, &a))| g.choices[0][s][a].clone().expect("choice at the chosen action"))
                .collect();
            let body = Body::Oracle {
                values: o.values,
                actions,
                witnesses,
                extra: json!({ "cap": cli.cap.to_string() }),
            };
            Ok((make(digest, body, Some(&model)), false))
        }
        Command::Gap => {
            let g = gap(&model)?;
            let max = g.iter().flatten().copied().fold(0.0, f64::max);
            let min = g.iter().flatten().copied().fold(0.0, f64::min);
            let body = Body::Table {
                name: "gap",
                values: g,
                extra: json!({ "max_gap": max, "min_gap": min, "interchange": max <= cli.tol }),
            };
            Ok((make(digest, body, Some(&model)), false))
        }
        Command::Bounds => {
            let data = spec
                .bounding
                .as_ref()
                .ok_or_else(|| Failure::from(Error::Schema("the instance has no `bounding` block".into())))?;
            model.ensure_valid()?;
            let violations = check_bounding(&model, data);
            let values = solve_robust(&model)?.values;
            let factors: Vec<f64> = (0..=model.horizon).map(|n| data.envelope_factor(model.horizon, n)).collect();
            let bad = !violations.is_empty();
            let body = Body::Violations {
                violations,
                extra: json!({
                    "bounded": !bad,
                    "envelope_holds": check_envelope(&model, data, &values),
                    "envelope_factors": factors,
                    "local_domination": LOCAL_DOMINATION_NOTE,
                }),
            };
            Ok((make(digest, body, Some(&model)), bad))
        }
        Command::Counterexample { .. } | Command::Lq { .. } | Command::Energy => unreachable!("handled above"),
    }
}

fn emit_error(command: &str, f: &Failure) {
    let doc = json!({
        "command": command,
        "error": f.kind,
        "message": f.message,
        "violations": f.violations,
    });
    eprintln!("{doc}");
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("ROBUST_MDP_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| Failure {
            code: 1,
            kind: "environment",
            message: format!("ROBUST_MDP_THREADS={v:?} is not a thread count"),
            violations: Vec::new(),
        })?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure {
            code: 1,
            kind: "environment",
            message: e.to_string(),
            violations: Vec::new(),
        })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.name();
    let outcome = configure_threads().and_then(|_| run(&cli)).and_then(|(report, bad)| {
        let mut buf = Vec::new();
        report.write(cli.format, &mut buf).map_err(|e| Failure::io("encoding report", e))?;
        match &cli.output {
            Some(path) => fs::write(path, &buf).map_err(|e| Failure::io(&format!("writing {}", path.display()), e))?,
            None => std::io::stdout().write_all(&buf).map_err(|e| Failure::io("writing stdout", e))?,
        }
        Ok(bad)
    });
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(f) => {
            emit_error(command, &f);
            ExitCode::from(f.code)
        }
    }
}
