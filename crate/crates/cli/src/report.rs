//! Report envelopes and their JSON/CSV encodings.

use std::io::Write;

use robust_mdp::apps::LQSolution;
use robust_mdp::{NatureChoice, SolveResult, Tolerances, Violation};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Hex SHA-256 of the raw input bytes.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub seed: u64,
    /// Verdict tolerance from `--tol`.
    pub tol: f64,
    pub tolerances: Tolerances,
}

/// Typed payload, kept so the CSV writer can pick its columns.
pub enum Body {
    Solve(SolveResult, Value),
    /// Values plus per-state action and nature witness at stage 0.
    Oracle {
        values: Vec<f64>,
        actions: Vec<usize>,
        witnesses: Vec<NatureChoice>,
        extra: Value,
    },
    Table {
        name: &'static str,
        values: Vec<Vec<f64>>,
        extra: Value,
    },
    Violations {
        violations: Vec<Violation>,
        extra: Value,
    },
    Lq(LQSolution, Value),
    Plain(Value),
}

pub struct Report {
    pub command: &'static str,
    pub digest: String,
    pub settings: Settings,
    pub body: Body,
    /// Action grid of each stage, for the CSV `action` column.
    pub action_points: Vec<Vec<f64>>,
    pub state_points: Vec<f64>,
}

fn witness_label(c: &NatureChoice) -> String {
    match c {
        NatureChoice::Generator(k) => k.to_string(),
        NatureChoice::Mixture(_) => "mixture".into(),
        NatureChoice::Comonotone(_) => "comonotone".into(),
        NatureChoice::Density(_) => "density".into(),
    }
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

impl Report {
    fn result_json(&self) -> Value {
        match &self.body {
            Body::Solve(r, extra) => merge(serde_json::to_value(r).expect("serializable"), extra.clone()),
            Body::Oracle {
                values,
                actions,
                witnesses,
                extra,
            } => merge(
                serde_json::json!({ "values": values, "actions": actions, "witnesses": witnesses }),
                extra.clone(),
            ),
            Body::Table { name, values, extra } => merge(serde_json::json!({ *name: values }), extra.clone()),
            Body::Violations { violations, extra } => {
                merge(serde_json::json!({ "violations": violations }), extra.clone())
            }
            Body::Lq(sol, extra) => merge(serde_json::to_value(sol).expect("serializable"), extra.clone()),
            Body::Plain(v) => v.clone(),
        }
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Json => {
                let doc = serde_json::json!({
                    "command": self.command,
                    "instance_digest": self.digest,
                    "settings": self.settings,
                    "result": self.result_json(),
                });
                serde_json::to_writer_pretty(&mut *out, &doc)?;
                writeln!(out)
            }
            Format::Csv => self.write_csv(out),
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "# command={} digest={}", self.command, self.digest)?;
        let mut w = csv::Writer::from_writer(out);
        let action = |n: usize, a: usize| self.action_points.get(n).and_then(|p| p.get(a)).map(f64::to_string);
        match &self.body {
            Body::Solve(r, _) => {
                w.write_record(["n", "state", "J", "action", "generator"])?;
                for (n, row) in r.values.iter().enumerate() {
                    for (s, j) in row.iter().enumerate() {
                        let (a, g) = match r.controller.actions.get(n) {
                            Some(acts) => (
                                action(n, acts[s]).unwrap_or_default(),
                                witness_label(&r.witnesses[n][s]),
                            ),
                            None => (String::new(), String::new()),
                        };
                        w.write_record([n.to_string(), self.state_points[s].to_string(), j.to_string(), a, g])?;
                    }
                }
            }
            Body::Oracle {
                values,
                actions,
                witnesses,
                ..
            } => {
                w.write_record(["n", "state", "J", "action", "generator"])?;
                for (s, j) in values.iter().enumerate() {
                    w.write_record([
                        "0".to_string(),
                        self.state_points[s].to_string(),
                        j.to_string(),
                        action(0, actions[s]).unwrap_or_default(),
                        witness_label(&witnesses[s]),
                    ])?;
                }
            }
            Body::Table { name, values, .. } => {
                w.write_record(["n", "state", name])?;
                for (n, row) in values.iter().enumerate() {
                    for (s, v) in row.iter().enumerate() {
                        w.write_record([n.to_string(), self.state_points[s].to_string(), v.to_string()])?;
                    }
                }
            }
            Body::Violations { violations, .. } => {
                w.write_record(["stage", "state", "action", "message"])?;
                let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
                for v in violations {
                    w.write_record([opt(v.stage), opt(v.state), opt(v.action), v.message.clone()])?;
                }
            }
            Body::Lq(sol, _) => {
                w.write_record(["n", "K", "L", "const", "theta_star"])?;
                for n in 0..sol.k.len() {
                    let l = sol.l.get(n).map(f64::to_string).unwrap_or_default();
                    let theta = sol
                        .theta_star
                        .get(n)
                        .map(|t| serde_json::to_string(t).expect("serializable"))
                        .unwrap_or_default();
                    w.write_record([n.to_string(), sol.k[n].to_string(), l, sol.constant[n].to_string(), theta])?;
                }
            }
            Body::Plain(v) => {
                w.write_record(["key", "value"])?;
                if let Value::Object(map) = v {
                    for (k, val) in map {
                        w.write_record([k.clone(), val.to_string()])?;
                    }
                }
            }
        }
        w.flush()
    }
}
