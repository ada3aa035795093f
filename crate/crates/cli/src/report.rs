//! Output formatting. CSV numbers carry 12 significant digits and never depend
//! on the locale; JSON numbers are written at full precision.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde_json::{json, Map, Value};

use temporal_modulus::{Exponent, FamilySpec, ModulusResult, TemporalGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// `x` rounded to 12 significant digits, shortest form.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    format!("{rounded}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) => n.as_f64().map(num).unwrap_or_else(|| n.to_string()),
        Value::String(s) => csv_field(s),
        other => csv_field(&other.to_string()),
    }
}

/// Rows of named columns, rendered as CSV or as a JSON array of objects.
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<Value>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    fn csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(csv_cell).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    fn json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().cloned()).collect::<Map<_, _>>()))
                .collect(),
        )
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv(),
            Format::Json => format!("{}\n", serde_json::to_string_pretty(&self.json()).unwrap()),
        }
    }
}

fn exponent(p: Exponent) -> Value {
    match p {
        Exponent::Finite(p) => p.into(),
        Exponent::Infinity => "inf".into(),
    }
}

fn edge_table(g: &TemporalGraph, sigma: &[f64], values: &[f64]) -> Table {
    let mut t = Table::new(&["edge", "tail", "head", "key", "sigma", "value"]);
    for e in g.edges() {
        t.row(vec![
            e.id.0.into(),
            g.label(e.tail).into(),
            g.label(e.head).into(),
            e.key.clone().into(),
            sigma[e.id.0].into(),
            values[e.id.0].into(),
        ]);
    }
    t
}

fn plan_table(g: &TemporalGraph, r: &ModulusResult, limit: usize) -> Table {
    let mut t = Table::new(&["rank", "mass", "cumulative", "vertices", "edges", "times"]);
    for (i, entry) in r.plan.iter().take(limit).enumerate() {
        let vertices: Vec<&str> = entry.path.vertices(g).into_iter().map(|v| g.label(v)).collect();
        let edges: Vec<usize> = entry.path.edges().map(|e| e.0).collect();
        let times: Vec<f64> = entry.path.steps.iter().map(|s| g.raw_time(s.time)).collect();
        t.row(vec![
            (i + 1).into(),
            entry.mass.into(),
            entry.cumulative.into(),
            json!(vertices),
            json!(edges),
            json!(times),
        ]);
    }
    t
}

fn joined(v: &Value) -> Value {
    match v {
        Value::Array(items) => Value::String(items.iter().map(csv_cell).collect::<Vec<_>>().join(" ")),
        other => other.clone(),
    }
}

pub fn compute(
    g: &TemporalGraph,
    spec: &FamilySpec,
    sigma: &[f64],
    r: &ModulusResult,
    plan_limit: usize,
    format: Format,
) -> String {
    let phi = spec.penalty.phi();
    let rho = edge_table(g, sigma, r.rho_star.values());
    let eta = edge_table(g, sigma, &r.eta_star);
    let plan = plan_table(g, r, plan_limit);
    match format {
        Format::Json => {
            let doc = json!({
                "modulus": r.value,
                "p": exponent(r.p),
                "mode": spec.penalty.mode().to_string(),
                "phi": phi.kind.to_string(),
                "lambda": phi.lambda,
                "rho": rho.json(),
                "eta": eta.json(),
                "plan": plan.json(),
                "iterations": r.iterations,
                "max_violation": r.max_violation,
                "duality_gap": r.duality_gap,
                "empty_family": r.empty_family,
            });
            format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
        }
        Format::Csv => {
            let mut summary = Table::new(&["field", "value"]);
            let fields: [(&str, Value); 9] = [
                ("modulus", r.value.into()),
                ("p", exponent(r.p)),
                ("mode", spec.penalty.mode().to_string().into()),
                ("phi", phi.kind.to_string().into()),
                ("lambda", phi.lambda.into()),
                ("iterations", r.iterations.into()),
                ("max_violation", r.max_violation.into()),
                ("duality_gap", r.duality_gap.into()),
                ("empty_family", r.empty_family.into()),
            ];
            for (k, v) in fields {
                summary.row(vec![k.into(), v]);
            }
            let mut edges = Table::new(&["edge", "tail", "head", "key", "sigma", "rho", "eta"]);
            for (a, b) in rho.rows.iter().zip(&eta.rows) {
                let mut cells = a.clone();
                cells.push(b[5].clone());
                edges.row(cells);
            }
            let mut flat_plan = Table::new(&["rank", "mass", "cumulative", "vertices", "edges", "times"]);
            for row in &plan.rows {
                flat_plan.row(row.iter().map(joined).collect());
            }
            let mut out = String::new();
            let _ = write!(out, "{}\n{}\n{}", summary.csv(), edges.csv(), flat_plan.csv());
            out
        }
    }
}
