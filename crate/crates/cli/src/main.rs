mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use temporal_modulus::fixtures::golden_cases;
use temporal_modulus::solver::sigma_derivative_check;
use temporal_modulus::{
    lambda_sweep, modulus, p_sweep, parse_contact_sequence, EdgeId, Exponent, FamilyKind, FamilySpec, ParseOptions,
    PenaltyConfig, PenaltyMode, PhiKind, PhiSpec, SolverOptions, TemporalGraph,
};

use report::{Format, Table};

#[derive(Parser, Debug)]
#[command(name = "tmod", version, about = "p-modulus of time-respecting path families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Modulus, optimal density, expected usage and plan for one family.
    Compute(RunConfig),
    /// Modulus along one parameter axis.
    Sweep(SweepArgs),
    /// Runs the built-in golden examples.
    Examples(ExamplesArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    /// Time-respecting paths with the configured penalty.
    Trp,
    /// Paths of the aggregated graph, times ignored.
    Static,
}

#[derive(Args, Debug)]
struct RunConfig {
    /// Contact sequence, one `u v t [sigma [key]]` per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, conflicts_with = "undirected")]
    directed: bool,
    /// The default.
    #[arg(long)]
    undirected: bool,
    #[arg(long)]
    source: String,
    #[arg(long)]
    target: String,
    /// Exponent in [1, inf].
    #[arg(long, default_value = "2")]
    p: String,
    #[arg(long, default_value = "mul-edge", value_parser = ["mul-edge", "add-edge", "mul-object", "add-object"])]
    mode: String,
    /// `const:c`, `affine:a`, `exp:rate[:t0]` or `exp0:rate[:t0]`.
    #[arg(long, default_value = "const:1")]
    phi: String,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Uniform σ, or a file of `u v sigma [key]` lines overriding the input weights.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    max_hops: Option<usize>,
    /// Report every plan path instead of the heaviest 1000.
    #[arg(long)]
    plan_all: bool,
    /// Store timestamps as t − t_min + 1.
    #[arg(long)]
    shift_times: bool,
    #[arg(long)]
    keep_self_loops: bool,
    #[arg(long, value_enum, default_value_t = Family::Trp)]
    family: Family,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Axis {
    Lambda,
    P,
    Sigma,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunConfig,
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    values: Vec<f64>,
    /// Edge index whose σ is varied on the sigma axis.
    #[arg(long)]
    edge: Option<usize>,
}

#[derive(Args, Debug)]
struct ExamplesArgs {
    /// Replaces every case's tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
}

struct Loaded {
    graph: TemporalGraph,
    spec: FamilySpec,
    opts: SolverOptions,
}

fn load(cfg: &RunConfig) -> Result<Loaded> {
    let text = std::fs::read_to_string(&cfg.input).with_context(|| format!("cannot read {}", cfg.input.display()))?;
    let opts =
        ParseOptions { directed: cfg.directed, shift_times: cfg.shift_times, drop_self_loops: !cfg.keep_self_loops };
    let graph = parse_contact_sequence(&text, &opts).with_context(|| format!("in {}", cfg.input.display()))?;
    let source = graph.vertex_or_err(&cfg.source)?;
    let target = graph.vertex_or_err(&cfg.target)?;
    let p: Exponent = cfg.p.parse()?;
    let mode: PenaltyMode = cfg.mode.parse()?;
    let phi = PhiSpec::new(cfg.phi.parse::<PhiKind>()?).with_lambda(cfg.lambda);
    let penalty = PenaltyConfig::new(mode, phi)?;
    let kind = match cfg.family {
        Family::Trp => FamilyKind::TimeRespecting,
        Family::Static => FamilyKind::Static,
    };
    let mut spec = FamilySpec::new(source, target, p, penalty).with_kind(kind).with_max_hops(cfg.max_hops);
    if let Some(s) = &cfg.sigma {
        spec = spec.with_sigma(read_sigma(s, &graph)?);
    }
    spec.validate(&graph)?;
    Ok(Loaded { graph, spec, opts: SolverOptions::with_tol(cfg.tol) })
}

fn read_sigma(arg: &str, g: &TemporalGraph) -> Result<Vec<f64>> {
    if let Ok(x) = arg.parse::<f64>() {
        return Ok(vec![x; g.edge_count()]);
    }
    let text = std::fs::read_to_string(arg).with_context(|| format!("cannot read σ file {arg}"))?;
    let mut sigma = g.weights();
    for (lineno, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tok: Vec<&str> = content.split_whitespace().collect();
        if !(3..=4).contains(&tok.len()) {
            bail!("{arg}:{}: expected `u v sigma [key]`", lineno + 1);
        }
        let value: f64 = tok[2].parse().with_context(|| format!("{arg}:{}: bad sigma `{}`", lineno + 1, tok[2]))?;
        let key = tok.get(3).copied().unwrap_or("");
        let (u, v) = (g.vertex(tok[0]), g.vertex(tok[1]));
        let hit = g.edges().iter().find(|e| {
            let same = Some(e.tail) == u && Some(e.head) == v;
            let flipped = !g.directed() && Some(e.tail) == v && Some(e.head) == u;
            (same || flipped) && e.key == key
        });
        match hit {
            Some(e) => sigma[e.id.0] = value,
            None => bail!("{arg}:{}: no edge {} {} {key}", lineno + 1, tok[0], tok[1]),
        }
    }
    Ok(sigma)
}

fn cmd_compute(cfg: &RunConfig) -> Result<ExitCode> {
    let Loaded { graph, spec, opts } = load(cfg)?;
    let result = modulus(&graph, &spec, &opts)?;
    let sigma = spec.sigma_for(&graph)?;
    let limit = if cfg.plan_all { usize::MAX } else { 1000 };
    print!("{}", report::compute(&graph, &spec, &sigma, &result, limit, cfg.format));
    Ok(if result.empty_family { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode> {
    if args.values.is_empty() {
        bail!("no sweep values given");
    }
    let Loaded { graph, spec, opts } = load(&args.run)?;
    let table = match args.axis {
        Axis::Lambda => {
            let sweep = lambda_sweep(&graph, &spec, &args.values, &opts)?;
            let mut t = Table::new(&["lambda", "modulus", "lower", "upper", "within_bounds", "monotone"]);
            for pt in &sweep.points {
                t.row(vec![
                    pt.lambda.into(),
                    pt.value.into(),
                    pt.lower.into(),
                    pt.upper.into(),
                    pt.within_bounds.into(),
                    pt.monotone.into(),
                ]);
            }
            t
        }
        Axis::P => {
            let sweep = p_sweep(&graph, &spec, &args.values, &opts)?;
            let mut t = Table::new(&["p", "modulus", "transform", "monotone"]);
            for pt in &sweep.points {
                t.row(vec![pt.p.into(), pt.value.into(), pt.transform.into(), pt.monotone.into()]);
            }
            t
        }
        Axis::Sigma => {
            let Some(e) = args.edge else { bail!("the sigma axis needs --edge") };
            if e >= graph.edge_count() {
                bail!("no edge {e}; the graph has {} edges", graph.edge_count());
            }
            if args.values.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                bail!("σ values must be positive");
            }
            let mut values = args.values.clone();
            values.sort_by(f64::total_cmp);
            let base = spec.sigma_for(&graph)?;
            let mut t = Table::new(&["sigma", "modulus", "derivative", "finite_difference", "monotone"]);
            let mut prev: Option<f64> = None;
            for s in values {
                let mut sigma = base.clone();
                sigma[e] = s;
                let at = spec.clone().with_sigma(sigma);
                let value = modulus(&graph, &at, &opts)?.value;
                let (fd, exact) = if spec.p.is_interior() {
                    let (fd, exact) = sigma_derivative_check(&graph, &at, EdgeId(e), 1e-4 * s, &opts)?;
                    (Some(fd), Some(exact))
                } else {
                    (None, None)
                };
                let monotone = prev.is_none_or(|v| value >= v * (1.0 - 10.0 * opts.tol));
                prev = Some(value);
                t.row(vec![s.into(), value.into(), exact.into(), fd.into(), monotone.into()]);
            }
            t
        }
    };
    print!("{}", table.render(args.run.format));
    Ok(ExitCode::SUCCESS)
}

fn cmd_examples(args: &ExamplesArgs) -> Result<ExitCode> {
    let mut failures = Vec::new();
    let mut group = "";
    for case in golden_cases() {
        if case.group != group {
            group = case.group;
            println!("[{group}]");
        }
        let tolerance = args.tolerance.unwrap_or(case.tolerance);
        let (computed, pass) = match case.compute() {
            Ok(v) => (report::num(v), (v - case.expected).abs() <= tolerance),
            Err(e) => (format!("error: {e}"), false),
        };
        let status = if pass { "PASS" } else { "FAIL" };
        println!(
            "  {status} {}: expected {} computed {computed} tolerance {}",
            case.name,
            report::num(case.expected),
            report::num(tolerance)
        );
        if !pass {
            failures.push(format!("{group} / {}", case.name));
        }
    }
    if failures.is_empty() {
        println!("all examples passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{} failed:", failures.len());
        for f in &failures {
            println!("  {f}");
        }
        Ok(ExitCode::FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Compute(cfg) => cmd_compute(cfg),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Examples(args) => cmd_examples(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
