mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dressed_cavity::{
    linspace, maximize_ps1, run_scenario, run_transient, sweep, Error, MaximizeOptions, Maximum, PopulationSplit,
    Scenario, SweepPoint,
};

use config::{GridArgs, ModelArgs, Resolved};
use output::{fmt_num, render_json, render_svg, render_sweep_csv, Batch};

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Io(String),
    Numerical(String),
    Budget(Box<Maximum>, usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Budget(..) => 3,
            Failure::Io(_) | Failure::Numerical(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Budget { best, evaluations } => Failure::Budget(best, evaluations),
            Error::Numerical(m) => Failure::Numerical(m),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "dressed-cavity", version, about = "Steady-state entanglement of two atoms in a pumped cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state populations and entanglement measures.
    Steady {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Evaluate a closed-atom scenario on a (Π, K) grid in units of Γ.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Grid CSV; printed to stdout when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Heatmap of one column.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Field::ScriptC)]
        svg_field: Field,
    },
    /// Maximize the steady-state P_s1 over (Π, K).
    Maximize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Nelder–Mead evaluations allowed per start.
        #[arg(long)]
        max_evals: Option<usize>,
    },
    /// Transient populations from the scenario's initial state.
    Evolve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Time-series CSV; printed to stdout when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Field {
    ScriptC,
    Concurrence,
    PS1,
}

impl Field {
    fn get(self, p: &SweepPoint) -> f64 {
        match self {
            Field::ScriptC => p.script_c,
            Field::Concurrence => p.concurrence,
            Field::PS1 => p.split.p_s1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Steady { model } => cmd_steady(&model),
        Command::Sweep { model, grid, csv, svg, svg_field } => cmd_sweep(&model, &grid, csv, svg, svg_field),
        Command::Maximize { model, seed, max_evals } => cmd_maximize(&model, seed, max_evals),
        Command::Evolve { model, t_max, steps, csv } => cmd_evolve(&model, t_max, steps, csv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Failure::Invalid(m) | Failure::Io(m) | Failure::Numerical(m) => eprintln!("error: {m}"),
                Failure::Budget(best, evals) => {
                    eprintln!("error: optimizer budget exhausted after {evals} evaluations; best so far:");
                    print_maximum(best);
                }
            }
            ExitCode::from(e.code())
        }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("model types serialize to JSON")
}

fn params_record(s: &Scenario) -> Value {
    to_value(&s.params)
}

fn split_rows(split: &PopulationSplit) -> Vec<(&'static str, f64)> {
    let mut rows = vec![("P_g", split.p_g), ("P_s1", split.p_s1), ("P_s2", split.p_s2), ("P_o'2", split.p_oprime2)];
    if let Some(d) = split.p_dark {
        rows.push(("P_dark", d));
    }
    if let Some(p) = split.p_33 {
        rows.push(("P_33", p));
    }
    rows
}

fn cmd_steady(args: &ModelArgs) -> Result<(), Failure> {
    let Resolved { scenario, json, .. } = args.resolve()?;
    let out = run_scenario(&scenario)?;

    println!("scenario={}", scenario.kind);
    match &out.split {
        Some(split) => split_rows(split).iter().for_each(|(k, v)| println!("{k}={}", fmt_num(*v))),
        None => out.steady.iter().for_each(|(l, p)| println!("P[{l}]={}", fmt_num(p))),
    }
    let m = &out.measures;
    if let Some(c) = m.concurrence {
        println!("concurrence={}", fmt_num(c));
    }
    if let Some(c) = m.script_c {
        println!("script_C={}", fmt_num(c));
    }
    println!("bell_fraction={}", fmt_num(m.bell_fraction));

    if let Some(path) = json {
        let populations: BTreeMap<String, f64> = out.steady.iter().map(|(l, p)| (l.to_string(), p)).collect();
        let mut rec = BTreeMap::new();
        rec.insert("command".into(), json!("steady"));
        rec.insert("scenario".into(), json!(scenario.kind.name()));
        rec.insert("params".into(), params_record(&scenario));
        rec.insert("populations".into(), to_value(&populations));
        rec.insert("split".into(), out.split.map_or(Value::Null, |s| to_value(&s)));
        rec.insert("measures".into(), to_value(m));
        let mut batch = Batch::default();
        batch.stage(&path, &render_json(&rec))?;
        batch.commit()?;
    }
    Ok(())
}

fn cmd_sweep(
    args: &ModelArgs,
    grid: &GridArgs,
    csv: Option<PathBuf>,
    svg: Option<PathBuf>,
    field: Field,
) -> Result<(), Failure> {
    let Resolved { scenario, config, json } = args.resolve()?;
    let spec = grid.spec(&config);
    let result = sweep(&scenario, &spec)?;
    let csv_text = render_sweep_csv(&result.points);
    let file_out = config.output.as_ref();
    let csv = csv.or_else(|| file_out.and_then(|o| o.csv.clone()));
    let svg = svg.or_else(|| file_out.and_then(|o| o.svg.clone()));

    let mut batch = Batch::default();
    if let Some(path) = &csv {
        batch.stage(path, &csv_text)?;
    }
    if let Some(path) = &svg {
        let title = format!("{} {:?}", scenario.kind, field);
        batch.stage(path, &render_svg(&result.points, |p| field.get(p), &title))?;
    }
    let best = result.max_concurrence().copied();
    if let Some(path) = &json {
        let mut rec = BTreeMap::new();
        rec.insert("command".into(), json!("sweep"));
        rec.insert("scenario".into(), json!(scenario.kind.name()));
        rec.insert("params".into(), params_record(&scenario));
        rec.insert("grid".into(), to_value(&spec));
        rec.insert("points".into(), json!(result.points.len()));
        rec.insert("max_script_c".into(), json!(result.max_script_c()));
        rec.insert("max_concurrence".into(), best.map_or(Value::Null, |p| to_value(&p)));
        batch.stage(path, &render_json(&rec))?;
    }
    batch.commit()?;

    if csv.is_none() {
        print!("{csv_text}");
    } else {
        println!("points={}", result.points.len());
        if let Some(c) = result.max_script_c() {
            println!("max_script_C={}", fmt_num(c));
        }
        if let Some(p) = best {
            println!("max_concurrence={} at pi={} k={}", fmt_num(p.concurrence), fmt_num(p.pi), fmt_num(p.k));
        }
    }
    Ok(())
}

fn print_maximum(m: &Maximum) {
    split_rows(&m.split).iter().for_each(|(k, v)| println!("{k}={}", fmt_num(*v)));
    println!("pi={}", fmt_num(m.pump));
    println!("k={}", fmt_num(m.leakage));
    println!("concurrence={}", fmt_num(m.concurrence));
    println!("script_C={}", fmt_num(m.script_c));
    println!("on_boundary={}", m.on_boundary);
    println!("evaluations={}", m.evaluations);
}

fn cmd_maximize(args: &ModelArgs, seed: Option<u64>, max_evals: Option<usize>) -> Result<(), Failure> {
    let Resolved { scenario, config, json } = args.resolve()?;
    let defaults = MaximizeOptions::default();
    let opts = MaximizeOptions {
        seed: seed.or(config.seed).unwrap_or(defaults.seed),
        evaluations_per_start: max_evals.unwrap_or(defaults.evaluations_per_start),
        ..defaults
    };
    let m = maximize_ps1(&scenario.params, &opts)?;
    print_maximum(&m);
    if let Some(path) = json {
        let mut rec = BTreeMap::new();
        rec.insert("command".into(), json!("maximize"));
        rec.insert("params".into(), params_record(&scenario));
        rec.insert("seed".into(), json!(opts.seed));
        rec.insert("maximum".into(), to_value(&m));
        let mut batch = Batch::default();
        batch.stage(&path, &render_json(&rec))?;
        batch.commit()?;
    }
    Ok(())
}

fn cmd_evolve(args: &ModelArgs, t_max: Option<f64>, steps: Option<usize>, csv: Option<PathBuf>) -> Result<(), Failure> {
    let Resolved { scenario, config, json } = args.resolve()?;
    let file = config.evolve.as_ref();
    let t_max = t_max.or(file.and_then(|e| e.t_max)).unwrap_or(10.0);
    let steps = steps.or(file.and_then(|e| e.steps)).unwrap_or(100);
    if !(t_max > 0.0 && t_max.is_finite()) || steps == 0 {
        return Err(Failure::Invalid("evolve needs t_max > 0 and steps >= 1".into()));
    }
    let times = linspace(0.0, t_max, steps + 1);
    let series = run_transient(&scenario, &times)?;

    let labels = scenario.model.rates.labels();
    let mut text = String::from("t");
    for l in labels {
        text.push(',');
        text.push_str(&l.to_string());
    }
    text.push('\n');
    for (t, p) in times.iter().zip(&series) {
        text.push_str(&fmt_num(*t));
        for (_, x) in p.iter() {
            text.push(',');
            text.push_str(&fmt_num(x));
        }
        text.push('\n');
    }

    let csv = csv.or_else(|| config.output.as_ref().and_then(|o| o.csv.clone()));
    let mut batch = Batch::default();
    if let Some(path) = &csv {
        batch.stage(path, &text)?;
    }
    if let Some(path) = &json {
        let last = series.last().expect("at least two time points");
        let populations: BTreeMap<String, f64> = last.iter().map(|(l, p)| (l.to_string(), p)).collect();
        let mut rec = BTreeMap::new();
        rec.insert("command".into(), json!("evolve"));
        rec.insert("scenario".into(), json!(scenario.kind.name()));
        rec.insert("params".into(), params_record(&scenario));
        rec.insert("t_max".into(), json!(t_max));
        rec.insert("steps".into(), json!(steps));
        rec.insert("final_populations".into(), to_value(&populations));
        batch.stage(path, &render_json(&rec))?;
    }
    batch.commit()?;
    if csv.is_none() {
        print!("{text}");
    }
    Ok(())
}
