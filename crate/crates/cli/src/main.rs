//! `commons`: run, optimize and classify feedback-evolving game scenarios.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use commons_core::dynamics::classify_regime;
use commons_core::scenarios::{
    execute, preset, simulate_scenario, sweep, ScenarioConfig, ScenarioRun, PRESETS,
};
use commons_core::{ControlSignal, Error, GamePayoffs, IterationLog, PayoffMatrix};

const OUTPUT_ROOT_ENV: &str = "COMMONS_OUTPUT_ROOT";

#[derive(Parser, Debug)]
#[command(name = "commons", version, about = "Optimal control of feedback-evolving games")]
struct Cli {
    /// More log output (repeat for debug detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Only print the final summary line.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a scenario under a fixed control (zero unless --control is given).
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        output: Output,
        /// Control to apply, in the `t,u` layout of a run's control.csv.
        #[arg(long, value_name = "CSV")]
        control: Option<PathBuf>,
    },
    /// Run the hill-climbing optimizer on a scenario.
    Optimize {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        output: Output,
    },
    /// Label the regime of the uncontrolled dynamics for a payoff choice.
    Classify {
        /// Deplete-state payoffs R,S,T,P.
        #[arg(long, value_name = "R,S,T,P", value_parser = parse_row, allow_hyphen_values = true)]
        a0: [f64; 4],
        /// Replete-state payoffs R,S,T,P.
        #[arg(long, value_name = "R,S,T,P", value_parser = parse_row, default_value = "3,1,6,2", allow_hyphen_values = true)]
        a1: [f64; 4],
        /// Environmental enhancement rate.
        #[arg(long)]
        theta: f64,
    },
    /// Repeat a scenario over values of one numeric config field, in parallel.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        output: Output,
        /// Dotted config path to vary, e.g. problem.c2 or problem.a0.1.
        #[arg(long)]
        axis: String,
        /// Comma-separated values for the axis.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// Print the built-in scenario names.
    ListPresets,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Source {
    /// Built-in scenario name (see list-presets).
    #[arg(long)]
    preset: Option<String>,
    /// Scenario file in TOML.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Output {
    /// Output directory; replaced if it exists. Defaults to the config's
    /// output.dir, then to <output root>/<scenario name>.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, env = OUTPUT_ROOT_ENV, hide_env_values = true, default_value = "runs", value_name = "DIR")]
    output_root: PathBuf,
    /// Override a config field, e.g. --set problem.c2=0.001 (repeatable).
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

fn parse_row(s: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected 4 comma-separated values, got {}", v.len()))
}

fn load(source: &Source, output: &Output) -> commons_core::Result<ScenarioConfig> {
    let mut cfg = match (&source.preset, &source.config) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => ScenarioConfig::load(path)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    for o in &output.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig, output: &Output) -> PathBuf {
    output
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| output.output_root.join(&cfg.name))
}

fn progress(quiet: bool) -> impl FnMut(&IterationLog) {
    move |l: &IterationLog| {
        if quiet {
            return;
        }
        let ell = l.ell.map_or_else(|| "-".to_string(), |e| e.to_string());
        println!(
            "iter {:>3}  J = {:<14.8}  theta = {:<14.6e}  ell = {}",
            l.iter, l.objective, l.theta, ell
        );
    }
}

fn summarize(run: &ScenarioRun, dir: &Path) {
    match (run.final_objective(), run.final_theta()) {
        (Some(j), Some(th)) => println!(
            "{}: J = {j:.6}  theta = {th:.6e}  regime = {}  -> {}",
            run.config.name,
            run.regime.label,
            dir.display()
        ),
        _ => println!(
            "{}: regime = {}  -> {}",
            run.config.name,
            run.regime.label,
            dir.display()
        ),
    }
}

fn run(cli: Cli) -> commons_core::Result<()> {
    match cli.command {
        Command::ListPresets => {
            for name in PRESETS {
                println!("{name}");
            }
        }
        Command::Classify { a0, a1, theta } => {
            let p = GamePayoffs::new(PayoffMatrix::from_row(a1), PayoffMatrix::from_row(a0), theta)?;
            let r = classify_regime(&p)?;
            println!("{}", r.label);
            match (r.fixed_point, r.eigenvalues) {
                (Some((x, n)), Some([e1, e2])) => {
                    println!("fixed point: x = {x:.6}, n = {n:.6}");
                    println!("eigenvalues: {e1}, {e2}");
                }
                _ => println!("fixed point: none in the open unit square"),
            }
            println!("deplete game: {:?}", r.deplete_class);
            if r.boundary {
                println!("note: parameters sit on a regime boundary");
            }
        }
        Command::Simulate {
            source,
            output,
            control,
        } => {
            let cfg = load(&source, &output)?;
            let control = control
                .map(|p| ControlSignal::read_csv(&p, cfg.problem.horizon))
                .transpose()?;
            let result = simulate_scenario(&cfg, control)?;
            let dir = out_dir(&cfg, &output);
            result.persist(&dir)?;
            summarize(&result, &dir);
        }
        Command::Optimize { source, output } => {
            let cfg = load(&source, &output)?;
            if !cfg.problem.kind.is_optimization() {
                return Err(Error::InvalidConfig {
                    field: "problem.kind".into(),
                    reason: "opinion-compare scenarios have nothing to optimize; use simulate".into(),
                });
            }
            let result = execute(&cfg, progress(cli.quiet))?;
            let dir = out_dir(&cfg, &output);
            result.persist(&dir)?;
            summarize(&result, &dir);
        }
        Command::Sweep {
            source,
            output,
            axis,
            values,
        } => {
            let cfg = load(&source, &output)?;
            let dir = out_dir(&cfg, &output);
            let entries = sweep(&cfg, &axis, &values, Some(&dir))?;
            let failed = entries.iter().filter(|e| e.outcome.is_err()).count();
            if !cli.quiet {
                for e in &entries {
                    let row = e.row();
                    let fmt = |v: Option<f64>| v.map_or_else(|| "-".into(), |v| format!("{v:.6}"));
                    println!(
                        "{axis} = {:<10} J = {:<12} theta = {:<12} regime = {:<4} {}",
                        row.value,
                        fmt(row.objective),
                        fmt(row.theta),
                        row.regime.as_deref().unwrap_or("-"),
                        row.status
                    );
                }
            }
            println!(
                "sweep of {axis}: {} runs, {failed} failed -> {}",
                entries.len(),
                dir.join("summary.csv").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        (false, _) => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::UnknownPreset { .. } = &e {
                eprintln!("run `commons list-presets` for the catalog");
            }
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
