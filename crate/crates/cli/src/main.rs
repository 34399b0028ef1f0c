use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use qdecoh::lattice::spectrum_for;
use qdecoh::oracle::{oracle_check, GAP_TOLERANCE};
use qdecoh::scenario::{couplings_csv, couplings_for, evaluate, gating_field, sweep, sweep_csv, OutputFormat, SweepSpec};
use qdecoh::{run, Config, ScenarioKind, StateKind};

#[derive(Parser)]
#[command(name = "qdecoh", version, about = "Decoherence rates and gate fidelity losses for lambda-system qubit registers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one scenario and write its report.
    Run {
        #[command(flatten)]
        common: Common,
        /// Sweep a parameter over FROM..TO, e.g. `--sweep n_qubits 2..10000`.
        #[arg(long, num_args = 2, value_names = ["PARAM", "RANGE"])]
        sweep: Option<Vec<String>>,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long)]
        log: bool,
    },
    /// Rate table over a parameter range.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Geometric spacing.
        #[arg(long)]
        log: bool,
    },
    /// Vibrational frequencies of the configured lattice.
    Lattice {
        #[command(flatten)]
        common: Common,
    },
    /// Compare numeric fidelity slopes with the rate formula on random models.
    OracleCheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Relaxation elements and per-ion coupling tables.
    DumpCouplings {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// hadamard, ghz, gated or custom:PATH.
    #[arg(long)]
    state: Option<String>,
    /// Number of qubits in the register.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// json or csv.
    #[arg(long)]
    format: Option<String>,
}

impl Common {
    fn config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => qdecoh::params::load_config_lenient(p)?,
            None => Config::default(),
        };
        if let Some(s) = &self.scenario {
            cfg.scenario.kind = Some(ScenarioKind::parse(s)?);
        }
        if let Some(s) = &self.state {
            cfg.scenario.state = Some(StateKind::parse(s)?);
        }
        if let Some(n) = self.n {
            cfg.params.n_qubits = n;
        }
        if let Some(p) = &self.output {
            cfg.scenario.output.path = Some(p.clone());
        }
        if let Some(f) = &self.format {
            cfg.scenario.output.format = OutputFormat::parse(f)?;
        }
        cfg.params.validate()?;
        cfg.scenario.validate_fields()?;
        Ok(cfg)
    }
}

fn parse_range(text: &str) -> Result<(f64, f64)> {
    let (a, b) = text.split_once("..").ok_or_else(|| anyhow!("range '{text}' is not FROM..TO"))?;
    let f = |s: &str| s.trim().parse::<f64>().with_context(|| format!("bad range bound '{s}'"));
    Ok((f(a)?, f(b)?))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            println!("wrote {}", p.display());
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_run(common: &Common, sweep_arg: Option<&[String]>, points: usize, log: bool) -> Result<()> {
    let mut cfg = common.config()?;
    if let Some([param, range]) = sweep_arg {
        let (from, to) = parse_range(range)?;
        cfg.scenario.sweep = Some(SweepSpec { param: param.clone(), from, to, points, log });
    }
    let out = run(&cfg.scenario, &cfg.params, &cfg.lattice)?;
    let format = cfg.scenario.output.format;
    match &cfg.scenario.output.path {
        Some(p) => {
            for f in out.write(p, format)? {
                println!("wrote {}", f.display());
            }
        }
        None => {
            let text = match format {
                OutputFormat::Json => out.to_json()? + "\n",
                OutputFormat::Csv => match (&out.sweep, &out.sweep_param) {
                    (Some(points), Some(param)) => sweep_csv(param, points),
                    _ => out.report.to_csv(),
                },
            };
            emit(None, &text)?;
        }
    }
    let r = &out.report;
    match r.dominant() {
        Some(d) => info!("dominant {} ({}) {:.3e} 1/s", d.id, d.effect, d.contribution),
        None => info!("no nonzero ledger line"),
    }
    Ok(())
}

fn cmd_sweep(common: &Common, spec: SweepSpec) -> Result<()> {
    let cfg = common.config()?;
    let points = sweep(&cfg.scenario, &cfg.params, &cfg.lattice, &spec)?;
    let text = match cfg.scenario.output.format {
        OutputFormat::Csv => sweep_csv(&spec.param, &points),
        OutputFormat::Json => {
            let doc = serde_json::json!({
                "report_version": qdecoh::decoherence::REPORT_VERSION,
                "sweep": spec,
                "points": points,
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    };
    emit(cfg.scenario.output.path.as_deref(), &text)
}

fn cmd_lattice(common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let (spec, spectrum) = spectrum_for(&cfg.lattice, cfg.params.nu_max)?;
    info!("{} ions, trap frequency {:.6e} rad/s", spec.n_ions(), spec.trap_freq.unwrap_or_default());
    let mut text = String::from("index,nu_rad_per_s\n");
    for (k, f) in spectrum.frequencies.iter().enumerate() {
        text += &format!("{k},{f:.9e}\n");
    }
    text += &format!("nu_max,{:.9e}\n", spectrum.nu_max);
    emit(cfg.scenario.output.path.as_deref(), &text)
}

fn cmd_oracle(trials: usize, seed: u64) -> Result<bool> {
    let checks = oracle_check(seed, trials)?;
    let mut worst: f64 = 0.0;
    for (k, c) in checks.iter().enumerate() {
        println!(
            "trial {k}: dim {} numeric {:.9e} formula {:.9e} gap {:.3e}",
            c.dim, c.numeric, c.formula, c.gap
        );
        worst = worst.max(c.gap);
    }
    println!("max gap {worst:.3e} (tolerance {GAP_TOLERANCE:.0e})");
    Ok(worst <= GAP_TOLERANCE)
}

fn cmd_dump(common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let kind = cfg.scenario.kind.ok_or_else(|| anyhow!("scenario required (--scenario or [scenario] kind)"))?;
    let (relax, _) = evaluate(&cfg.scenario, &cfg.params, &cfg.lattice)?;
    let path = cfg.scenario.output.path.as_deref();
    emit(path, &relax.to_csv()?)?;
    if kind != ScenarioKind::NoGating {
        if let Some(p) = path {
            let field = gating_field(kind, &cfg.scenario, &cfg.params);
            let (_, set) = couplings_for(&cfg.params, &cfg.lattice, field)?;
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("couplings");
            emit(Some(&p.with_file_name(format!("{stem}.couplings.csv"))), &couplings_csv(&set))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { common, sweep, points, log } => cmd_run(&common, sweep.as_deref(), points, log),
        Command::Sweep { common, param, from, to, points, log } => {
            cmd_sweep(&common, SweepSpec { param, from, to, points, log })
        }
        Command::Lattice { common } => cmd_lattice(&common),
        Command::OracleCheck { trials, seed } => match cmd_oracle(trials, seed) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("error: oracle gap above tolerance");
                return ExitCode::FAILURE;
            }
            Err(e) => Err(e),
        },
        Command::DumpCouplings { common } => cmd_dump(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
