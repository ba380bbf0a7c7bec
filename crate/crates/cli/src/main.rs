use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cmtdp_core::config::{policy_name, ConfigError, ExperimentConfig, KEYS};
use cmtdp_core::estimators::write_estimate;
use cmtdp_core::presets::{run_preset, PRESETS};
use cmtdp_core::report::{
    emit_svg, read_curve_csv, write_curve_csv, write_summary_csv, Curve, SummaryRow,
};
use cmtdp_core::simulator::{run_paired, run_single_with, AggregateStats, RunOptions};
use cmtdp_core::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 7;
const EXIT_INPUT: u8 = 8;
const EXIT_SIMULATION: u8 = 9;

#[derive(Parser)]
#[command(name = "cmtdp", version, about = "Cross-market transfer dynamic pricing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key (repeatable), e.g. --set run.T=500.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Refit on all past episodes instead of only the previous one.
    #[arg(long)]
    accumulate: bool,
    /// Run replications on all cores.
    #[arg(long)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured policy and its baseline on paired seeds.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the per-episode estimates of replication 0.
        #[arg(long)]
        dump_estimates: bool,
    },
    /// Run a named sweep.
    Preset {
        /// One of fig_linear_on, fig_rkhs_on, fig_linear_off, fig_rkhs_off, table_compare.
        name: String,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Render curve CSVs into one SVG.
    Plot {
        /// Curve CSV files (t,mean_cum_regret,se_cum_regret).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "regret.svg")]
        out: PathBuf,
        #[arg(long, default_value = "cumulative regret")]
        title: String,
    },
    /// Write the per-episode estimates of one replication.
    DumpEstimates {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        replication: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective config, or every key with --keys.
    ShowConfig {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        keys: bool,
    },
}

enum Failure {
    Config(ConfigError),
    Core(Error),
    Usage(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::from(e))
    }
}

impl Failure {
    fn report(&self) -> ExitCode {
        let (msg, code) = match self {
            Failure::Config(e) => (e.to_string(), e.exit_code() as u8),
            Failure::Usage(m) => (m.clone(), EXIT_USAGE),
            Failure::Core(e) => {
                let code = match e {
                    Error::Io(_) => EXIT_IO,
                    Error::InvalidInput(_) => EXIT_INPUT,
                    _ => EXIT_SIMULATION,
                };
                (e.to_string(), code)
            }
        };
        eprintln!("cmtdp: {msg}");
        ExitCode::from(code)
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, ConfigError> {
    let mut overrides = common.overrides.clone();
    if let Some(s) = common.seed {
        overrides.push(format!("seed={s}"));
    }
    if common.accumulate {
        overrides.push("policy.accumulate=true".into());
    }
    ExperimentConfig::load(common.config.as_deref(), &overrides)
}

fn curve_of(stats: &AggregateStats, label: &str) -> Curve {
    Curve {
        label: label.into(),
        mean: stats.mean_cum.clone(),
        se: stats.se_cum.clone(),
    }
}

fn write_curve(path: &Path, c: &Curve) -> Result<(), Failure> {
    let mut buf = Vec::new();
    write_curve_csv(c, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn cmd_run(common: &Common, out: &Path, dump: bool) -> Result<(), Failure> {
    let cfg = load(common)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.txt"), cfg.to_kv_string())?;

    let (cand, base, cmp) = run_paired(&cfg, common.parallel)?;
    let cand_label = policy_name(cfg.policy);
    let base_label = policy_name(cfg.baseline);
    let cc = curve_of(&cand, cand_label);
    let bc = curve_of(&base, base_label);
    write_curve(&out.join(format!("curves_{cand_label}.csv")), &cc)?;
    if cfg.baseline != cfg.policy {
        write_curve(&out.join(format!("curves_{base_label}.csv")), &bc)?;
    }

    let index = match cfg.policy {
        cmtdp_core::PolicyKind::CmTdpOff => cfg.offline_n.to_string(),
        _ => cfg.num_sources.to_string(),
    };
    let rows = [
        SummaryRow {
            policy: cand_label.into(),
            scenario: cfg.scenario_label(),
            d: cfg.dim.to_string(),
            k_or_nk: index,
            final_regret_mean: cand.final_mean,
            final_regret_se: cand.final_se,
            regret_reduction_pct: cmp.regret_reduction_pct,
            std_reduction_pct: cmp.std_reduction_pct,
            speed_ratio: cmp.speed_ratio,
        },
        SummaryRow {
            policy: base_label.into(),
            scenario: cfg.scenario_label(),
            d: cfg.dim.to_string(),
            k_or_nk: "-".into(),
            final_regret_mean: base.final_mean,
            final_regret_se: base.final_se,
            regret_reduction_pct: 0.0,
            std_reduction_pct: 0.0,
            speed_ratio: 1.0,
        },
    ];
    let mut buf = Vec::new();
    write_summary_csv(&rows, &mut buf)?;
    fs::write(out.join("summary.csv"), &buf)?;
    let svg = emit_svg(&cfg.scenario_label(), &[cc, bc])?;
    fs::write(out.join("regret.svg"), svg)?;

    if dump {
        let text = dump_text(&cfg, 0)?;
        fs::write(out.join("estimates.txt"), text)?;
    }
    if cand.nonconverged_fits + base.nonconverged_fits > 0 {
        eprintln!(
            "cmtdp: {} fits stopped at the iteration cap",
            cand.nonconverged_fits + base.nonconverged_fits
        );
    }
    print!("{}", String::from_utf8_lossy(&buf));
    Ok(())
}

fn dump_text(cfg: &ExperimentConfig, replication: usize) -> Result<String, Failure> {
    let run = run_single_with(cfg, replication, RunOptions { capture_estimates: true })?;
    let mut text = String::new();
    for (m, est) in &run.estimates {
        text.push_str(&format!("# episode {m}\n"));
        text.push_str(&write_estimate(est));
    }
    Ok(text)
}

fn cmd_plot(inputs: &[PathBuf], out: &Path, title: &str) -> Result<(), Failure> {
    let mut curves = Vec::new();
    for p in inputs {
        let f = fs::File::open(p)?;
        let label = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
        curves.push(read_curve_csv(&label, BufReader::new(f))?);
    }
    fs::write(out, emit_svg(title, &curves)?)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            common,
            out,
            dump_estimates,
        } => cmd_run(&common, &out, dump_estimates),
        Command::Preset { name, common, out } => {
            if !PRESETS.contains(&name.as_str()) {
                return Err(Failure::Usage(format!(
                    "unknown preset `{name}` (expected one of {})",
                    PRESETS.join(", ")
                )));
            }
            let cfg = load(&common)?;
            let res = run_preset(&name, &cfg, &out, common.parallel)?;
            println!("{} panels, {} files written to {}", res.panels, res.files.len(), out.display());
            Ok(())
        }
        Command::Plot { inputs, out, title } => cmd_plot(&inputs, &out, &title),
        Command::DumpEstimates {
            common,
            replication,
            out,
        } => {
            let cfg = load(&common)?;
            let text = dump_text(&cfg, replication)?;
            match out {
                Some(p) => fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::ShowConfig { common, keys } => {
            if keys {
                for (k, help) in KEYS {
                    println!("{k:<28} {help}");
                }
            } else {
                print!("{}", load(&common)?.to_kv_string());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
