use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;
use fdlswitch::config::{parse_config, ExperimentSpec, FigurePreset};
use fdlswitch::event_log::write_event_log;
use fdlswitch::experiment::{run_experiment, write_csv, RunOptions};
use fdlswitch::trace::Trace;
use fdlswitch_core::{run, run_with_source, RunPlan, SwitchConfig, TrafficConfig};
use log::info;

/// Slotted simulator of a two-stage shared fiber-delay-line optical packet
/// switch. Runs a config-file sweep or a single point and writes a CSV dataset.
#[derive(Debug, Parser)]
#[command(name = "fdlswitch", version)]
struct Cli {
    /// Experiment config file (key = value lines).
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// CSV output path; `-` or absent (and none in the config) means stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,

    /// Worker threads for the sweep (0 = one per core).
    #[arg(short = 'j', long, default_value_t = 0)]
    workers: usize,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Offered load; replaces the config's rho grid.
    #[arg(long)]
    rho: Option<f64>,

    /// Aux-I FDL count; replaces the config's m grid.
    #[arg(long)]
    m: Option<usize>,

    /// Single seed; replaces the config's seeds.
    #[arg(long)]
    seed: Option<u64>,

    /// Slots with arrivals per run.
    #[arg(long)]
    horizon: Option<u64>,

    /// Slots excluded from metrics.
    #[arg(long)]
    warmup: Option<u64>,

    /// Run without Aux Switch-II.
    #[arg(long)]
    no_aux2: bool,

    /// Pair every point with an Aux-II-less run on identical traffic.
    #[arg(long)]
    ablation: bool,

    /// Write the traffic of the single (rho, seed) point to this file and exit.
    #[arg(long, value_name = "PATH")]
    export_trace: Option<PathBuf>,

    /// Replay arrivals from a trace file instead of generating them.
    #[arg(long, value_name = "PATH", conflicts_with = "export_trace")]
    import_trace: Option<PathBuf>,

    /// Write the event log of the single run to this file.
    #[arg(long, value_name = "PATH")]
    event_log: Option<PathBuf>,
}

fn build_spec(cli: &Cli) -> Result<ExperimentSpec> {
    let mut spec = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            parse_config(&text).with_context(|| format!("in config {}", path.display()))?
        }
        None => {
            let Some(rho) = cli.rho else {
                bail!("give --config, or at least --rho for a single point");
            };
            let mut spec = ExperimentSpec::preset(FigurePreset::Custom);
            spec.name = "single".into();
            spec.rho_values = vec![rho];
            spec.m_values = vec![32];
            spec
        }
    };
    if let Some(rho) = cli.rho {
        spec.rho_values = vec![rho];
    }
    if let Some(m) = cli.m {
        spec.m_values = vec![m];
    }
    if let Some(seed) = cli.seed {
        spec.seeds = vec![seed];
    }
    if let Some(h) = cli.horizon {
        spec.horizon = h;
    }
    if let Some(w) = cli.warmup {
        spec.warmup = w;
    } else if spec.warmup >= spec.horizon {
        spec.warmup = spec.horizon / 100;
    }
    if cli.no_aux2 {
        spec.aux2_enabled = false;
    }
    if cli.ablation {
        spec.ablation = true;
    }
    if let Some(out) = &cli.output {
        spec.output = Some(out.clone());
    }
    spec.validate()?;
    Ok(spec)
}

fn single<T: Copy>(values: &[T], what: &str) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => bail!("this mode needs exactly one {what}, got {}", values.len()),
    }
}

fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p.as_os_str() != "-" => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let mut spec = build_spec(&cli)?;

    if let Some(path) = &cli.export_trace {
        let config = TrafficConfig {
            rho: single(&spec.rho_values, "rho")?,
            seed: single(&spec.seeds, "seed")?,
            n_ports: spec.n_ports,
        };
        let trace = Trace::generate(config, spec.horizon)?;
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        trace.write(BufWriter::new(file))?;
        info!(
            "wrote {} arrivals to {}",
            trace.records.len(),
            path.display()
        );
        return Ok(());
    }

    let trace = match &cli.import_trace {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let trace = Trace::read(BufReader::new(file))
                .with_context(|| format!("reading trace {}", path.display()))?;
            spec.rho_values = vec![trace.rho];
            spec.seeds = vec![trace.seed];
            spec.horizon = trace.slots;
            spec.n_ports = trace.n_ports;
            if spec.warmup >= spec.horizon {
                spec.warmup = 0;
            }
            Some(trace)
        }
        None => None,
    };

    if let Some(path) = &cli.event_log {
        if spec.ablation {
            bail!("--event-log needs a single run; drop --ablation");
        }
        let switch = SwitchConfig {
            n_ports: spec.n_ports,
            m_aux1: single(&spec.m_values, "m")?,
            k_aux2: spec.k_aux2,
            max_circulations: spec.max_circulations,
            aux2_enabled: spec.aux2_enabled,
            aux1_delays: spec.aux1_delays.clone(),
        };
        let mut plan = RunPlan::new(
            switch,
            single(&spec.rho_values, "rho")?,
            single(&spec.seeds, "seed")?,
        )
        .with_horizon(spec.horizon, spec.warmup);
        plan.record_event_log = true;
        let out = match &trace {
            Some(t) => run_with_source(&plan, t.replay())?,
            None => run(&plan)?,
        };
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_event_log(
            BufWriter::new(file),
            out.event_log.as_deref().unwrap_or_default(),
        )?;
    }

    let rows = run_experiment(
        &spec,
        RunOptions {
            workers: cli.workers,
            trace: trace.as_ref(),
        },
    )?;
    write_csv(open_output(spec.output.as_ref())?, &rows)?;
    Ok(())
}
