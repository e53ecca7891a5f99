//! Sweeps over (load, Aux-I size, Aux-II flag) grid points and seeds, and
//! the CSV dataset they produce.
//!
//! Every (point, seed) pair is an independent run. Runs execute on a bounded
//! rayon pool and are collected in job order, so the output never depends on
//! the worker count.

use std::io::Write;

use fdlswitch_core::{
    aggregate, loss_reduction, run, run_with_source, EngineError, MetricsError, RunMetrics,
    RunPlan, Summary, SwitchConfig,
};
use log::{debug, info};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentSpec};
use crate::trace::Trace;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run rho={rho} m={m} seed={seed}: {source}")]
    Run {
        rho: f64,
        m: usize,
        seed: u64,
        source: EngineError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("trace has {trace} ports but the experiment uses {spec}")]
    TracePorts { trace: usize, spec: usize },
    #[error("CSV output: {0}")]
    Csv(#[from] csv::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

/// One CSV row. Counts are pooled over seeds; means and standard deviations
/// are across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub rho: f64,
    pub m: usize,
    pub aux2_enabled: bool,
    pub seeds: usize,
    pub offered: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub plr_mean: f64,
    pub plr_std: f64,
    pub delay_mean: f64,
    pub delay_std: f64,
    /// Only set on ablation rows: loss removed by Aux-II, in percent.
    pub reduction_pct: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub rho: f64,
    pub m: usize,
    pub aux2_enabled: bool,
    /// Arrival slots per run (after any escalation).
    pub horizon: u64,
    /// Per-seed metrics in seed order.
    pub runs: Vec<RunMetrics>,
    pub pooled: RunMetrics,
    pub summary: Summary,
    pub reduction_pct: Option<f64>,
}

impl PointResult {
    pub fn row(&self) -> CsvRow {
        CsvRow {
            rho: self.rho,
            m: self.m,
            aux2_enabled: self.aux2_enabled,
            seeds: self.runs.len(),
            offered: self.pooled.offered,
            delivered: self.pooled.delivered,
            dropped: self.pooled.total_dropped(),
            plr_mean: self.summary.plr_mean,
            plr_std: self.summary.plr_std,
            delay_mean: self.summary.delay_mean,
            delay_std: self.summary.delay_std,
            reduction_pct: self.reduction_pct,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    /// Replay this trace instead of generating traffic. Each job then uses
    /// the trace for arrivals and its seed only for arrival ordering.
    pub trace: Option<&'a Trace>,
}

struct Job {
    group: usize,
    plan: RunPlan,
}

/// A (rho, m) grid cell with one entry per Aux-II flag.
struct Group {
    rho: f64,
    m: usize,
    flags: Vec<bool>,
    horizon: u64,
}

fn switch_config(spec: &ExperimentSpec, m: usize, aux2: bool) -> SwitchConfig {
    SwitchConfig {
        n_ports: spec.n_ports,
        m_aux1: m,
        k_aux2: spec.k_aux2,
        max_circulations: spec.max_circulations,
        aux2_enabled: aux2,
        aux1_delays: spec.aux1_delays.clone(),
    }
}

fn execute(
    jobs: &[Job],
    trace: Option<&Trace>,
    pool: &rayon::ThreadPool,
) -> Result<Vec<RunMetrics>, ExperimentError> {
    pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let plan = &job.plan;
                let out = match trace {
                    Some(t) => run_with_source(plan, t.replay()),
                    None => run(plan),
                };
                out.map(|o| o.metrics)
                    .map_err(|source| ExperimentError::Run {
                        rho: plan.traffic.rho,
                        m: plan.switch.m_aux1,
                        seed: plan.traffic.seed,
                        source,
                    })
            })
            .collect()
    })
}

fn jobs_for(spec: &ExperimentSpec, groups: &[Group], which: &[usize]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &g in which {
        let group = &groups[g];
        for &aux2 in &group.flags {
            for &seed in &spec.seeds {
                let plan = RunPlan::new(switch_config(spec, group.m, aux2), group.rho, seed)
                    .with_horizon(group.horizon, spec.warmup);
                jobs.push(Job { group: g, plan });
            }
        }
    }
    jobs
}

/// Runs every grid point of `spec` and returns one result per CSV row, in
/// row order: rho, then m, then Aux-II on before off.
pub fn run_points(
    spec: &ExperimentSpec,
    opts: RunOptions<'_>,
) -> Result<Vec<PointResult>, ExperimentError> {
    spec.validate()?;
    if let Some(t) = opts.trace {
        if t.n_ports != spec.n_ports {
            return Err(ExperimentError::TracePorts {
                trace: t.n_ports,
                spec: spec.n_ports,
            });
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()?;
    let flags = if spec.ablation {
        vec![true, false]
    } else {
        vec![spec.aux2_enabled]
    };
    let mut groups: Vec<Group> = spec
        .rho_values
        .iter()
        .flat_map(|&rho| spec.m_values.iter().map(move |&m| (rho, m)))
        .map(|(rho, m)| Group {
            rho,
            m,
            flags: flags.clone(),
            horizon: spec.horizon,
        })
        .collect();

    let all: Vec<usize> = (0..groups.len()).collect();
    let jobs = jobs_for(spec, &groups, &all);
    info!(
        "{}: {} runs over {} grid points",
        spec.name,
        jobs.len(),
        groups.len()
    );
    let mut metrics: Vec<Vec<RunMetrics>> = vec![Vec::new(); groups.len()];
    for (job, m) in jobs.iter().zip(execute(&jobs, opts.trace, &pool)?) {
        metrics[job.group].push(m);
    }

    if spec.escalate_zero_plr && opts.trace.is_none() {
        for _ in 0..4 {
            let mut short = Vec::new();
            for (g, group) in groups.iter_mut().enumerate() {
                let offered: u64 = metrics[g].iter().map(|m| m.offered).sum();
                let dropped: u64 = metrics[g].iter().map(RunMetrics::total_dropped).sum();
                if dropped > 0 || offered >= spec.zero_plr_min_offered || group.rho == 0.0 {
                    continue;
                }
                let per_slot =
                    spec.n_ports as f64 * group.rho * (spec.seeds.len() * group.flags.len()) as f64;
                let needed = (spec.zero_plr_min_offered as f64 / per_slot * 1.1).ceil() as u64;
                let horizon = (spec.warmup + needed).max(group.horizon * 2);
                debug!(
                    "escalating rho={} m={}: {} offered, horizon {} -> {}",
                    group.rho, group.m, offered, group.horizon, horizon
                );
                group.horizon = horizon;
                short.push(g);
            }
            if short.is_empty() {
                break;
            }
            let jobs = jobs_for(spec, &groups, &short);
            for &g in &short {
                metrics[g].clear();
            }
            for (job, m) in jobs.iter().zip(execute(&jobs, None, &pool)?) {
                metrics[job.group].push(m);
            }
        }
    }

    let seeds = spec.seeds.len();
    let mut results = Vec::new();
    for (group, runs) in groups.iter().zip(metrics) {
        let mut per_flag: Vec<PointResult> = Vec::new();
        for (i, &aux2) in group.flags.iter().enumerate() {
            let runs = runs[i * seeds..(i + 1) * seeds].to_vec();
            let mut pooled = RunMetrics::new();
            runs.iter().for_each(|r| pooled.merge(r));
            let summary = aggregate(&runs)?;
            per_flag.push(PointResult {
                rho: group.rho,
                m: group.m,
                aux2_enabled: aux2,
                horizon: group.horizon,
                runs,
                pooled,
                summary,
                reduction_pct: None,
            });
        }
        if let [with, without] = per_flag.as_mut_slice() {
            for (a, b) in with.runs.iter().zip(&without.runs) {
                loss_reduction(a, b)?;
            }
            let pct = loss_reduction(&with.pooled, &without.pooled)?;
            with.reduction_pct = Some(pct);
            without.reduction_pct = Some(pct);
        }
        for p in &per_flag {
            info!(
                "rho={} m={} aux2={} plr={:.3e} delay={:.3}",
                p.rho, p.m, p.aux2_enabled, p.summary.plr_mean, p.summary.delay_mean
            );
        }
        results.extend(per_flag);
    }
    Ok(results)
}

pub fn run_experiment(
    spec: &ExperimentSpec,
    opts: RunOptions<'_>,
) -> Result<Vec<CsvRow>, ExperimentError> {
    Ok(run_points(spec, opts)?
        .iter()
        .map(PointResult::row)
        .collect())
}

/// Writes the header and rows.
pub fn write_csv<W: Write>(w: W, rows: &[CsvRow]) -> Result<(), ExperimentError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    writer.write_record([
        "rho",
        "m",
        "aux2_enabled",
        "seeds",
        "offered",
        "delivered",
        "dropped",
        "plr_mean",
        "plr_std",
        "delay_mean",
        "delay_std",
        "reduction_pct",
    ])?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, FigurePreset};

    fn small(text: &str) -> ExperimentSpec {
        parse_config(text).unwrap()
    }

    #[test]
    fn zero_load_point() {
        let spec = small("rho = 0\nm = 8\nseeds = 2\nhorizon = 1000\nwarmup = 10");
        let rows = run_experiment(&spec, RunOptions::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].plr_mean, 0.0);
        assert_eq!(rows[0].delay_mean, 0.0);
        assert_eq!(rows[0].offered, 0);
    }

    #[test]
    fn header_always_present() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "rho,m,aux2_enabled,seeds,offered,delivered,dropped,plr_mean,plr_std,delay_mean,delay_std,reduction_pct\n"
        );
    }

    #[test]
    fn row_order_and_pairing() {
        let spec = small(
            "preset = fig3b\nrho = 0.5, 0.9\nm = 4, 8\nseeds = 2\nhorizon = 2000\nwarmup = 100",
        );
        let rows = run_experiment(&spec, RunOptions::default()).unwrap();
        let keys: Vec<_> = rows.iter().map(|r| (r.rho, r.m, r.aux2_enabled)).collect();
        assert_eq!(
            keys,
            vec![
                (0.5, 4, true),
                (0.5, 4, false),
                (0.5, 8, true),
                (0.5, 8, false),
                (0.9, 4, true),
                (0.9, 4, false),
                (0.9, 8, true),
                (0.9, 8, false),
            ]
        );
        for pair in rows.chunks(2) {
            assert_eq!(pair[0].offered, pair[1].offered);
            assert_eq!(pair[0].reduction_pct, pair[1].reduction_pct);
            assert!(pair[0].reduction_pct.is_some());
        }
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let spec = small("rho = 0.8\nm = 8, 16\nseeds = 3\nhorizon = 3000\nwarmup = 100");
        let one = run_experiment(
            &spec,
            RunOptions {
                workers: 1,
                trace: None,
            },
        )
        .unwrap();
        let four = run_experiment(
            &spec,
            RunOptions {
                workers: 4,
                trace: None,
            },
        )
        .unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn escalation_reaches_offered_floor() {
        let mut spec = ExperimentSpec::preset(FigurePreset::Fig2a);
        spec.rho_values = vec![0.05];
        spec.m_values = vec![64];
        spec.seeds = vec![0];
        spec.n_ports = 4;
        spec.horizon = 1000;
        spec.warmup = 0;
        spec.zero_plr_min_offered = 20_000;
        let pts = run_points(&spec, RunOptions::default()).unwrap();
        assert_eq!(pts[0].pooled.total_dropped(), 0);
        assert!(pts[0].pooled.offered >= spec.zero_plr_min_offered);
        assert!(pts[0].horizon > 1000);
    }

    #[test]
    fn trace_port_mismatch() {
        let trace = Trace::generate(
            fdlswitch_core::TrafficConfig {
                rho: 0.5,
                seed: 0,
                n_ports: 4,
            },
            100,
        )
        .unwrap();
        let spec = small("rho = 0.5\nm = 8\nseeds = 1\nhorizon = 100\nwarmup = 0");
        let err = run_points(
            &spec,
            RunOptions {
                workers: 1,
                trace: Some(&trace),
            },
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ExperimentError::TracePorts { trace: 4, spec: 32 }
        ));
    }
}
