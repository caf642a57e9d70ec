//! One runner per scenario: resolves defaults, drives the engines, and
//! returns the artifact tables plus the fully resolved configuration that
//! lands in the manifest.

use crate::config::{
    BrownianEnsembleConfig, ChiDistributionConfig, EsdCompareConfig, S2ChannelsConfig,
    ScenarioConfig, StaticPairConfig, WitnessScatterConfig,
};
use crate::output::{ArtifactSet, Cell, Format, Table};
use anyhow::{bail, Context, Result};
use num_complex::Complex;
use qtraj_core::classical::{
    static_pair_concurrence, static_pair_max_concurrence, sweep_diffusivity,
    ClassicalNoiseConfig, StochasticCouplingEngine,
};
use qtraj_core::quantum::{channel_binned_s2, esd_concurrence, esd_time, run_ensemble, DecayParams};
use qtraj_core::rng::RngStream;
use qtraj_core::spin::collective_operators;
use qtraj_core::witness::random_witness_density;
use rayon::prelude::*;
use serde_json::{json, Value};
use std::path::Path;

/// Result of a runner: tables to serialize, extra verbatim files, the
/// resolved config, and the headline line printed on stdout.
pub struct ScenarioOutput {
    pub tables: Vec<Table>,
    pub extra_files: Vec<(&'static str, String)>,
    pub resolved: Value,
    pub summary: String,
}

pub fn run(config: &ScenarioConfig, seed: u64) -> Result<ScenarioOutput> {
    match config {
        ScenarioConfig::StaticPair(c) => static_pair(c),
        ScenarioConfig::BrownianEnsemble(c) => brownian_ensemble(c, seed),
        ScenarioConfig::ChiDistribution(c) => chi_distribution(c, seed),
        ScenarioConfig::EsdCompare(c) => esd_compare(c, seed),
        ScenarioConfig::S2Channels(c) => s2_channels(c, seed),
        ScenarioConfig::WitnessScatter(c) => witness_scatter(c, seed),
    }
}

/// Writes the artifacts and the manifest; returns the written file names.
pub fn write_artifacts(
    out: ScenarioOutput,
    scenario: &str,
    seed: u64,
    dir: &Path,
    format: Format,
) -> Result<Vec<String>> {
    let mut set = ArtifactSet::new(dir);
    for table in &out.tables {
        set.add_table(table, format);
    }
    for (name, body) in out.extra_files {
        set.add_text(name, body);
    }
    set.write(scenario, seed, out.resolved)
}

fn rabi_frequency(g0: f64, delta: f64) -> f64 {
    (delta * delta + g0 * g0).sqrt()
}

fn static_pair(cfg: &StaticPairConfig) -> Result<ScenarioOutput> {
    if cfg.n_points < 2 {
        bail!("n_points must be at least 2, got {}", cfg.n_points);
    }
    let omega = rabi_frequency(cfg.g0, cfg.delta);
    let t_end = match cfg.t_end {
        Some(t) if t > 0.0 => t,
        Some(t) => bail!("t_end must be positive, got {t}"),
        None if omega > 0.0 => 2.0 * std::f64::consts::PI / omega,
        None => bail!("t_end must be given when g0 and delta are both zero"),
    };
    let mut table = Table::new("static_pair", &["t", "concurrence"]);
    let mut sum = 0.0;
    let mut peak = 0.0_f64;
    let n = cfg.n_points;
    for k in 0..n {
        let t = t_end * k as f64 / (n - 1) as f64;
        let c = static_pair_concurrence(cfg.g0, cfg.delta, t);
        // Trapezoid weights: half at the ends.
        sum += if k == 0 || k == n - 1 { 0.5 * c } else { c };
        peak = peak.max(c);
        table.push(vec![Cell::Float(t), Cell::Float(c)]);
    }
    let mean = sum / (n - 1) as f64;
    let resolved = json!({
        "scenario": "static-pair",
        "g0": cfg.g0,
        "delta": cfg.delta,
        "t_end": t_end,
        "n_points": n,
    });
    Ok(ScenarioOutput {
        tables: vec![table],
        extra_files: vec![],
        resolved,
        summary: format!(
            "static-pair: mean C = {mean:.6}, max C = {peak:.6}, ceiling = {:.6}",
            static_pair_max_concurrence(cfg.g0, cfg.delta)
        ),
    })
}

/// Default sweep grid: seven decades centred on the balanced point
/// `D = delta length^2` where diffusion and detuning time scales match.
fn default_diffusivities(delta: f64, length: f64) -> Vec<f64> {
    (-3..=3)
        .map(|k| delta * length * length * 10f64.powi(k))
        .collect()
}

/// Geometry and integration fields shared by the classical scenarios,
/// paired with one diffusivity value off the grid. `t_end` and
/// `r3_init` stay optional until [`classical_config`] resolves them.
struct MediatedPoint {
    g0: f64,
    length: f64,
    delta: f64,
    diffusivity: f64,
    tau: f64,
    epsilon: f64,
    dt: f64,
    t_end: Option<f64>,
    r3_init: Option<f64>,
}

fn classical_config(p: MediatedPoint) -> Result<ClassicalNoiseConfig<f64>> {
    let omega = rabi_frequency(p.g0, p.delta);
    let t_end = match p.t_end {
        Some(t) => t,
        None if omega > 0.0 => 250.0 / omega,
        None => bail!("t_end must be given when g0 and delta are both zero"),
    };
    let cfg = ClassicalNoiseConfig {
        g0: p.g0,
        length: p.length,
        delta: p.delta,
        diffusivity: p.diffusivity,
        tau: p.tau,
        epsilon: p.epsilon,
        dt: p.dt,
        t_end,
        r3_init: p.r3_init.unwrap_or(0.5 * p.length),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn brownian_ensemble(cfg: &BrownianEnsembleConfig, seed: u64) -> Result<ScenarioOutput> {
    let grid = match &cfg.diffusivities {
        Some(g) if g.is_empty() => bail!("diffusivities must not be empty"),
        Some(g) => g.clone(),
        None => default_diffusivities(cfg.delta, cfg.length),
    };
    let base = classical_config(MediatedPoint {
        g0: cfg.g0,
        length: cfg.length,
        delta: cfg.delta,
        diffusivity: grid[0],
        tau: cfg.tau,
        epsilon: cfg.epsilon,
        dt: cfg.dt,
        t_end: cfg.t_end,
        r3_init: cfg.r3_init,
    })?;
    let points = sweep_diffusivity(&base, &grid, cfg.n_traj, seed)?;
    let mut sweep = Table::new("diffusivity_sweep", &["D", "mean_C_over_Cmax", "stderr"]);
    let mut best = &points[0];
    for p in &points {
        if p.mean_c_over_cmax > best.mean_c_over_cmax {
            best = p;
        }
        sweep.push(vec![
            Cell::Float(p.diffusivity),
            Cell::Float(p.mean_c_over_cmax),
            Cell::Float(p.stderr),
        ]);
    }

    // Sample trajectories for the time-series file: the grid point closest
    // (logarithmically) to the balanced diffusivity, streams 0 and 1 of
    // that sweep point so the rows match the sweep's own realizations.
    let balanced = cfg.delta * cfg.length * cfg.length;
    let sample_index = (0..grid.len())
        .min_by(|&a, &b| {
            let da = (grid[a] / balanced).abs().ln().abs();
            let db = (grid[b] / balanced).abs().ln().abs();
            da.partial_cmp(&db).expect("finite grid")
        })
        .expect("non-empty grid");
    let mut sample_cfg = base;
    sample_cfg.diffusivity = grid[sample_index];
    let engine = StochasticCouplingEngine::new(sample_cfg)?;
    let stride = match cfg.record_stride {
        Some(0) => bail!("record_stride must be positive"),
        Some(s) => s,
        None => (engine.n_steps() / 1000).max(1),
    };
    let mut traj_table = Table::new("brownian_traj", &["t", "r3", "concurrence_12"]);
    for traj_index in 0..2u64 {
        let mut stream = RngStream::new(seed, (sample_index * cfg.n_traj) as u64 + traj_index);
        let traj = engine.run_trajectory(stride, &mut stream)?;
        for ((t, r3), c) in traj
            .times
            .iter()
            .zip(&traj.r3)
            .zip(&traj.concurrence)
        {
            traj_table.push(vec![Cell::Float(*t), Cell::Float(*r3), Cell::Float(*c)]);
        }
    }

    let resolved = json!({
        "scenario": "brownian-ensemble",
        "g0": cfg.g0,
        "length": cfg.length,
        "delta": cfg.delta,
        "diffusivities": grid,
        "tau": cfg.tau,
        "epsilon": cfg.epsilon,
        "dt": cfg.dt,
        "t_end": base.t_end,
        "r3_init": base.r3_init,
        "n_traj": cfg.n_traj,
        "record_stride": stride,
        "sample_diffusivity": grid[sample_index],
    });
    Ok(ScenarioOutput {
        tables: vec![traj_table, sweep],
        extra_files: vec![],
        resolved,
        summary: format!(
            "brownian-ensemble: max <C>/C_max = {:.4} at D = {:.4} ({} trajectories per point)",
            best.mean_c_over_cmax, best.diffusivity, cfg.n_traj
        ),
    })
}

fn chi_distribution(cfg: &ChiDistributionConfig, seed: u64) -> Result<ScenarioOutput> {
    let diffusivity = cfg
        .diffusivity
        .unwrap_or(cfg.delta * cfg.length * cfg.length);
    let base = classical_config(MediatedPoint {
        g0: cfg.g0,
        length: cfg.length,
        delta: cfg.delta,
        diffusivity,
        tau: cfg.tau,
        epsilon: cfg.epsilon,
        dt: cfg.dt,
        t_end: cfg.t_end,
        r3_init: cfg.r3_init,
    })?;
    let engine = StochasticCouplingEngine::new(base)?;
    let run = engine.chi_samples(cfg.n_traj, seed, 0)?;
    let mut hist = Table::new("chi_hist", &["bin_lo", "bin_hi", "count"]);
    for (lo, hi, count) in run.histogram(cfg.bin_width)? {
        hist.push(vec![Cell::Float(lo), Cell::Float(hi), Cell::Count(count)]);
    }
    let mean = run.mean_chi();
    let stderr = run.stderr_chi();
    let tail = run.tail_below(1.45);
    let summary_doc = json!({
        "mean": mean,
        "stderr": stderr,
        "tail_below_1.45": tail,
    });
    let mut summary_body =
        serde_json::to_string_pretty(&summary_doc).expect("summary serializes");
    summary_body.push('\n');
    let resolved = json!({
        "scenario": "chi-distribution",
        "g0": cfg.g0,
        "length": cfg.length,
        "delta": cfg.delta,
        "diffusivity": diffusivity,
        "tau": cfg.tau,
        "epsilon": cfg.epsilon,
        "dt": cfg.dt,
        "t_end": base.t_end,
        "r3_init": base.r3_init,
        "n_traj": cfg.n_traj,
        "bin_width": cfg.bin_width,
    });
    Ok(ScenarioOutput {
        tables: vec![hist],
        extra_files: vec![("chi_summary.json", summary_body)],
        resolved,
        summary: format!(
            "chi-distribution: mean chi/beta = {mean:.4} +- {stderr:.4}, tail below 1.45 = {tail:.4}"
        ),
    })
}

/// Decay parameters from the scalar weight of the doubly excited component;
/// the ground component carries the complementary amplitude.
fn decay_params(alpha: f64, gamma: f64) -> Result<DecayParams<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        bail!("alpha must lie in [0, 1], got {alpha}");
    }
    let delta = (1.0 - alpha * alpha).max(0.0).sqrt();
    DecayParams::new(
        Complex::new(alpha, 0.0),
        Complex::new(delta, 0.0),
        gamma,
    )
    .context("invalid decay parameters")
}

fn esd_compare(cfg: &EsdCompareConfig, seed: u64) -> Result<ScenarioOutput> {
    if cfg.n_times < 2 {
        bail!("n_times must be at least 2, got {}", cfg.n_times);
    }
    if cfg.gamma <= 0.0 || cfg.dt <= 0.0 || cfg.gamma_t_max <= 0.0 {
        bail!("gamma, dt, and gamma_t_max must be positive");
    }
    let params = decay_params(cfg.alpha, cfg.gamma)?;
    let dt_abs = cfg.dt / cfg.gamma;
    let mut record_steps = Vec::with_capacity(cfg.n_times);
    for k in 0..cfg.n_times {
        let gamma_t = cfg.gamma_t_max * k as f64 / (cfg.n_times - 1) as f64;
        let step = (gamma_t / cfg.dt).round() as usize;
        if let Some(&prev) = record_steps.last() {
            if step <= prev {
                bail!(
                    "dt = {} is too coarse to resolve {} grid points over gamma t = {}",
                    cfg.dt,
                    cfg.n_times,
                    cfg.gamma_t_max
                );
            }
        }
        record_steps.push(step);
    }
    let stats = run_ensemble(
        &params,
        cfg.mode.to_engine(),
        dt_abs,
        &record_steps,
        cfg.n_traj,
        &[2, 5, 50],
        seed,
    )?;
    let mut table = Table::new(
        "esd",
        &[
            "t", "C_mixed", "C_mc", "C_mc_err", "C_n2", "C_n2_err", "C_n5", "C_n5_err", "C_n50",
            "C_n50_err",
        ],
    );
    for (i, &t) in stats.times.iter().enumerate() {
        let mut row = vec![
            Cell::Float(t),
            Cell::Float(esd_concurrence(&params, t)?),
            Cell::Float(stats.mean_concurrence[i]),
            Cell::Float(stats.mean_concurrence_se[i]),
        ];
        for series in &stats.subensembles {
            row.push(Cell::Float(series.mean[i]));
            row.push(Cell::Float(series.se[i]));
        }
        table.push(row);
    }
    let esd = esd_time(&params);
    let resolved = json!({
        "scenario": "esd-compare",
        "alpha": cfg.alpha,
        "gamma": cfg.gamma,
        "mode": cfg.mode,
        "gamma_t_max": cfg.gamma_t_max,
        "n_times": cfg.n_times,
        "dt": cfg.dt,
        "n_traj": cfg.n_traj,
    });
    let esd_text = match esd {
        Some(t) => format!("{:.4}", params.gamma * t),
        None => "none".to_string(),
    };
    Ok(ScenarioOutput {
        tables: vec![table],
        extra_files: vec![],
        resolved,
        summary: format!(
            "esd-compare: mixed-state death at gamma t = {esd_text}, final <C> = {:.4} ({} trajectories)",
            stats.mean_concurrence.last().copied().unwrap_or(0.0),
            cfg.n_traj
        ),
    })
}

fn s2_channels(cfg: &S2ChannelsConfig, seed: u64) -> Result<ScenarioOutput> {
    if cfg.gamma <= 0.0 || cfg.dt <= 0.0 {
        bail!("gamma and dt must be positive");
    }
    let params = decay_params(cfg.alpha, cfg.gamma)?;
    let t_measure = match cfg.t_measure {
        Some(t) if t > 0.0 => t,
        Some(t) => bail!("t_measure must be positive, got {t}"),
        None => match esd_time(&params) {
            Some(t) => 2.0 * t,
            None => bail!(
                "t_measure must be given: the averaged state never loses entanglement \
                 for alpha = {} (no sudden death)",
                cfg.alpha
            ),
        },
    };
    let bins = channel_binned_s2(
        &params,
        cfg.mode.to_engine(),
        cfg.dt / cfg.gamma,
        t_measure,
        cfg.n_traj,
        seed,
    )?;
    let mut table = Table::new(
        "s2_channels",
        &["channel", "count_outcome0", "count_outcome2", "mean_S2"],
    );
    let mut parts = Vec::new();
    for (i, bin) in bins.iter().enumerate() {
        let label = format!("A{i}");
        parts.push(format!("{label} mean = {:.4}", bin.mean_s2()));
        table.push(vec![
            Cell::Text(label),
            Cell::Count(bin.count_outcome0),
            Cell::Count(bin.count_outcome2),
            Cell::Float(bin.mean_s2()),
        ]);
    }
    let resolved = json!({
        "scenario": "s2-channels",
        "alpha": cfg.alpha,
        "gamma": cfg.gamma,
        "mode": cfg.mode,
        "t_measure": t_measure,
        "dt": cfg.dt,
        "n_traj": cfg.n_traj,
    });
    Ok(ScenarioOutput {
        tables: vec![table],
        extra_files: vec![],
        resolved,
        summary: format!("s2-channels: {}", parts.join(", ")),
    })
}

fn witness_scatter(cfg: &WitnessScatterConfig, seed: u64) -> Result<ScenarioOutput> {
    if cfg.n_samples == 0 {
        bail!("n_samples must be at least 1");
    }
    let ops = collective_operators::<f64>(2)?;
    let samples: Result<Vec<(f64, f64)>, qtraj_core::CoreError> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut stream = RngStream::new(seed, i as u64);
            let (_, s2, concurrence) = random_witness_density(&ops, &mut stream)?;
            Ok((s2, concurrence))
        })
        .collect();
    let samples = samples?;
    let mut table = Table::new("scatter", &["s2_expectation", "concurrence"]);
    let mut below_one = 0usize;
    let mut min_c_below = f64::INFINITY;
    for &(s2, c) in &samples {
        if s2 < 1.0 {
            below_one += 1;
            min_c_below = min_c_below.min(c);
        }
        table.push(vec![Cell::Float(s2), Cell::Float(c)]);
    }
    let resolved = json!({
        "scenario": "witness-scatter",
        "n_samples": cfg.n_samples,
    });
    let min_text = if below_one > 0 {
        format!("{min_c_below:.4}")
    } else {
        "n/a".to_string()
    };
    Ok(ScenarioOutput {
        tables: vec![table],
        extra_files: vec![],
        resolved,
        summary: format!(
            "witness-scatter: {below_one} of {} samples with <S^2> < 1, min concurrence there = {min_text}",
            cfg.n_samples
        ),
    })
}
