use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{CampaignConfig, CellOffsets};
use super::output::{indexed, num, opt_num, tree_columns, write_json, Stamp, Table};
use crate::analytic::Engine;
use crate::error::{Error, Result};
use crate::gains::GainMatrix;
use crate::ma_schemes::{Scheme, ThresholdTree};
use crate::mcs::{run_mcs, Detection, RunPlan};
use crate::optimizer::{
    compare_ma, even_offsets, offset_grid, offset_heatmap, optimize_ntx_pair, optimize_scheme, threshold_scan,
    SweepParameter, SweepSpec,
};
use crate::protocol::{member_seed, run_seed_ensemble};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analytic,
    SweepThreshold,
    SweepNtx,
    SweepOffset,
    CompareMa,
    Protocol,
    Validate,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Analytic,
        Command::SweepThreshold,
        Command::SweepNtx,
        Command::SweepOffset,
        Command::CompareMa,
        Command::Protocol,
        Command::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Analytic => "analytic",
            Command::SweepThreshold => "sweep-threshold",
            Command::SweepNtx => "sweep-ntx",
            Command::SweepOffset => "sweep-offset",
            Command::CompareMa => "compare-ma",
            Command::Protocol => "protocol",
            Command::Validate => "validate",
        }
    }

    /// K used when the configuration leaves it open.
    pub fn default_num_tx(self) -> usize {
        match self {
            Command::Protocol => 4,
            _ => 2,
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// False when an agreement check failed.
    pub passed: bool,
    /// Human-readable summary lines.
    pub notes: Vec<String>,
}

/// Resolves the command defaults, builds a worker pool of
/// `config.workers` threads and runs the command into `config.out`.
pub fn run(command: Command, config: &CampaignConfig) -> Result<Outcome> {
    let mut cfg = config.clone();
    cfg.resolve(command.default_num_tx());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    std::fs::create_dir_all(&cfg.out)?;
    let out = cfg.out.clone();
    pool.install(|| match command {
        Command::Analytic => analytic(&mut cfg, &out),
        Command::SweepThreshold => sweep_threshold(&mut cfg, &out),
        Command::SweepNtx => sweep_ntx(&mut cfg, &out),
        Command::SweepOffset => sweep_offset(&mut cfg, &out),
        Command::CompareMa => compare(&mut cfg, &out),
        Command::Protocol => protocol(&mut cfg, &out),
        Command::Validate => validate(&mut cfg, &out),
    })
}

fn strings<T: ToString>(v: &[T]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

fn uca_notes(s: &Scenario) -> Vec<String> {
    s.physical
        .uca_violations()
        .into_iter()
        .map(|i| {
            format!(
                "warning: TX {} violates r < 0.15 d; the point-receiver model is loose",
                i + 1
            )
        })
        .collect()
}

#[derive(Serialize)]
struct SchemeSummary {
    scheme: Scheme,
    p_e_sys: f64,
    p_e: Vec<f64>,
    false_alarm: Vec<f64>,
    miss: Vec<f64>,
    mi_per_tx: Vec<f64>,
    mi_system: f64,
    thresholds: Vec<u64>,
}

#[derive(Serialize)]
struct AnalyticReport {
    warnings: Vec<String>,
    schemes: Vec<SchemeSummary>,
}

fn analytic(cfg: &mut CampaignConfig, out: &Path) -> Result<Outcome> {
    let scenario = cfg.scenario.build()?;
    let engine = Engine::with_cap(cfg.enumeration_cap);
    let stamp = Stamp::new("analytic", cfg)?;
    let warnings = uca_notes(&scenario);
    let mut schemes = Vec::new();
    for scheme in [Scheme::Noma, Scheme::Tdma, Scheme::Mdma] {
        let opt = optimize_scheme(&engine, &scenario, scheme)?;
        let r = opt.result;
        schemes.push(SchemeSummary {
            scheme,
            p_e_sys: r.system,
            false_alarm: r.rates.iter().map(|x| x.false_alarm).collect(),
            miss: r.rates.iter().map(|x| x.miss).collect(),
            p_e: r.per_tx,
            mi_per_tx: r.mi_per_tx,
            mi_system: r.mi_system,
            thresholds: opt.thresholds,
        });
    }
    let header = strings(&["scheme", "tx", "p_e", "false_alarm", "miss", "mi"]);
    let mut table = Table::create(&out.join("analytic.csv"), &stamp, &[], &header)?;
    for s in &schemes {
        for j in 0..s.p_e.len() {
            table.row(&[
                s.scheme.name().to_string(),
                (j + 1).to_string(),
                num(s.p_e[j]),
                num(s.false_alarm[j]),
                num(s.miss[j]),
                num(s.mi_per_tx[j]),
            ])?;
        }
    }
    let mut notes: Vec<String> = schemes
        .iter()
        .map(|s| {
            format!(
                "{:5} P_e,sys = {:.4e}  I_sys = {:.4} bit/T",
                s.scheme.name(),
                s.p_e_sys,
                s.mi_system
            )
        })
        .collect();
    notes.extend(warnings.iter().cloned());
    let files = vec![
        table.finish()?,
        write_json(
            &out.join("analytic.json"),
            &stamp,
            &AnalyticReport { warnings, schemes },
        )?,
    ];
    Ok(Outcome {
        files,
        passed: true,
        notes,
    })
}

fn require_two(scenario: &Scenario, what: &str) -> Result<()> {
    if scenario.num_tx() != 2 {
        return Err(Error::config("scenario.num_tx", format!("{what} needs exactly 2 TXs")));
    }
    Ok(())
}

fn sweep_threshold(cfg: &mut CampaignConfig, out: &Path) -> Result<Outcome> {
    let max = cfg.scenario.n_tx_max;
    cfg.scenario.n_tx.get_or_insert_with(|| vec![max, max / 2.0]);
    let scenario = cfg.scenario.build()?;
    require_two(&scenario, "the threshold sweep")?;
    let gains = GainMatrix::build(&scenario)?;
    let max_tau = *cfg
        .sweep
        .max_tau
        .get_or_insert_with(|| (1.5 * (gains.own(0) + gains.own(1))).ceil() as u64);
    let stamp = Stamp::new("sweep-threshold", cfg)?;
    let engine = Engine::with_cap(cfg.enumeration_cap);
    let (tau1, rows) = threshold_scan(&engine, &gains, scenario.physical.noise_mean, max_tau)?;
    let path = out.join("threshold_scan.csv");
    let extra = [
        format!("tau_1_star: {tau1}"),
        format!("coupling_shift: {}", gains.own(0).round()),
    ];
    let mut table = Table::create(&path, &stamp, &extra, &strings(&["tau", "p_e_1", "p_e_2_coupled"]))?;
    for r in &rows {
        table.row(&[r.tau.to_string(), num(r.p_e_1), num(r.p_e_2_coupled)])?;
    }
    let best2 = rows
        .iter()
        .min_by(|a, b| a.p_e_2_coupled.total_cmp(&b.p_e_2_coupled))
        .map(|r| r.tau)
        .unwrap_or(0);
    Ok(Outcome {
        files: vec![table.finish()?],
        passed: true,
        notes: vec![format!("tau_1* = {tau1}, best coupled tau_2^0 = {best2}")],
    })
}

fn sweep_ntx(cfg: &mut CampaignConfig, out: &Path) -> Result<Outcome> {
    let scenario = cfg.scenario.build()?;
    require_two(&scenario, "the N_TX sweep")?;
    let stamp = Stamp::new("sweep-ntx", cfg)?;
    let engine = Engine::with_cap(cfg.enumeration_cap);
    let map = optimize_ntx_pair(&engine, &scenario, &cfg.sweep.n_tx_2, &cfg.sweep.delta_n_tx)?;
    let mut header = strings(&["n_tx_2", "delta_n_tx", "n_tx_1", "p_e_sys"]);
    header.extend(tree_columns(2));
    let mut table = Table::create(&out.join("ntx_heatmap.csv"), &stamp, &[], &header)?;
    for c in &map.cells {
        let mut row = vec![
            num(c.n_tx_2),
            num(c.delta_n_tx),
            num(c.n_tx_2 + c.delta_n_tx),
            opt_num(c.p_e_sys),
        ];
        let mut taus = strings(&c.thresholds);
        taus.resize(3, String::new());
        row.extend(taus);
        table.row(&row)?;
    }
    let heat = table.finish()?;
    let mut best = Table::create(
        &out.join("ntx_argmin.csv"),
        &stamp,
        &[],
        &strings(&["n_tx_2", "best_delta_n_tx"]),
    )?;
    for &(n2, d) in &map.argmin {
        best.row(&[num(n2), opt_num(d)])?;
    }
    Ok(Outcome {
        files: vec![heat, best.finish()?],
        passed: true,
        notes: vec![],
    })
}

fn sweep_offset(cfg: &mut CampaignConfig, out: &Path) -> Result<Outcome> {
    let scenario = cfg.scenario.build()?;
    require_two(&scenario, "the offset sweep")?;
    if cfg.sweep.offset_cells == 0 {
        return Err(Error::config("sweep.offset_cells", "must be >= 1"));
    }
    let stamp = Stamp::new("sweep-offset", cfg)?;
    let engine = Engine::with_cap(cfg.enumeration_cap);
    let grid = offset_grid(cfg.sweep.offset_cells, scenario.physical.symbol_period);
    let cells = offset_heatmap(&engine, &scenario, &grid)?;
    let mut header = strings(&["t_off_1", "t_off_2", "p_e_sys"]);
    header.extend(tree_columns(2));
    let mut table = Table::create(&out.join("offset_heatmap.csv"), &stamp, &[], &header)?;
    for c in &cells {
        let mut row = vec![num(c.t_off_1), num(c.t_off_2), num(c.p_e_sys)];
        row.extend(strings(&c.thresholds));
        table.row(&row)?;
    }
    let worst = cells.iter().map(|c| c.p_e_sys).fold(0.0, f64::max);
    let best = cells.iter().map(|c| c.p_e_sys).fold(1.0, f64::min);
    Ok(Outcome {
        files: vec![table.finish()?],
        passed: true,
        notes: vec![format!("P_e,sys ranges over [{best:.3e}, {worst:.3e}]")],
    })
}

fn compare(cfg: &mut CampaignConfig, out: &Path) -> Result<Outcome> {
    let scenario = cfg.scenario.build()?;
    let spec = SweepSpec {
        parameter: cfg.sweep.parameter,
        grid: cfg.sweep.grid()?,
        cases: cfg.sweep.cases.clone(),
        random_samples: cfg.sweep.random_samples,
        seed: cfg.seed,
    };
    spec.validate()?;
    let stamp = Stamp::new("compare-ma", cfg)?;
    let engine = Engine::with_cap(cfg.enumeration_cap);
    let rows = compare_ma(&engine, &scenario, &spec)?;
    let axis = match spec.parameter {
        SweepParameter::SnrDb => "snr_db",
        SweepParameter::NumTx => "num_tx",
    };
    let header = strings(&[axis, "scheme", "mi_system", "p_e_sys", "n_tx"]);
    let mut table = Table::create(&out.join("compare_ma.csv"), &stamp, &[], &header)?;
    for r in &rows {
        let n_tx: Vec<String> = r.emitted.iter().map(|&n| num(n)).collect();
        table.row(&[
            num(r.point),
            r.label.clone(),
            num(r.mi_system),
            num(r.p_e_sys),
            n_tx.join(";"),
        ])?;
    }
    Ok(Outcome {
        files: vec![table.finish()?],
        passed: true,
        notes: vec![format!("{} rows", rows.len())],
    })
}

#[derive(Serialize)]
struct ProtocolSummary {
    member_seeds: Vec<u64>,
    /// Ensemble mean of P̂_e,sys over the last `tail_window` iterations.
    tail_window: usize,
    tail_mean: f64,
    breakpoints: Vec<usize>,
    beacons_per_member: Vec<usize>,
    last_beacon_per_member: Vec<Option<usize>>,
}

fn protocol(cfg: &mut CampaignConfig, out: &Path) -> Result<Outcome> {
    let scenario = cfg.scenario.build()?;
    let schedule = cfg.schedule.build(cfg.protocol.n_iter)?;
    cfg.protocol.validate(&scenario)?;
    schedule.validate(&scenario, cfg.protocol.n_iter)?;
    if cfg.n_seed == 0 {
        return Err(Error::config("n_seed", "need at least one seed"));
    }
    let stamp = Stamp::new("protocol", cfg)?;
    let seeds: Vec<u64> = (0..cfg.n_seed as u64).map(|i| member_seed(cfg.seed, i)).collect();
    let (trajectories, stats) = run_seed_ensemble(&scenario, &cfg.protocol, &schedule, &seeds)?;
    let k = scenario.num_tx();
    let dir = out.join("trajectories");
    std::fs::create_dir_all(&dir)?;
    let mut header = strings(&["iteration", "p_e_sys"]);
    header.extend(indexed("p_e", k));
    header.extend(strings(&["beacon", "i_wcam"]));
    header.extend(indexed("t_off", k));
    header.extend(strings(&["n_tx_2", "threshold_digest"]));
    let width = (cfg.n_seed - 1).to_string().len().max(3);
    let mut files = trajectories
        .par_iter()
        .enumerate()
        .map(|(m, t)| {
            let path = dir.join(format!("member_{m:0width$}.csv"));
            let extra = [format!("member: {m}"), format!("member_seed: {}", t.seed)];
            let mut table = Table::create(&path, &stamp, &extra, &header)?;
            for r in &t.records {
                let mut row = vec![r.iteration.to_string(), num(r.p_e_sys)];
                row.extend(r.p_e.iter().map(|&p| num(p)));
                row.push(u8::from(r.beacon).to_string());
                row.push(num(r.i_wcam));
                row.extend(r.offsets.iter().map(|&o| num(o)));
                row.push(r.emitted.get(1).map(|&n| num(n)).unwrap_or_default());
                row.push(r.threshold_digest());
                table.row(&row)?;
            }
            table.finish()
        })
        .collect::<Result<Vec<_>>>()?;

    let header = strings(&[
        "iteration",
        "mean",
        "median",
        "p5",
        "p25",
        "p75",
        "p95",
        "beacon_rate",
        "offset_diff_mean",
        "offset_diff_p5",
        "offset_diff_p95",
    ]);
    let mut table = Table::create(&out.join("ensemble.csv"), &stamp, &[], &header)?;
    for r in &stats {
        table.row(&[
            r.iteration.to_string(),
            num(r.mean),
            num(r.median),
            num(r.p5),
            num(r.p25),
            num(r.p75),
            num(r.p95),
            num(r.beacon_rate),
            opt_num(r.offset_diff_mean),
            opt_num(r.offset_diff_p5),
            opt_num(r.offset_diff_p95),
        ])?;
    }
    files.push(table.finish()?);

    let tail_window = stats.len().min(100);
    let tail = &stats[stats.len() - tail_window..];
    let tail_mean = if tail.is_empty() {
        f64::NAN
    } else {
        tail.iter().map(|r| r.mean).sum::<f64>() / tail.len() as f64
    };
    let summary = ProtocolSummary {
        member_seeds: seeds,
        tail_window,
        tail_mean,
        breakpoints: schedule.breakpoints(),
        beacons_per_member: trajectories
            .iter()
            .map(|t| t.records.iter().filter(|r| r.beacon).count())
            .collect(),
        last_beacon_per_member: trajectories
            .iter()
            .map(|t| t.records.iter().rev().find(|r| r.beacon).map(|r| r.iteration))
            .collect(),
    };
    files.push(write_json(&out.join("protocol_summary.json"), &stamp, &summary)?);
    let notes = vec![format!(
        "{} members x {} iterations, mean P_e,sys over the last {} iterations: {:.4e}",
        trajectories.len(),
        cfg.protocol.n_iter,
        tail_window,
        tail_mean
    )];
    Ok(Outcome {
        files,
        passed: true,
        notes,
    })
}

/// One cell of the agreement matrix.
#[derive(Debug, Clone, Serialize)]
pub struct AgreementCell {
    pub num_tx: usize,
    pub isi_length: usize,
    pub snr_db: Option<f64>,
    pub offsets: CellOffsets,
    pub p_e_analytic: f64,
    pub p_e_empirical: f64,
    pub sigma: f64,
    pub slots: u64,
    pub errors: u64,
    pub agrees: bool,
}

#[derive(Serialize)]
struct ValidateReport {
    cells: Vec<AgreementCell>,
    agreed: usize,
    fraction: f64,
    required_fraction: f64,
    negative_control: Option<AgreementCell>,
    passed: bool,
}

/// Runs one agreement cell. With `sabotage` the simulated receiver uses a
/// root threshold of 0 while the analytic side keeps the optimum.
pub fn agreement_cell(
    engine: &Engine,
    scenario: &Scenario,
    symbols: u64,
    seed: u64,
    sabotage: bool,
) -> Result<AgreementCell> {
    let gains = GainMatrix::build(scenario)?;
    let noise = scenario.physical.noise_mean;
    let tree = crate::optimizer::optimize_thresholds(engine, &gains, noise)?;
    let analytic = engine.noma(&gains, noise, &tree)?;
    let mut simulated: ThresholdTree = tree.clone();
    if sabotage {
        simulated.set(0, 0, 0);
    }
    let plan = RunPlan::new(Detection::Noma { tree: simulated }, scenario, seed).with_symbols(symbols);
    let emp = run_mcs(scenario, &plan)?;
    let snr = scenario.physical.noise_mean;
    Ok(AgreementCell {
        num_tx: scenario.num_tx(),
        isi_length: scenario.isi_length(),
        offsets: CellOffsets::Scenario,
        snr_db: (snr > 0.0).then(|| 20.0 * (scenario.reference_mean() / snr).log10()),
        p_e_analytic: analytic.system,
        p_e_empirical: emp.p_e_sys,
        sigma: emp.sigma_sys(&analytic.per_tx),
        slots: emp.slots,
        errors: emp.total_errors(),
        agrees: emp.agrees_with(&analytic),
    })
}

fn validate(cfg: &mut CampaignConfig, out: &Path) -> Result<Outcome> {
    let v = cfg.validate.clone();
    v.validate()?;
    let mut scenarios = Vec::new();
    for &k in &v.num_tx {
        for &l in &v.isi_length {
            for &snr in &v.snr_db {
                for &placement in &v.offsets {
                    let mut sc = cfg.scenario.clone();
                    sc.num_tx = Some(k);
                    sc.isi_length = l;
                    sc.snr_db = snr;
                    if placement == CellOffsets::Even {
                        sc.offsets = Some(even_offsets(k, sc.symbol_period));
                    }
                    scenarios.push((placement, sc.build()?));
                }
            }
        }
    }
    let stamp = Stamp::new("validate", cfg)?;
    let engine = Engine::with_cap(cfg.enumeration_cap);
    let mut cells = Vec::new();
    for (i, (placement, s)) in scenarios.iter().enumerate() {
        let mut cell = agreement_cell(&engine, s, v.symbols, member_seed(cfg.seed, i as u64), false)?;
        cell.offsets = *placement;
        cells.push(cell);
    }
    let negative_control = if v.negative_control {
        let seed = member_seed(cfg.seed, scenarios.len() as u64);
        let (placement, s) = &scenarios[0];
        let mut cell = agreement_cell(&engine, s, v.symbols, seed, true)?;
        cell.offsets = *placement;
        Some(cell)
    } else {
        None
    };
    let agreed = cells.iter().filter(|c| c.agrees).count();
    let fraction = agreed as f64 / cells.len() as f64;
    let control_ok = negative_control.as_ref().is_none_or(|c| !c.agrees);
    let passed = fraction >= v.required_fraction && control_ok;

    let header = strings(&[
        "num_tx",
        "isi_length",
        "snr_db",
        "offsets",
        "p_e_analytic",
        "p_e_empirical",
        "sigma",
        "lo_3sigma",
        "hi_3sigma",
        "slots",
        "errors",
        "agrees",
        "negative_control",
    ]);
    let mut table = Table::create(&out.join("validate.csv"), &stamp, &[], &header)?;
    let tagged = cells
        .iter()
        .map(|c| (c, false))
        .chain(negative_control.iter().map(|c| (c, true)));
    for (c, control) in tagged {
        table.row(&[
            c.num_tx.to_string(),
            c.isi_length.to_string(),
            c.snr_db.map(num).unwrap_or_else(|| "inf".into()),
            match c.offsets {
                CellOffsets::Scenario => "scenario".to_string(),
                CellOffsets::Even => "even".to_string(),
            },
            num(c.p_e_analytic),
            num(c.p_e_empirical),
            num(c.sigma),
            num(c.p_e_analytic - 3.0 * c.sigma),
            num(c.p_e_analytic + 3.0 * c.sigma),
            c.slots.to_string(),
            c.errors.to_string(),
            u8::from(c.agrees).to_string(),
            u8::from(control).to_string(),
        ])?;
    }
    let mut notes = vec![format!(
        "{agreed}/{} cells within 3 sigma ({:.1}%, need {:.1}%)",
        cells.len(),
        100.0 * fraction,
        100.0 * v.required_fraction
    )];
    if let Some(c) = &negative_control {
        notes.push(format!(
            "negative control {}: analytic {:.4e}, simulated {:.4e}",
            if c.agrees { "NOT flagged" } else { "flagged" },
            c.p_e_analytic,
            c.p_e_empirical
        ));
    }
    let report = ValidateReport {
        cells,
        agreed,
        fraction,
        required_fraction: v.required_fraction,
        negative_control,
        passed,
    };
    let files = vec![
        table.finish()?,
        write_json(&out.join("validate.json"), &stamp, &report)?,
    ];
    Ok(Outcome { files, passed, notes })
}
