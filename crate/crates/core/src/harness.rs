//! Seeded Monte-Carlo trials, PUPE, and Eb/N0 × B sweeps with CSV output.

use std::collections::HashSet;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::amp::amp_decode;
use crate::channel::transmit;
use crate::config::SystemConfig;
use crate::disambiguation::{disambiguate, DecodedList};
use crate::encoder::{compute_amplitudes, DeviceMessage};
use crate::error::{Error, Result};
use crate::occupancy::{lmmse_estimate, OccupancyEstimate};
use crate::outer_code::{load_check_table, ListDecodeOptions, OuterFactorGraph};
use crate::sensing::build_operators;

/// Header of the sweep CSV, in column order.
pub const CSV_HEADER: &str = "ebn0_db,bins,genie,trials,mean_pupe,stderr_pupe,mean_khat_abs_err,delta,rho,seconds";

/// Fraction of sent messages whose `(bin, payload)` is missing from the
/// decoded list. Duplicate sent messages count as recovered when the message
/// appears once.
pub fn compute_pupe(sent: &[DeviceMessage], decoded: &DecodedList) -> Result<f64> {
    if sent.is_empty() {
        return Err(Error::NoMessages);
    }
    let found: HashSet<(usize, &[u8])> = decoded.entries.iter().map(|e| (e.bin, e.payload.as_slice())).collect();
    let missed = sent
        .iter()
        .filter(|m| !found.contains(&(m.bin(), m.payload.as_slice())))
        .count();
    Ok(missed as f64 / sent.len() as f64)
}

/// Undersampling fraction `δ = n/(B·L·2^v)` and sparsity `ρ = K·L/n`.
pub fn operating_point(cfg: &SystemConfig) -> (f64, f64) {
    let n = cfg.n_total as f64;
    let delta = n / (cfg.bins as f64 * cfg.column_count() as f64);
    let rho = (cfg.active_devices * cfg.sections) as f64 / n;
    (delta, rho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub pupe: f64,
    /// True `K_b`.
    pub occupancy: Vec<usize>,
    /// `K̂_b` handed to the decoder.
    pub k_hat: Vec<f64>,
    pub decoded_count: usize,
    pub tau_trace: Vec<f64>,
    pub runtime: Duration,
}

impl TrialResult {
    pub fn khat_abs_err(&self) -> f64 {
        OccupancyEstimate {
            k_hat: self.k_hat.clone(),
            method: crate::occupancy::OccupancyMethod::Lmmse,
        }
        .mean_abs_error(&self.occupancy)
    }
}

/// Builds the outer graph named by the configuration.
pub fn build_graph(cfg: &SystemConfig) -> Result<OuterFactorGraph> {
    let table = cfg.check_table.as_ref().map(load_check_table).transpose()?;
    OuterFactorGraph::build(cfg.sections, cfg.info_sections, cfg.section_bits, table.as_deref())
}

/// List-decoding options implied by the configuration.
pub fn list_options(cfg: &SystemConfig) -> ListDecodeOptions {
    ListDecodeOptions {
        surplus: cfg.list_surplus,
        roots: (0..cfg.list_roots).collect(),
    }
}

/// A validated configuration with its outer graph, ready to run trials.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SystemConfig,
    graph: OuterFactorGraph,
}

impl Simulation {
    pub fn new(cfg: SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let graph = build_graph(&cfg)?;
        Ok(Simulation { cfg, graph })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &OuterFactorGraph {
        &self.graph
    }

    /// One trial, deterministic in `(cfg, trial_index)`: the generator seeded
    /// with `base_seed + trial_index` draws the K messages, then the sensing
    /// seed, then the channel noise.
    pub fn run_trial(&self, trial_index: u64) -> Result<TrialResult> {
        let seed = self.cfg.base_seed.wrapping_add(trial_index);
        self.trial_inner(seed).map_err(|e| Error::Trial {
            trial: trial_index,
            source: Box::new(e),
        })
    }

    fn trial_inner(&self, seed: u64) -> Result<TrialResult> {
        let start = Instant::now();
        let cfg = &self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let messages: Vec<DeviceMessage> = (0..cfg.active_devices)
            .map(|_| DeviceMessage::random(cfg, &mut rng))
            .collect();
        let ops = build_operators(cfg, rng.random())?;
        let amps = compute_amplitudes(cfg)?;
        let out = transmit(&messages, cfg, &self.graph, &ops, &amps, &mut rng)?;

        let k_hat = if cfg.genie_occupancy {
            OccupancyEstimate::genie(&out.occupancy)
        } else {
            lmmse_estimate(&out.y_pilot, amps.pilot, cfg.active_devices, cfg.bins)?
        };
        let amp = amp_decode(&out.y_main, &ops, &k_hat, cfg, &self.graph)?;
        let decoded = disambiguate(
            &amp.state,
            &amp.occupancy,
            &list_options(cfg),
            &self.graph,
            cfg.active_devices,
        )?;
        let pupe = if messages.is_empty() {
            0.0
        } else {
            compute_pupe(&messages, &decoded)?
        };
        Ok(TrialResult {
            seed,
            pupe,
            occupancy: out.occupancy,
            k_hat: k_hat.k_hat,
            decoded_count: decoded.len(),
            tau_trace: amp.tau_trace,
            runtime: start.elapsed(),
        })
    }

    /// Runs `cfg.trials` trials in parallel; results are in trial order.
    pub fn run_trials(&self) -> Result<Vec<TrialResult>> {
        (0..self.cfg.trials as u64)
            .into_par_iter()
            .map(|i| self.run_trial(i))
            .collect()
    }
}

/// Convenience wrapper: builds the simulation and runs one trial.
pub fn run_trial(cfg: &SystemConfig, trial_index: u64) -> Result<TrialResult> {
    Simulation::new(cfg.clone())?.run_trial(trial_index)
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub ebn0_db: f64,
    pub bins: usize,
    pub genie: bool,
}

impl SweepPoint {
    pub fn apply(&self, base: &SystemConfig) -> SystemConfig {
        let mut cfg = base.clone();
        cfg.ebn0_db = self.ebn0_db;
        cfg.bins = self.bins;
        cfg.genie_occupancy = self.genie;
        cfg
    }
}

/// Cartesian grid, Eb/N0 outermost, then bins, then genie flag.
pub fn grid(ebn0_db: &[f64], bins: &[usize], genie: &[bool]) -> Vec<SweepPoint> {
    let mut points = Vec::new();
    for &e in ebn0_db {
        for &b in bins {
            for &g in genie {
                points.push(SweepPoint {
                    ebn0_db: e,
                    bins: b,
                    genie: g,
                });
            }
        }
    }
    points
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub ebn0_db: f64,
    pub bins: usize,
    pub genie: bool,
    pub trials: usize,
    pub mean_pupe: f64,
    /// Sample standard deviation over `√trials`; zero for a single trial.
    pub stderr_pupe: f64,
    pub mean_khat_abs_err: f64,
    pub delta: f64,
    pub rho: f64,
    pub seconds: f64,
}

impl SweepRow {
    pub fn to_csv_line(&self, timing: bool) -> String {
        let seconds = if timing { format!("{:.3}", self.seconds) } else { "0".into() };
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.ebn0_db,
            self.bins,
            self.genie,
            self.trials,
            self.mean_pupe,
            self.stderr_pupe,
            self.mean_khat_abs_err,
            self.delta,
            self.rho,
            seconds
        )
    }
}

/// Running mean and variance, fed in trial order.
#[derive(Debug, Default, Clone, Copy)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
        }
    }
}

/// Aggregates trial results of one configuration into a row.
pub fn summarize(cfg: &SystemConfig, results: &[TrialResult], seconds: f64) -> SweepRow {
    let mut pupe = Welford::default();
    let mut khat = Welford::default();
    for r in results {
        pupe.push(r.pupe);
        khat.push(r.khat_abs_err());
    }
    let (delta, rho) = operating_point(cfg);
    SweepRow {
        ebn0_db: cfg.ebn0_db,
        bins: cfg.bins,
        genie: cfg.genie_occupancy,
        trials: results.len(),
        mean_pupe: pupe.mean,
        stderr_pupe: pupe.stderr(),
        mean_khat_abs_err: khat.mean,
        delta,
        rho,
        seconds,
    }
}

/// Runs every trial of one configuration and summarizes it.
pub fn run_point(cfg: &SystemConfig) -> Result<SweepRow> {
    let start = Instant::now();
    let sim = Simulation::new(cfg.clone())?;
    let results = sim.run_trials()?;
    Ok(summarize(cfg, &results, start.elapsed().as_secs_f64()))
}

/// Outcome of one sweep point; a failed point does not stop the sweep.
pub type SweepOutcome = std::result::Result<SweepRow, (SweepPoint, Error)>;

/// Runs the grid on top of `base`, calling `on_row` after each point (in
/// grid order). Errors from a point or from `on_row` are recorded and the
/// sweep continues.
pub fn run_sweep_with<F>(base: &SystemConfig, points: &[SweepPoint], mut on_row: F) -> Result<Vec<SweepOutcome>>
where
    F: FnMut(&SweepRow) -> Result<()>,
{
    if points.is_empty() {
        return Err(Error::Config("empty sweep grid".into()));
    }
    let mut outcomes = Vec::with_capacity(points.len());
    for point in points {
        let cfg = point.apply(base);
        let outcome = run_point(&cfg).and_then(|row| on_row(&row).map(|_| row));
        outcomes.push(outcome.map_err(|e| (*point, e)));
    }
    Ok(outcomes)
}

pub fn run_sweep(base: &SystemConfig, points: &[SweepPoint]) -> Result<Vec<SweepOutcome>> {
    run_sweep_with(base, points, |_| Ok(()))
}

/// Writes the header and rows to `out`.
pub fn write_csv<W: Write>(mut out: W, rows: &[SweepRow], timing: bool) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_line(timing))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disambiguation::DecodedEntry;

    fn msg(bin: usize, p: &[u8]) -> DeviceMessage {
        DeviceMessage::from_bin(bin, 2, p.to_vec())
    }

    fn entry(bin: usize, p: &[u8]) -> DecodedEntry {
        DecodedEntry {
            bin,
            payload: p.to_vec(),
            score: 0.0,
        }
    }

    #[test]
    fn pupe_counts() {
        let sent = vec![msg(0, &[1, 0]), msg(1, &[1, 1]), msg(2, &[0, 0]), msg(3, &[0, 1])];
        let all = DecodedList {
            entries: sent.iter().map(|m| entry(m.bin(), &m.payload)).collect(),
        };
        assert_eq!(compute_pupe(&sent, &all).unwrap(), 0.0);
        assert_eq!(compute_pupe(&sent, &DecodedList::default()).unwrap(), 1.0);
        let three = DecodedList {
            entries: all.entries[..3].to_vec(),
        };
        assert_eq!(compute_pupe(&sent, &three).unwrap(), 0.25);
        // Same payload in the wrong bin does not count.
        let wrong_bin = DecodedList {
            entries: vec![entry(1, &[1, 0])],
        };
        assert_eq!(compute_pupe(&sent[..1], &wrong_bin).unwrap(), 1.0);
        assert_eq!(compute_pupe(&[], &all), Err(Error::NoMessages));
    }

    #[test]
    fn duplicate_sent_messages_both_recovered() {
        let sent = vec![msg(0, &[1, 1]), msg(0, &[1, 1])];
        let list = DecodedList {
            entries: vec![entry(0, &[1, 1])],
        };
        assert_eq!(compute_pupe(&sent, &list).unwrap(), 0.0);
    }

    #[test]
    fn full_preset_operating_point() {
        let mut cfg = SystemConfig::paper();
        cfg.bins = 8;
        let (delta, rho) = operating_point(&cfg);
        assert!((delta - 38400.0 / (8.0 * 16.0 * 65536.0)).abs() < 1e-15);
        assert!((delta - 4.58e-3).abs() < 1e-5);
        assert!((rho - 2.667e-2).abs() < 1e-5);
        cfg.bins = 16;
        let (d2, r2) = operating_point(&cfg);
        assert!((d2 - delta / 2.0).abs() < 1e-15);
        assert_eq!(r2, rho);
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [0.1, 0.4, 0.0, 0.25, 0.3];
        let mut w = Welford::default();
        xs.iter().for_each(|&x| w.push(x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((w.mean - mean).abs() < 1e-15);
        assert!((w.stderr() - (var / 5.0).sqrt()).abs() < 1e-15);
        let mut one = Welford::default();
        one.push(0.7);
        assert_eq!(one.stderr(), 0.0);
    }

    #[test]
    fn csv_layout() {
        let row = SweepRow {
            ebn0_db: 2.5,
            bins: 4,
            genie: true,
            trials: 10,
            mean_pupe: 0.125,
            stderr_pupe: 0.01,
            mean_khat_abs_err: 0.0,
            delta: 0.1,
            rho: 0.05,
            seconds: 1.23456,
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(&row), true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("2.5,4,true,10,0.125,0.01,0,0.1,0.05,1.235"));
        assert_eq!(row.to_csv_line(false), "2.5,4,true,10,0.125,0.01,0,0.1,0.05,0");
    }

    #[test]
    fn grid_order() {
        let g = grid(&[1.0, 2.0], &[1, 2], &[false, true]);
        assert_eq!(g.len(), 8);
        assert_eq!(g[0], SweepPoint { ebn0_db: 1.0, bins: 1, genie: false });
        assert_eq!(g[3], SweepPoint { ebn0_db: 1.0, bins: 2, genie: true });
        assert_eq!(g[4].ebn0_db, 2.0);
    }
}
