//! Monte Carlo harness: per-trial synthesis and localization, estimate to
//! truth association, and RMSE aggregation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baselines::{localize_dense, localize_farfield_virtual, localize_subarray, Method};
use crate::channel::{synthesize, Target};
use crate::error::Result;
use crate::exec::Execution;
use crate::geometry::{build_dense_layout, SensorLayout};
use crate::music::{localize, LocalizerConfig};
use crate::scenario::Scenario;

/// A reported target. Angle-only methods leave `r_m` empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub theta_deg: f64,
    pub r_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `(estimate index, truth index)`, ordered by truth index.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_estimates: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost assignment of rows to columns for a rectangular cost matrix
/// with `rows <= cols`. Returns the column of each row.
///
/// Shortest augmenting path with potentials, `O(rows^2 cols)`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "more rows than columns");
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Cost of pairing an estimate with a target: `|dtheta| + w |dr| / z_r`,
/// angles in degrees. The range term is dropped for angle-only estimates.
pub fn pair_cost(e: &Estimate, t: &Target, z_r: f64, w: f64) -> f64 {
    let dth = (e.theta_deg - t.theta_deg()).abs();
    match e.r_m {
        Some(r) => dth + w * (r - t.r).abs() / z_r,
        None => dth,
    }
}

/// One-to-one association minimizing the summed [`pair_cost`].
pub fn associate(estimates: &[Estimate], truth: &[Target], z_r: f64, w: f64) -> Matching {
    let cost: Vec<Vec<f64>> =
        estimates.iter().map(|e| truth.iter().map(|t| pair_cost(e, t, z_r, w)).collect()).collect();
    let mut pairs: Vec<(usize, usize)> = if estimates.len() <= truth.len() {
        min_cost_assignment(&cost).into_iter().enumerate().collect()
    } else {
        let transposed: Vec<Vec<f64>> =
            (0..truth.len()).map(|j| cost.iter().map(|row| row[j]).collect()).collect();
        min_cost_assignment(&transposed).into_iter().enumerate().map(|(t, e)| (e, t)).collect()
    };
    pairs.sort_by_key(|&(_, t)| t);
    let total = pairs.iter().map(|&(e, t)| cost[e][t]).sum();
    let unmatched_estimates = (0..estimates.len()).filter(|e| !pairs.iter().any(|p| p.0 == *e)).collect();
    let unmatched_truths = (0..truth.len()).filter(|t| !pairs.iter().any(|p| p.1 == *t)).collect();
    Matching { pairs, unmatched_estimates, unmatched_truths, cost: total }
}

/// Root mean squared value of `errors`; `None` when there are none.
pub fn rmse(errors: &[f64]) -> Option<f64> {
    if errors.is_empty() {
        return None;
    }
    Some((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

/// Tolerances for counting a truth as detected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionGate {
    pub theta_deg: f64,
    /// Relative to the true range.
    pub range_frac: f64,
}

impl Default for DetectionGate {
    fn default() -> Self {
        DetectionGate { theta_deg: 1.0, range_frac: 0.1 }
    }
}

impl DetectionGate {
    pub fn accepts(&self, e: &Estimate, t: &Target) -> bool {
        (e.theta_deg - t.theta_deg()).abs() <= self.theta_deg
            && e.r_m.is_none_or(|r| (r - t.r).abs() <= self.range_frac * t.r)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MonteCarloConfig {
    pub trials: usize,
    pub snr_db: Vec<f64>,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    pub localizer: LocalizerConfig,
    /// Weight of the range term in the association cost.
    pub association_weight: f64,
    pub gate: DetectionGate,
    /// Dense baseline spacing; defaults to the coprime unit spacing.
    pub dense_spacing_m: Option<f64>,
    /// Strategy for the trial loop. Grid scans inside a trial run
    /// sequentially whenever the trials themselves fan out.
    pub execution: Execution,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            trials: 100,
            snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            methods: Method::ALL.to_vec(),
            base_seed: 0,
            localizer: LocalizerConfig::default(),
            association_weight: 1.0,
            gate: DetectionGate::default(),
            dense_spacing_m: None,
            execution: Execution::default(),
        }
    }
}

/// Outcome of one `(method, snr, trial)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub estimates: Vec<Estimate>,
    /// Signed errors of matched pairs, estimate minus truth.
    pub theta_errors_deg: Vec<f64>,
    pub range_errors_m: Vec<f64>,
    pub unmatched_truths: usize,
    pub unmatched_estimates: usize,
    pub detected: bool,
    pub candidates: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub method: Method,
    pub snr_db: f64,
    pub theta_rmse_deg: Option<f64>,
    pub r_rmse_m: Option<f64>,
    pub detection_rate: f64,
    pub mean_candidates: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub rows: Vec<RmseRow>,
    pub trials: Vec<TrialRecord>,
}

impl RmseReport {
    pub fn row(&self, method: Method, snr_db: f64) -> Option<&RmseRow> {
        self.rows.iter().find(|r| r.method == method && r.snr_db == snr_db)
    }

    /// Summary CSV; absent RMSEs are empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "snr_db", "theta_rmse_deg", "r_rmse_m", "detection_rate", "mean_candidates"])
            .map_err(csv_err)?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.method.name().to_string(),
                r.snr_db.to_string(),
                opt(r.theta_rmse_deg),
                opt(r.r_rmse_m),
                r.detection_rate.to_string(),
                r.mean_candidates.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One JSON object per trial.
    pub fn write_trials_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.trials {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::error::Error::InvalidParameter(format!("csv: {other:?}")),
    }
}

struct Arrays {
    coprime: SensorLayout,
    dense: SensorLayout,
    bounds: (f64, f64),
}

fn run_trial(
    scenario: &Scenario,
    arrays: &Arrays,
    cfg: &MonteCarloConfig,
    localizer: &LocalizerConfig,
    method: Method,
    snr_db: f64,
    trial: usize,
) -> TrialRecord {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let truth = scenario.targets();
    let mut record = TrialRecord {
        method,
        snr_db,
        trial,
        seed,
        estimates: Vec::new(),
        theta_errors_deg: Vec::new(),
        range_errors_m: Vec::new(),
        unmatched_truths: truth.len(),
        unmatched_estimates: 0,
        detected: false,
        candidates: 0,
        error: None,
    };
    let outcome = (|| -> Result<(Vec<Estimate>, usize)> {
        let mut syn = scenario.synthesis();
        syn.snr_db = Some(snr_db);
        syn.seed = seed;
        let layout = if method == Method::Dense { &arrays.dense } else { &arrays.coprime };
        let snaps = synthesize(layout, &truth, &syn)?;
        let to_estimates = |v: Vec<(f64, f64)>| v.into_iter().map(|(t, r)| Estimate { theta_deg: t, r_m: Some(r) }).collect();
        Ok(match method {
            Method::Proposed => {
                let res = localize(&snaps, layout, localizer)?;
                (to_estimates(res.targets()), res.candidate_angles.len())
            }
            Method::Dense => {
                let res = localize_dense(&snaps, layout, localizer)?;
                (to_estimates(res.targets()), res.candidate_angles.len())
            }
            Method::Subarray => {
                let res = localize_subarray(&snaps, layout, localizer)?;
                (to_estimates(res.targets()), res.candidate_angles.len())
            }
            Method::Farfield => {
                let res = localize_farfield_virtual(&snaps, layout, localizer)?;
                let n = res.angles_deg.len();
                (res.angles_deg.into_iter().map(|t| Estimate { theta_deg: t, r_m: None }).collect(), n)
            }
        })
    })();
    match outcome {
        Ok((estimates, candidates)) => {
            let z_r = arrays.bounds.1;
            let m = associate(&estimates, &truth, z_r, cfg.association_weight);
            for &(e, t) in &m.pairs {
                record.theta_errors_deg.push(estimates[e].theta_deg - truth[t].theta_deg());
                if let Some(r) = estimates[e].r_m {
                    record.range_errors_m.push(r - truth[t].r);
                }
            }
            record.detected = estimates.len() == truth.len()
                && m.pairs.iter().all(|&(e, t)| cfg.gate.accepts(&estimates[e], &truth[t]));
            record.unmatched_truths = m.unmatched_truths.len();
            record.unmatched_estimates = m.unmatched_estimates.len();
            record.candidates = candidates;
            record.estimates = estimates;
        }
        Err(e) => {
            log::warn!("{method} at {snr_db} dB, trial {trial}: {e}");
            record.error = Some(e.to_string());
        }
    }
    record
}

/// Runs every `(method, snr, trial)` combination. Trial `q` uses seed
/// `base_seed + q` for every method and SNR. Failed trials are recorded and
/// count as missed detections; they never abort the sweep.
pub fn run_monte_carlo(scenario: &Scenario, cfg: &MonteCarloConfig) -> Result<RmseReport> {
    if cfg.trials == 0 {
        return Err(crate::error::Error::InvalidParameter("trial count must be positive".into()));
    }
    let params = scenario.params()?;
    let coprime = scenario.layout()?;
    let dense = build_dense_layout(coprime.len(), cfg.dense_spacing_m.unwrap_or(params.d), params.lambda)?;
    let bounds = cfg.localizer.range_bounds.unwrap_or((coprime.fresnel_distance(), coprime.rayleigh_distance()));
    let arrays = Arrays { coprime, dense, bounds };

    let mut localizer = cfg.localizer.clone();
    localizer.range_bounds = Some(bounds);
    localizer.num_targets.get_or_insert(scenario.targets.len());
    if cfg.execution.is_parallel() {
        localizer.execution = Execution::Sequential;
    }

    let mut tasks = Vec::with_capacity(cfg.methods.len() * cfg.snr_db.len() * cfg.trials);
    for &method in &cfg.methods {
        for &snr in &cfg.snr_db {
            for q in 0..cfg.trials {
                tasks.push((method, snr, q));
            }
        }
    }
    let trials = cfg
        .execution
        .map(&tasks, |&(method, snr, q)| run_trial(scenario, &arrays, cfg, &localizer, method, snr, q));

    let rows = trials
        .chunks(cfg.trials)
        .map(|chunk| {
            let ok: Vec<&TrialRecord> = chunk.iter().filter(|t| t.error.is_none()).collect();
            let th: Vec<f64> = ok.iter().flat_map(|t| t.theta_errors_deg.iter().copied()).collect();
            let r: Vec<f64> = ok.iter().flat_map(|t| t.range_errors_m.iter().copied()).collect();
            let mean_candidates = if ok.is_empty() {
                0.0
            } else {
                ok.iter().map(|t| t.candidates as f64).sum::<f64>() / ok.len() as f64
            };
            RmseRow {
                method: chunk[0].method,
                snr_db: chunk[0].snr_db,
                theta_rmse_deg: rmse(&th),
                r_rmse_m: if chunk[0].method.estimates_range() { rmse(&r) } else { None },
                detection_rate: chunk.iter().filter(|t| t.detected).count() as f64 / chunk.len() as f64,
                mean_candidates,
                failures: chunk.len() - ok.len(),
            }
        })
        .collect();
    Ok(RmseReport { rows, trials })
}

/// Parses `lo:step:hi` (inclusive) or a comma list into SNR values.
pub fn parse_snr_list(spec: &str) -> Result<Vec<f64>> {
    let bad = || crate::error::Error::InvalidParameter(format!("bad SNR list '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        let (lo, step, hi) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| lo + i as f64 * step).collect());
    }
    spec.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(theta_deg: f64, r: f64) -> Estimate {
        Estimate { theta_deg, r_m: Some(r) }
    }

    #[test]
    fn identity_matching_has_zero_cost() {
        let truth = [Target::from_degrees(-10.0, 5.0), Target::from_degrees(20.0, 8.0)];
        let e: Vec<Estimate> = truth.iter().map(|t| est(t.theta_deg(), t.r)).collect();
        let m = associate(&e, &truth, 40.0, 1.0);
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
        assert!(m.cost < 1e-12);
    }

    #[test]
    fn missing_estimate_leaves_truth_unmatched() {
        let truth = [
            Target::from_degrees(-10.0, 5.0),
            Target::from_degrees(0.0, 5.0),
            Target::from_degrees(10.0, 5.0),
            Target::from_degrees(20.0, 5.0),
        ];
        let e = [est(20.1, 5.0), est(-9.9, 5.0), est(0.2, 5.0)];
        let m = associate(&e, &truth, 40.0, 1.0);
        assert_eq!(m.unmatched_truths, vec![2]);
        assert!(m.unmatched_estimates.is_empty());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[]), None);
        assert_eq!(rmse(&[0.0, 0.0]), Some(0.0));
        assert_eq!(rmse(&[1.0]), Some(1.0));
        assert!((rmse(&[1.0, 3.0]).unwrap() - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn snr_ranges() {
        assert_eq!(parse_snr_list("-10:5:20").unwrap(), vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]);
        assert_eq!(parse_snr_list("0, 10").unwrap(), vec![0.0, 10.0]);
        assert!(parse_snr_list("1:0:3").is_err());
        assert!(parse_snr_list("a").is_err());
    }
}
