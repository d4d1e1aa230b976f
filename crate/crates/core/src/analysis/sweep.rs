use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::loss::predicted_loss;
use super::stats::{summarize, Summary};
use crate::controller::{
    CommandChannel, MigrationMetrics, Ordering, Scenario, ScenarioError, Strategy, TrafficSpec,
};
use crate::simengine::rng::{stream, Stream};
use crate::simengine::SimTime;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SweepError {
    #[error("no sweep values given")]
    NoValues,
    #[error("sweep value {0} must be positive")]
    NonPositive(f64),
    #[error("at least one repetition is required")]
    NoRepetitions,
    #[error(transparent)]
    Run(#[from] ScenarioError),
}

/// Seed of repetition `rep`.
pub fn rep_seed(base: u64, rep: usize) -> u64 {
    base.wrapping_add(rep as u64)
}

fn check(values: &[f64], reps: usize) -> Result<(), SweepError> {
    if values.is_empty() {
        return Err(SweepError::NoValues);
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
        return Err(SweepError::NonPositive(*v));
    }
    if reps == 0 {
        return Err(SweepError::NoRepetitions);
    }
    Ok(())
}

/// Runs `jobs` in parallel, keeping their order.
fn run_all<J: Sync, T: Send>(jobs: &[J], f: impl Fn(&J) -> Result<T, SweepError> + Sync + Send) -> Result<Vec<T>, SweepError> {
    jobs.par_iter().map(f).collect()
}

/// The three variants of the data-rate experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Baseline,
    /// All gateways swap at once.
    Symmetric,
    /// Three-phase ordering.
    Asymmetric,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::Symmetric, Variant::Asymmetric];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Symmetric => "symmetric",
            Variant::Asymmetric => "asymmetric",
        }
    }

    pub fn apply(self, s: &mut Scenario) {
        match self {
            Variant::Baseline => s.migration.strategy = Strategy::None,
            Variant::Symmetric => {
                s.migration.strategy = Strategy::Gateway;
                s.migration.ordering = Ordering::Simultaneous;
            }
            Variant::Asymmetric => {
                s.migration.strategy = Strategy::Gateway;
                s.migration.ordering = Ordering::Algorithm1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub rate_pps: f64,
    pub variant: Variant,
    pub direction: String,
    pub reps: usize,
    pub mean_loss_pct: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_lost: f64,
}

/// Loss percentage per direction for the baseline, symmetric and asymmetric
/// variants at each rate, over `reps` seeds.
pub fn compare_strategies(
    template: &Scenario,
    rates: &[f64],
    reps: usize,
    base_seed: u64,
) -> Result<Vec<RateRow>, SweepError> {
    check(rates, reps)?;
    let mut jobs = Vec::new();
    for &rate in rates {
        for v in Variant::ALL {
            for rep in 0..reps {
                jobs.push((rate, v, rep));
            }
        }
    }
    let runs = run_all(&jobs, |&(rate, v, rep)| {
        let mut s = template.clone();
        s.traffic.rate_pps = rate;
        v.apply(&mut s);
        Ok(s.run(rep_seed(base_seed, rep))?)
    })?;

    let mut rows = Vec::new();
    for (chunk, job) in runs.chunks(reps).zip(jobs.chunks(reps)) {
        let (rate, v, _) = job[0];
        for (i, f) in chunk[0].flows.iter().enumerate() {
            let pct: Vec<f64> = chunk.iter().map(|m| m.flows[i].loss_pct).collect();
            let lost: Vec<f64> = chunk.iter().map(|m| m.flows[i].lost as f64).collect();
            let s = summarize(&pct);
            rows.push(RateRow {
                rate_pps: rate,
                variant: v,
                direction: format!("{}->{}", f.src, f.dst),
                reps,
                mean_loss_pct: s.mean,
                ci_low: s.ci_low,
                ci_high: s.ci_high,
                mean_lost: summarize(&lost).mean,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RttRow {
    pub rtt_ms: f64,
    pub ordering: Ordering,
    pub reps: usize,
    /// Packets lost per run, all flows together.
    pub mean_lost: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Formula prediction at the recorded switch-over times (simultaneous only).
    pub mean_predicted: Option<f64>,
    /// Largest per-direction gap between measurement and prediction.
    pub max_deviation: Option<f64>,
}

/// Loss against round-trip time between the first two gateways, per ordering.
pub fn sweep_rtt(
    template: &Scenario,
    rtts_ms: &[f64],
    orderings: &[Ordering],
    reps: usize,
    base_seed: u64,
) -> Result<Vec<RttRow>, SweepError> {
    check(rtts_ms, reps)?;
    let mut scaled = Vec::with_capacity(rtts_ms.len());
    for &rtt in rtts_ms {
        let mut s = template.with_reference_latency(SimTime::from_millis_f64(rtt / 2.0), base_seed)?;
        s.migration.strategy = Strategy::Gateway;
        scaled.push(s);
    }
    let mut jobs = Vec::new();
    for (i, &rtt) in rtts_ms.iter().enumerate() {
        for &o in orderings {
            for rep in 0..reps {
                jobs.push((i, rtt, o, rep));
            }
        }
    }
    let runs = run_all(&jobs, |&(i, _, o, rep)| {
        let mut s = scaled[i].clone();
        s.migration.ordering = o;
        let seed = rep_seed(base_seed, rep);
        let topo = s.build(seed).map_err(ScenarioError::from)?;
        let m = crate::controller::migrate(&topo, &s.flows(), &s.migration, seed).map_err(ScenarioError::from)?;
        let checks = if o == Ordering::Simultaneous { Some(predicted_loss(&topo, &m)) } else { None };
        Ok((m.total_lost() as f64, checks))
    })?;

    let mut rows = Vec::new();
    for (chunk, job) in runs.chunks(reps).zip(jobs.chunks(reps)) {
        let (_, rtt, o, _) = job[0];
        let lost: Vec<f64> = chunk.iter().map(|r| r.0).collect();
        let s = summarize(&lost);
        let (mean_predicted, max_deviation) = if o == Ordering::Simultaneous {
            let preds: Vec<f64> =
                chunk.iter().map(|r| r.1.as_ref().map_or(0.0, |c| c.iter().map(|d| d.predicted).sum())).collect();
            let dev = chunk
                .iter()
                .flat_map(|r| r.1.iter().flatten().map(|d| d.deviation()))
                .fold(0.0, f64::max);
            (Some(summarize(&preds).mean), Some(dev))
        } else {
            (None, None)
        };
        rows.push(RttRow {
            rtt_ms: rtt,
            ordering: o,
            reps,
            mean_lost: s.mean,
            ci_low: s.ci_low,
            ci_high: s.ci_high,
            mean_predicted,
            max_deviation,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSizeRow {
    pub rules_per_switch: usize,
    pub switches: usize,
    pub reps: usize,
    pub mean_duration_ms: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Migration duration against the number of rules on each old-VN switch.
pub fn sweep_table_size(
    template: &Scenario,
    sizes: &[usize],
    reps: usize,
    base_seed: u64,
) -> Result<Vec<TableSizeRow>, SweepError> {
    let as_f: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    check(&as_f, reps)?;
    let mut jobs = Vec::new();
    for &size in sizes {
        for rep in 0..reps {
            jobs.push((size, rep));
        }
    }
    let runs = run_all(&jobs, |&(size, rep)| {
        let mut s = template.clone();
        s.migration.synthetic_rules = size;
        if s.migration.strategy == Strategy::None {
            s.migration.strategy = Strategy::Gateway;
        }
        let m = s.run(rep_seed(base_seed, rep))?;
        Ok(m.duration().unwrap_or(SimTime::ZERO).as_millis_f64())
    })?;
    Ok(runs
        .chunks(reps)
        .zip(jobs.chunks(reps))
        .map(|(d, job)| {
            let s: Summary = summarize(d);
            TableSizeRow {
                rules_per_switch: job[0].0,
                switches: template.vn.switches,
                reps,
                mean_duration_ms: s.mean,
                ci_low: s.ci_low,
                ci_high: s.ci_high,
            }
        })
        .collect())
}

/// A one-switch VN with no traffic on an ideal channel: isolates the cloning cost.
pub fn table_size_template() -> Scenario {
    let mut s = Scenario::two_node();
    s.vn = crate::topology::VnShape::line(1);
    s.traffic = TrafficSpec::none();
    s.migration.ordering = Ordering::Algorithm1;
    s.migration.channel = CommandChannel::ideal();
    s.migration.migrate_at = SimTime::ZERO;
    s.migration.settle = SimTime::ZERO;
    s
}

/// Empirical distribution of command lags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagCdf {
    /// Ascending.
    pub samples_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfRow {
    pub rank: usize,
    pub lag_ms: f64,
    pub cumulative: f64,
}

impl LagCdf {
    /// Nearest-rank quantile, `q` in `[0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.samples_ms.len();
        let rank = ((q.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n);
        self.samples_ms[rank - 1]
    }

    /// Middle value, averaging the two central samples for even counts.
    pub fn median(&self) -> f64 {
        let n = self.samples_ms.len();
        if n % 2 == 1 {
            self.samples_ms[n / 2]
        } else {
            (self.samples_ms[n / 2 - 1] + self.samples_ms[n / 2]) / 2.0
        }
    }

    pub fn max(&self) -> f64 {
        *self.samples_ms.last().expect("at least one sample")
    }

    pub fn rows(&self) -> Vec<CdfRow> {
        let n = self.samples_ms.len() as f64;
        self.samples_ms
            .iter()
            .enumerate()
            .map(|(i, &lag_ms)| CdfRow { rank: i + 1, lag_ms, cumulative: (i + 1) as f64 / n })
            .collect()
    }
}

pub fn channel_lag_cdf(channel: &CommandChannel, samples: usize, seed: u64) -> Result<LagCdf, SweepError> {
    if samples == 0 {
        return Err(SweepError::NoValues);
    }
    let mut rng = stream(seed, Stream::Experiment);
    let mut v: Vec<f64> = (0..samples).map(|_| channel.sample_ms(&mut rng)).collect();
    v.sort_by(f64::total_cmp);
    Ok(LagCdf { samples_ms: v })
}

/// Loss per flow of a run relative to a baseline run of the same seed.
pub fn induced_loss(run: &MigrationMetrics, baseline: &MigrationMetrics) -> i64 {
    run.total_lost() as i64 - baseline.total_lost() as i64
}
