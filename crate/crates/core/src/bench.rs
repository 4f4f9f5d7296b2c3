//! Benchmark harness: ranking accuracy of every estimator against the exact
//! permanent (Kendall distance), and BP runtime and iteration counts against
//! matrix size.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;

use crate::bp::{estimate_permanent, BpConfig};
use crate::error::{Error, Result};
use crate::exact::{determinant, ryser_permanent, scaled_diagonal};
use crate::logspace::LogValue;
use crate::matrix::{random_uniform_matrix, Permutation, RngSpec};
use crate::sampler::{sample_permanent, Budget};

pub const ACCURACY_MAX_N: usize = 12;
/// Entries of the benchmark matrices are drawn from `U[0, ENTRY_HIGH]`.
pub const ENTRY_HIGH: f64 = 50.0;

/// Normalized Kendall distance: the fraction of item pairs the two rankings
/// order differently. `r[i]` is the rank of item `i`.
pub fn kendall_distance(r1: &Permutation, r2: &Permutation) -> Result<f64> {
    let m = r1.len();
    if r2.len() != m {
        return Err(Error::Shape(format!(
            "rankings of lengths {m} and {} differ",
            r2.len()
        )));
    }
    if m < 2 {
        return Err(Error::Shape(format!(
            "need at least 2 ranked items, got {m}"
        )));
    }
    // r2's ranks listed in r1's order; discordant pairs are its inversions
    let by_r1 = r1.inverse();
    let mut seq: Vec<usize> = by_r1.as_slice().iter().map(|&i| r2.get(i)).collect();
    let discordant = count_inversions(&mut seq);
    Ok(discordant as f64 / (m as f64 * (m as f64 - 1.0) / 2.0))
}

/// Sorts `v` and returns its number of inversions.
fn count_inversions(v: &mut [usize]) -> u64 {
    let mut buf = v.to_vec();
    sort_count(v, &mut buf)
}

fn sort_count(v: &mut [usize], buf: &mut [usize]) -> u64 {
    let len = v.len();
    if len < 2 {
        return 0;
    }
    let mid = len / 2;
    let mut count =
        sort_count(&mut v[..mid], &mut buf[..mid]) + sort_count(&mut v[mid..], &mut buf[mid..]);
    let (mut a, mut b) = (0, mid);
    for slot in buf.iter_mut().take(len) {
        if b == len || (a < mid && v[a] <= v[b]) {
            *slot = v[a];
            a += 1;
        } else {
            // v[b] jumps ahead of every remaining left element
            count += (mid - a) as u64;
            *slot = v[b];
            b += 1;
        }
    }
    v.copy_from_slice(&buf[..len]);
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplingMode {
    /// Give the sampler as much wall time as BP took on the same matrix.
    TimeMatched,
    /// A fixed number of samples per matrix; fully deterministic.
    Count { samples: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracyOptions {
    pub sampling: SamplingMode,
    /// Process matrices on the rayon pool.
    pub parallel: bool,
}

impl Default for AccuracyOptions {
    fn default() -> Self {
        Self {
            sampling: SamplingMode::TimeMatched,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AccuracyRow {
    pub index: usize,
    pub n: usize,
    pub log_true: f64,
    pub log_bethe: f64,
    pub log_sample: f64,
    pub det: LogValue,
    pub log_diag: f64,
    pub bp_iters: usize,
    pub bp_converged: bool,
    pub bp_secs: f64,
    pub sample_secs: f64,
    pub samples_used: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyConfig {
    pub rng: RngSpec,
    pub bp: BpConfig,
    pub sampling: SamplingMode,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankingReport {
    pub n: usize,
    pub count: usize,
    pub rows: Vec<AccuracyRow>,
    /// Method name to normalized Kendall distance from the exact ranking.
    pub kendall: BTreeMap<String, f64>,
    pub config: StudyConfig,
}

pub const METHODS: [&str; 4] = ["bethe", "sampling", "det", "diag"];

impl RankingReport {
    /// `{"n", "count", "kendall", "config"}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "count": self.count,
            "kendall": self.kendall,
            "config": self.config,
        })
    }

    /// One line per matrix. With `timing` off the time columns are written as
    /// zero so reruns under a sample-count budget are byte-identical.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::from(
            "index,n,log_true,log_bethe,log_sample,log_det,log_diag,bp_iters,bp_ms,sample_s\n",
        );
        for r in &self.rows {
            let (bp_ms, sample_s) = if timing {
                (r.bp_secs * 1e3, r.sample_secs)
            } else {
                (0.0, 0.0)
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.index,
                r.n,
                r.log_true,
                r.log_bethe,
                r.log_sample,
                r.det.signed_log1p(),
                r.log_diag,
                r.bp_iters,
                bp_ms,
                sample_s
            )
            .expect("writing to a String");
        }
        out
    }
}

fn accuracy_row(
    index: usize,
    n: usize,
    rng: &RngSpec,
    config: &BpConfig,
    sampling: SamplingMode,
) -> Result<AccuracyRow> {
    let m = random_uniform_matrix(n, 0.0, ENTRY_HIGH, &rng.child(2 * index as u64))?;
    let log_true = ryser_permanent(&m)?.ln();
    let bethe = estimate_permanent(&m, config)?;
    let bp_secs = bethe.elapsed_secs();
    let budget = match sampling {
        SamplingMode::TimeMatched => Budget::WallTime(Duration::from_secs_f64(bp_secs)),
        SamplingMode::Count { samples } => Budget::Count(samples),
    };
    let sample = sample_permanent(&m, budget, &rng.child(2 * index as u64 + 1))?;
    Ok(AccuracyRow {
        index,
        n,
        log_true,
        log_bethe: bethe.log_estimate,
        log_sample: sample.log_estimate,
        det: determinant(&m),
        log_diag: scaled_diagonal(&m).ln(),
        bp_iters: bethe.iterations,
        bp_converged: bethe.converged,
        bp_secs,
        sample_secs: sample.elapsed_secs,
        samples_used: sample.samples_used,
    })
}

/// Generates `count` matrices with `U[0, 50]` entries, estimates each
/// permanent with every method and compares the induced rankings with the
/// exact one.
pub fn run_accuracy_study(
    n: usize,
    count: usize,
    rng: &RngSpec,
    config: &BpConfig,
    options: AccuracyOptions,
) -> Result<RankingReport> {
    if n > ACCURACY_MAX_N {
        return Err(Error::Size {
            what: "accuracy study",
            n,
            limit: ACCURACY_MAX_N,
        });
    }
    if n == 0 {
        return Err(Error::Shape("matrix size must be positive".into()));
    }
    config.validate()?;
    rng.rng()?;
    let row = |k| accuracy_row(k, n, rng, config, options.sampling);
    let rows: Vec<AccuracyRow> = if options.parallel {
        (0..count).into_par_iter().map(row).collect::<Result<_>>()?
    } else {
        (0..count).map(row).collect::<Result<_>>()?
    };

    let mut kendall = BTreeMap::new();
    if count >= 2 {
        let rank = |key: fn(&AccuracyRow) -> f64| {
            Permutation::ranking_by(&rows, |a, b| key(a).total_cmp(&key(b)))
        };
        let truth = rank(|r| r.log_true);
        let det = Permutation::ranking_by(&rows, |a, b| a.det.total_cmp(&b.det));
        kendall.insert(
            "bethe".into(),
            kendall_distance(&truth, &rank(|r| r.log_bethe))?,
        );
        kendall.insert(
            "sampling".into(),
            kendall_distance(&truth, &rank(|r| r.log_sample))?,
        );
        kendall.insert("det".into(), kendall_distance(&truth, &det)?);
        kendall.insert(
            "diag".into(),
            kendall_distance(&truth, &rank(|r| r.log_diag))?,
        );
    }
    Ok(RankingReport {
        n,
        count,
        rows,
        kendall,
        config: StudyConfig {
            rng: rng.clone(),
            bp: *config,
            sampling: options.sampling,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RuntimeRow {
    pub n: usize,
    pub trials: usize,
    /// Message passing plus Bethe evaluation.
    pub mean_wall_secs: f64,
    pub mean_message_passing_secs: f64,
    pub mean_energy_secs: f64,
    pub mean_iterations: f64,
    pub convergence_rate: f64,
    pub mean_secs_per_iteration: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RuntimeReport {
    pub rows: Vec<RuntimeRow>,
    pub config: StudyConfig,
}

impl RuntimeReport {
    pub fn row(&self, n: usize) -> Option<&RuntimeRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,trials,mean_wall_s,mean_message_passing_s,mean_energy_s,mean_iterations,convergence_rate,mean_s_per_iteration\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.n,
                r.trials,
                r.mean_wall_secs,
                r.mean_message_passing_secs,
                r.mean_energy_secs,
                r.mean_iterations,
                r.convergence_rate,
                r.mean_secs_per_iteration
            )
            .expect("writing to a String");
        }
        out
    }
}

/// BP runtime and iteration counts for every size in `n_min..=n_max`.
pub fn run_runtime_study(
    n_min: usize,
    n_max: usize,
    trials_per_n: usize,
    rng: &RngSpec,
    config: &BpConfig,
) -> Result<RuntimeReport> {
    let sizes: Vec<usize> = (n_min..=n_max).collect();
    run_runtime_study_at(&sizes, trials_per_n, rng, config)
}

/// BP runtime and iteration counts for the given strictly increasing sizes.
/// Runs sequentially so timings are not disturbed by other work.
pub fn run_runtime_study_at(
    sizes: &[usize],
    trials_per_n: usize,
    rng: &RngSpec,
    config: &BpConfig,
) -> Result<RuntimeReport> {
    if sizes.first().is_some_and(|&n| n < 2) {
        return Err(Error::Domain("runtime study sizes start at n = 2".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("runtime study sizes must increase".into()));
    }
    if trials_per_n == 0 {
        return Err(Error::Domain("need at least one trial per size".into()));
    }
    config.validate()?;
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let stream = rng.child(n as u64);
        let (mut wall, mut mp, mut energy, mut iters, mut per_iter) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut converged = 0usize;
        for t in 0..trials_per_n {
            let m = random_uniform_matrix(n, 0.0, ENTRY_HIGH, &stream.child(t as u64))?;
            let r = estimate_permanent(&m, config)?;
            wall += r.elapsed_secs();
            mp += r.message_passing_secs;
            energy += r.energy_secs;
            iters += r.iterations as f64;
            per_iter += r.message_passing_secs / r.iterations.max(1) as f64;
            converged += usize::from(r.converged);
        }
        let k = trials_per_n as f64;
        rows.push(RuntimeRow {
            n,
            trials: trials_per_n,
            mean_wall_secs: wall / k,
            mean_message_passing_secs: mp / k,
            mean_energy_secs: energy / k,
            mean_iterations: iters / k,
            convergence_rate: converged as f64 / k,
            mean_secs_per_iteration: per_iter / k,
        });
    }
    Ok(RuntimeReport {
        rows,
        config: StudyConfig {
            rng: rng.clone(),
            bp: *config,
            sampling: SamplingMode::Count { samples: 0 },
        },
    })
}

/// Matrix counts per size for the accuracy study: reduced counts by default,
/// the original ones with `full_scale`.
pub fn accuracy_count(n: usize, full_scale: bool) -> usize {
    match (full_scale, n) {
        (true, 10) => 200,
        (true, _) => 1000,
        (false, 10) => 50,
        (false, _) => 200,
    }
}
