//! Experiment plans, parallel trial execution and table output.
//!
//! Every number in a [`RunRecord`] aggregate can be recomputed from its rows,
//! and every output file starts with the hash of the plan that produced it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::binary_entropy;
use crate::channel::Alphabet;
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::scheme::{message_stream, run_session, SchemeConfig, SessionLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    /// `config.seed` is the base seed of the entry; each trial derives its own.
    pub config: SchemeConfig,
    pub noise: NoiseSpec,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub entries: Vec<PlanEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::param("plan has no entries"));
        }
        for (i, e) in self.entries.iter().enumerate() {
            let ctx = |err: Error| Error::param(format!("entry {i}: {err}"));
            e.config.validate().map_err(ctx)?;
            e.noise.validate(e.config.alphabet).map_err(ctx)?;
            if e.trials == 0 {
                return Err(Error::param(format!(
                    "entry {i}: trials must be at least 1"
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 of the entries; the output path and format do not affect it.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(&self.entries).expect("plan entries serialize");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn total_trials(&self) -> usize {
        self.entries.iter().map(|e| e.trials).sum()
    }
}

/// Seed of trial `trial` of entry `entry`, derived from the entry's base seed.
pub fn trial_seed(base: u64, entry: usize, trial: usize) -> u64 {
    let mut z = base ^ (entry as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add((trial as u64).wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One CSV row per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub entry: usize,
    pub trial: usize,
    pub seed: u64,
    #[serde(rename = "B")]
    pub blocks: usize,
    pub bits: u64,
    #[serde(rename = "R_act")]
    pub r_act: f64,
    pub r_emp: f64,
    pub rate_floor: f64,
    pub error: bool,
}

impl TrialRow {
    pub fn from_log(entry: usize, trial: usize, log: &SessionLog) -> Self {
        TrialRow {
            entry,
            trial,
            seed: log.seed,
            blocks: log.decoded_blocks,
            bits: log.bits_decoded,
            r_act: log.r_act,
            r_emp: log.r_emp,
            rate_floor: log.rate_floor,
            error: log.error,
        }
    }

    pub fn floor_violated(&self) -> bool {
        !self.error && self.r_act < self.rate_floor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub mean_r_act: f64,
    pub median_r_act: f64,
    pub error_rate: f64,
    pub floor_violations: usize,
}

impl Aggregate {
    pub fn from_rows(rows: &[TrialRow]) -> Self {
        let r: Vec<f64> = rows.iter().map(|r| r.r_act).collect();
        let errors = rows.iter().filter(|r| r.error).count();
        Aggregate {
            trials: rows.len(),
            mean_r_act: r.iter().sum::<f64>() / rows.len().max(1) as f64,
            median_r_act: median(&r),
            error_rate: errors as f64 / rows.len().max(1) as f64,
            floor_violations: rows.iter().filter(|r| r.floor_violated()).count(),
        }
    }
}

/// Median of the values; `NaN` for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub plan_hash: String,
    pub rows: Vec<TrialRow>,
    pub aggregate: Aggregate,
}

impl RunRecord {
    pub fn new(plan_hash: String, rows: Vec<TrialRow>) -> Self {
        let aggregate = Aggregate::from_rows(&rows);
        RunRecord {
            plan_hash,
            rows,
            aggregate,
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!("# plan_hash={}\n", self.plan_hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            for row in &self.rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Ok(String::from_utf8(out).expect("csv output is ASCII"))
    }

    /// Parses [`RunRecord::to_csv`] output, recomputing the aggregate.
    pub fn from_csv(text: &str) -> Result<Self> {
        let hash = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# plan_hash="))
            .ok_or_else(|| Error::param("CSV lacks a plan_hash comment line"))?
            .to_string();
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<TrialRow>, _>>()?;
        Ok(RunRecord::new(hash, rows))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    /// Writes the record via a temporary file in the target directory.
    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        write_atomic(path, self.render(format)?.as_bytes())
    }
}

/// Replaces `path` with `bytes` so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Runs `f` on a pool of `jobs` threads, or the global pool when `None`.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::param("jobs must be at least 1")),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Error::param(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs one trial: the trial seed drives the codebook, the messages and
/// (unless the noise spec pins its own seed) the noise.
pub fn run_trial(config: &SchemeConfig, noise: &NoiseSpec, seed: u64) -> Result<SessionLog> {
    let config = SchemeConfig {
        seed,
        ..config.clone()
    };
    let z = noise.generate(config.alphabet, config.n, seed)?;
    run_session(&config, &z, message_stream(seed, config.k_bits))
}

/// Executes every trial of the plan and writes the output if the plan names
/// a path. Rows are ordered by entry then trial regardless of scheduling.
pub fn run_plan(plan: &ExperimentPlan, jobs: Option<usize>) -> Result<RunRecord> {
    plan.validate()?;
    let tasks: Vec<(usize, usize)> = plan
        .entries
        .iter()
        .enumerate()
        .flat_map(|(e, entry)| (0..entry.trials).map(move |t| (e, t)))
        .collect();
    let rows = with_jobs(jobs, || {
        tasks
            .par_iter()
            .map(|&(e, t)| {
                let entry = &plan.entries[e];
                let seed = trial_seed(entry.config.seed, e, t);
                run_trial(&entry.config, &entry.noise, seed)
                    .map(|log| TrialRow::from_log(e, t, &log))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let record = RunRecord::new(plan.hash(), rows);
    if let Some(path) = &plan.out {
        record.write(path, plan.format)?;
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub trials: usize,
    pub median_r_act: f64,
    pub median_r_emp: f64,
    pub median_rate_floor: f64,
    pub errors: usize,
    pub floor_violations: usize,
    /// `log2 q - H(dist)` for i.i.d. noise, the capacity of the channel.
    pub capacity: Option<f64>,
    /// The same with `dist` replaced by the symbol frequencies of the draws.
    pub capacity_emp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub alphabet: Alphabet,
    pub noise: NoiseSpec,
    pub n_grid: Vec<usize>,
    pub k_bits: u32,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub metric: crate::srccode::Metric,
}

fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// Medians of the session statistics at each horizon in the grid.
pub fn sweep_rates(params: &SweepParams, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    if params.n_grid.is_empty() {
        return Err(Error::param("empty n grid"));
    }
    if params.trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    params.noise.validate(params.alphabet)?;
    let q = params.alphabet.size() as usize;
    let lq = params.alphabet.log2();
    let capacity = match &params.noise {
        NoiseSpec::Iid { dist, .. } => Some(if q == 2 {
            1.0 - binary_entropy(dist[1])?
        } else {
            lq - entropy_bits(dist)
        }),
        _ => None,
    };
    let mut out = Vec::with_capacity(params.n_grid.len());
    for (gi, &n) in params.n_grid.iter().enumerate() {
        let config = SchemeConfig::new(
            n,
            params.alphabet,
            params.k_bits,
            params.epsilon,
            params.seed,
            params.metric,
        );
        config.validate()?;
        let results = with_jobs(jobs, || {
            (0..params.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = trial_seed(params.seed, gi, t);
                    let z = params.noise.generate(params.alphabet, n, seed)?;
                    let mut hist = vec![0u64; q];
                    z.as_slice().iter().for_each(|&s| hist[s as usize] += 1);
                    let log = run_session(
                        &SchemeConfig {
                            seed,
                            ..config.clone()
                        },
                        &z,
                        message_stream(seed, params.k_bits),
                    )?;
                    Ok((log, hist))
                })
                .collect::<Result<Vec<_>>>()
        })??;
        let pick = |f: fn(&SessionLog) -> f64| {
            median(&results.iter().map(|(l, _)| f(l)).collect::<Vec<_>>())
        };
        let mut hist = vec![0u64; q];
        for (_, h) in &results {
            hist.iter_mut().zip(h).for_each(|(a, b)| *a += b);
        }
        let total = (n * params.trials) as f64;
        let freq: Vec<f64> = hist.iter().map(|&c| c as f64 / total).collect();
        out.push(SweepRow {
            n,
            trials: params.trials,
            median_r_act: pick(|l| l.r_act),
            median_r_emp: pick(|l| l.r_emp),
            median_rate_floor: pick(|l| l.rate_floor),
            errors: results.iter().filter(|(l, _)| l.error).count(),
            floor_violations: results.iter().filter(|(l, _)| l.floor_violated()).count(),
            capacity,
            capacity_emp: capacity.map(|_| lq - entropy_bits(&freq)),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srccode::Metric;

    fn entry(noise: NoiseSpec, trials: usize) -> PlanEntry {
        PlanEntry {
            config: SchemeConfig::new(1024, Alphabet::binary(), 6, 0.05, 11, Metric::Lz78),
            noise,
            trials,
        }
    }

    #[test]
    fn single_zero_noise_trial() {
        let plan = ExperimentPlan {
            entries: vec![entry(NoiseSpec::Constant { symbol: 0 }, 1)],
            out: None,
            format: OutputFormat::Csv,
        };
        let rec = run_plan(&plan, Some(1)).unwrap();
        assert_eq!(rec.rows.len(), 1);
        assert_eq!(rec.aggregate.error_rate, 0.0);
        assert_eq!(rec.aggregate.floor_violations, 0);
        assert!(rec.rows[0].blocks > 0);
    }

    #[test]
    fn cardinality_and_order() {
        let a = Alphabet::binary();
        let plan = ExperimentPlan {
            entries: vec![
                entry(NoiseSpec::Constant { symbol: 0 }, 100),
                entry(NoiseSpec::bernoulli(a, 0.02), 100),
                entry(
                    NoiseSpec::Periodic {
                        pattern: vec![0, 0, 1],
                    },
                    100,
                ),
            ],
            out: None,
            format: OutputFormat::Csv,
        };
        let rec = run_plan(&plan, None).unwrap();
        assert_eq!(rec.rows.len(), 300);
        let keys: Vec<(usize, usize)> = rec.rows.iter().map(|r| (r.entry, r.trial)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn csv_round_trip_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let plan = ExperimentPlan {
            entries: vec![entry(NoiseSpec::bernoulli(Alphabet::binary(), 0.05), 8)],
            out: Some(path.clone()),
            format: OutputFormat::Csv,
        };
        let rec = run_plan(&plan, Some(2)).unwrap();
        let first = fs::read(&path).unwrap();
        run_plan(&plan, Some(3)).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with(&format!("# plan_hash={}\n", plan.hash())));
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("entry,trial,seed,B,bits,R_act,r_emp,rate_floor,error"));
        let back = RunRecord::from_csv(&text).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn json_mirror() {
        let plan = ExperimentPlan {
            entries: vec![entry(NoiseSpec::Constant { symbol: 1 }, 2)],
            out: None,
            format: OutputFormat::Json,
        };
        let rec = run_plan(&plan, None).unwrap();
        let back: RunRecord = serde_json::from_str(&rec.to_json().unwrap()).unwrap();
        assert_eq!(back, rec);
        let replay = ExperimentPlan::from_json(&serde_json::to_string(&plan).unwrap()).unwrap();
        assert_eq!(replay.hash(), plan.hash());
    }

    #[test]
    fn invalid_plans() {
        let empty = ExperimentPlan {
            entries: vec![],
            out: None,
            format: OutputFormat::Csv,
        };
        assert!(run_plan(&empty, None).unwrap_err().is_validation());
        let zero = ExperimentPlan {
            entries: vec![entry(NoiseSpec::Constant { symbol: 0 }, 0)],
            out: None,
            format: OutputFormat::Csv,
        };
        assert!(run_plan(&zero, None).is_err());
        let bad = ExperimentPlan {
            entries: vec![entry(NoiseSpec::Constant { symbol: 5 }, 1)],
            out: None,
            format: OutputFormat::Csv,
        };
        assert!(run_plan(&bad, None).unwrap_err().is_validation());
    }

    #[test]
    fn zero_noise_sweep_approaches_one() {
        let params = SweepParams {
            alphabet: Alphabet::binary(),
            noise: NoiseSpec::Constant { symbol: 0 },
            n_grid: vec![1 << 10, 1 << 13, 1 << 16],
            k_bits: 4,
            epsilon: 0.05,
            trials: 1,
            seed: 3,
            metric: Metric::Lz78,
        };
        let rows = sweep_rates(&params, None).unwrap();
        assert!(rows
            .windows(2)
            .all(|w| w[0].median_r_emp < w[1].median_r_emp));
        assert!(rows[2].median_r_emp > 0.95);
        assert!(rows.iter().all(|r| r.capacity.is_none()));
    }

    #[test]
    fn sweep_capacity_column() {
        let params = SweepParams {
            alphabet: Alphabet::binary(),
            noise: NoiseSpec::bernoulli(Alphabet::binary(), 0.11),
            n_grid: vec![512],
            k_bits: 4,
            epsilon: 0.05,
            trials: 2,
            seed: 1,
            metric: Metric::Lz78,
        };
        let rows = sweep_rates(&params, None).unwrap();
        let c = rows[0].capacity.unwrap();
        assert!((c - 0.50008).abs() < 1e-5);
        assert!((rows[0].capacity_emp.unwrap() - c).abs() < 0.1);
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
