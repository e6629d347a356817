use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use super::config::default_family;
use super::metrics::relative_error;
use super::synthetic::{gen_mask, gen_synthetic, FactorSource, SyntheticSpec};
use crate::error::{Error, Result};
use crate::solver::{self, Model, SolverConfig};
use crate::transforms::FamilySpec;

/// Recovery counts as successful at or below this relative error.
pub const SUCCESS_RE: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub shape: Vec<usize>,
    pub ranks: Vec<usize>,
    pub ps: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub factors: FactorSource,
    /// `None` selects the default synthetic family.
    pub transforms: Option<FamilySpec>,
    pub workers: usize,
}

impl SweepSpec {
    /// R ∈ {1..10}, p ∈ {0.1..0.9}, five trials per cell on a 20⁴ tensor.
    pub fn desk_default() -> Self {
        Self {
            shape: vec![20; 4],
            ranks: (1..=10).collect(),
            ps: (1..=9).map(|i| i as f64 / 10.0).collect(),
            trials: 5,
            seed: 0,
            factors: FactorSource::Dcm,
            transforms: None,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

/// One `(R, p)` cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub shape: String,
    pub rank: usize,
    pub p: f64,
    pub trials: usize,
    pub mean_re: f64,
    /// Per-trial relative errors, `;`-separated.
    pub trial_re: String,
    pub success: bool,
    pub mean_iterations: f64,
    pub converged_trials: usize,
    pub max_rel_residual: f64,
    pub psnr_db: Option<f64>,
    pub wall_time_s: f64,
}

impl ExperimentRecord {
    pub fn key(&self) -> (usize, i64) {
        cell_key(self.rank, self.p)
    }

    pub fn trial_values(&self) -> Vec<f64> {
        self.trial_re.split(';').filter_map(|s| s.parse().ok()).collect()
    }

    /// Equality ignoring wall time.
    pub fn same_result(&self, other: &Self) -> bool {
        Self {
            wall_time_s: 0.0,
            ..self.clone()
        } == Self {
            wall_time_s: 0.0,
            ..other.clone()
        }
    }
}

fn cell_key(rank: usize, p: f64) -> (usize, i64) {
    (rank, (p * 1e6).round() as i64)
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// `(data_seed, mask_seed)` for one trial. The data depends only on the
/// base seed, the rank and the trial, so every `p` of a row sees the same
/// tensors.
pub fn trial_seeds(base: u64, rank: usize, p: f64, trial: usize) -> (u64, u64) {
    let data = splitmix(splitmix(base ^ 0xda7a) ^ ((rank as u64) << 32 | trial as u64));
    let mask = splitmix(data ^ (p * 1e6).round() as u64);
    (data, mask)
}

pub fn shape_label(shape: &[usize]) -> String {
    shape.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
}

/// Runs all trials of one cell.
pub fn run_cell(spec: &SweepSpec, config: &SolverConfig, rank: usize, p: f64) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let order = spec.shape.len();
    let config = config.clone().with_model(Model::TcU1);
    let fam_spec = spec
        .transforms
        .clone()
        .unwrap_or_else(|| default_family(Model::TcU1, order, true));
    let fam = fam_spec.build(&spec.shape)?;
    let mut res = Vec::with_capacity(spec.trials);
    let mut iterations = 0usize;
    let mut converged = 0usize;
    let mut max_rel_residual: f64 = 0.0;
    for trial in 0..spec.trials.max(1) {
        let (ds, ms) = trial_seeds(spec.seed, rank, p, trial);
        let m = gen_synthetic(&SyntheticSpec {
            shape: spec.shape.clone(),
            rank,
            seed: ds,
            factors: spec.factors,
        })?;
        let mask = gen_mask(&spec.shape, p, ms)?;
        let out = solver::solve(&mask.project(&m)?, &mask, &fam, &config)?;
        res.push(relative_error(&m, &out.x)?);
        iterations += out.diagnostics.iterations;
        converged += out.diagnostics.converged() as usize;
        max_rel_residual = max_rel_residual.max(out.diagnostics.final_rel_residual());
    }
    let n = res.len() as f64;
    let mean_re = res.iter().sum::<f64>() / n;
    Ok(ExperimentRecord {
        shape: shape_label(&spec.shape),
        rank,
        p,
        trials: res.len(),
        mean_re,
        trial_re: res.iter().map(|r| format!("{r:.6e}")).collect::<Vec<_>>().join(";"),
        success: mean_re <= SUCCESS_RE,
        mean_iterations: iterations as f64 / n,
        converged_trials: converged,
        max_rel_residual,
        psnr_db: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Reads the records of a sweep CSV; a missing or empty file has none.
pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    if !path.exists() || std::fs::metadata(path)?.len() == 0 {
        return Ok(Vec::new());
    }
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn write_sorted(path: &Path, records: &mut [ExperimentRecord]) -> Result<()> {
    records.sort_by_key(|r| r.key());
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        for r in records.iter() {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs every `(R, p)` cell not already present in `out`, appending each
/// finished record, then rewrites `out` sorted by `(R, p)`.
pub fn sweep(spec: &SweepSpec, config: &SolverConfig, out: &Path) -> Result<Vec<ExperimentRecord>> {
    sweep_with_limit(spec, config, out, usize::MAX)
}

/// [`sweep`] that stops after `limit` new cells, leaving the output in
/// the appended (unsorted) state an interrupted run would leave.
pub fn sweep_with_limit(
    spec: &SweepSpec,
    config: &SolverConfig,
    out: &Path,
    limit: usize,
) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let existing = read_records(out)?;
    let done: HashSet<_> = existing.iter().map(|r| r.key()).collect();
    let cells: Vec<(usize, f64)> = spec
        .ranks
        .iter()
        .flat_map(|&r| spec.ps.iter().map(move |&p| (r, p)))
        .filter(|&(r, p)| !done.contains(&cell_key(r, p)))
        .take(limit)
        .collect();
    info!("{} cells done, {} to run", existing.len(), cells.len());

    let fresh = existing.is_empty();
    let file = OpenOptions::new().create(true).append(true).open(out)?;
    let writer = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    let sink: Mutex<(csv::Writer<File>, Vec<ExperimentRecord>)> = Mutex::new((writer, existing));
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let workers = spec.workers.max(1).min(cells.len().max(1));

    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if failure.lock().expect("lock").is_some() {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(r, p)) = cells.get(i) else { break };
                let result = run_cell(spec, config, r, p).and_then(|rec| {
                    info!("R={r} p={p}: mean RE {:.3e}", rec.mean_re);
                    let mut guard = sink.lock().expect("lock");
                    guard.0.serialize(&rec)?;
                    guard.0.flush()?;
                    guard.1.push(rec);
                    Ok(())
                });
                if let Err(e) = result {
                    failure.lock().expect("lock").get_or_insert(e);
                    break;
                }
            });
        }
    });

    if let Some(e) = failure.into_inner().expect("lock") {
        return Err(e);
    }
    let (writer, mut records) = sink.into_inner().expect("lock");
    drop(writer);
    if limit == usize::MAX || records.len() == spec.ranks.len() * spec.ps.len() {
        write_sorted(out, &mut records)?;
    }
    records.sort_by_key(|r| r.key());
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SweepSpec {
        SweepSpec {
            shape: vec![6, 6, 6],
            ranks: vec![1, 2],
            ps: vec![0.5, 0.8],
            trials: 2,
            seed: 4,
            factors: FactorSource::Dcm,
            transforms: None,
            workers: 2,
        }
    }

    fn cfg() -> SolverConfig {
        SolverConfig {
            max_iter: 60,
            ..Default::default()
        }
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(trial_seeds(1, 2, 0.5, 0), trial_seeds(1, 2, 0.5, 0));
        assert_ne!(trial_seeds(1, 2, 0.5, 0).1, trial_seeds(1, 2, 0.6, 0).1);
        assert_eq!(trial_seeds(1, 2, 0.5, 0).0, trial_seeds(1, 2, 0.6, 0).0);
        assert_ne!(trial_seeds(1, 2, 0.5, 0).0, trial_seeds(1, 2, 0.5, 1).0);
    }

    #[test]
    fn one_cell_grid_matches_run_cell() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("one.csv");
        let spec = SweepSpec {
            ranks: vec![2],
            ps: vec![0.8],
            ..tiny()
        };
        let recs = sweep(&spec, &cfg(), &out).unwrap();
        let direct = run_cell(&spec, &cfg(), 2, 0.8).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].same_result(&direct));
        assert_eq!(read_records(&out).unwrap().len(), 1);
    }

    #[test]
    fn resumed_sweep_matches_uninterrupted() {
        let dir = tempfile::tempdir().unwrap();
        let full = dir.path().join("full.csv");
        let part = dir.path().join("part.csv");
        let a = sweep(&tiny(), &cfg(), &full).unwrap();
        let first = sweep_with_limit(&tiny(), &cfg(), &part, 3).unwrap();
        assert_eq!(first.len(), 3);
        let b = sweep(&tiny(), &cfg(), &part).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert!(x.same_result(y), "{x:?} vs {y:?}");
        }
        let on_disk = read_records(&part).unwrap();
        assert!(on_disk.iter().zip(&a).all(|(x, y)| x.same_result(y)));
    }

    #[test]
    fn unwritable_output_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("missing-dir").join("x.csv");
        assert!(sweep(&tiny(), &cfg(), &out).is_err());
    }
}
