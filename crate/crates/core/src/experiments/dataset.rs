//! Seeded dataset generation and JSON-lines persistence.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cheeger::{boundary_size, cheeger_exact};
use crate::error::{Error, Result};
use crate::estimators::{bounds, Sample};
use crate::graph::{check_parameters, generate_regular, Graph};
use crate::seed::Seed;
use crate::spectral::{spectrum, Spectrum, DEFAULT_TOLERANCE};

/// Slack on the bound sandwich check.
pub const SANDWICH_SLACK: f64 = 1e-9;

/// One generated graph with its spectrum and exact Cheeger constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub n: usize,
    pub k: usize,
    pub index: u64,
    pub seed: Seed,
    /// Adjacency eigenvalues, descending.
    pub spectrum: Vec<f64>,
    /// `|∂F|` of the witness.
    pub h_num: u64,
    /// `|F|` of the witness.
    pub h_den: u64,
    pub h: f64,
    /// Minimising vertex set as a bitmask.
    pub witness: u64,
}

impl GraphRecord {
    pub fn key(&self) -> (usize, usize, u64) {
        (self.n, self.k, self.index)
    }

    /// Generates the graph for `(n, k, index)`, solves it and checks it.
    pub fn compute(n: usize, k: usize, index: u64, master: u64) -> Result<Self> {
        let wrap = |e: Error| Error::Record {
            n,
            k,
            index,
            source: Box::new(e),
        };
        let seed = record_seed(master, n, k, index);
        let g = generate_regular(n, k, seed).map_err(wrap)?;
        let s = spectrum(&g, DEFAULT_TOLERANCE).map_err(wrap)?;
        let c = cheeger_exact(&g).map_err(wrap)?;
        let record = GraphRecord {
            n,
            k,
            index,
            seed,
            spectrum: s.values().to_vec(),
            h_num: c.boundary,
            h_den: c.size,
            h: c.h(),
            witness: c.witness,
        };
        let problems = record.check_against(&g);
        if !problems.is_empty() {
            return Err(wrap(Error::InvalidRecord(problems.join("; "))));
        }
        Ok(record)
    }

    pub fn lambda1(&self) -> f64 {
        self.spectrum[1]
    }

    /// The `m` leading eigenvalues paired with `h`.
    pub fn sample(&self, m: usize) -> Sample {
        Sample::new(self.spectrum[..m.min(self.n)].to_vec(), self.h)
    }

    /// Checks that need only the record: spectrum invariants, the rational
    /// `h`, witness size, and the bound sandwich.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.spectrum.len() != self.n {
            out.push(format!(
                "spectrum has {} values for n={}",
                self.spectrum.len(),
                self.n
            ));
            return out;
        }
        let s = Spectrum::from_values(self.spectrum.clone());
        if s.values() != self.spectrum.as_slice() {
            out.push("spectrum is not sorted descending".into());
        }
        out.extend(s.regular_violations(self.k));
        if self.h_den == 0 || self.h != self.h_num as f64 / self.h_den as f64 {
            out.push(format!(
                "h = {} is not {}/{}",
                self.h, self.h_num, self.h_den
            ));
        }
        if u64::from(self.witness.count_ones()) != self.h_den || self.h_den as usize > self.n / 2 {
            out.push(format!("witness size does not match |F| = {}", self.h_den));
        }
        match bounds(self.k, self.n, self.lambda1()) {
            Ok(b) => {
                if self.h < b.lower - SANDWICH_SLACK || self.h > b.upper + SANDWICH_SLACK {
                    out.push(format!(
                        "h = {} outside bounds [{}, {}]",
                        self.h, b.lower, b.upper
                    ));
                }
            }
            Err(e) => out.push(e.to_string()),
        }
        out
    }

    /// [`GraphRecord::check`] plus graph validity and the witness boundary,
    /// against the given graph.
    pub fn check_against(&self, g: &Graph) -> Vec<String> {
        let mut out: Vec<String> = g.validate().iter().map(ToString::to_string).collect();
        if !g.is_connected() {
            out.push("graph is not connected".into());
        }
        if boundary_size(g, self.witness) != self.h_num {
            out.push(format!(
                "witness boundary differs from |∂F| = {}",
                self.h_num
            ));
        }
        out.extend(self.check());
        out
    }

    /// Regenerates the graph from the stored seed and runs every check.
    pub fn check_full(&self) -> Vec<String> {
        match generate_regular(self.n, self.k, self.seed) {
            Ok(g) => self.check_against(&g),
            Err(e) => vec![e.to_string()],
        }
    }
}

/// Seed of record `(n, k, index)`: the stream index packs the key.
pub fn record_seed(master: u64, n: usize, k: usize, index: u64) -> Seed {
    Seed::new(master, (n as u64) << 48 | (k as u64) << 40 | index)
}

/// Degrees used at size `n` unless configured otherwise: `3..=min(8, n−2)`
/// with `n·k` even.
pub fn default_degrees(n: usize) -> Vec<usize> {
    (3..=8.min(n.saturating_sub(2)))
        .filter(|k| (n * k).is_multiple_of(2))
        .collect()
}

/// Default record count at size `n`.
pub fn default_count(n: usize) -> usize {
    match n {
        0..=20 => 2_000,
        21..=26 => 300,
        _ => 100,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizePlan {
    pub n: usize,
    pub degrees: Vec<usize>,
    pub count: usize,
}

impl SizePlan {
    pub fn new(n: usize, degrees: Vec<usize>, count: usize) -> Self {
        SizePlan { n, degrees, count }
    }

    /// Default degrees and count for `n`.
    pub fn desk_scale(n: usize) -> Self {
        SizePlan::new(n, default_degrees(n), default_count(n))
    }

    /// `(k, index)` keys: `count` records spread evenly over the degrees,
    /// earlier degrees taking the remainder.
    pub fn keys(&self) -> Vec<(usize, u64)> {
        let d = self.degrees.len();
        if d == 0 {
            return Vec::new();
        }
        let (per, extra) = (self.count / d, self.count % d);
        self.degrees
            .iter()
            .enumerate()
            .flat_map(|(i, &k)| {
                let c = per + usize::from(i < extra);
                (0..c as u64).map(move |idx| (k, idx))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sizes: Vec<SizePlan>,
    pub master_seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(sizes: Vec<SizePlan>, master_seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            sizes,
            master_seed,
            out_dir: out_dir.into(),
        }
    }

    pub fn desk_scale(sizes: &[usize], master_seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig::new(
            sizes.iter().map(|&n| SizePlan::desk_scale(n)).collect(),
            master_seed,
            out_dir,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::InvalidParameters("no sizes configured".into()));
        }
        for plan in &self.sizes {
            if plan.count == 0 {
                return Err(Error::InvalidParameters(format!(
                    "n={}: count must be at least 1",
                    plan.n
                )));
            }
            if plan.degrees.is_empty() {
                return Err(Error::InvalidParameters(format!(
                    "n={}: no degrees",
                    plan.n
                )));
            }
            for &k in &plan.degrees {
                check_parameters(plan.n, k)?;
            }
        }
        Ok(())
    }
}

pub fn dataset_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("records_n{n:02}.jsonl"))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BuildSummary {
    pub files: Vec<PathBuf>,
    pub generated: usize,
    pub reused: usize,
}

/// Generates, solves and writes every record the config asks for, one
/// JSON-lines file per size. Records already present on disk are kept.
/// Output files are sorted by key and independent of `threads`.
pub fn build_dataset(config: &ExperimentConfig, threads: usize) -> Result<BuildSummary> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameters(e.to_string()))?;

    let mut summary = BuildSummary::default();
    for plan in &config.sizes {
        let path = dataset_path(&config.out_dir, plan.n);
        let mut have: BTreeMap<(usize, u64), GraphRecord> = BTreeMap::new();
        if path.exists() {
            for r in read_records(&path)? {
                let expected = record_seed(config.master_seed, r.n, r.k, r.index);
                if r.n == plan.n && r.seed == expected {
                    have.insert((r.k, r.index), r);
                }
            }
        }
        let keys = plan.keys();
        let missing: Vec<(usize, u64)> = keys
            .iter()
            .copied()
            .filter(|key| !have.contains_key(key))
            .collect();
        summary.reused += keys.len() - missing.len();
        summary.generated += missing.len();

        let fresh: Vec<GraphRecord> = pool.install(|| {
            missing
                .par_iter()
                .map(|&(k, idx)| GraphRecord::compute(plan.n, k, idx, config.master_seed))
                .collect::<Result<_>>()
        })?;
        for r in fresh {
            have.insert((r.k, r.index), r);
        }
        let records: Vec<&GraphRecord> = keys.iter().map(|key| &have[key]).collect();
        write_records(&path, records)?;
        summary.files.push(path);
    }
    Ok(summary)
}

fn write_records<'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a GraphRecord>,
) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records serialize");
        buf.push(b'\n');
    }
    let tmp = path.with_extension("jsonl.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<GraphRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// All records of a dataset directory (or a single file), sorted by key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    records: Vec<GraphRecord>,
}

impl Dataset {
    pub fn new(mut records: Vec<GraphRecord>) -> Self {
        records.sort_by_key(GraphRecord::key);
        Dataset { records }
    }

    pub fn load(path: &Path) -> Result<Self> {
        if path.is_file() {
            return Ok(Dataset::new(read_records(path)?));
        }
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        let mut records = Vec::new();
        for f in files {
            records.extend(read_records(&f)?);
        }
        Ok(Dataset::new(records))
    }

    pub fn records(&self) -> &[GraphRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.records.iter().map(|r| r.n).collect();
        s.dedup();
        s
    }

    pub fn of_size(&self, n: usize) -> Vec<&GraphRecord> {
        self.records.iter().filter(|r| r.n == n).collect()
    }

    /// Records of size `n`, or [`Error::MissingSize`] if there are none.
    pub fn require(&self, n: usize) -> Result<Vec<&GraphRecord>> {
        let rs = self.of_size(n);
        if rs.is_empty() {
            Err(Error::MissingSize(n))
        } else {
            Ok(rs)
        }
    }

    /// `(λ0..λ(m−1), h)` samples for size `n`.
    pub fn samples(&self, n: usize, m: usize) -> Result<Vec<Sample>> {
        Ok(self.require(n)?.iter().map(|r| r.sample(m)).collect())
    }

    /// CSV with columns `n,k,index,lambda0..lambda3,h`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,k,index,lambda0,lambda1,lambda2,lambda3,h\n");
        for r in &self.records {
            let eig: Vec<String> = (0..4)
                .map(|i| r.spectrum.get(i).map_or(String::new(), |x| x.to_string()))
                .collect();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.n,
                r.k,
                r.index,
                eig.join(","),
                r.h
            ));
        }
        out
    }
}
