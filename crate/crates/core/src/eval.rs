//! Leave-one-out evaluation: corruption, reciprocal ranks and the multi-run
//! experiment loop.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{load_corpus, prune, time_split, to_matrix, Corpus, SynthParams};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseBinaryMatrix};
use crate::recommenders::{fit_model, FitInput, ModelKind, Modality, PredictInput, Recommender, TrainConfig};
use crate::textfeat::{load_embeddings, TitleFeaturizer};

/// Test rows with one known item removed each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptedTestSet {
    pub x_corrupted: SparseBinaryMatrix,
    /// Column removed from each row.
    pub omitted: Vec<usize>,
}

/// Removes one uniformly chosen nonzero from every row.
pub fn corrupt(x_test: &SparseBinaryMatrix, seed: u64) -> Result<CorruptedTestSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x_corrupted = SparseBinaryMatrix::empty(x_test.n_cols());
    let mut omitted = Vec::with_capacity(x_test.n_rows());
    for (i, row) in x_test.rows().enumerate() {
        if row.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "test row {i} has {} item(s), corruption needs at least 2",
                row.len()
            )));
        }
        let &drop = row.choose(&mut rng).expect("row is non-empty");
        let kept: Vec<usize> = row.iter().copied().filter(|&c| c != drop).collect();
        x_corrupted.push_row(&kept)?;
        omitted.push(drop);
    }
    Ok(CorruptedTestSet { x_corrupted, omitted })
}

/// `1 / rank` of `omitted`, ties broken by ascending index.
pub fn reciprocal_rank(scores: &[f64], omitted: usize) -> Result<f64> {
    let Some(&target) = scores.get(omitted) else {
        return Err(Error::InvalidArgument(format!(
            "omitted index {omitted} out of range for {} scores",
            scores.len()
        )));
    };
    let above = scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| s > target || (s == target && j < omitted))
        .count();
    Ok(1.0 / (above + 1) as f64)
}

/// Mean reciprocal rank over all test rows.
pub fn mrr(scores: &DenseMatrix, corrupted: &CorruptedTestSet) -> Result<f64> {
    if scores.n_rows() != corrupted.omitted.len() {
        return Err(Error::Shape {
            op: "mrr",
            left: scores.shape(),
            right: (corrupted.omitted.len(), corrupted.x_corrupted.n_cols()),
        });
    }
    if corrupted.omitted.is_empty() {
        return Err(Error::InvalidArgument("mrr of an empty test set".into()));
    }
    let mut total = 0.0;
    for (i, &o) in corrupted.omitted.iter().enumerate() {
        total += reciprocal_rank(scores.row(i), o)?;
    }
    Ok(total / corrupted.omitted.len() as f64)
}

/// Where the documents come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files { ratings: PathBuf, meta: PathBuf },
    /// Generated in memory; no files are written.
    Synthetic(SynthParams),
}

impl DataSource {
    fn load(&self) -> Result<Corpus> {
        match self {
            DataSource::Files { ratings, meta } => load_corpus(ratings, meta),
            DataSource::Synthetic(p) => crate::corpus::generate_synthetic(p)?.to_corpus(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub split_year: i32,
    pub alphas: Vec<usize>,
    pub models: Vec<ModelKind>,
    pub modalities: Vec<Modality>,
    pub runs: usize,
    pub seed: u64,
    /// `builtin:hash:<dim>:<seed>` or a word2vec text file.
    pub embeddings: String,
    pub out: Option<PathBuf>,
    /// Epochs, sizes and SVD rank; the seed is overridden per run.
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn new(data: DataSource, split_year: i32) -> Self {
        Self {
            data,
            split_year,
            alphas: vec![1],
            models: ModelKind::ALL.to_vec(),
            modalities: vec![Modality::Both],
            runs: 3,
            seed: 0,
            embeddings: default_embeddings(0),
            out: None,
            train: TrainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        if self.alphas.is_empty() {
            return bad("alpha list is empty");
        }
        if self.models.is_empty() {
            return bad("model list is empty");
        }
        if self.modalities.is_empty() {
            return bad("modality list is empty");
        }
        for &m in &self.models {
            if !self.modalities.iter().any(|&md| m.supports(md)) {
                return Err(Error::InvalidArgument(format!(
                    "model {m} supports none of the configured modalities"
                )));
            }
        }
        Ok(())
    }

    /// (model, modality) pairs in evaluation order; unsupported pairs are skipped.
    pub fn cells(&self) -> Vec<(ModelKind, Modality)> {
        let mut out = Vec::new();
        for &m in &self.models {
            for &md in &self.modalities {
                if m.supports(md) && !out.contains(&(m, md)) {
                    out.push((m, md));
                }
            }
        }
        out
    }
}

pub fn default_embeddings(seed: u64) -> String {
    format!("builtin:hash:50:{seed}")
}

/// One (model, modality, alpha, run) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub model: ModelKind,
    pub modality: Modality,
    pub alpha: usize,
    pub run: usize,
    pub seed: u64,
    pub mrr: f64,
    /// Seconds spent in fit plus predict.
    pub wall_time: f64,
}

/// What a model was scored against; passed to an [`EvalObserver`].
#[derive(Debug, Clone, Copy)]
pub struct EvalCell<'a> {
    pub alpha: usize,
    pub run: usize,
    pub model: ModelKind,
    pub modality: Modality,
    pub corrupted: &'a CorruptedTestSet,
}

pub trait EvalObserver {
    fn on_cell(&mut self, cell: &EvalCell<'_>);
}

impl<F: FnMut(&EvalCell<'_>)> EvalObserver for F {
    fn on_cell(&mut self, cell: &EvalCell<'_>) {
        self(cell)
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunResult>> {
    run_experiment_with(config, &mut |_: &EvalCell<'_>| {})
}

/// Runs every configured cell. Each run shares one corruption between all
/// models; run `r` seeds both corruption and model initialization with
/// `seed + r`.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    observer: &mut dyn EvalObserver,
) -> Result<Vec<RunResult>> {
    config.validate()?;
    let corpus = config.data.load()?;
    let split = time_split(&corpus, config.split_year)?;
    let needs_titles = config.cells().iter().any(|(_, md)| md.uses_titles());
    let embeddings = if needs_titles {
        Some(load_embeddings(&config.embeddings)?)
    } else {
        None
    };

    let mut results = Vec::new();
    for &alpha in &config.alphas {
        let (pruned, train_report, test_report) =
            prune(&split, alpha).map_err(|e| e.context(format!("alpha {alpha}")))?;
        info!(
            "alpha {alpha}: {} train docs, {} test docs, {} items, density {:.6}",
            train_report.n_documents, test_report.n_documents, train_report.n_items, train_report.density
        );
        if pruned.test.is_empty() {
            return Err(Error::EmptySplit {
                side: "pruned test",
                split_year: config.split_year,
            }
            .context(format!("alpha {alpha}")));
        }
        let x_train = to_matrix(&pruned.train);
        let x_test = to_matrix(&pruned.test);
        let titles = embeddings.as_ref().map(|emb| {
            let f = TitleFeaturizer::fit(&pruned.train.titles(), emb.clone());
            (f.transform(&pruned.train.titles()), f.transform(&pruned.test.titles()))
        });

        for run in 0..config.runs {
            let seed = config.seed + run as u64;
            let corrupted = corrupt(&x_test, seed).map_err(|e| e.context(format!("alpha {alpha}, run {run}")))?;
            let cfg = TrainConfig {
                seed,
                ..config.train
            };
            for (model, modality) in config.cells() {
                let ctx = || format!("alpha {alpha}, model {model}, modality {modality}, run {run}");
                let (t_train, t_test) = match (&titles, modality.uses_titles()) {
                    (Some((a, b)), true) => (Some(a), Some(b)),
                    _ => (None, None),
                };
                let start = Instant::now();
                let fitted = fit_model(
                    model,
                    modality,
                    &FitInput {
                        x_train: &x_train,
                        titles_train: t_train,
                    },
                    &cfg,
                )
                .map_err(|e| e.context(ctx()))?;
                let input = PredictInput {
                    x_corrupted: &corrupted.x_corrupted,
                    titles_test: t_test,
                };
                observer.on_cell(&EvalCell {
                    alpha,
                    run,
                    model,
                    modality,
                    corrupted: &corrupted,
                });
                let scores = fitted.predict(&input).map_err(|e| e.context(ctx()))?;
                let wall_time = start.elapsed().as_secs_f64();
                let value = mrr(&scores, &corrupted).map_err(|e| e.context(ctx()))?;
                info!("{}: mrr {value:.4} in {wall_time:.1}s", ctx());
                results.push(RunResult {
                    model,
                    modality,
                    alpha,
                    run,
                    seed,
                    mrr: value,
                    wall_time,
                });
            }
        }
    }
    Ok(results)
}

pub const CSV_HEADER: &str = "model,modality,alpha,run,seed,mrr,wall_time_s";

pub fn results_csv(results: &[RunResult]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in results {
        writeln!(
            s,
            "{},{},{},{},{},{},{:.1}",
            r.model, r.modality, r.alpha, r.run, r.seed, r.mrr, r.wall_time
        )
        .unwrap();
    }
    s
}

/// Writes the CSV next to `path` first and renames it into place.
pub fn write_results(results: &[RunResult], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, results_csv(results)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
