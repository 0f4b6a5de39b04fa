use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};

use rqa_core::corpus::{generate_synthetic, load_corpus, plan_folds, Corpus, Label};
use rqa_core::features::fit_normalizer;
use rqa_core::metrics::{evaluate, ScoredSet};
use rqa_core::trainer::{cross_validate_dataset, history_csv, train as train_model, Split};
use rqa_core::{Dataset, EmbeddingTable, Error, ModelFile, Result, TrainConfig};

use crate::{CvArgs, EmbedArgs, EvalArgs, ScoreArgs, SynthArgs, TrainArgs};

pub type Written = Vec<PathBuf>;

const SEED_ENV: &str = "RQA_SEED";

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// `RQA_SEED` beats `--seed`, which beats `fallback`.
fn resolve_seed(flag: Option<u64>, fallback: u64) -> Result<u64> {
    Ok(env_seed()?.or(flag).unwrap_or(fallback))
}

/// Write through a sibling temp file and rename into place.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
    })
}

fn read_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    TrainConfig::from_toml_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn table_for(path: Option<&Path>, dim: usize) -> Result<EmbeddingTable> {
    match path {
        Some(p) => {
            let t = EmbeddingTable::load(p)?;
            if t.dim() != dim {
                return Err(Error::Shape(format!(
                    "{} has dimension {}, expected {dim}",
                    p.display(),
                    t.dim()
                )));
            }
            Ok(t)
        }
        None => Ok(EmbeddingTable::empty(dim)),
    }
}

fn report_fallbacks(table: &EmbeddingTable) {
    if table.fallback_count() > 0 && !table.is_empty() {
        warn!("{} texts missing from the embedding table were hash-embedded", table.fallback_count());
    }
}

pub fn synth(a: SynthArgs) -> Result<Written> {
    let seed = resolve_seed(Some(a.seed), 0)?;
    let corpus = generate_synthetic(a.pos, a.neg, a.unlabeled, seed);
    write_atomic(&a.out, &corpus.to_jsonl())?;
    Ok(vec![a.out])
}

pub fn embed(a: EmbedArgs) -> Result<Written> {
    if a.dim == 0 {
        return Err(Error::Argument("--dim must be positive".into()));
    }
    let corpus = load_corpus(&a.corpus)?;
    let source = table_for(a.embeddings.as_deref(), a.dim)?;
    let mut out = EmbeddingTable::empty(a.dim);
    let mut seen = HashSet::new();
    for r in corpus.resumes() {
        for text in r.skills.iter().chain(&r.work_experiences) {
            if seen.insert(text.as_str()) {
                let v = source.lookup(text);
                out.insert(text.clone(), v)?;
            }
        }
    }
    info!("{} distinct texts, {} hash-embedded", out.len(), source.fallback_count());
    write_atomic(&a.out, &out.to_text())?;
    Ok(vec![a.out])
}

pub fn train(a: TrainArgs) -> Result<Written> {
    let mut config = read_config(&a.config)?;
    config.seed = resolve_seed(a.seed, config.seed)?;
    let corpus = load_corpus(&a.corpus)?;
    let table = table_for(a.embeddings.as_deref(), config.embedding_dim)?;
    let stats = fit_normalizer(&corpus)?;
    let data = Dataset::new(&corpus, &table, &stats);
    report_fallbacks(&table);

    let split = if a.auto_split {
        let plan = plan_folds(&corpus, 5, config.seed)?;
        let roles = &plan.schedule[0];
        let ids: Vec<&str> = roles.training.iter().flat_map(|&f| plan.fold_ids(f)).collect();
        Split {
            train: data.positions(&ids)?,
            validation: data.positions(&plan.fold_ids(roles.validation))?,
            unlabeled: data.unlabeled(),
        }
    } else {
        if a.train_ids.is_empty() {
            return Err(Error::Config("give --train-ids or --auto-split".into()));
        }
        let split = Split {
            train: data.positions(&a.train_ids)?,
            validation: data.positions(&a.val_ids)?,
            unlabeled: data.unlabeled(),
        };
        if let Some(&i) = split
            .train
            .iter()
            .chain(&split.validation)
            .find(|&&i| data.labels[i] == Label::Unlabeled)
        {
            return Err(Error::Validation(format!("{} is unlabeled", data.id(i))));
        }
        split
    };

    let outcome = train_model(&data, &split, &config)?;
    let model = ModelFile::new(outcome.params, stats, config);
    let history_path = a
        .history_out
        .unwrap_or_else(|| with_suffix(&a.model_out, ".history.csv"));
    write_atomic(&a.model_out, &model.to_json())?;
    write_atomic(&history_path, &history_csv(&outcome.history))?;
    Ok(vec![a.model_out, history_path])
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cv(a: CvArgs) -> Result<Written> {
    let mut config = read_config(&a.config)?;
    config.seed = resolve_seed(a.seed, config.seed)?;
    if let Some(jobs) = a.jobs {
        if jobs == 0 {
            return Err(Error::Argument("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let corpus = load_corpus(&a.corpus)?;
    if corpus.counts().labeled() < 5 {
        return Err(Error::Protocol(format!(
            "{} labeled resumes cannot fill 5 folds",
            corpus.counts().labeled()
        )));
    }
    let table = table_for(a.embeddings.as_deref(), config.embedding_dim)?;
    let stats = fit_normalizer(&corpus)?;
    let data = Dataset::new(&corpus, &table, &stats);
    report_fallbacks(&table);
    let report = cross_validate_dataset(&corpus, &data, &config, a.shuffles)?;

    let roc_dir = a
        .roc_dir
        .clone()
        .or_else(|| a.out.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    if !roc_dir.as_os_str().is_empty() {
        fs::create_dir_all(&roc_dir).map_err(|e| Error::Io {
            path: roc_dir.clone(),
            source: e,
        })?;
    }
    let mut written = vec![a.out.clone()];
    let mut files: Vec<(PathBuf, String)> = vec![(a.out.clone(), report.to_json())];
    for block in &report.shuffles {
        let path = roc_dir.join(format!("roc_shuffle_{:02}.csv", block.shuffle));
        let csv: String = block.roc.iter().map(|(f, t)| format!("{f},{t}\n")).collect();
        files.push((path.clone(), csv));
        written.push(path);
    }
    for (path, text) in files {
        write_atomic(&path, &text)?;
    }
    Ok(written)
}

pub fn score(a: ScoreArgs) -> Result<Written> {
    let model = ModelFile::load(&a.model)?;
    let corpus = load_corpus(&a.corpus)?;
    let table = table_for(a.embeddings.as_deref(), model.dims.embedding)?;
    let data = Dataset::new(&corpus, &table, &model.normalization);
    report_fallbacks(&table);
    let all: Vec<usize> = (0..data.len()).collect();
    let scores = data.scores(&model.params, &all)?;
    let csv: String = all
        .iter()
        .zip(scores)
        .map(|(&i, s)| format!("{},{s}\n", data.id(i)))
        .collect();
    write_atomic(&a.out, &csv)?;
    Ok(vec![a.out])
}

fn read_scores(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (id, score) = line
                .rsplit_once(',')
                .ok_or_else(|| parse_err("expected `id,score`".into()))?;
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad score: {e}")))?;
            Ok((id.trim().to_string(), score))
        })
        .collect()
}

pub fn eval(a: EvalArgs) -> Result<Written> {
    let corpus: Corpus = load_corpus(&a.corpus)?;
    let rows = read_scores(&a.scores)?;
    let mut items = Vec::with_capacity(rows.len());
    let mut ignored = 0usize;
    for (id, score) in rows {
        let resume = corpus
            .get(&id)
            .ok_or_else(|| Error::Validation(format!("scored id {id:?} is not in the corpus")))?;
        match resume.label {
            Label::Unlabeled => ignored += 1,
            label => items.push((id, score, label == Label::Positive)),
        }
    }
    if ignored > 0 {
        warn!("ignored {ignored} unlabeled resumes");
    }
    let set = ScoredSet::from_tuples(items)?;
    let (metrics, roc) = evaluate(&set)?;
    let mut report = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    report.push('\n');
    let mut written = vec![a.out.clone()];
    write_atomic(&a.out, &report)?;
    if let Some(path) = a.roc_out {
        write_atomic(&path, &roc.to_csv())?;
        written.push(path);
    }
    Ok(written)
}
