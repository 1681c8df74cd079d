//! Flat `key = value` pipeline configuration and the end-to-end run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use log::info;
use topicpref::patterns::{self, TopicVocabulary, DEFAULT_WINDOW};
use topicpref::TrainConfig;

use crate::commands::{self, write_text};
use crate::{PipelineArgs, StageContext, StageResult};

const KEYS: &[&str] = &[
    "corpus",
    "rules",
    "patterns",
    "topics",
    "stop_topics",
    "out",
    "keep_retweets",
    "window",
    "top_n",
    "min_count",
    "k",
    "lp",
    "lq",
    "lr",
    "epochs",
    "seed",
    "workers",
    "fraction",
    "thetas",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    /// Hashtag rules; the topic vocabulary is derived from them unless
    /// `topics` is given, and they drive candidate harvesting.
    pub rules: Option<PathBuf>,
    pub patterns: PathBuf,
    pub topics: Option<PathBuf>,
    pub stop_topics: Option<PathBuf>,
    pub out: PathBuf,
    pub keep_retweets: bool,
    pub window: usize,
    pub top_n: usize,
    pub min_count: usize,
    pub train: TrainConfig,
    pub fraction: f64,
    pub thetas: Vec<usize>,
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("line {line}: bad value {value:?} for {key}: {e}"))
}

/// Reads `key = value` lines. Blank lines and lines starting with `#` are
/// ignored; unknown or repeated keys are errors.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, (String, usize)>> {
    let mut entries = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key = value", i + 1);
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            bail!("line {}: unknown key {key:?}", i + 1);
        }
        if entries
            .insert(key.to_string(), (value.trim().to_string(), i + 1))
            .is_some()
        {
            bail!("line {}: {key} given twice", i + 1);
        }
    }
    Ok(entries)
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).with_context(|| path.display().to_string())
    }

    /// Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let entries = parse_entries(text)?;
        let path = |key: &str| entries.get(key).map(|(v, _)| base.join(v));
        let required = |key: &str| path(key).with_context(|| format!("missing required key {key}"));
        fn num<T: FromStr>(
            entries: &BTreeMap<String, (String, usize)>,
            key: &str,
            default: T,
        ) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            match entries.get(key) {
                Some((v, line)) => parse_value(key, v, *line),
                None => Ok(default),
            }
        }
        let d = TrainConfig::default();
        let thetas = match entries.get("thetas") {
            Some((v, line)) => v
                .split(',')
                .map(|t| parse_value("thetas", t.trim(), *line))
                .collect::<Result<Vec<usize>>>()?,
            None => vec![0, 5, 10, 30, 100],
        };
        Ok(PipelineConfig {
            corpus: required("corpus")?,
            rules: path("rules"),
            patterns: required("patterns")?,
            topics: path("topics"),
            stop_topics: path("stop_topics"),
            out: required("out")?,
            keep_retweets: num(&entries, "keep_retweets", false)?,
            window: num(&entries, "window", DEFAULT_WINDOW)?,
            top_n: num(&entries, "top_n", 1000)?,
            min_count: num(&entries, "min_count", 5)?,
            train: TrainConfig {
                k: num(&entries, "k", d.k)?,
                lambda_p: num(&entries, "lp", d.lambda_p)?,
                lambda_q: num(&entries, "lq", d.lambda_q)?,
                learning_rate: num(&entries, "lr", d.learning_rate)?,
                epochs: num(&entries, "epochs", d.epochs)?,
                seed: num(&entries, "seed", d.seed)?,
                workers: num(&entries, "workers", d.workers)?,
            },
            fraction: num(&entries, "fraction", 0.05)?,
            thetas,
        })
    }

    pub fn apply(&mut self, a: &PipelineArgs) {
        if let Some(out) = &a.out {
            self.out = out.clone();
        }
        let t = &mut self.train;
        t.seed = a.seed.unwrap_or(t.seed);
        t.k = a.k.unwrap_or(t.k);
        t.epochs = a.epochs.unwrap_or(t.epochs);
        t.learning_rate = a.lr.unwrap_or(t.learning_rate);
        t.workers = a.workers.unwrap_or(t.workers);
        self.min_count = a.min_count.unwrap_or(self.min_count);
    }

    /// Every referenced input must exist before any stage runs.
    pub fn validate(&self) -> Result<()> {
        let inputs = [
            Some(("corpus", &self.corpus)),
            self.rules.as_ref().map(|p| ("rules", p)),
            Some(("patterns", &self.patterns)),
            self.topics.as_ref().map(|p| ("topics", p)),
            self.stop_topics.as_ref().map(|p| ("stop_topics", p)),
        ];
        for (key, path) in inputs.into_iter().flatten() {
            if !path.is_file() {
                bail!("{key}: {} does not exist", path.display());
            }
        }
        if self.rules.is_none() && self.topics.is_none() {
            bail!("need rules or topics to define the topic vocabulary");
        }
        self.train.validate()?;
        Ok(())
    }
}

pub fn run_pipeline(a: &PipelineArgs) -> StageResult<()> {
    let mut cfg = PipelineConfig::load(&a.config).stage("config")?;
    cfg.apply(a);
    cfg.validate().stage("config")?;
    let out = &cfg.out;
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .stage("config")?;

    let (tweets, stats) = commands::read_tweets(&cfg.corpus, cfg.keep_retweets).stage("corpus")?;
    write_text(&out.join("corpus_stats.tsv"), &commands::stats_text(&stats)).stage("corpus")?;

    let (pro, con) = patterns::load_curated(&cfg.patterns).stage("patterns")?;
    let mut vocabulary = match &cfg.topics {
        Some(path) => Some(TopicVocabulary::read(path).stage("patterns")?),
        None => None,
    };
    if let Some(rules_path) = &cfg.rules {
        let rules = patterns::load_rules(rules_path).stage("patterns")?;
        let h = commands::harvest_to(
            &tweets,
            &rules,
            cfg.window,
            cfg.top_n,
            &out.join("candidates.tsv"),
        )
        .stage("patterns")?;
        info!(
            "{} hashtag occurrences, {} candidates",
            h.occurrences, h.candidates
        );
        vocabulary.get_or_insert(h.vocabulary);
    }
    let vocabulary = vocabulary.expect("validated: rules or topics present");
    vocabulary
        .write(out.join("topics.txt"))
        .context("cannot write topics.txt")
        .stage("patterns")?;

    let filter =
        commands::filter_config(cfg.min_count, cfg.stop_topics.as_deref()).stage("extract")?;
    let matrix_dir = out.join("matrix");
    let e = commands::extract_to(&tweets, &pro, &con, &vocabulary, &filter, &matrix_dir)
        .stage("extract")?;

    let f = commands::train_to(
        &e.matrix,
        &cfg.train,
        &out.join("model.bin"),
        Some(&out.join("trace.tsv")),
    )
    .stage("train")?;

    let report =
        commands::holdout_report(&e.matrix, cfg.fraction, &cfg.train, &cfg.thetas).stage("eval")?;
    write_text(&out.join("holdout.tsv"), &report).stage("eval")?;

    println!(
        "tweets\t{}\ntopics\t{}\ninstances\t{}\nusers\t{}\nmatrix_topics\t{}\nnnz\t{}\ntrain_rmse\t{:.6}\nout\t{}",
        stats.tweet_count,
        vocabulary.len(),
        e.instances,
        e.matrix.n_users(),
        e.matrix.n_topics(),
        e.matrix.nnz(),
        f.rmse_trace.last().copied().unwrap_or(f64::NAN),
        out.display()
    );
    if let Some(summary) = report.lines().last() {
        println!("{summary}");
    }
    Ok(())
}
