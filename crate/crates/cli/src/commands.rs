use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use log::info;
use topicpref::corpus::{self, SyntheticSpec};
use topicpref::evaluation::{self, HoldoutSplit};
use topicpref::extraction::{self, FilterConfig};
use topicpref::factorization::{self, FactorModel, Factorization};
use topicpref::patterns::{self, HashtagRule, StancePattern, TopicVocabulary};
use topicpref::topic_space::{self, Bands};
use topicpref::{SparseMatrix, TrainConfig, Tweet};

use crate::output::{fmt_f, Table};
use crate::{
    ExtractArgs, HarvestArgs, HoldoutArgs, RmseArgs, StageContext, StageResult, SynthArgs,
    TrainArgs,
};

pub const INSTANCES_FILE: &str = "instances.tsv";

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_tweets(path: &Path, keep_retweets: bool) -> Result<(Vec<Tweet>, corpus::CorpusStats)> {
    let (tweets, stats) = corpus::read_corpus(path, !keep_retweets)?;
    info!(
        "{}: {} tweets from {} users ({} retweets dropped, {} malformed lines)",
        path.display(),
        stats.tweet_count,
        stats.user_count,
        stats.retweets_removed,
        stats.malformed_lines
    );
    Ok((tweets, stats))
}

pub fn stats_text(stats: &corpus::CorpusStats) -> String {
    format!(
        "tweets\t{}\nusers\t{}\nretweets_removed\t{}\nmalformed_lines\t{}\n",
        stats.tweet_count, stats.user_count, stats.retweets_removed, stats.malformed_lines
    )
}

pub fn corpus_stats(path: &Path, keep_retweets: bool) -> StageResult<()> {
    let (_, stats) = read_tweets(path, keep_retweets).stage("corpus")?;
    print!("{}", stats_text(&stats));
    Ok(())
}

pub fn rules_text(rules: &[HashtagRule]) -> String {
    rules
        .iter()
        .map(|r| format!("{}\t{}\n", r.polarity(), r.pattern()))
        .collect()
}

pub fn patterns_text(patterns: &[StancePattern]) -> String {
    patterns
        .iter()
        .map(|p| format!("{}\t{}\n", p.polarity(), p.template()))
        .collect()
}

pub fn synth(a: &SynthArgs) -> StageResult<()> {
    let spec = SyntheticSpec {
        num_users: a.users,
        num_topics: a.topics,
        true_rank: a.rank,
        density: a.density,
        polarity_noise: a.noise,
        min_statements: a.min_statements,
        max_statements: a.max_statements,
        hashtag_rate: a.hashtag_rate,
        neutral_rate: a.neutral_rate,
        seed: a.seed,
    };
    let run = || -> Result<()> {
        let synthetic = corpus::generate_synthetic(&spec)?;
        if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        corpus::write_corpus(&a.out, &synthetic.tweets)
            .with_context(|| format!("cannot write {}", a.out.display()))?;
        if let Some(path) = &a.truth_out {
            let text: String = synthetic
                .truth
                .iter()
                .map(|((u, t), p)| format!("{u}\t{t}\t{}\n", p.signed_str()))
                .collect();
            write_text(path, &text)?;
        }
        if let Some(path) = &a.rules_out {
            write_text(path, &rules_text(&corpus::hashtag_rules()))?;
        }
        if let Some(path) = &a.patterns_out {
            let (pro, con) = corpus::curated_patterns();
            write_text(path, &(patterns_text(&pro) + &patterns_text(&con)))?;
        }
        println!(
            "tweets\t{}\nobserved_cells\t{}",
            synthetic.tweets.len(),
            synthetic.truth.len()
        );
        Ok(())
    };
    run().stage("corpus")
}

pub struct Harvested {
    pub vocabulary: TopicVocabulary,
    pub occurrences: usize,
    pub candidates: usize,
}

pub fn harvest_to(
    tweets: &[Tweet],
    rules: &[HashtagRule],
    window: usize,
    top_n: usize,
    out: &Path,
) -> Result<Harvested> {
    let occurrences = patterns::find_hashtag_occurrences(tweets, rules);
    let vocabulary = patterns::build_topic_set(&occurrences);
    let candidates = patterns::harvest_candidates(tweets, &occurrences, window);
    let ranked = patterns::rank_and_export(candidates, top_n, out)?;
    Ok(Harvested {
        vocabulary,
        occurrences: occurrences.len(),
        candidates: ranked.len(),
    })
}

pub fn harvest(a: &HarvestArgs) -> StageResult<()> {
    let rules = patterns::load_rules(&a.rules).stage("patterns")?;
    let (tweets, _) = read_tweets(&a.corpus, a.keep_retweets).stage("corpus")?;
    let run = || -> Result<()> {
        let h = harvest_to(&tweets, &rules, a.window, a.top_n, &a.out)?;
        if let Some(path) = &a.topics_out {
            h.vocabulary
                .write(path)
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        println!(
            "occurrences\t{}\ntopics\t{}\ncandidates\t{}",
            h.occurrences,
            h.vocabulary.len(),
            h.candidates
        );
        Ok(())
    };
    run().stage("patterns")
}

pub fn load_patterns(path: &Path, check: bool) -> StageResult<()> {
    let (pro, con) = patterns::load_curated(path).stage("patterns")?;
    if check {
        println!("pro\t{}\ncon\t{}", pro.len(), con.len());
    } else {
        print!("{}{}", patterns_text(&pro), patterns_text(&con));
    }
    Ok(())
}

pub struct Extracted {
    pub instances: usize,
    pub matrix: SparseMatrix,
}

/// Extracts instances, filters them and writes the instance dump and matrix
/// files into `out`.
pub fn extract_to(
    tweets: &[Tweet],
    pro: &[StancePattern],
    con: &[StancePattern],
    vocabulary: &TopicVocabulary,
    filter: &FilterConfig,
    out: &Path,
) -> Result<Extracted> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let instances = extraction::extract_instances(tweets, pro, con, vocabulary);
    let dump = out.join(INSTANCES_FILE);
    extraction::write_instances(&dump, &instances)
        .with_context(|| format!("cannot write {}", dump.display()))?;
    let counts = extraction::filter_instances(&instances, filter);
    let matrix = extraction::build_matrix(&counts)
        .with_context(|| format!("{} instances, none left after filtering", instances.len()))?;
    matrix.write_dir(out)?;
    Ok(Extracted {
        instances: instances.len(),
        matrix,
    })
}

pub fn filter_config(min_count: usize, stop_topics: Option<&Path>) -> Result<FilterConfig> {
    let stop = match stop_topics {
        Some(path) => extraction::read_stop_topics(path)
            .with_context(|| format!("cannot read {}", path.display()))?,
        None => Vec::new(),
    };
    Ok(FilterConfig {
        min_occurrences: min_count,
        ..FilterConfig::default()
    }
    .with_stop_topics(stop))
}

fn matrix_summary(m: &SparseMatrix) -> String {
    format!(
        "users\t{}\ntopics\t{}\nnnz\t{}",
        m.n_users(),
        m.n_topics(),
        m.nnz()
    )
}

pub fn extract(a: &ExtractArgs) -> StageResult<()> {
    let (pro, con) = patterns::load_curated(&a.patterns).stage("patterns")?;
    let vocabulary = TopicVocabulary::read(&a.topics).stage("patterns")?;
    let filter = filter_config(a.min_count, a.stop_topics.as_deref()).stage("extract")?;
    let (tweets, _) = read_tweets(&a.corpus, a.keep_retweets).stage("corpus")?;
    let e = extract_to(&tweets, &pro, &con, &vocabulary, &filter, &a.out).stage("extract")?;
    println!("instances\t{}\n{}", e.instances, matrix_summary(&e.matrix));
    Ok(())
}

pub fn read_matrix(dir: &Path) -> Result<SparseMatrix> {
    SparseMatrix::read_dir(dir)
        .with_context(|| format!("cannot load matrix from {}", dir.display()))
}

pub fn read_model(path: &Path) -> Result<FactorModel> {
    factorization::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

pub fn trace_text(f: &Factorization) -> String {
    let mut s = String::from("epoch\trmse\n");
    for (i, r) in f.rmse_trace.iter().enumerate() {
        s.push_str(&format!("{}\t{r:.9}\n", i + 1));
    }
    s
}

pub fn train_to(
    m: &SparseMatrix,
    cfg: &TrainConfig,
    out: &Path,
    trace: Option<&Path>,
) -> Result<Factorization> {
    let f = factorization::factorize(m, cfg)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    factorization::save(&f.model, out)?;
    if let Some(path) = trace {
        write_text(path, &trace_text(&f))?;
    }
    Ok(f)
}

pub fn train(a: &TrainArgs) -> StageResult<()> {
    let m = read_matrix(&a.matrix).stage("train")?;
    let f = train_to(&m, &a.params.config(), &a.out, a.trace.as_deref()).stage("train")?;
    println!(
        "rmse\t{:.9}",
        f.rmse_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn rmse(a: &RmseArgs) -> StageResult<()> {
    let run = || -> Result<f64> {
        let model = read_model(&a.model)?;
        let m = read_matrix(&a.matrix)?;
        Ok(model.rmse(&m)?)
    };
    println!("rmse\t{:.9}", run().stage("rmse")?);
    Ok(())
}

/// Trains on a hold-out split and renders the threshold report followed by
/// a `summary` line of `key=value` fields.
pub fn holdout_report(
    m: &SparseMatrix,
    fraction: f64,
    cfg: &TrainConfig,
    thetas: &[usize],
) -> Result<String> {
    let split: HoldoutSplit = evaluation::split(m, fraction, cfg.seed)?;
    let f = factorization::factorize(&split.train, cfg)?;
    let report = evaluation::threshold_sweep(&f.model, &split, thetas)?;
    let mut sq = 0.0;
    for c in &split.test {
        sq += (c.value - f.model.predict(&c.user, &c.topic)?).powi(2);
    }
    let test_rmse = (sq / split.test.len() as f64).sqrt();
    let mut text = report.to_tsv();
    let first = report
        .rows
        .iter()
        .find_map(|r| r.result.map(|x| (r.theta, x)));
    text.push_str(&format!(
        "summary\tfraction={fraction}\tseed={}\tk={}\ttrain_cells={}\ttest_cells={}\ttrain_rmse={:.6}\ttest_rmse={test_rmse:.6}",
        cfg.seed,
        cfg.k,
        split.train.nnz(),
        split.test.len(),
        f.rmse_trace.last().copied().unwrap_or(f64::NAN),
    ));
    match first {
        Some((theta, r)) => text.push_str(&format!(
            "\ttheta={theta}\tmodel_accuracy={:.6}\tbaseline_accuracy={:.6}\n",
            r.model_accuracy, r.baseline_accuracy
        )),
        None => text.push_str("\ttheta=NA\tmodel_accuracy=NA\tbaseline_accuracy=NA\n"),
    }
    Ok(text)
}

pub fn holdout(a: &HoldoutArgs) -> StageResult<()> {
    let m = read_matrix(&a.matrix).stage("eval")?;
    let text = holdout_report(&m, a.fraction, &a.params.config(), &a.thetas).stage("eval")?;
    if let Some(path) = &a.out {
        write_text(path, &text).stage("eval")?;
    }
    print!("{text}");
    Ok(())
}

pub fn spearman(model: &Path, judgements: &Path) -> StageResult<()> {
    let run = || -> Result<(usize, f64)> {
        let model = read_model(model)?;
        let js = evaluation::read_judgements(judgements)?;
        Ok((js.len(), evaluation::judgement_correlation(&model, &js)?))
    };
    let (n, rho) = run().stage("eval")?;
    println!("pairs\t{n}\nrho\t{rho:.6}");
    Ok(())
}

pub fn variance(matrix: &Path, thetas: &[usize]) -> StageResult<()> {
    let m = read_matrix(matrix).stage("eval")?;
    let mut thetas = thetas.to_vec();
    thetas.sort_unstable();
    thetas.dedup();
    let mut table = Table::new(&["theta", "mean_variance"]);
    for theta in thetas {
        let v = match evaluation::mean_variance(&m, theta) {
            Ok(v) => fmt_f(v),
            Err(evaluation::EvalError::NoUsers { .. }) => "NA".into(),
            Err(e) => return Err(e).stage("eval"),
        };
        table.push(vec![theta.to_string(), v]);
    }
    print!("{}", table.tsv());
    Ok(())
}

pub fn near(model: &Path, topic: &str, n: usize, tsv: bool) -> StageResult<()> {
    let model = read_model(model).stage("topics")?;
    let neighbours = topic_space::nearest_topics(&model, topic, n).stage("topics")?;
    let mut table = Table::new(&["topic", "cosine"]);
    for nb in neighbours {
        table.push(vec![nb.topic, fmt_f(nb.cosine)]);
    }
    print!("{}", table.render(tsv));
    Ok(())
}

pub fn pairs(
    model: &Path,
    bands: &str,
    per_band: usize,
    seed: u64,
    out: Option<&Path>,
    tsv: bool,
) -> StageResult<()> {
    let bands: Bands = bands.parse().stage("topics")?;
    let model = read_model(model).stage("topics")?;
    let sample =
        topic_space::stratified_pair_sample(&model, &bands, per_band, seed).stage("topics")?;
    let mut table = Table::new(&["band", "topic_a", "topic_b", "cosine"]);
    for p in sample {
        table.push(vec![
            bands.as_slice()[p.band].to_string(),
            p.topic_a,
            p.topic_b,
            fmt_f(p.cosine),
        ]);
    }
    if let Some(path) = out {
        write_text(path, &table.tsv()).stage("topics")?;
    }
    print!("{}", table.render(tsv));
    Ok(())
}

pub fn user_report(
    model: &Path,
    matrix: &Path,
    user: &str,
    top_n: usize,
    tsv: bool,
) -> StageResult<()> {
    let run = || -> Result<topic_space::UserReport> {
        let model = read_model(model)?;
        let m = read_matrix(matrix)?;
        Ok(topic_space::user_report(&model, &m, user, top_n)?)
    };
    let report = run().stage("user")?;
    let mut table = Table::new(&["section", "topic", "score"]);
    for (name, list) in [
        ("declared_pro", &report.declared_pro),
        ("declared_con", &report.declared_con),
        ("predicted_pro", &report.predicted_pro),
        ("predicted_con", &report.predicted_con),
    ] {
        for t in list {
            table.push(vec![name.to_string(), t.topic.clone(), fmt_f(t.score)]);
        }
    }
    print!("{}", table.render(tsv));
    Ok(())
}
