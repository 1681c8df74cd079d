//! Stance hashtags, candidate pattern harvesting and curated pattern files.
//!
//! A stance pattern is a template with exactly one `{A}` slot standing for a
//! topic, e.g. `I don't want {A}.`. A pattern matches a sentence when the
//! sentence ends with the template's tokens once the topic is substituted
//! for the slot; whatever precedes the template's first token is free.
//!
//! Candidate and curated files share one layout:
//!
//! ```text
//! polarity <TAB> template [<TAB> user_count <TAB> occurrence_count]
//! ```
//!
//! Blank lines and lines starting with `#` are ignored when loading.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use regex::Regex;

use crate::corpus::Tweet;
use crate::text::{self, Token};
use crate::Polarity;

/// The topic slot in templates.
pub const SLOT: &str = "{A}";

/// Default number of tokens kept before the topic keyword when harvesting.
pub const DEFAULT_WINDOW: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum PatternError {
    #[error("invalid hashtag rule {pattern:?}: {reason}")]
    InvalidRule { pattern: String, reason: String },
    #[error("invalid template {template:?}: {reason}")]
    InvalidTemplate { template: String, reason: String },
    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PatternError + '_ {
    move |source| PatternError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// An anchored regular expression over a whole hashtag token whose single
/// capture group is the topic. Captures that are empty after trimming are
/// never reported as occurrences.
#[derive(Debug, Clone)]
pub struct HashtagRule {
    polarity: Polarity,
    source: String,
    regex: Regex,
}

impl HashtagRule {
    pub fn new(polarity: Polarity, pattern: &str) -> Result<Self, PatternError> {
        let invalid = |reason: String| PatternError::InvalidRule {
            pattern: pattern.to_string(),
            reason,
        };
        let regex = Regex::new(&format!("^(?:{pattern})$")).map_err(|e| invalid(e.to_string()))?;
        if regex.captures_len() != 2 {
            return Err(invalid(format!(
                "expected exactly one capture group, found {}",
                regex.captures_len() - 1
            )));
        }
        Ok(HashtagRule {
            polarity,
            source: pattern.to_string(),
            regex,
        })
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn pattern(&self) -> &str {
        &self.source
    }

    /// Returns the raw captured topic span if the whole token matches.
    pub fn capture<'a>(&self, token: &'a str) -> Option<regex::Match<'a>> {
        self.regex.captures(token)?.get(1)
    }
}

/// Loads rules from `polarity<TAB>regex` lines.
pub fn load_rules(path: impl AsRef<Path>) -> Result<Vec<HashtagRule>, PatternError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let mut rules = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let config = |message: String| PatternError::Config {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let (pol, pattern) = line
            .split_once('\t')
            .ok_or_else(|| config("expected polarity<TAB>regex".into()))?;
        let pol = pol.parse::<Polarity>().map_err(|e| config(e.to_string()))?;
        rules.push(HashtagRule::new(pol, pattern).map_err(|e| config(e.to_string()))?);
    }
    Ok(rules)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashtagOccurrence {
    pub user_id: String,
    /// Captured group, case-folded and trimmed.
    pub topic: String,
    pub polarity: Polarity,
    pub tweet_id: String,
}

/// Finds pro/con hashtags. Each whitespace-delimited token starting with `#`
/// is tested against the rules in order; the first matching rule wins.
pub fn find_hashtag_occurrences<'a>(
    tweets: impl IntoIterator<Item = &'a Tweet>,
    rules: &[HashtagRule],
) -> Vec<HashtagOccurrence> {
    let mut out = Vec::new();
    for tweet in tweets {
        for token in tweet.text.split_whitespace().filter(|w| w.starts_with('#')) {
            let hit = rules
                .iter()
                .find_map(|rule| rule.capture(token).map(|m| (rule.polarity, m.as_str())));
            if let Some((polarity, raw)) = hit {
                let topic = raw.trim().to_lowercase();
                if !topic.is_empty() {
                    out.push(HashtagOccurrence {
                        user_id: tweet.user_id.clone(),
                        topic,
                        polarity,
                        tweet_id: tweet.tweet_id.clone(),
                    });
                }
            }
        }
    }
    out
}

/// Ordered set of target topics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopicVocabulary {
    topics: Vec<String>,
    index: HashMap<String, usize>,
}

impl TopicVocabulary {
    /// Builds a vocabulary keeping the first occurrence of each topic.
    /// Topics are case-folded and trimmed; empty entries are dropped.
    pub fn new<S: AsRef<str>>(topics: impl IntoIterator<Item = S>) -> Self {
        let mut vocab = TopicVocabulary::default();
        for t in topics {
            let t = t.as_ref().trim().to_lowercase();
            if !t.is_empty() && !vocab.index.contains_key(&t) {
                vocab.index.insert(t.clone(), vocab.topics.len());
                vocab.topics.push(t);
            }
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn contains(&self, topic: &str) -> bool {
        self.index.contains_key(topic)
    }

    pub fn position(&self, topic: &str) -> Option<usize> {
        self.index.get(topic).copied()
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    /// One topic per line.
    pub fn read(path: impl AsRef<Path>) -> Result<Self, PatternError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(io_err(path))?;
        let lines = BufReader::new(file)
            .lines()
            .collect::<io::Result<Vec<_>>>()
            .map_err(io_err(path))?;
        Ok(TopicVocabulary::new(lines))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for t in &self.topics {
            writeln!(out, "{t}")?;
        }
        out.flush()
    }
}

/// Topics ordered by descending occurrence count, ties lexicographic.
pub fn build_topic_set(occurrences: &[HashtagOccurrence]) -> TopicVocabulary {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for o in occurrences {
        *counts.entry(o.topic.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    TopicVocabulary::new(ranked.into_iter().map(|(t, _)| t))
}

/// A polarity-tagged template with one topic slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StancePattern {
    polarity: Polarity,
    template: String,
    prefix: Vec<String>,
    suffix: Vec<String>,
}

impl StancePattern {
    pub fn new(polarity: Polarity, template: &str) -> Result<Self, PatternError> {
        let invalid = |reason: &str| PatternError::InvalidTemplate {
            template: template.to_string(),
            reason: reason.to_string(),
        };
        let template = text::normalize_whitespace(template);
        let mut parts = template.split(SLOT);
        let (Some(before), Some(after), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(invalid("expected exactly one {A} slot"));
        };
        let prefix = text::token_texts(before);
        let suffix = text::token_texts(after);
        if prefix.is_empty() && suffix.is_empty() {
            return Err(invalid("template is empty outside the slot"));
        }
        Ok(StancePattern {
            polarity,
            template,
            prefix,
            suffix,
        })
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    /// Case-folded tokens before the slot.
    pub fn prefix(&self) -> &[String] {
        &self.prefix
    }

    /// Case-folded tokens after the slot.
    pub fn suffix(&self) -> &[String] {
        &self.suffix
    }

    /// Template text with `topic` in the slot.
    pub fn render(&self, topic: &str) -> String {
        self.template.replace(SLOT, topic)
    }
}

/// A harvested pattern with its usage counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternCandidate {
    pub pattern: StancePattern,
    pub distinct_user_count: usize,
    pub occurrence_count: usize,
}

#[derive(Default)]
struct CandidateStats {
    surface: String,
    users: BTreeSet<String>,
    occurrences: usize,
}

/// Associative accumulator for harvested candidates. Partial results from
/// disjoint shards of the corpus can be merged in any order.
#[derive(Default)]
pub struct CandidateAggregator {
    // keyed by polarity and the case-folded token form of the template
    groups: BTreeMap<(Polarity, Vec<String>, Vec<String>), CandidateStats>,
}

impl CandidateAggregator {
    pub fn new() -> Self {
        Self::default()
    }

    fn record(&mut self, pattern: StancePattern, user: &str) {
        let key = (
            pattern.polarity,
            pattern.prefix.clone(),
            pattern.suffix.clone(),
        );
        let stats = self.groups.entry(key).or_default();
        if stats.surface.is_empty() || pattern.template < stats.surface {
            stats.surface = pattern.template;
        }
        stats.users.insert(user.to_string());
        stats.occurrences += 1;
    }

    pub fn merge(&mut self, other: CandidateAggregator) {
        for (key, theirs) in other.groups {
            let ours = self.groups.entry(key).or_default();
            if ours.surface.is_empty() || theirs.surface < ours.surface {
                ours.surface = theirs.surface;
            }
            ours.users.extend(theirs.users);
            ours.occurrences += theirs.occurrences;
        }
    }

    /// Candidates in a canonical (key) order.
    pub fn finish(self) -> Vec<PatternCandidate> {
        self.groups
            .into_iter()
            .map(|((polarity, prefix, suffix), s)| PatternCandidate {
                pattern: StancePattern {
                    polarity,
                    template: s.surface,
                    prefix,
                    suffix,
                },
                distinct_user_count: s.users.len(),
                occurrence_count: s.occurrences,
            })
            .collect()
    }
}

/// Harvests candidate patterns into `agg`.
///
/// For every (author, topic, polarity) hashtag occurrence, every sentence of
/// the same author's *other* tweets that contains the topic keyword yields a
/// candidate: the span from up to `window` tokens before the keyword to the
/// end of the sentence, with the keyword replaced by `{A}`.
pub fn harvest_into<'a>(
    agg: &mut CandidateAggregator,
    tweets: impl IntoIterator<Item = &'a Tweet>,
    occurrences: &[HashtagOccurrence],
    window: usize,
) {
    // author -> topic -> (polarities, hashtag tweet ids)
    type Seed<'s> = (BTreeSet<Polarity>, HashSet<&'s str>);
    let mut seeds: HashMap<&str, BTreeMap<&str, Seed>> = HashMap::new();
    for o in occurrences {
        let entry = seeds
            .entry(o.user_id.as_str())
            .or_default()
            .entry(o.topic.as_str())
            .or_default();
        entry.0.insert(o.polarity);
        entry.1.insert(o.tweet_id.as_str());
    }
    let topic_tokens: HashMap<&str, Vec<String>> = occurrences
        .iter()
        .map(|o| (o.topic.as_str(), text::token_texts(&o.topic)))
        .collect();

    for tweet in tweets {
        let Some(topics) = seeds.get(tweet.user_id.as_str()) else {
            continue;
        };
        for sentence in text::sentences(&tweet.text) {
            let tokens = text::tokenize(sentence);
            for (topic, (polarities, seed_tweets)) in topics {
                if seed_tweets.contains(tweet.tweet_id.as_str()) {
                    continue;
                }
                let needle = &topic_tokens[topic];
                let starts = text::find_token_runs(&tokens, needle);
                for &start in &starts {
                    let Some(template) =
                        window_template(sentence, &tokens, &starts, start, needle.len(), window)
                    else {
                        continue;
                    };
                    for &pol in polarities {
                        if let Ok(p) = StancePattern::new(pol, &template) {
                            agg.record(p, &tweet.user_id);
                        }
                    }
                }
            }
        }
    }
}

fn window_template(
    sentence: &str,
    tokens: &[Token],
    starts: &[usize],
    start: usize,
    len: usize,
    window: usize,
) -> Option<String> {
    let from = start.saturating_sub(window);
    // Another occurrence inside the window would leak the keyword.
    let overlaps = starts.iter().any(|&s| s != start && s + len > from);
    if overlaps {
        return None;
    }
    let head = &sentence[tokens[from].span.start..tokens[start].span.start];
    let tail = &sentence[tokens[start + len - 1].span.end..];
    if head.contains(SLOT) || tail.contains(SLOT) {
        return None;
    }
    Some(text::normalize_whitespace(&format!("{head}{SLOT}{tail}")))
}

pub fn harvest_candidates<'a>(
    tweets: impl IntoIterator<Item = &'a Tweet>,
    occurrences: &[HashtagOccurrence],
    window: usize,
) -> Vec<PatternCandidate> {
    let mut agg = CandidateAggregator::new();
    harvest_into(&mut agg, tweets, occurrences, window);
    agg.finish()
}

/// Sorts by distinct users, then occurrences (both descending), then
/// template, then polarity, and keeps the first `top_n`.
pub fn rank_candidates(
    mut candidates: Vec<PatternCandidate>,
    top_n: usize,
) -> Vec<PatternCandidate> {
    candidates.sort_by(|a, b| {
        b.distinct_user_count
            .cmp(&a.distinct_user_count)
            .then(b.occurrence_count.cmp(&a.occurrence_count))
            .then_with(|| a.pattern.template.cmp(&b.pattern.template))
            .then(a.pattern.polarity.cmp(&b.pattern.polarity))
    });
    candidates.truncate(top_n);
    candidates
}

pub fn write_candidates(path: impl AsRef<Path>, candidates: &[PatternCandidate]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for c in candidates {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            c.pattern.polarity, c.pattern.template, c.distinct_user_count, c.occurrence_count
        )?;
    }
    out.flush()
}

/// Ranks candidates and writes the top `top_n` for curation.
pub fn rank_and_export(
    candidates: Vec<PatternCandidate>,
    top_n: usize,
    out: impl AsRef<Path>,
) -> Result<Vec<PatternCandidate>, PatternError> {
    let out = out.as_ref();
    let ranked = rank_candidates(candidates, top_n);
    write_candidates(out, &ranked).map_err(io_err(out))?;
    Ok(ranked)
}

/// Loads a curated pattern file, partitioned into (pro, con).
pub fn load_curated(
    path: impl AsRef<Path>,
) -> Result<(Vec<StancePattern>, Vec<StancePattern>), PatternError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let (mut pro, mut con) = (Vec::new(), Vec::new());
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let config = |message: String| PatternError::Config {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let mut fields = line.split('\t');
        let pol = fields.next().unwrap_or_default();
        let template = fields
            .next()
            .ok_or_else(|| config("expected polarity<TAB>template".into()))?;
        let pol = pol.parse::<Polarity>().map_err(|e| config(e.to_string()))?;
        let pattern = StancePattern::new(pol, template).map_err(|e| config(e.to_string()))?;
        match pol {
            Polarity::Pro => pro.push(pattern),
            Polarity::Con => con.push(pattern),
        }
    }
    Ok((pro, con))
}
