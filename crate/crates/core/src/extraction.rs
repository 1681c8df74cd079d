//! Preference instances from curated patterns, frequency filtering and the
//! user × topic matrix.
//!
//! A sentence by user `u` yields `(u, t, +1)` when, for some topic `t` of the
//! vocabulary, the sentence ends with a pro template's tokens once `t` fills
//! the slot; likewise `(u, t, −1)` for con templates. Each (sentence, topic,
//! polarity) emits at most once, and one sentence may yield instances for
//! several topics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::Tweet;
use crate::matrix::{IndexMap, MatrixError, SparseMatrix};
use crate::patterns::{StancePattern, TopicVocabulary};
use crate::text::{self, Token};
use crate::Polarity;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PreferenceInstance {
    pub user_id: String,
    pub topic: String,
    pub polarity: Polarity,
}

/// Pattern/topic index used to scan sentences.
pub struct InstanceMatcher<'a> {
    vocab: &'a TopicVocabulary,
    // first token -> (topic ordinal, topic tokens)
    topics_by_head: HashMap<String, Vec<(usize, Vec<String>)>>,
    // suffix tokens -> [(prefix tokens, polarity)]
    by_suffix: HashMap<Vec<String>, Vec<(Vec<String>, Polarity)>>,
}

impl<'a> InstanceMatcher<'a> {
    pub fn new(pro: &[StancePattern], con: &[StancePattern], vocab: &'a TopicVocabulary) -> Self {
        let mut topics_by_head: HashMap<String, Vec<(usize, Vec<String>)>> = HashMap::new();
        for (i, topic) in vocab.topics().iter().enumerate() {
            let toks = text::token_texts(topic);
            if let Some(head) = toks.first() {
                topics_by_head
                    .entry(head.clone())
                    .or_default()
                    .push((i, toks));
            }
        }
        let mut by_suffix: HashMap<Vec<String>, Vec<(Vec<String>, Polarity)>> = HashMap::new();
        for p in pro.iter().chain(con) {
            by_suffix
                .entry(p.suffix().to_vec())
                .or_default()
                .push((p.prefix().to_vec(), p.polarity()));
        }
        InstanceMatcher {
            vocab,
            topics_by_head,
            by_suffix,
        }
    }

    /// (topic ordinal, polarity) pairs matched by one sentence, sorted.
    pub fn match_sentence(&self, sentence: &str) -> BTreeSet<(usize, Polarity)> {
        let tokens = text::tokenize(sentence);
        let mut hits = BTreeSet::new();
        for start in 0..tokens.len() {
            let Some(cands) = self.topics_by_head.get(&tokens[start].text) else {
                continue;
            };
            for (ordinal, topic) in cands {
                let end = start + topic.len();
                if end > tokens.len() || !same(&tokens[start..end], topic) {
                    continue;
                }
                let suffix: Vec<String> = tokens[end..].iter().map(|t| t.text.clone()).collect();
                let Some(prefixes) = self.by_suffix.get(&suffix) else {
                    continue;
                };
                for (prefix, pol) in prefixes {
                    if prefix.len() <= start && same(&tokens[start - prefix.len()..start], prefix) {
                        hits.insert((*ordinal, *pol));
                    }
                }
            }
        }
        hits
    }

    /// Instances from one tweet in sentence order.
    pub fn extract_tweet(&self, tweet: &Tweet, out: &mut Vec<PreferenceInstance>) {
        for sentence in text::sentences(&tweet.text) {
            for (ordinal, polarity) in self.match_sentence(sentence) {
                out.push(PreferenceInstance {
                    user_id: tweet.user_id.clone(),
                    topic: self.vocab.topics()[ordinal].clone(),
                    polarity,
                });
            }
        }
    }
}

fn same(tokens: &[Token], words: &[String]) -> bool {
    tokens.iter().zip(words).all(|(t, w)| t.text == *w)
}

pub fn extract_instances<'a>(
    tweets: impl IntoIterator<Item = &'a Tweet>,
    pro: &[StancePattern],
    con: &[StancePattern],
    topics: &TopicVocabulary,
) -> Vec<PreferenceInstance> {
    let matcher = InstanceMatcher::new(pro, con, topics);
    let mut out = Vec::new();
    for tweet in tweets {
        matcher.extract_tweet(tweet, &mut out);
    }
    out
}

pub fn write_instances(path: impl AsRef<Path>, instances: &[PreferenceInstance]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for i in instances {
        writeln!(
            out,
            "{}\t{}\t{}",
            i.user_id,
            i.topic,
            i.polarity.signed_str()
        )?;
    }
    out.flush()
}

pub fn read_instances(path: impl AsRef<Path>) -> io::Result<Vec<PreferenceInstance>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("line {}: {line:?}", i + 1),
            )
        };
        let mut f = line.trim_end_matches('\r').split('\t');
        let (Some(user), Some(topic), Some(pol), None) = (f.next(), f.next(), f.next(), f.next())
        else {
            return Err(bad());
        };
        out.push(PreferenceInstance {
            user_id: user.to_string(),
            topic: topic.to_string(),
            polarity: pol.parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterConfig {
    /// Users and topics with fewer total instances are removed.
    pub min_occurrences: usize,
    /// Topics removed after the frequency filters (case-folded).
    pub stop_topics: BTreeSet<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_occurrences: 5,
            stop_topics: BTreeSet::new(),
        }
    }
}

impl FilterConfig {
    pub fn with_stop_topics<S: AsRef<str>>(mut self, topics: impl IntoIterator<Item = S>) -> Self {
        self.stop_topics = topics
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        self
    }
}

/// One stop topic per line.
pub fn read_stop_topics(path: impl AsRef<Path>) -> io::Result<Vec<String>> {
    BufReader::new(File::open(path)?).lines().collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PolarityCounts {
    pub pro: usize,
    pub con: usize,
}

impl PolarityCounts {
    pub fn total(&self) -> usize {
        self.pro + self.con
    }

    /// `(pro − con) / (pro + con)`.
    pub fn preference(&self) -> f64 {
        (self.pro as f64 - self.con as f64) / self.total() as f64
    }
}

/// Per (user, topic) instance counts. Every stored pair has at least one
/// instance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstanceCounts {
    cells: BTreeMap<(String, String), PolarityCounts>,
}

impl InstanceCounts {
    pub fn aggregate<'a>(instances: impl IntoIterator<Item = &'a PreferenceInstance>) -> Self {
        let mut counts = InstanceCounts::default();
        for i in instances {
            counts.add(&i.user_id, &i.topic, i.polarity, 1);
        }
        counts
    }

    pub fn add(&mut self, user: &str, topic: &str, polarity: Polarity, n: usize) {
        if n == 0 {
            return;
        }
        let c = self
            .cells
            .entry((user.to_string(), topic.to_string()))
            .or_default();
        match polarity {
            Polarity::Pro => c.pro += n,
            Polarity::Con => c.con += n,
        }
    }

    /// Associative, commutative merge of partial counts.
    pub fn merge(&mut self, other: InstanceCounts) {
        for ((u, t), c) in other.cells {
            self.add(&u, &t, Polarity::Pro, c.pro);
            self.add(&u, &t, Polarity::Con, c.con);
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, user: &str, topic: &str) -> Option<PolarityCounts> {
        self.cells
            .get(&(user.to_string(), topic.to_string()))
            .copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, PolarityCounts)> {
        self.cells
            .iter()
            .map(|((u, t), c)| (u.as_str(), t.as_str(), *c))
    }

    /// Total number of instances.
    pub fn instance_total(&self) -> usize {
        self.cells.values().map(PolarityCounts::total).sum()
    }

    /// Expands back into a (sorted) instance list.
    pub fn to_instances(&self) -> Vec<PreferenceInstance> {
        let mut out = Vec::with_capacity(self.instance_total());
        for ((u, t), c) in &self.cells {
            for (pol, n) in [(Polarity::Pro, c.pro), (Polarity::Con, c.con)] {
                out.extend((0..n).map(|_| PreferenceInstance {
                    user_id: u.clone(),
                    topic: t.clone(),
                    polarity: pol,
                }));
            }
        }
        out
    }

    /// Removes rare users, then rare topics (totals recomputed after the
    /// user pass), then stop topics. Each step runs once.
    pub fn filtered(mut self, cfg: &FilterConfig) -> Self {
        let mut user_totals: HashMap<&str, usize> = HashMap::new();
        for ((u, _), c) in &self.cells {
            *user_totals.entry(u.as_str()).or_default() += c.total();
        }
        let rare_users: BTreeSet<String> = user_totals
            .into_iter()
            .filter(|&(_, n)| n < cfg.min_occurrences)
            .map(|(u, _)| u.to_string())
            .collect();
        self.cells.retain(|(u, _), _| !rare_users.contains(u));

        let mut topic_totals: HashMap<&str, usize> = HashMap::new();
        for ((_, t), c) in &self.cells {
            *topic_totals.entry(t.as_str()).or_default() += c.total();
        }
        let rare_topics: BTreeSet<String> = topic_totals
            .into_iter()
            .filter(|&(_, n)| n < cfg.min_occurrences)
            .map(|(t, _)| t.to_string())
            .collect();
        self.cells.retain(|(_, t), _| {
            !rare_topics.contains(t) && !cfg.stop_topics.contains(&t.to_lowercase())
        });
        self
    }
}

pub fn filter_instances<'a>(
    instances: impl IntoIterator<Item = &'a PreferenceInstance>,
    cfg: &FilterConfig,
) -> InstanceCounts {
    InstanceCounts::aggregate(instances).filtered(cfg)
}

/// Builds the preference matrix: each stored pair becomes
/// `(pro − con) / (pro + con)`; every other cell stays missing. Users and
/// topics are indexed in lexicographic order.
pub fn build_matrix(counts: &InstanceCounts) -> Result<SparseMatrix, MatrixError> {
    if counts.is_empty() {
        return Err(MatrixError::Empty);
    }
    let users: BTreeSet<&str> = counts.iter().map(|(u, _, _)| u).collect();
    let topics: BTreeSet<&str> = counts.iter().map(|(_, t, _)| t).collect();
    let users = IndexMap::from_ids(users.into_iter().map(str::to_string).collect())?;
    let topics = IndexMap::from_ids(topics.into_iter().map(str::to_string).collect())?;
    let cells: Vec<(usize, usize, f64)> = counts
        .iter()
        .map(|(u, t, c)| {
            (
                users.get(u).expect("indexed user"),
                topics.get(t).expect("indexed topic"),
                c.preference(),
            )
        })
        .collect();
    SparseMatrix::from_cells(users, topics, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tweet(user: &str, text: &str) -> Tweet {
        Tweet {
            tweet_id: format!("{user}:{text}"),
            user_id: user.into(),
            timestamp: 0,
            is_retweet: false,
            text: text.into(),
        }
    }

    fn inst(u: &str, t: &str, p: Polarity) -> PreferenceInstance {
        PreferenceInstance {
            user_id: u.into(),
            topic: t.into(),
            polarity: p,
        }
    }

    fn pats(pol: Polarity, ts: &[&str]) -> Vec<StancePattern> {
        ts.iter()
            .map(|t| StancePattern::new(pol, t).unwrap())
            .collect()
    }

    #[test]
    fn con_pattern_yields_negative_instance() {
        let vocab = TopicVocabulary::new(["TPP"]);
        let con = pats(Polarity::Con, &["I don't want {A}"]);
        let got = extract_instances(&[tweet("u", "I don't want TPP")], &[], &con, &vocab);
        assert_eq!(got, vec![inst("u", "tpp", Polarity::Con)]);
    }

    #[test]
    fn topic_outside_vocabulary_is_ignored() {
        let vocab = TopicVocabulary::new(["tpp"]);
        let pro = pats(Polarity::Pro, &["{A} is necessary"]);
        let got = extract_instances(&[tweet("u", "Nuclear is necessary")], &pro, &[], &vocab);
        assert!(got.is_empty());
    }

    #[test]
    fn one_sentence_can_yield_several_topics() {
        let vocab = TopicVocabulary::new(["free trade", "trade"]);
        let pro = pats(Polarity::Pro, &["welcome {A}"]);
        let con = pats(Polarity::Con, &["free {A}"]);
        let got = extract_instances(&[tweet("u", "We welcome free trade")], &pro, &con, &vocab);
        assert_eq!(
            got,
            vec![
                inst("u", "free trade", Polarity::Pro),
                inst("u", "trade", Polarity::Con)
            ]
        );
        // two pro templates matching the same topic still emit once
        let pro2 = pats(Polarity::Pro, &["welcome {A}", "we welcome {A}"]);
        let got = extract_instances(&[tweet("u", "We welcome trade")], &pro2, &[], &vocab);
        assert_eq!(got, vec![inst("u", "trade", Polarity::Pro)]);
    }

    #[test]
    fn pattern_must_reach_sentence_end() {
        let vocab = TopicVocabulary::new(["tpp"]);
        let pro = pats(Polarity::Pro, &["I support {A}."]);
        let t = [
            tweet("u", "I support TPP. Nothing else"),
            tweet("v", "I support TPP fully."),
        ];
        assert_eq!(
            extract_instances(&t, &pro, &[], &vocab),
            vec![inst("u", "tpp", Polarity::Pro)]
        );
    }

    #[test]
    fn single_instance_filtered_out() {
        let c = filter_instances(&[inst("u", "t", Polarity::Pro)], &FilterConfig::default());
        assert!(c.is_empty());
    }

    #[test]
    fn identity_filter_keeps_raw_counts() {
        let raw = [
            inst("u", "t", Polarity::Pro),
            inst("u", "t", Polarity::Con),
            inst("v", "s", Polarity::Pro),
        ];
        let cfg = FilterConfig {
            min_occurrences: 0,
            ..FilterConfig::default()
        };
        assert_eq!(
            filter_instances(&raw, &cfg),
            InstanceCounts::aggregate(&raw)
        );
    }

    #[test]
    fn filter_order_is_users_then_topics_then_stop_list() {
        // u1: 3 on a, 2 on b (5 total); u2: 1 on b (rare user).
        // After the user pass b has 2 (< 3) and goes; a stays unless stopped.
        let mut raw = vec![];
        raw.extend((0..3).map(|_| inst("u1", "a", Polarity::Pro)));
        raw.extend((0..2).map(|_| inst("u1", "b", Polarity::Con)));
        raw.push(inst("u2", "b", Polarity::Pro));
        let cfg = FilterConfig {
            min_occurrences: 3,
            ..FilterConfig::default()
        };
        let c = filter_instances(&raw, &cfg);
        assert_eq!(
            c.iter().map(|(u, t, _)| (u, t)).collect::<Vec<_>>(),
            vec![("u1", "a")]
        );
        let c = filter_instances(&raw, &cfg.clone().with_stop_topics(["A"]));
        assert!(c.is_empty());
    }

    #[test]
    fn single_pass_is_not_a_fixpoint() {
        // After topic "b" (2 < 3) is removed, u1 is left with 2 instances,
        // below the threshold; a second application removes u1 too.
        let mut raw = vec![];
        raw.extend((0..2).map(|_| inst("u1", "a", Polarity::Pro)));
        raw.extend((0..2).map(|_| inst("u1", "b", Polarity::Pro)));
        raw.extend((0..3).map(|_| inst("u2", "a", Polarity::Pro)));
        let cfg = FilterConfig {
            min_occurrences: 3,
            ..FilterConfig::default()
        };
        let once = filter_instances(&raw, &cfg);
        assert_eq!(once.get("u1", "a").unwrap().total(), 2);
        let twice = filter_instances(&once.to_instances(), &cfg);
        assert!(twice.get("u1", "a").is_none());
    }

    #[test]
    fn matrix_values_follow_count_ratio() {
        let mut c = InstanceCounts::default();
        c.add("u", "a", Polarity::Pro, 3);
        c.add("u", "a", Polarity::Con, 1);
        c.add("u", "b", Polarity::Pro, 2);
        c.add("v", "a", Polarity::Pro, 1);
        c.add("v", "a", Polarity::Con, 1);
        let m = build_matrix(&c).unwrap();
        assert_eq!(m.get_by_id("u", "a"), Some(0.5));
        assert_eq!(m.get_by_id("u", "b"), Some(1.0));
        assert_eq!(m.get_by_id("v", "a"), Some(0.0));
        assert_eq!(m.get_by_id("v", "b"), None);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn empty_counts_cannot_build() {
        assert!(matches!(
            build_matrix(&InstanceCounts::default()),
            Err(MatrixError::Empty)
        ));
    }

    #[test]
    fn instance_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.tsv");
        let xs = vec![
            inst("u", "a", Polarity::Pro),
            inst("v", "b c", Polarity::Con),
        ];
        write_instances(&path, &xs).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "u\ta\t+1\nv\tb c\t-1\n"
        );
        assert_eq!(read_instances(&path).unwrap(), xs);
    }

    proptest! {
        #[test]
        fn matrix_values_bounded_and_signed(pro in 0usize..50, con in 0usize..50) {
            prop_assume!(pro + con > 0);
            let mut c = InstanceCounts::default();
            c.add("u", "t", Polarity::Pro, pro);
            c.add("u", "t", Polarity::Con, con);
            let v = build_matrix(&c).unwrap().get(0, 0).unwrap();
            prop_assert!((-1.0..=1.0).contains(&v));
            prop_assert_eq!(v == 1.0, con == 0);
            prop_assert_eq!(v == -1.0, pro == 0);
        }

        #[test]
        fn extraction_independent_of_chunking(split in 0usize..6) {
            let vocab = TopicVocabulary::new(["tpp", "nuke"]);
            let pro = pats(Polarity::Pro, &["I support {A}."]);
            let con = pats(Polarity::Con, &["no {A}"]);
            let tweets = [
                tweet("a", "I support TPP."),
                tweet("b", "no nuke"),
                tweet("a", "Hmm. I support nuke. no tpp"),
                tweet("c", "nothing here"),
                tweet("b", "I support tpp."),
            ];
            let whole = extract_instances(&tweets, &pro, &con, &vocab);
            let split = split.min(tweets.len());
            let mut parts = extract_instances(&tweets[..split], &pro, &con, &vocab);
            parts.extend(extract_instances(&tweets[split..], &pro, &con, &vocab));
            prop_assert_eq!(whole, parts);
        }

        #[test]
        fn filter_is_idempotent_without_frequency_threshold(
            cells in proptest::collection::vec((0u8..4, 0u8..4, any::<bool>()), 0..40),
            stop in 0u8..4,
        ) {
            let raw: Vec<_> = cells
                .iter()
                .map(|&(u, t, p)| inst(&format!("u{u}"), &format!("t{t}"), if p { Polarity::Pro } else { Polarity::Con }))
                .collect();
            let cfg = FilterConfig { min_occurrences: 0, ..FilterConfig::default() }
                .with_stop_topics([format!("t{stop}")]);
            let once = filter_instances(&raw, &cfg);
            let twice = filter_instances(&once.to_instances(), &cfg);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn aggregation_merge_is_order_free(
            cells in proptest::collection::vec((0u8..3, 0u8..3, any::<bool>()), 0..30),
            cut in 0usize..30,
        ) {
            let raw: Vec<_> = cells
                .iter()
                .map(|&(u, t, p)| inst(&format!("u{u}"), &format!("t{t}"), if p { Polarity::Pro } else { Polarity::Con }))
                .collect();
            let cut = cut.min(raw.len());
            let mut a = InstanceCounts::aggregate(&raw[..cut]);
            let b = InstanceCounts::aggregate(&raw[cut..]);
            let mut b2 = b.clone();
            b2.merge(a.clone());
            a.merge(b);
            prop_assert_eq!(&a, &b2);
            prop_assert_eq!(a, InstanceCounts::aggregate(&raw));
        }
    }
}
