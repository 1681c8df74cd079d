//! Synthetic corpora with planted low-rank preference structure.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{CorpusError, Tweet};
use crate::patterns::{HashtagRule, StancePattern};
use crate::Polarity;

/// Templates the generator writes for agreement statements.
pub const PRO_TEMPLATES: [&str; 3] = [
    "I support {A}.",
    "{A} is necessary.",
    "We should welcome {A}!",
];
/// Templates the generator writes for disagreement statements.
pub const CON_TEMPLATES: [&str; 3] = [
    "I don't want {A}.",
    "Do not let {A} happen.",
    "{A} is completely wrong.",
];
/// Stance-free mentions, harvested as candidates but never curated.
pub const NEUTRAL_TEMPLATES: [&str; 3] = [
    "Reading about {A} today.",
    "Anyone following {A}?",
    "This is {A}.",
];

const FILLERS: [&str; 4] = ["Big news.", "Thinking out loud.", "Long day.", "Hmm."];
const HASHTAG_LEADS: [&str; 3] = ["Agreed!", "Say it loud.", "Count me in."];
const PRO_SUFFIX: &str = "sansei";
const CON_SUFFIX: &str = "hantai";
const FILLER_RATE: f64 = 0.3;
const BASE_TIMESTAMP: i64 = 1_360_108_800;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_users: usize,
    pub num_topics: usize,
    pub true_rank: usize,
    /// Probability that a (user, topic) cell is observed.
    pub density: f64,
    /// Per-statement probability of flipping the emitted polarity.
    pub polarity_noise: f64,
    /// Inclusive range of stance statements per observed cell.
    pub min_statements: u32,
    pub max_statements: u32,
    /// Per-cell probability of an additional pro/con hashtag tweet.
    pub hashtag_rate: f64,
    /// Per-cell probability of an additional stance-free mention.
    pub neutral_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_users: 500,
            num_topics: 50,
            true_rank: 5,
            density: 0.2,
            polarity_noise: 0.0,
            min_statements: 1,
            max_statements: 3,
            hashtag_rate: 0.25,
            neutral_rate: 0.2,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |m: String| Err(CorpusError::InvalidSpec(m));
        if self.num_users == 0 || self.num_topics == 0 || self.true_rank == 0 {
            return fail("num_users, num_topics and true_rank must be positive".into());
        }
        if self.true_rank > self.num_users.min(self.num_topics) {
            return fail(format!(
                "true_rank {} exceeds min(num_users, num_topics) = {}",
                self.true_rank,
                self.num_users.min(self.num_topics)
            ));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return fail(format!("density {} not in (0, 1]", self.density));
        }
        if !(0.0..1.0).contains(&self.polarity_noise) {
            return fail(format!(
                "polarity_noise {} not in [0, 1)",
                self.polarity_noise
            ));
        }
        if self.min_statements == 0 || self.min_statements > self.max_statements {
            return fail(format!(
                "statements per cell range {}..={} is empty or starts at 0",
                self.min_statements, self.max_statements
            ));
        }
        for (name, p) in [
            ("hashtag_rate", self.hashtag_rate),
            ("neutral_rate", self.neutral_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} {p} not in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn user_name(&self, i: usize) -> String {
        format!("user{:0w$}", i, w = digits(self.num_users))
    }

    pub fn topic_name(&self, i: usize) -> String {
        format!("topic{:0w$}", i, w = digits(self.num_topics))
    }
}

fn digits(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub tweets: Vec<Tweet>,
    /// Planted polarity for every observed cell.
    pub truth: BTreeMap<(String, String), Polarity>,
}

/// Hashtag rules matching the generator's `#<topic>sansei` / `#<topic>hantai` tags.
pub fn hashtag_rules() -> Vec<HashtagRule> {
    vec![
        HashtagRule::new(Polarity::Pro, &format!("#(.+){PRO_SUFFIX}")).expect("valid rule"),
        HashtagRule::new(Polarity::Con, &format!("#(.+){CON_SUFFIX}")).expect("valid rule"),
    ]
}

/// The generator's pro and con templates as curated patterns.
pub fn curated_patterns() -> (Vec<StancePattern>, Vec<StancePattern>) {
    let build = |pol, ts: &[&str]| {
        ts.iter()
            .map(|t| StancePattern::new(pol, t).expect("valid template"))
            .collect()
    };
    (
        build(Polarity::Pro, &PRO_TEMPLATES),
        build(Polarity::Con, &CON_TEMPLATES),
    )
}

struct Draft {
    user: usize,
    text: String,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rank = spec.true_rank;
    let mut latent =
        |n: usize| -> Vec<f64> { (0..n * rank).map(|_| rng.sample(StandardNormal)).collect() };
    let users = latent(spec.num_users);
    let topics = latent(spec.num_topics);

    let mut truth = BTreeMap::new();
    let mut drafts = Vec::new();
    for u in 0..spec.num_users {
        let pu = &users[u * rank..(u + 1) * rank];
        for t in 0..spec.num_topics {
            if !rng.random_bool(spec.density) {
                continue;
            }
            let qt = &topics[t * rank..(t + 1) * rank];
            let dot: f64 = pu.iter().zip(qt).map(|(a, b)| a * b).sum();
            let polarity = Polarity::of(dot);
            let topic = spec.topic_name(t);
            truth.insert((spec.user_name(u), topic.clone()), polarity);

            let emitted = |rng: &mut ChaCha8Rng| {
                if rng.random_bool(spec.polarity_noise) {
                    polarity.flipped()
                } else {
                    polarity
                }
            };
            let n = rng.random_range(spec.min_statements..=spec.max_statements);
            for _ in 0..n {
                let pol = emitted(&mut rng);
                let templates: &[&str] = match pol {
                    Polarity::Pro => &PRO_TEMPLATES,
                    Polarity::Con => &CON_TEMPLATES,
                };
                let sentence =
                    templates[rng.random_range(0..templates.len())].replace("{A}", &topic);
                let text = if rng.random_bool(FILLER_RATE) {
                    format!(
                        "{} {}",
                        FILLERS[rng.random_range(0..FILLERS.len())],
                        sentence
                    )
                } else {
                    sentence
                };
                drafts.push(Draft { user: u, text });
            }
            if rng.random_bool(spec.hashtag_rate) {
                let suffix = match emitted(&mut rng) {
                    Polarity::Pro => PRO_SUFFIX,
                    Polarity::Con => CON_SUFFIX,
                };
                let lead = HASHTAG_LEADS[rng.random_range(0..HASHTAG_LEADS.len())];
                drafts.push(Draft {
                    user: u,
                    text: format!("{lead} #{topic}{suffix}"),
                });
            }
            if rng.random_bool(spec.neutral_rate) {
                let template = NEUTRAL_TEMPLATES[rng.random_range(0..NEUTRAL_TEMPLATES.len())];
                drafts.push(Draft {
                    user: u,
                    text: template.replace("{A}", &topic),
                });
            }
        }
    }
    drafts.shuffle(&mut rng);

    let tweets = drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| Tweet {
            tweet_id: format!("s{i:08}"),
            user_id: spec.user_name(d.user),
            timestamp: BASE_TIMESTAMP + 60 * i as i64,
            is_retweet: false,
            text: d.text,
        })
        .collect();
    Ok(SyntheticCorpus { tweets, truth })
}
