//! Tweet records: the line format, streaming ingestion and corpus statistics.
//!
//! One record per line, tab-separated in fixed order:
//!
//! ```text
//! tweet_id <TAB> user_id <TAB> timestamp <TAB> is_retweet (0|1) <TAB> text
//! ```
//!
//! The text field is last. Malformed lines are counted and skipped.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;

mod synthetic;

pub use synthetic::{
    curated_patterns, generate_synthetic, hashtag_rules, SyntheticCorpus, SyntheticSpec,
    CON_TEMPLATES, NEUTRAL_TEMPLATES, PRO_TEMPLATES,
};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

/// One authored message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tweet {
    pub tweet_id: String,
    pub user_id: String,
    pub timestamp: i64,
    pub is_retweet: bool,
    pub text: String,
}

impl Tweet {
    /// Parses one record line. Returns `None` for malformed lines.
    pub fn parse_line(line: &str) -> Option<Tweet> {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let mut fields = line.splitn(5, '\t');
        let tweet_id = fields.next()?.trim();
        let user_id = fields.next()?.trim();
        let timestamp = fields.next()?.trim().parse().ok()?;
        let is_retweet = match fields.next()?.trim() {
            "0" => false,
            "1" => true,
            _ => return None,
        };
        let text = fields.next()?;
        if tweet_id.is_empty() || user_id.is_empty() || text.trim().is_empty() {
            return None;
        }
        Some(Tweet {
            tweet_id: tweet_id.to_string(),
            user_id: user_id.to_string(),
            timestamp,
            is_retweet,
            text: text.to_string(),
        })
    }

    /// Formats the record as one line (no trailing newline). Tabs and line
    /// breaks inside the text become spaces.
    pub fn to_line(&self) -> String {
        let text: String = self
            .text
            .chars()
            .map(|c| {
                if matches!(c, '\t' | '\n' | '\r') {
                    ' '
                } else {
                    c
                }
            })
            .collect();
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.tweet_id,
            self.user_id,
            self.timestamp,
            u8::from(self.is_retweet),
            text
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorpusStats {
    /// Tweets yielded.
    pub tweet_count: usize,
    /// Distinct authors among yielded tweets.
    pub user_count: usize,
    pub retweets_removed: usize,
    pub malformed_lines: usize,
}

/// Streaming reader over a corpus. Yields tweets in file order; statistics
/// are complete once the iterator is exhausted.
pub struct CorpusReader<R> {
    lines: io::Lines<R>,
    drop_retweets: bool,
    line_no: usize,
    users: HashSet<String>,
    stats: CorpusStats,
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, drop_retweets: bool) -> Self {
        CorpusReader {
            lines: reader.lines(),
            drop_retweets,
            line_no: 0,
            users: HashSet::new(),
            stats: CorpusStats::default(),
        }
    }

    pub fn stats(&self) -> CorpusStats {
        self.stats
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = io::Result<Tweet>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e)),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let Some(tweet) = Tweet::parse_line(&line) else {
                self.stats.malformed_lines += 1;
                warn!("skipping malformed corpus line {}", self.line_no);
                continue;
            };
            if self.drop_retweets && tweet.is_retweet {
                self.stats.retweets_removed += 1;
                continue;
            }
            self.stats.tweet_count += 1;
            if !self.users.contains(&tweet.user_id) {
                self.users.insert(tweet.user_id.clone());
                self.stats.user_count += 1;
            }
            return Some(Ok(tweet));
        }
    }
}

/// Opens a corpus file for streaming.
pub fn ingest(
    path: impl AsRef<Path>,
    drop_retweets: bool,
) -> Result<CorpusReader<BufReader<File>>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(CorpusReader::new(BufReader::new(file), drop_retweets))
}

/// Reads a whole corpus into memory.
pub fn read_corpus(
    path: impl AsRef<Path>,
    drop_retweets: bool,
) -> Result<(Vec<Tweet>, CorpusStats), CorpusError> {
    let path = path.as_ref();
    let mut reader = ingest(path, drop_retweets)?;
    let tweets = reader
        .by_ref()
        .collect::<io::Result<Vec<_>>>()
        .map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok((tweets, reader.stats()))
}

pub fn write_corpus<'a>(
    path: impl AsRef<Path>,
    tweets: impl IntoIterator<Item = &'a Tweet>,
) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for tweet in tweets {
        writeln!(out, "{}", tweet.to_line())?;
    }
    out.flush()
}
