//! Planted-topic synthetic corpora with known ground truth.
//!
//! Every document belongs to one topic. Each word is drawn from that topic's
//! private vocabulary with probability `topic_rate`, otherwise from a shared
//! background vocabulary. Both vocabularies are Zipf-weighted. Title,
//! abstract and body differ only in length, so longer field subsets carry
//! more topic signal.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DocumentRecord, LabeledDataset};
use crate::error::{Error, Result};

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "pu", "da", "fe", "gi", "ho", "ju", "ba",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub topics: usize,
    pub docs_per_topic: usize,
    pub topic_vocab: usize,
    pub background_vocab: usize,
    /// Probability that a word comes from the document's topic.
    pub topic_rate: f64,
    pub title_len: usize,
    pub abstract_len: usize,
    pub body_len: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            topics: 4,
            docs_per_topic: 100,
            topic_vocab: 40,
            background_vocab: 300,
            topic_rate: 0.3,
            title_len: 6,
            abstract_len: 50,
            body_len: 200,
            seed: 7,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(1..=SYLLABLES.len()).contains(&self.topics) {
            return bad("topics must lie in 1..=16");
        }
        if self.docs_per_topic == 0 {
            return bad("docs_per_topic must be positive");
        }
        if !(1..=SYLLABLES.len().pow(2)).contains(&self.topic_vocab) {
            return bad("topic_vocab must lie in 1..=256");
        }
        if !(1..=SYLLABLES.len().pow(3)).contains(&self.background_vocab) {
            return bad("background_vocab must lie in 1..=4096");
        }
        if !(0.0..=1.0).contains(&self.topic_rate) {
            return bad("topic_rate must lie in [0, 1]");
        }
        if self.title_len == 0 {
            return bad("title_len must be positive");
        }
        Ok(())
    }
}

/// Class label of topic `t`.
pub fn topic_label(t: usize) -> String {
    format!("Planted Topic {}", t + 1)
}

/// Private words of topic `t`, most frequent first.
pub fn topic_words(t: usize, count: usize) -> Vec<String> {
    (0..count)
        .map(|w| format!("{}{}{}", SYLLABLES[t], SYLLABLES[w / 16], SYLLABLES[w % 16]))
        .collect()
}

/// Shared background words, most frequent first. Four syllables long, so
/// never equal to a topic word.
pub fn background_words(count: usize) -> Vec<String> {
    (0..count)
        .map(|w| {
            format!(
                "{}{}{}{}",
                SYLLABLES[(w / 256) % 16],
                SYLLABLES[(w / 16) % 16],
                SYLLABLES[w % 16],
                SYLLABLES[(w * 7 + 3) % 16]
            )
        })
        .collect()
}

fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((0..n).map(|r| 1.0 / (r as f64 + 1.0))).expect("nonempty positive weights")
}

/// Generates the corpus. Documents interleave topics (`doc-0000` is topic 0,
/// `doc-0001` topic 1, ...) and carry their topic label as the only subject
/// label.
pub fn planted_corpus(params: &SynthParams) -> Result<Corpus> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let topics: Vec<Vec<String>> = (0..params.topics)
        .map(|t| topic_words(t, params.topic_vocab))
        .collect();
    let background = background_words(params.background_vocab);
    let topic_dist = zipf(params.topic_vocab);
    let background_dist = zipf(params.background_vocab);

    let total = params.topics * params.docs_per_topic;
    let mut records = Vec::with_capacity(total);
    for d in 0..total {
        let t = d % params.topics;
        let mut text = |len: usize| -> String {
            (0..len)
                .map(|_| {
                    if rng.random::<f64>() < params.topic_rate {
                        topics[t][topic_dist.sample(&mut rng)].as_str()
                    } else {
                        background[background_dist.sample(&mut rng)].as_str()
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let title = text(params.title_len);
        let mut record = DocumentRecord::new(format!("doc-{d:04}"), title).with_labels([topic_label(t)]);
        if params.abstract_len > 0 {
            record = record.with_abstract(text(params.abstract_len));
        }
        if params.body_len > 0 {
            record = record.with_body(text(params.body_len));
        }
        records.push(record);
    }
    Corpus::new(records, format!("planted:seed={}", params.seed))
}

/// The planted corpus with its topics as ground-truth classes.
pub fn planted_dataset(params: &SynthParams) -> Result<LabeledDataset> {
    let corpus = planted_corpus(params)?;
    let classes: Vec<String> = (0..params.topics).map(topic_label).collect();
    let truth = corpus
        .records()
        .iter()
        .enumerate()
        .map(|(d, r)| (r.id.clone(), topic_label(d % params.topics)))
        .collect();
    LabeledDataset::from_parts(corpus, truth, classes)
}
