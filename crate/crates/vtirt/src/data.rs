//! Line-delimited JSON datasets and their grouping into training sequences.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use vtirt_core::InteractionRecord;

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    learner: String,
    item: String,
    correct: u64,
    step: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    kc: Vec<String>,
}

/// Optional ingestion filters, all off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Keep only the earliest attempt of each (learner, item).
    pub first_attempt_only: bool,
    /// Drop learners with fewer interactions than this (after the attempt filter).
    pub min_interactions: usize,
}

/// All records of one learner, ordered by step.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub id: String,
    pub records: Vec<InteractionRecord>,
}

/// A dataset grouped by learner; learners are ordered by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub learners: Vec<Learner>,
}

impl Dataset {
    /// Groups records by learner and sorts each learner by step.
    /// Duplicate (learner, step) pairs are rejected.
    pub fn from_records(records: impl IntoIterator<Item = InteractionRecord>) -> Result<Self> {
        let mut by_learner: BTreeMap<String, Vec<InteractionRecord>> = BTreeMap::new();
        for r in records {
            by_learner.entry(r.learner_id.clone()).or_default().push(r);
        }
        let mut learners = Vec::with_capacity(by_learner.len());
        for (id, mut records) in by_learner {
            records.sort_by_key(|r| r.step);
            if let Some(w) = records.windows(2).find(|w| w[0].step == w[1].step) {
                return Err(Error::Data(format!("learner {id} has two records at step {}", w[0].step)));
            }
            learners.push(Learner { id, records });
        }
        Ok(Dataset { learners })
    }

    pub fn len(&self) -> usize {
        self.learners.iter().map(|l| l.records.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.learners.iter().all(|l| l.records.is_empty())
    }

    pub fn records(&self) -> impl Iterator<Item = &InteractionRecord> {
        self.learners.iter().flat_map(|l| l.records.iter())
    }

    /// Sorted distinct item identifiers.
    pub fn item_vocabulary(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records().map(|r| r.item_id.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    pub fn has_kcs(&self) -> bool {
        self.records().any(|r| !r.kcs.is_empty())
    }

    /// The learners at the given positions, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset { learners: indices.iter().map(|&i| self.learners[i].clone()).collect() }
    }

    pub fn apply(mut self, opts: LoadOptions) -> Self {
        if opts.first_attempt_only {
            for l in &mut self.learners {
                let mut seen = BTreeSet::new();
                l.records.retain(|r| seen.insert(r.item_id.clone()));
            }
        }
        self.learners.retain(|l| !l.records.is_empty() && l.records.len() >= opts.min_interactions);
        self
    }

    pub fn load(path: &Path, opts: LoadOptions) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        let mut first_line: HashMap<(String, u64), usize> = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { path: path.to_owned(), line: line_no, message };
            let raw: RecordLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            let correct = match raw.correct {
                0 => false,
                1 => true,
                other => return Err(parse_err(format!("correctness must be 0 or 1, found {other}"))),
            };
            if let Some(prev) = first_line.insert((raw.learner.clone(), raw.step), line_no) {
                return Err(parse_err(format!(
                    "duplicate step {} for learner {} (first seen on line {prev})",
                    raw.step, raw.learner
                )));
            }
            records.push(InteractionRecord {
                learner_id: raw.learner,
                item_id: raw.item,
                correct,
                step: raw.step,
                kcs: raw.kc,
            });
        }
        Ok(Self::from_records(records)?.apply(opts))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for r in self.records() {
            let line = RecordLine {
                learner: r.learner_id.clone(),
                item: r.item_id.clone(),
                correct: r.correct as u64,
                step: r.step,
                kc: r.kcs.clone(),
            };
            serde_json::to_writer(&mut w, &line).map_err(|e| Error::Data(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One trajectory: a learner's records restricted to one knowledge component
/// (or all of them when untagged), with items mapped to vocabulary indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub learner: usize,
    pub kc: Option<String>,
    /// Positions within the learner's records.
    pub positions: Vec<usize>,
    /// Vocabulary index per record, `None` for items outside the vocabulary.
    pub items: Vec<Option<usize>>,
    pub correct: Vec<bool>,
}

/// Splits each learner into trajectories: one per knowledge component, plus
/// one for untagged records. A record tagged with several components appears
/// in each of their trajectories.
pub fn sequences(dataset: &Dataset, vocab: &BTreeMap<String, usize>) -> Vec<Sequence> {
    let mut out = Vec::new();
    for (li, learner) in dataset.learners.iter().enumerate() {
        let mut by_kc: BTreeMap<Option<&str>, Vec<usize>> = BTreeMap::new();
        for (pos, r) in learner.records.iter().enumerate() {
            if r.kcs.is_empty() {
                by_kc.entry(None).or_default().push(pos);
            } else {
                let kcs: BTreeSet<&str> = r.kcs.iter().map(String::as_str).collect();
                for kc in kcs {
                    by_kc.entry(Some(kc)).or_default().push(pos);
                }
            }
        }
        for (kc, positions) in by_kc {
            let recs = &learner.records;
            out.push(Sequence {
                learner: li,
                kc: kc.map(str::to_owned),
                items: positions.iter().map(|&p| vocab.get(&recs[p].item_id).copied()).collect(),
                correct: positions.iter().map(|&p| recs[p].correct).collect(),
                positions,
            });
        }
    }
    out
}

pub fn vocabulary_index(items: &[String]) -> BTreeMap<String, usize> {
    items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect()
}
