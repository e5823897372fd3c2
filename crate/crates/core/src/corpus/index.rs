use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::record::{parse_line, CorpusSchema, DocumentRecord};
use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainCount {
    pub documents: u64,
    pub tokens: u64,
}

impl DomainCount {
    fn add(&mut self, tokens: u64) {
        self.documents += 1;
        self.tokens += tokens;
    }

    fn absorb(&mut self, other: &DomainCount) {
        self.documents += other.documents;
        self.tokens += other.tokens;
    }

    pub fn get(&self, weighting: Weighting) -> u64 {
        match weighting {
            Weighting::Tokens => self.tokens,
            Weighting::Documents => self.documents,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Tokens,
    Documents,
}

impl std::str::FromStr for Weighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tokens" => Ok(Weighting::Tokens),
            "documents" => Ok(Weighting::Documents),
            other => Err(Error::InvalidConfig(format!("unknown weighting {other:?}"))),
        }
    }
}

/// Annotation axes carried by every document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Topic,
    Format,
    Cluster,
}

/// How a taxonomy maps a document to a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKey {
    Axis(Axis),
    /// `(row axis, column axis, column arity)`.
    Pair(Axis, Axis, usize),
}

impl DomainKey {
    pub fn of(&self, doc: &DocEntry) -> Option<usize> {
        match *self {
            DomainKey::Axis(a) => doc.axis(a),
            DomainKey::Pair(a, b, width) => Some(doc.axis(a)? * width + doc.axis(b)?),
        }
    }
}

/// Per-document data retained for selection.
#[derive(Debug, Clone, PartialEq)]
pub struct DocEntry {
    pub tokens: u64,
    pub topic: usize,
    pub format: usize,
    pub cluster: Option<usize>,
    pub scores: BTreeMap<String, f64>,
}

impl DocEntry {
    pub fn axis(&self, axis: Axis) -> Option<usize> {
        match axis {
            Axis::Topic => Some(self.topic),
            Axis::Format => Some(self.format),
            Axis::Cluster => self.cluster,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum DocStore {
    Full(BTreeMap<String, DocEntry>),
    IdsOnly(BTreeSet<String>),
}

/// Exact per-domain counts plus (optionally) the document lists.
///
/// `merge` is associative and commutative: any sharding of a record stream
/// produces the same index.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusIndex {
    schema: CorpusSchema,
    total: DomainCount,
    topic: Vec<DomainCount>,
    format: Vec<DomainCount>,
    cluster: Vec<DomainCount>,
    unclustered: DomainCount,
    topic_format: Vec<DomainCount>,
    topic_cluster: Vec<DomainCount>,
    format_cluster: Vec<DomainCount>,
    docs: DocStore,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Drop per-document lists and keep only counts.
    pub stats_only: bool,
    /// Count and skip malformed lines instead of failing.
    pub skip_malformed: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub lines: usize,
    pub records: usize,
    pub skipped: usize,
}

impl CorpusIndex {
    pub fn empty(schema: CorpusSchema, stats_only: bool) -> Self {
        let nt = schema.topic.arity();
        let nf = schema.format.arity();
        let nc = schema.cluster.as_ref().map_or(0, |c| c.arity());
        CorpusIndex {
            total: DomainCount::default(),
            topic: vec![DomainCount::default(); nt],
            format: vec![DomainCount::default(); nf],
            cluster: vec![DomainCount::default(); nc],
            unclustered: DomainCount::default(),
            topic_format: vec![DomainCount::default(); nt * nf],
            topic_cluster: vec![DomainCount::default(); nt * nc],
            format_cluster: vec![DomainCount::default(); nf * nc],
            docs: if stats_only {
                DocStore::IdsOnly(BTreeSet::new())
            } else {
                DocStore::Full(BTreeMap::new())
            },
            schema,
        }
    }

    pub fn insert(&mut self, record: DocumentRecord) -> Result<()> {
        record.validate(&self.schema)?;
        let DocumentRecord {
            doc_id,
            tokens,
            topic,
            format,
            cluster,
            scores,
        } = record;
        let cluster = if self.schema.cluster.is_some() { cluster } else { None };
        let fresh = match &mut self.docs {
            DocStore::Full(map) => {
                if map.contains_key(&doc_id) {
                    false
                } else {
                    map.insert(
                        doc_id.clone(),
                        DocEntry {
                            tokens,
                            topic,
                            format,
                            cluster,
                            scores,
                        },
                    );
                    true
                }
            }
            DocStore::IdsOnly(set) => set.insert(doc_id.clone()),
        };
        if !fresh {
            return Err(Error::DuplicateDocId(doc_id));
        }
        let nf = self.format.len();
        let nc = self.cluster.len();
        self.total.add(tokens);
        self.topic[topic].add(tokens);
        self.format[format].add(tokens);
        self.topic_format[topic * nf + format].add(tokens);
        match cluster {
            Some(c) => {
                self.cluster[c].add(tokens);
                self.topic_cluster[topic * nc + c].add(tokens);
                self.format_cluster[format * nc + c].add(tokens);
            }
            None => self.unclustered.add(tokens),
        }
        Ok(())
    }

    /// Combines two shards. Fails on schema mismatch or shared document ids.
    pub fn merge(mut self, other: CorpusIndex) -> Result<CorpusIndex> {
        if self.schema != other.schema {
            return Err(Error::TaxonomyMismatch {
                expected: format!("{:?}", self.schema.topic.label()),
                found: format!("{:?}", other.schema.topic.label()),
            });
        }
        match (&mut self.docs, other.docs) {
            (DocStore::Full(a), DocStore::Full(b)) => {
                for (id, entry) in b {
                    if a.contains_key(&id) {
                        return Err(Error::DuplicateDocId(id));
                    }
                    a.insert(id, entry);
                }
            }
            (a, b) => {
                // Either side lacks lists: the merged index is stats-only.
                let mut ids: BTreeSet<String> = match std::mem::replace(a, DocStore::IdsOnly(BTreeSet::new())) {
                    DocStore::Full(m) => m.into_keys().collect(),
                    DocStore::IdsOnly(s) => s,
                };
                let theirs: Vec<String> = match b {
                    DocStore::Full(m) => m.into_keys().collect(),
                    DocStore::IdsOnly(s) => s.into_iter().collect(),
                };
                for id in theirs {
                    if !ids.insert(id.clone()) {
                        return Err(Error::DuplicateDocId(id));
                    }
                }
                *a = DocStore::IdsOnly(ids);
            }
        }
        let pairs = [
            (&mut self.topic, &other.topic),
            (&mut self.format, &other.format),
            (&mut self.cluster, &other.cluster),
            (&mut self.topic_format, &other.topic_format),
            (&mut self.topic_cluster, &other.topic_cluster),
            (&mut self.format_cluster, &other.format_cluster),
        ];
        for (mine, theirs) in pairs {
            mine.iter_mut().zip(theirs).for_each(|(m, t)| m.absorb(t));
        }
        self.total.absorb(&other.total);
        self.unclustered.absorb(&other.unclustered);
        Ok(self)
    }

    pub fn schema(&self) -> &CorpusSchema {
        &self.schema
    }

    pub fn total(&self) -> DomainCount {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total.documents == 0
    }

    pub fn has_documents(&self) -> bool {
        matches!(self.docs, DocStore::Full(_))
    }

    /// Documents in id order. Empty for stats-only indexes.
    pub fn documents(&self) -> impl Iterator<Item = (&str, &DocEntry)> {
        let map = match &self.docs {
            DocStore::Full(m) => Some(m),
            DocStore::IdsOnly(_) => None,
        };
        map.into_iter().flat_map(|m| m.iter().map(|(k, v)| (k.as_str(), v)))
    }

    pub fn document(&self, id: &str) -> Option<&DocEntry> {
        match &self.docs {
            DocStore::Full(m) => m.get(id),
            DocStore::IdsOnly(_) => None,
        }
    }

    fn axis_of(&self, tax: &Taxonomy) -> Option<Axis> {
        let t = &self.schema;
        if *tax == *t.topic {
            Some(Axis::Topic)
        } else if *tax == *t.format {
            Some(Axis::Format)
        } else if t.cluster.as_ref().is_some_and(|c| **c == *tax) {
            Some(Axis::Cluster)
        } else {
            None
        }
    }

    pub fn domain_key(&self, tax: &Taxonomy) -> Result<DomainKey> {
        if let Some(axis) = self.axis_of(tax) {
            return Ok(DomainKey::Axis(axis));
        }
        if let Some((a, b)) = tax.factors() {
            if let (Some(x), Some(y)) = (self.axis_of(a), self.axis_of(b)) {
                if x != y {
                    return Ok(DomainKey::Pair(x, y, b.arity()));
                }
            }
        }
        Err(Error::TaxonomyMismatch {
            expected: format!(
                "one of {}, {}{}",
                self.schema.topic,
                self.schema.format,
                self.schema
                    .cluster
                    .as_ref()
                    .map(|c| format!(", {c}"))
                    .unwrap_or_default()
            ),
            found: tax.label().to_string(),
        })
    }

    pub(crate) fn axis_counts(&self, axis: Axis) -> Result<&[DomainCount]> {
        match axis {
            Axis::Topic => Ok(&self.topic),
            Axis::Format => Ok(&self.format),
            Axis::Cluster => {
                if self.schema.cluster.is_none() || self.unclustered.documents > 0 {
                    Err(Error::MissingAnnotation(
                        self.schema
                            .cluster
                            .as_ref()
                            .map_or_else(|| "cluster".to_string(), |c| c.label().to_string()),
                    ))
                } else {
                    Ok(&self.cluster)
                }
            }
        }
    }

    /// Joint counts over two distinct axes, row-major over `(a, b)`.
    pub(crate) fn pair_counts(&self, a: Axis, b: Axis) -> Result<Vec<DomainCount>> {
        let na = self.axis_counts(a)?.len();
        let nb = self.axis_counts(b)?.len();
        let (table, transpose) = match (a, b) {
            (Axis::Topic, Axis::Format) => (&self.topic_format, false),
            (Axis::Format, Axis::Topic) => (&self.topic_format, true),
            (Axis::Topic, Axis::Cluster) => (&self.topic_cluster, false),
            (Axis::Cluster, Axis::Topic) => (&self.topic_cluster, true),
            (Axis::Format, Axis::Cluster) => (&self.format_cluster, false),
            (Axis::Cluster, Axis::Format) => (&self.format_cluster, true),
            _ => {
                return Err(Error::InvalidConfig(
                    "joint distribution needs two distinct taxonomies".into(),
                ))
            }
        };
        if !transpose {
            return Ok(table.clone());
        }
        let mut out = vec![DomainCount::default(); na * nb];
        for i in 0..na {
            for j in 0..nb {
                out[i * nb + j] = table[j * na + i];
            }
        }
        Ok(out)
    }

    /// Per-category counts for any taxonomy the index can map documents to.
    pub fn counts(&self, tax: &Taxonomy) -> Result<Vec<DomainCount>> {
        match self.domain_key(tax)? {
            DomainKey::Axis(axis) => Ok(self.axis_counts(axis)?.to_vec()),
            DomainKey::Pair(a, b, _) => self.pair_counts(a, b),
        }
    }

    pub fn taxonomy_for(&self, axis: Axis) -> Option<&std::sync::Arc<Taxonomy>> {
        match axis {
            Axis::Topic => Some(&self.schema.topic),
            Axis::Format => Some(&self.schema.format),
            Axis::Cluster => self.schema.cluster.as_ref(),
        }
    }
}

/// Builds an index from already-parsed records.
pub fn ingest<I>(records: I, schema: CorpusSchema, stats_only: bool) -> Result<CorpusIndex>
where
    I: IntoIterator<Item = DocumentRecord>,
{
    let mut index = CorpusIndex::empty(schema, stats_only);
    for r in records {
        index.insert(r)?;
    }
    Ok(index)
}

/// Streams JSONL records from `reader`.
pub fn ingest_reader<R: BufRead>(
    reader: R,
    schema: CorpusSchema,
    options: IngestOptions,
) -> Result<(CorpusIndex, IngestSummary)> {
    let mut index = CorpusIndex::empty(schema, options.stats_only);
    let mut summary = IngestSummary::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        summary.lines += 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line, i + 1, &index.schema) {
            Ok(record) => {
                index.insert(record)?;
                summary.records += 1;
            }
            Err(e @ Error::MalformedRecord { .. }) => {
                if options.skip_malformed {
                    summary.skipped += 1;
                } else {
                    return Err(e);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok((index, summary))
}
