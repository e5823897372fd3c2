use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;

/// Taxonomies a corpus is annotated with.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSchema {
    pub topic: Arc<Taxonomy>,
    pub format: Arc<Taxonomy>,
    pub cluster: Option<Arc<Taxonomy>>,
}

impl Default for CorpusSchema {
    fn default() -> Self {
        CorpusSchema {
            topic: Arc::new(Taxonomy::topics()),
            format: Arc::new(Taxonomy::formats()),
            cluster: None,
        }
    }
}

impl CorpusSchema {
    pub fn with_clusters(mut self, k: usize) -> Result<Self> {
        self.cluster = Some(Arc::new(Taxonomy::clusters(k)?));
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub tokens: u64,
    pub topic: usize,
    pub format: usize,
    pub cluster: Option<usize>,
    pub scores: BTreeMap<String, f64>,
}

impl DocumentRecord {
    pub fn new(doc_id: impl Into<String>, tokens: u64, topic: usize, format: usize) -> Self {
        DocumentRecord {
            doc_id: doc_id.into(),
            tokens,
            topic,
            format,
            cluster: None,
            scores: BTreeMap::new(),
        }
    }

    pub fn with_score(mut self, name: &str, value: f64) -> Self {
        self.scores.insert(name.to_string(), value);
        self
    }

    pub fn with_cluster(mut self, cluster: usize) -> Self {
        self.cluster = Some(cluster);
        self
    }

    pub fn validate(&self, schema: &CorpusSchema) -> Result<()> {
        if self.tokens == 0 {
            return Err(Error::InvalidRecord(format!(
                "document {:?} has zero tokens",
                self.doc_id
            )));
        }
        schema.topic.check_id(self.topic)?;
        schema.format.check_id(self.format)?;
        if let (Some(c), Some(tax)) = (self.cluster, &schema.cluster) {
            tax.check_id(c)?;
        }
        if let Some((name, v)) = self.scores.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidRecord(format!(
                "document {:?} has non-finite score {name} = {v}",
                self.doc_id
            )));
        }
        Ok(())
    }

    pub fn to_line(&self, schema: &CorpusSchema) -> RawRecord {
        RawRecord {
            id: self.doc_id.clone(),
            tokens: self.tokens,
            topic: RawLabel::Name(schema.topic.name(self.topic).unwrap_or_default().to_string()),
            format: RawLabel::Name(schema.format.name(self.format).unwrap_or_default().to_string()),
            cluster: self.cluster,
            scores: self.scores.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawLabel {
    Id(usize),
    Name(String),
}

impl RawLabel {
    fn resolve(&self, tax: &Taxonomy) -> Result<usize> {
        match self {
            RawLabel::Id(id) => tax.check_id(*id),
            RawLabel::Name(name) => tax.resolve_label(name),
        }
    }
}

/// One JSONL line as written on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub tokens: u64,
    pub topic: RawLabel,
    pub format: RawLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scores: BTreeMap<String, f64>,
}

impl RawRecord {
    pub fn resolve(&self, schema: &CorpusSchema) -> Result<DocumentRecord> {
        let record = DocumentRecord {
            doc_id: self.id.clone(),
            tokens: self.tokens,
            topic: self.topic.resolve(&schema.topic)?,
            format: self.format.resolve(&schema.format)?,
            cluster: if schema.cluster.is_some() { self.cluster } else { None },
            scores: self.scores.clone(),
        };
        record.validate(schema)?;
        Ok(record)
    }
}

/// Parses one JSONL line. Every failure is reported as a malformed record at
/// `line` (1-based).
pub fn parse_line(line: &str, line_no: usize, schema: &CorpusSchema) -> Result<DocumentRecord> {
    let malformed = |reason: String| Error::MalformedRecord { line: line_no, reason };
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    raw.resolve(schema).map_err(|e| malformed(e.to_string()))
}
