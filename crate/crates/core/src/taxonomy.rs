//! Category registries for topic, format, cluster and product domains.
//!
//! Category ids are assigned by lexicographic (byte) order of the category
//! names, so the id of a name never depends on how a table happened to list
//! it. Cluster taxonomies are built at runtime with synthetic names, and a
//! product taxonomy enumerates every `(a, b)` pair with
//! `id = a * arity(b) + b`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOPIC_NAMES: [&str; 24] = [
    "Adult",
    "Art & Design",
    "Crime & Law",
    "Education & Jobs",
    "Entertainment",
    "Fashion & Beauty",
    "Finance & Business",
    "Food & Dining",
    "Games",
    "Hardware",
    "Health",
    "History",
    "Home & Hobbies",
    "Industrial",
    "Literature",
    "Politics",
    "Religion",
    "Science & Technology",
    "Social Life",
    "Software",
    "Software Development",
    "Sports & Fitness",
    "Transportation",
    "Travel",
];

pub const FORMAT_NAMES: [&str; 24] = [
    "About (Org.)",
    "About (Personal)",
    "Academic Writing",
    "Audio Transcript",
    "Comment Section",
    "Content Listing",
    "Creative Writing",
    "Customer Support",
    "Documentation",
    "FAQ",
    "Knowledge Article",
    "Legal Notices",
    "Listicle",
    "News (Org.)",
    "News Article",
    "Nonfiction Writing",
    "Personal Blog",
    "Product Page",
    "Q&A Forum",
    "Spam / Ads",
    "Structured Data",
    "Truncated",
    "Tutorial",
    "User Review",
];

/// Short forms that appear in published mixture tables, mapped to the
/// canonical category name.
pub const ABBREVIATIONS: [(&str, &str); 3] = [
    ("Science & Tech.", "Science & Technology"),
    ("Software Dev.", "Software Development"),
    ("About (Pers.)", "About (Personal)"),
];

/// Separator between the two parts of a product category name.
pub const PRODUCT_SEPARATOR: &str = " | ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaxonomyKind {
    Topic,
    Format,
    Cluster,
    Product,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: usize,
    pub name: String,
}

#[derive(Debug, Clone)]
pub struct Taxonomy {
    kind: TaxonomyKind,
    label: String,
    names: Vec<String>,
    lookup: HashMap<String, usize>,
    factors: Option<(Arc<Taxonomy>, Arc<Taxonomy>)>,
}

impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.label == other.label && self.names == other.names
    }
}

impl Eq for Taxonomy {}

impl fmt::Display for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Lowercases, trims and collapses internal whitespace.
pub fn normalize_label(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn expand_abbreviation(normalized: &str) -> Option<&'static str> {
    ABBREVIATIONS
        .iter()
        .find(|(short, _)| normalize_label(short) == normalized)
        .map(|(_, full)| *full)
}

impl Taxonomy {
    fn build(
        kind: TaxonomyKind,
        label: String,
        names: Vec<String>,
        factors: Option<(Arc<Taxonomy>, Arc<Taxonomy>)>,
    ) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidTaxonomy(format!("{label} has no categories")));
        }
        let mut lookup = HashMap::with_capacity(names.len());
        for (id, name) in names.iter().enumerate() {
            if lookup.insert(normalize_label(name), id).is_some() {
                return Err(Error::InvalidTaxonomy(format!(
                    "duplicate category name {name:?} in {label}"
                )));
            }
        }
        Ok(Taxonomy {
            kind,
            label,
            names,
            lookup,
            factors,
        })
    }

    fn sorted(kind: TaxonomyKind, label: &str, names: &[&str]) -> Self {
        let mut names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        names.sort();
        Self::build(kind, label.to_string(), names, None).expect("static registry is valid")
    }

    pub fn topics() -> Self {
        Self::sorted(TaxonomyKind::Topic, "topic", &TOPIC_NAMES)
    }

    pub fn formats() -> Self {
        Self::sorted(TaxonomyKind::Format, "format", &FORMAT_NAMES)
    }

    /// A taxonomy of `k` unnamed clusters, `cluster-00` .. `cluster-{k-1}`.
    pub fn clusters(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidTaxonomy("cluster taxonomy needs k >= 1".into()));
        }
        let width = (k - 1).to_string().len().max(2);
        let names = (0..k).map(|i| format!("cluster-{i:0width$}")).collect();
        Self::build(TaxonomyKind::Cluster, format!("cluster:{k}"), names, None)
    }

    /// Every pair of categories from `a` and `b`, ordered row-major.
    pub fn product(a: Arc<Taxonomy>, b: Arc<Taxonomy>) -> Self {
        let label = if a.kind == TaxonomyKind::Topic && b.kind == TaxonomyKind::Format {
            "product".to_string()
        } else {
            format!("product({},{})", a.label, b.label)
        };
        let mut names = Vec::with_capacity(a.arity() * b.arity());
        for x in &a.names {
            for y in &b.names {
                names.push(format!("{x}{PRODUCT_SEPARATOR}{y}"));
            }
        }
        Self::build(TaxonomyKind::Product, label, names, Some((a, b))).expect("product of valid taxonomies is valid")
    }

    pub fn topic_by_format() -> Self {
        Self::product(Arc::new(Self::topics()), Arc::new(Self::formats()))
    }

    /// Parses `topic`, `format`, `product`, `cluster:<k>` or
    /// `product(<a>,<b>)`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        match spec {
            "topic" => return Ok(Self::topics()),
            "format" => return Ok(Self::formats()),
            "product" => return Ok(Self::topic_by_format()),
            _ => {}
        }
        if let Some(k) = spec.strip_prefix("cluster:") {
            let k: usize = k.trim().parse().map_err(|_| Error::UnknownTaxonomy(spec.to_string()))?;
            return Self::clusters(k);
        }
        if let Some(inner) = spec.strip_prefix("product(").and_then(|s| s.strip_suffix(')')) {
            let mut depth = 0usize;
            for (i, c) in inner.char_indices() {
                match c {
                    '(' => depth += 1,
                    ')' => depth = depth.saturating_sub(1),
                    ',' if depth == 0 => {
                        let a = Self::from_spec(&inner[..i])?;
                        let b = Self::from_spec(&inner[i + 1..])?;
                        return Ok(Self::product(Arc::new(a), Arc::new(b)));
                    }
                    _ => {}
                }
            }
        }
        Err(Error::UnknownTaxonomy(spec.to_string()))
    }

    /// Rebuilds a taxonomy from an exported registry.
    pub fn from_categories(kind: TaxonomyKind, label: &str, categories: &[Category]) -> Result<Self> {
        let mut names = vec![None; categories.len()];
        for c in categories {
            let slot = names
                .get_mut(c.id)
                .ok_or_else(|| Error::InvalidTaxonomy(format!("category id {} out of range", c.id)))?;
            if slot.replace(c.name.clone()).is_some() {
                return Err(Error::InvalidTaxonomy(format!("duplicate category id {}", c.id)));
            }
        }
        let names = names.into_iter().map(|n| n.expect("all ids filled")).collect();
        Self::build(kind, label.to_string(), names, None)
    }

    pub fn kind(&self) -> TaxonomyKind {
        self.kind
    }

    /// The specifier string accepted by [`Taxonomy::from_spec`].
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn arity(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn categories(&self) -> Vec<Category> {
        self.names
            .iter()
            .enumerate()
            .map(|(id, name)| Category { id, name: name.clone() })
            .collect()
    }

    pub fn factors(&self) -> Option<(&Arc<Taxonomy>, &Arc<Taxonomy>)> {
        self.factors.as_ref().map(|(a, b)| (a, b))
    }

    /// Product cell id for `(a, b)`.
    pub fn cell(&self, a: usize, b: usize) -> Option<usize> {
        let (ta, tb) = self.factors()?;
        (a < ta.arity() && b < tb.arity()).then(|| a * tb.arity() + b)
    }

    /// Inverse of [`Taxonomy::cell`].
    pub fn split_cell(&self, id: usize) -> Option<(usize, usize)> {
        let (_, tb) = self.factors()?;
        (id < self.arity()).then(|| (id / tb.arity(), id % tb.arity()))
    }

    pub fn resolve_label(&self, name: &str) -> Result<usize> {
        let key = normalize_label(name);
        if let Some(&id) = self.lookup.get(&key) {
            return Ok(id);
        }
        if let Some(full) = expand_abbreviation(&key) {
            if let Some(&id) = self.lookup.get(&normalize_label(full)) {
                return Ok(id);
            }
        }
        if let Some((a, b)) = self.factors() {
            if let Some((x, y)) = name.split_once(PRODUCT_SEPARATOR.trim()) {
                if let (Ok(x), Ok(y)) = (a.resolve_label(x), b.resolve_label(y)) {
                    return Ok(self.cell(x, y).expect("ids in range"));
                }
            }
        }
        Err(Error::UnknownLabel {
            name: name.to_string(),
            taxonomy: self.label.clone(),
        })
    }

    pub fn check_id(&self, id: usize) -> Result<usize> {
        if id < self.arity() {
            Ok(id)
        } else {
            Err(Error::InvalidCategory {
                id,
                taxonomy: self.label.clone(),
                arity: self.arity(),
            })
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.categories()).expect("categories serialize")
    }
}

pub fn canonical_topics() -> Taxonomy {
    Taxonomy::topics()
}

pub fn canonical_formats() -> Taxonomy {
    Taxonomy::formats()
}

pub fn resolve_label(name: &str, taxonomy: &Taxonomy) -> Result<usize> {
    taxonomy.resolve_label(name)
}
