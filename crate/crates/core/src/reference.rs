//! Published domain mixtures over the canonical topic and format taxonomies.
//!
//! Values are percentages as printed, one decimal. Each non-corpus entry
//! carries the printed amplification factor relative to the corpus column.
//! Rows keep the printed order; use [`reference_mixture`] for taxonomy order.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mixture::Mixture;
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceColumn {
    Corpus,
    Mmlu,
    Hellaswag,
    Both,
    FinewebEdu,
    DclmFasttext,
}

impl ReferenceColumn {
    pub const ALL: [ReferenceColumn; 6] = [
        ReferenceColumn::Corpus,
        ReferenceColumn::Mmlu,
        ReferenceColumn::Hellaswag,
        ReferenceColumn::Both,
        ReferenceColumn::FinewebEdu,
        ReferenceColumn::DclmFasttext,
    ];

    fn slot(self) -> Option<usize> {
        match self {
            ReferenceColumn::Corpus => None,
            ReferenceColumn::Mmlu => Some(0),
            ReferenceColumn::Hellaswag => Some(1),
            ReferenceColumn::Both => Some(2),
            ReferenceColumn::FinewebEdu => Some(3),
            ReferenceColumn::DclmFasttext => Some(4),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceAxis {
    Topic,
    Format,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub label: &'static str,
    pub corpus: f64,
    /// `(percent, printed factor)` for MMLU, HellaSwag, both, FineWeb-Edu
    /// and DCLM-fasttext.
    pub columns: [(f64, f64); 5],
}

const fn row(label: &'static str, corpus: f64, columns: [(f64, f64); 5]) -> Row {
    Row { label, corpus, columns }
}

impl Row {
    pub fn percent(&self, col: ReferenceColumn) -> f64 {
        col.slot().map_or(self.corpus, |i| self.columns[i].0)
    }

    /// Printed factor; `None` for the corpus column.
    pub fn factor(&self, col: ReferenceColumn) -> Option<f64> {
        col.slot().map(|i| self.columns[i].1)
    }
}

const TOPICS: [Row; 24] = [
    row(
        "Entertainment",
        8.1,
        [(6.2, 0.8), (5.6, 0.7), (3.7, 0.5), (1.6, 0.2), (8.8, 1.1)],
    ),
    row(
        "Politics",
        7.9,
        [(9.6, 1.2), (5.5, 0.7), (9.1, 1.2), (8.5, 1.1), (12.4, 1.6)],
    ),
    row(
        "Finance & Business",
        7.5,
        [(3.3, 0.4), (6.8, 0.9), (3.5, 0.5), (3.7, 0.5), (5.9, 0.8)],
    ),
    row(
        "Sports & Fitness",
        7.3,
        [(0.1, 0.0), (12.3, 1.7), (4.5, 0.6), (1.5, 0.2), (3.8, 0.5)],
    ),
    row(
        "Health",
        6.5,
        [(14.0, 2.2), (5.1, 0.8), (7.1, 1.1), (14.3, 2.2), (7.6, 1.2)],
    ),
    row(
        "Home & Hobbies",
        5.9,
        [(1.1, 0.2), (16.5, 2.8), (10.9, 1.9), (3.0, 0.5), (2.4, 0.4)],
    ),
    row(
        "Education & Jobs",
        5.5,
        [(4.4, 0.8), (3.7, 0.7), (2.7, 0.5), (8.7, 1.6), (3.5, 0.6)],
    ),
    row(
        "Literature",
        4.9,
        [(1.5, 0.3), (1.7, 0.3), (1.3, 0.3), (5.9, 1.2), (7.7, 1.6)],
    ),
    row(
        "Social Life",
        4.8,
        [(0.1, 0.0), (6.1, 1.3), (5.1, 1.1), (1.3, 0.3), (4.4, 0.9)],
    ),
    row(
        "Religion",
        4.8,
        [(3.7, 0.8), (4.9, 1.0), (3.2, 0.7), (8.1, 1.7), (5.7, 1.2)],
    ),
    row(
        "Science & Tech.",
        4.1,
        [(26.3, 6.4), (2.3, 0.5), (25.5, 6.1), (15.8, 3.8), (8.4, 2.0)],
    ),
    row(
        "Food & Dining",
        3.6,
        [(1.6, 0.4), (3.1, 0.9), (3.6, 1.0), (1.4, 0.4), (2.2, 0.6)],
    ),
    row(
        "Travel",
        3.3,
        [(3.4, 1.0), (1.6, 0.5), (1.4, 0.4), (1.3, 0.4), (1.2, 0.4)],
    ),
    row(
        "Crime & Law",
        3.1,
        [(5.7, 1.8), (2.1, 0.7), (3.8, 1.2), (2.2, 0.7), (3.3, 1.1)],
    ),
    row(
        "Games",
        3.0,
        [(0.9, 0.3), (1.8, 0.6), (1.6, 0.5), (0.6, 0.2), (4.7, 1.5)],
    ),
    row(
        "Transportation",
        2.7,
        [(1.2, 0.4), (2.0, 0.7), (1.1, 0.4), (1.7, 0.6), (1.8, 0.6)],
    ),
    row(
        "Software",
        2.7,
        [(0.1, 0.0), (3.2, 1.2), (1.3, 0.5), (2.0, 0.7), (2.3, 0.8)],
    ),
    row(
        "Art & Design",
        2.4,
        [(2.0, 0.8), (1.1, 0.4), (1.0, 0.4), (2.3, 0.9), (1.4, 0.6)],
    ),
    row(
        "Fashion & Beauty",
        2.4,
        [(0.0, 0.0), (4.8, 2.0), (1.1, 0.5), (0.3, 0.1), (0.7, 0.3)],
    ),
    row(
        "History",
        2.3,
        [(6.7, 3.0), (1.4, 0.6), (4.1, 1.8), (9.0, 4.0), (3.2, 1.4)],
    ),
    row(
        "Software Dev.",
        2.2,
        [(4.1, 1.9), (2.2, 1.0), (1.1, 0.5), (3.6, 1.6), (4.8, 2.2)],
    ),
    row(
        "Hardware",
        2.1,
        [(3.2, 1.5), (2.0, 0.9), (1.4, 0.7), (1.0, 0.5), (1.7, 0.8)],
    ),
    row(
        "Industrial",
        1.7,
        [(0.8, 0.5), (1.4, 0.8), (0.9, 0.5), (2.4, 1.4), (0.8, 0.5)],
    ),
    row(
        "Adult",
        1.1,
        [(0.0, 0.0), (2.7, 2.5), (0.9, 0.9), (0.0, 0.0), (1.3, 1.2)],
    ),
];
const FORMATS: [Row; 24] = [
    row(
        "Personal Blog",
        22.9,
        [(26.4, 1.2), (31.5, 1.4), (19.7, 0.9), (16.2, 0.7), (26.0, 1.1)],
    ),
    row(
        "Product Page",
        11.5,
        [(6.0, 0.5), (7.6, 0.7), (5.3, 0.5), (4.1, 0.4), (2.8, 0.2)],
    ),
    row(
        "News Article",
        9.0,
        [(4.5, 0.5), (7.0, 0.8), (3.1, 0.3), (6.7, 0.7), (3.9, 0.4)],
    ),
    row(
        "Comment Section",
        8.3,
        [(8.7, 1.0), (4.8, 0.6), (6.2, 0.7), (4.4, 0.5), (12.4, 1.5)],
    ),
    row(
        "Content Listing",
        7.9,
        [(6.9, 0.9), (5.6, 0.7), (4.1, 0.5), (5.2, 0.7), (1.6, 0.2)],
    ),
    row(
        "Nonfiction Writing",
        6.6,
        [(5.4, 0.8), (4.7, 0.7), (4.5, 0.7), (13.7, 2.1), (11.0, 1.7)],
    ),
    row(
        "Knowledge Article",
        3.6,
        [(6.8, 1.9), (2.5, 0.7), (6.2, 1.7), (15.2, 4.2), (6.9, 1.9)],
    ),
    row(
        "Tutorial",
        3.6,
        [(5.3, 1.5), (20.2, 5.7), (20.3, 5.7), (6.7, 1.9), (5.1, 1.4)],
    ),
    row(
        "News (Org.)",
        3.4,
        [(0.7, 0.2), (2.2, 0.7), (0.6, 0.2), (2.6, 0.8), (0.6, 0.2)],
    ),
    row(
        "Listicle",
        3.1,
        [(2.0, 0.6), (2.5, 0.8), (5.7, 1.9), (2.8, 0.9), (3.1, 1.0)],
    ),
    row(
        "Academic Writing",
        2.7,
        [(16.8, 6.2), (1.9, 0.7), (16.9, 6.3), (9.7, 3.6), (4.9, 1.8)],
    ),
    row(
        "Audio Transcript",
        2.5,
        [(0.2, 0.1), (1.2, 0.5), (0.1, 0.0), (1.7, 0.7), (5.1, 2.0)],
    ),
    row(
        "Spam / Ads",
        2.2,
        [(0.0, 0.0), (1.3, 0.6), (0.0, 0.0), (0.5, 0.2), (1.4, 0.6)],
    ),
    row(
        "Structured Data",
        2.1,
        [(1.2, 0.6), (1.5, 0.7), (1.4, 0.7), (2.8, 1.3), (1.8, 0.9)],
    ),
    row(
        "Creative Writing",
        1.9,
        [(0.4, 0.2), (1.0, 0.5), (0.3, 0.2), (1.3, 0.7), (5.4, 2.9)],
    ),
    row(
        "User Review",
        1.9,
        [(0.0, 0.0), (1.3, 0.7), (0.0, 0.0), (0.2, 0.1), (1.2, 0.7)],
    ),
    row(
        "About (Org.)",
        1.7,
        [(2.5, 1.5), (1.3, 0.8), (0.9, 0.5), (1.4, 0.9), (0.3, 0.2)],
    ),
    row(
        "About (Pers.)",
        1.1,
        [(0.6, 0.6), (0.3, 0.2), (0.5, 0.5), (0.2, 0.1), (0.4, 0.4)],
    ),
    row(
        "Truncated",
        0.9,
        [(0.9, 1.0), (0.2, 0.2), (0.1, 0.1), (0.6, 0.7), (0.2, 0.3)],
    ),
    row(
        "Q&A Forum",
        0.8,
        [(2.4, 3.0), (0.5, 0.6), (2.8, 3.5), (1.2, 1.5), (2.6, 3.2)],
    ),
    row(
        "Customer Support",
        0.8,
        [(0.5, 0.6), (0.3, 0.4), (0.8, 1.0), (0.6, 0.8), (0.3, 0.5)],
    ),
    row(
        "Legal Notices",
        0.6,
        [(0.3, 0.6), (0.2, 0.3), (0.1, 0.2), (0.2, 0.3), (0.1, 0.2)],
    ),
    row(
        "Documentation",
        0.6,
        [(1.0, 1.7), (0.5, 0.9), (0.1, 0.1), (1.6, 2.7), (1.6, 2.8)],
    ),
    row("FAQ", 0.4, [(0.4, 1.0), (0.1, 0.2), (0.1, 0.4), (0.5, 1.3), (0.9, 2.4)]),
];

pub fn rows(axis: ReferenceAxis) -> &'static [Row; 24] {
    match axis {
        ReferenceAxis::Topic => &TOPICS,
        ReferenceAxis::Format => &FORMATS,
    }
}

pub fn taxonomy(axis: ReferenceAxis) -> Arc<Taxonomy> {
    Arc::new(match axis {
        ReferenceAxis::Topic => Taxonomy::topics(),
        ReferenceAxis::Format => Taxonomy::formats(),
    })
}

/// Rows reordered to taxonomy id order.
pub fn rows_by_id(axis: ReferenceAxis) -> Result<Vec<Row>> {
    let tax = taxonomy(axis);
    let mut out: Vec<Option<Row>> = vec![None; tax.arity()];
    for r in rows(axis) {
        out[tax.resolve_label(r.label)?] = Some(*r);
    }
    Ok(out.into_iter().map(|r| r.expect("every category listed")).collect())
}

/// A column loaded as a mixture (percentages renormalized to sum to 1).
pub fn reference_mixture(axis: ReferenceAxis, col: ReferenceColumn) -> Result<Mixture> {
    let tax = taxonomy(axis);
    let rows = rows_by_id(axis)?;
    Mixture::from_mass(tax, rows.iter().map(|r| r.percent(col)).collect())
}

/// Printed factors in taxonomy id order.
pub fn reported_factors(axis: ReferenceAxis, col: ReferenceColumn) -> Result<Option<Vec<f64>>> {
    Ok(rows_by_id(axis)?.iter().map(|r| r.factor(col)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_are_near_percentages() {
        for axis in [ReferenceAxis::Topic, ReferenceAxis::Format] {
            for col in ReferenceColumn::ALL {
                let sum: f64 = rows(axis).iter().map(|r| r.percent(col)).sum();
                assert!((sum - 100.0).abs() < 1.0, "{axis:?} {col:?} sums to {sum}");
            }
        }
    }

    #[test]
    fn abbreviated_labels_resolve() {
        let m = reference_mixture(ReferenceAxis::Topic, ReferenceColumn::FinewebEdu).unwrap();
        let w = m.weight_of("Science & Technology").unwrap();
        assert!((w - 0.158).abs() < 0.002);
        assert!(reference_mixture(ReferenceAxis::Format, ReferenceColumn::Both).is_ok());
    }
}
