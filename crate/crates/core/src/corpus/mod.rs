//! Corpus metadata ingestion and composition statistics.

mod index;
mod record;
mod stats;

pub use index::{
    ingest, ingest_reader, Axis, CorpusIndex, DocEntry, DomainCount, DomainKey, IngestOptions, IngestSummary, Weighting,
};
pub use record::{parse_line, CorpusSchema, DocumentRecord, RawLabel, RawRecord};
pub(crate) use stats::proportions_from_counts;
pub use stats::{
    composition_report, domain_proportions, joint_distribution, mutual_information, nmi, npmi, CategoryStat,
    ClusterNmi, CompositionReport, JointDistribution, NpmiReport, TaxonomyReport,
};
