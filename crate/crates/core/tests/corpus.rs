use std::io::Cursor;
use std::sync::Arc;

use corpus_mixer::corpus::{
    domain_proportions, ingest, ingest_reader, CorpusIndex, CorpusSchema, DocumentRecord, IngestOptions, Weighting,
};
use corpus_mixer::{Error, Taxonomy};
use proptest::prelude::*;

fn schema() -> CorpusSchema {
    CorpusSchema::default().with_clusters(5).unwrap()
}

fn record() -> impl Strategy<Value = DocumentRecord> {
    (1u64..5000, 0usize..24, 0usize..24, 0usize..5, -2.0f64..2.0)
        .prop_map(|(t, a, b, c, s)| DocumentRecord::new("", t, a, b).with_cluster(c).with_score("q", s))
}

fn records() -> impl Strategy<Value = Vec<DocumentRecord>> {
    prop::collection::vec(record(), 0..80).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, mut r)| {
                r.doc_id = format!("doc-{i:03}");
                r
            })
            .collect()
    })
}

fn jsonl(recs: &[DocumentRecord]) -> String {
    let s = schema();
    recs.iter()
        .map(|r| serde_json::to_string(&r.to_line(&s)).unwrap() + "\n")
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sharding_does_not_change_the_index(recs in records(), cuts in prop::collection::vec(any::<prop::sample::Index>(), 2)) {
        let whole = ingest(recs.clone(), schema(), false).unwrap();
        let (mut i, mut j) = (cuts[0].index(recs.len() + 1), cuts[1].index(recs.len() + 1));
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        let part = |r: &[DocumentRecord]| ingest(r.to_vec(), schema(), false).unwrap();
        let (a, b, c) = (part(&recs[..i]), part(&recs[i..j]), part(&recs[j..]));
        let left = a.clone().merge(b.clone()).unwrap().merge(c.clone()).unwrap();
        let right = a.clone().merge(b.clone().merge(c.clone()).unwrap()).unwrap();
        let swapped = c.merge(a).unwrap().merge(b).unwrap();
        prop_assert_eq!(&left, &whole);
        prop_assert_eq!(&right, &whole);
        prop_assert_eq!(&swapped, &whole);
    }

    #[test]
    fn jsonl_round_trips(recs in records()) {
        let (idx, summary) = ingest_reader(Cursor::new(jsonl(&recs)), schema(), IngestOptions::default()).unwrap();
        prop_assert_eq!(summary.records, recs.len());
        prop_assert_eq!(idx, ingest(recs, schema(), false).unwrap());
    }

    #[test]
    fn stats_only_keeps_the_counts(recs in records()) {
        let full = ingest(recs.clone(), schema(), false).unwrap();
        let lean = ingest(recs, schema(), true).unwrap();
        prop_assert!(!lean.has_documents());
        prop_assert_eq!(lean.total(), full.total());
        let topics = Arc::new(Taxonomy::topics());
        prop_assert_eq!(lean.counts(&topics).unwrap(), full.counts(&topics).unwrap());
    }
}

#[test]
fn malformed_lines_fail_or_skip() {
    let text = concat!(
        "{\"id\":\"a\",\"tokens\":10,\"topic\":\"Health\",\"format\":\"Tutorial\"}\n",
        "not json\n",
        "\n",
        "{\"id\":\"b\",\"tokens\":0,\"topic\":0,\"format\":0}\n",
        "{\"id\":\"c\",\"tokens\":5,\"topic\":\"Nowhere\",\"format\":0}\n",
        "{\"id\":\"d\",\"tokens\":30,\"topic\":3,\"format\":\"faq\"}\n",
    );
    let strict = ingest_reader(Cursor::new(text), CorpusSchema::default(), IngestOptions::default());
    assert!(
        matches!(strict, Err(Error::MalformedRecord { line: 2, .. })),
        "{strict:?}"
    );

    let opts = IngestOptions {
        skip_malformed: true,
        ..IngestOptions::default()
    };
    let (idx, summary) = ingest_reader(Cursor::new(text), CorpusSchema::default(), opts).unwrap();
    assert_eq!((summary.lines, summary.records, summary.skipped), (6, 2, 3));
    assert_eq!(idx.total().tokens, 40);
    assert_eq!(idx.total().documents, 2);
}

#[test]
fn labels_resolve_by_name_alias_or_id() {
    let topics = Taxonomy::topics();
    let formats = Taxonomy::formats();
    let science = topics.resolve_label("Science & Technology").unwrap();
    let text = format!(
        "{{\"id\":\"a\",\"tokens\":1,\"topic\":\"Science & Tech.\",\"format\":\"Q&A Forum\"}}\n\
         {{\"id\":\"b\",\"tokens\":3,\"topic\":{science},\"format\":\"Academic Writing\"}}\n"
    );
    let (idx, _) = ingest_reader(Cursor::new(text), CorpusSchema::default(), IngestOptions::default()).unwrap();
    assert_eq!(idx.document("a").unwrap().topic, science);
    assert_eq!(idx.document("b").unwrap().topic, science);
    assert_eq!(
        idx.document("a").unwrap().format,
        formats.resolve_label("Q&A Forum").unwrap()
    );
    let p = domain_proportions(&idx, &Arc::new(topics), Weighting::Tokens).unwrap();
    assert_eq!(p.weights()[science], 1.0);
}

#[test]
fn duplicates_and_schema_mismatch_are_rejected() {
    let a = ingest([DocumentRecord::new("x", 1, 0, 0)], CorpusSchema::default(), false).unwrap();
    let b = ingest([DocumentRecord::new("x", 2, 1, 1)], CorpusSchema::default(), false).unwrap();
    assert!(matches!(a.clone().merge(b), Err(Error::DuplicateDocId(_))));
    let c = CorpusIndex::empty(schema(), false);
    assert!(a.merge(c).is_err());
    let twice = [DocumentRecord::new("x", 1, 0, 0), DocumentRecord::new("x", 1, 0, 0)];
    assert!(matches!(
        ingest(twice, CorpusSchema::default(), true),
        Err(Error::DuplicateDocId(_))
    ));
}

#[test]
fn token_and_document_weighting_differ() {
    let recs = [DocumentRecord::new("a", 90, 0, 0), DocumentRecord::new("b", 10, 1, 0)];
    let idx = ingest(recs, CorpusSchema::default(), false).unwrap();
    let t = Arc::new(Taxonomy::topics());
    assert_eq!(
        &domain_proportions(&idx, &t, Weighting::Tokens).unwrap().weights()[..2],
        &[0.9, 0.1]
    );
    assert_eq!(
        &domain_proportions(&idx, &t, Weighting::Documents).unwrap().weights()[..2],
        &[0.5, 0.5]
    );
}
