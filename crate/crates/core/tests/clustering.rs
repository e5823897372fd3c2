use std::collections::BTreeMap;

use corpus_mixer::cluster::{cluster_taxonomy_nmi, kmeans, EmbeddingSet, KMeansParams};
use corpus_mixer::corpus::DocumentRecord;
use corpus_mixer::lab::{generate_embeddings, EmbeddingModel};
use corpus_mixer::rng;
use corpus_mixer::Taxonomy;
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

fn set(rows: Vec<Vec<f32>>) -> EmbeddingSet {
    let ids = (0..rows.len()).map(|i| format!("e{i:05}")).collect();
    EmbeddingSet::from_rows(ids, &rows).unwrap()
}

fn raw(k: usize, seed: u64) -> KMeansParams {
    KMeansParams {
        k,
        seed,
        normalize: false,
        ..KMeansParams::default()
    }
}

/// Assignments agree with `truth` up to a relabeling.
fn same_partition(a: &[usize], truth: &[usize]) -> bool {
    let mut fwd = BTreeMap::new();
    let mut back = BTreeMap::new();
    a.iter()
        .zip(truth)
        .all(|(x, t)| *fwd.entry(x).or_insert(t) == t && *back.entry(t).or_insert(x) == x)
}

#[test]
fn zero_distortion_recovers_planted_points() {
    let centers = [[0.0f32, 0.0, 5.0], [3.0, 1.0, 0.0], [-2.0, 4.0, 1.0], [7.0, -3.0, 2.0]];
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for _ in 0..10 {
        for (c, p) in centers.iter().enumerate() {
            rows.push(p.to_vec());
            truth.push(c);
        }
    }
    let r = kmeans(&set(rows), &raw(4, 1)).unwrap();
    assert_eq!(r.model.inertia, 0.0);
    assert!(same_partition(&r.assignments, &truth));
    let mut got: Vec<Vec<f64>> = r.model.centroids.clone();
    got.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut want: Vec<Vec<f64>> = centers.iter().map(|c| c.iter().map(|&x| x as f64).collect()).collect();
    want.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(got, want);
}

#[test]
fn two_blobs_and_monotone_inertia() {
    let mut r = rng::stream(3, 500, 0, 0);
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for i in 0..400 {
        let blob = i % 2;
        let c = if blob == 0 { -4.0 } else { 4.0 };
        let v: Vec<f32> = (0..5)
            .map(|_| (c + r.sample::<f64, _>(StandardNormal)) as f32)
            .collect();
        rows.push(v);
        truth.push(blob);
    }
    let data = set(rows);
    for seed in 0..5 {
        let res = kmeans(&data, &raw(2, seed)).unwrap();
        assert!(same_partition(&res.assignments, &truth), "seed {seed}");
        for w in res.model.inertia_history.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-12),
                "seed {seed}: {:?}",
                res.model.inertia_history
            );
        }
    }
    // more clusters than structure: inertia still never increases
    let res = kmeans(&data, &raw(7, 9)).unwrap();
    for w in res.model.inertia_history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
}

#[test]
fn clusters_follow_the_dominant_signal() {
    let mut r = rng::stream(4, 500, 1, 0);
    let recs: Vec<DocumentRecord> = (0..3000)
        .map(|i| {
            DocumentRecord::new(
                format!("d{i}"),
                1 + r.random_range(0..900),
                r.random_range(0..24),
                r.random_range(0..24),
            )
        })
        .collect();
    let model = EmbeddingModel {
        topic_scale: 3.0,
        format_scale: 1.0,
        noise_sigma: 0.3,
    };
    let emb = generate_embeddings(&recs, &model, 24, 24, 5).unwrap();
    let res = kmeans(
        &emb,
        &KMeansParams {
            seed: 2,
            ..KMeansParams::default()
        },
    )
    .unwrap();
    let tokens: Vec<u64> = recs.iter().map(|d| d.tokens).collect();
    let topics: Vec<usize> = recs.iter().map(|d| d.topic).collect();
    let formats: Vec<usize> = recs.iter().map(|d| d.format).collect();
    let tt = Arc::new(Taxonomy::topics());
    let ft = Arc::new(Taxonomy::formats());
    let nt = cluster_taxonomy_nmi(&res.assignments, 24, &topics, &tt, Some(&tokens)).unwrap();
    let nf = cluster_taxonomy_nmi(&res.assignments, 24, &formats, &ft, Some(&tokens)).unwrap();
    assert!(nt > nf, "topic {nt} format {nf}");
    assert!(nt > 0.5);
}

#[test]
fn kmeans_is_seeded() {
    let mut r = rng::stream(6, 500, 0, 0);
    let rows: Vec<Vec<f32>> = (0..300).map(|_| (0..4).map(|_| r.random::<f32>()).collect()).collect();
    let data = set(rows);
    let a = kmeans(&data, &raw(5, 1)).unwrap();
    assert_eq!(a, kmeans(&data, &raw(5, 1)).unwrap());
    let pooled = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| kmeans(&data, &raw(5, 1)).unwrap());
    assert_eq!(a, pooled);
}
