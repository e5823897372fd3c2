//! Token-budgeted selection of whole documents.
//!
//! A mixture and a total budget become integer per-domain budgets; each
//! domain is then filled either by a seeded shuffle or by descending quality
//! score, always stopping at the first document that reaches the budget.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ingest, proportions_from_counts, CorpusIndex, DocEntry, DocumentRecord, DomainCount, Weighting};
use crate::error::{Error, Result};
use crate::mixture::Mixture;
use crate::rng;
use crate::taxonomy::Taxonomy;

/// Largest-remainder apportionment of `total` tokens by `mix`. Leftover
/// units go to the largest fractional remainders, ties to the smaller index.
pub fn token_budgets(mix: &Mixture, total: u64) -> Vec<u64> {
    let shares: Vec<f64> = mix.weights().iter().map(|w| w * total as f64).collect();
    let mut out: Vec<u64> = shares.iter().map(|s| s.floor() as u64).collect();
    let rem: Vec<f64> = shares.iter().zip(&out).map(|(s, f)| s - *f as f64).collect();
    let assigned: u64 = out.iter().sum();

    let mut order: Vec<usize> = (0..out.len()).collect();
    if assigned < total {
        order.sort_by(|&a, &b| rem[b].total_cmp(&rem[a]).then(a.cmp(&b)));
        let mut left = total - assigned;
        // Only positive-weight domains receive leftovers.
        let eligible: Vec<usize> = order.into_iter().filter(|&i| mix.weights()[i] > 0.0).collect();
        while left > 0 {
            for &i in &eligible {
                if left == 0 {
                    break;
                }
                out[i] += 1;
                left -= 1;
            }
        }
    } else if assigned > total {
        // Rounding pushed the floors over; take back from the smallest
        // remainders.
        order.sort_by(|&a, &b| rem[a].total_cmp(&rem[b]).then(a.cmp(&b)));
        let mut excess = assigned - total;
        while excess > 0 {
            for &i in &order {
                if excess == 0 {
                    break;
                }
                if out[i] > 0 {
                    out[i] -= 1;
                    excess -= 1;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SelectionMode {
    Random { seed: u64 },
    Quality { score: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedDoc {
    pub id: String,
    pub tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSelection {
    pub domain: String,
    pub target_tokens: u64,
    pub realized_tokens: u64,
    pub available_tokens: u64,
    pub max_doc_tokens: u64,
    pub exhausted: bool,
    /// Lowest selected and highest rejected score (quality mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_selected_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rejected_score: Option<f64>,
    #[serde(skip)]
    pub documents: Vec<SelectedDoc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionManifest {
    pub taxonomy: Arc<Taxonomy>,
    pub mode: SelectionMode,
    pub budget: u64,
    pub domains: Vec<DomainSelection>,
}

/// One line of the manifest JSONL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestLine {
    pub id: String,
    pub tokens: u64,
    pub domain: String,
}

impl SelectionManifest {
    pub fn total_realized(&self) -> u64 {
        self.domains.iter().map(|d| d.realized_tokens).sum()
    }

    pub fn doc_count(&self) -> usize {
        self.domains.iter().map(|d| d.documents.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_count() == 0
    }

    /// Selected ids in domain order, then selection order.
    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.domains
            .iter()
            .flat_map(|d| d.documents.iter().map(|x| x.id.as_str()))
    }

    pub fn lines(&self) -> impl Iterator<Item = ManifestLine> + '_ {
        self.domains.iter().flat_map(|d| {
            d.documents.iter().map(move |x| ManifestLine {
                id: x.id.clone(),
                tokens: x.tokens,
                domain: d.domain.clone(),
            })
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for line in self.lines() {
            out.push_str(&serde_json::to_string(&line).expect("manifest line"));
            out.push('\n');
        }
        out
    }
}

/// Maps each document to a domain of `tax`. A one-category taxonomy puts
/// every document in its single domain.
fn domain_lists<'a>(index: &'a CorpusIndex, tax: &Taxonomy) -> Result<Vec<Vec<(&'a str, &'a DocEntry)>>> {
    if !index.has_documents() {
        return Err(Error::InvalidConfig(
            "selection needs an index with document lists".into(),
        ));
    }
    let mut lists = vec![Vec::new(); tax.arity()];
    if tax.arity() == 1 {
        lists[0] = index.documents().collect();
        return Ok(lists);
    }
    let key = index.domain_key(tax)?;
    for (id, doc) in index.documents() {
        let d = key
            .of(doc)
            .ok_or_else(|| Error::MissingAnnotation(format!("{} for document {id:?}", tax.label())))?;
        lists[d].push((id, doc));
    }
    Ok(lists)
}

fn check_budgets(tax: &Taxonomy, budgets: &[u64]) -> Result<()> {
    if budgets.len() != tax.arity() {
        return Err(Error::LengthMismatch(budgets.len(), tax.arity()));
    }
    Ok(())
}

/// Takes documents in `order` until the running total reaches `target`.
fn fill(domain: &str, target: u64, order: &[(&str, &DocEntry)]) -> DomainSelection {
    let available_tokens = order.iter().map(|(_, d)| d.tokens).sum();
    let max_doc_tokens = order.iter().map(|(_, d)| d.tokens).max().unwrap_or(0);
    let mut realized = 0;
    let mut documents = Vec::new();
    for (id, doc) in order {
        if realized >= target {
            break;
        }
        realized += doc.tokens;
        documents.push(SelectedDoc {
            id: id.to_string(),
            tokens: doc.tokens,
        });
    }
    DomainSelection {
        domain: domain.to_string(),
        target_tokens: target,
        realized_tokens: realized,
        available_tokens,
        max_doc_tokens,
        exhausted: realized < target,
        min_selected_score: None,
        max_rejected_score: None,
        documents,
    }
}

pub fn select_random(
    index: &CorpusIndex,
    tax: &Arc<Taxonomy>,
    budgets: &[u64],
    seed: u64,
) -> Result<SelectionManifest> {
    check_budgets(tax, budgets)?;
    let lists = domain_lists(index, tax)?;
    let domains = lists
        .into_par_iter()
        .enumerate()
        .map(|(d, mut docs)| {
            let mut rng = rng::stream(seed, rng::purpose::SELECT_RANDOM, 0, d as u64);
            docs.shuffle(&mut rng);
            fill(&tax.names()[d], budgets[d], &docs)
        })
        .collect();
    Ok(SelectionManifest {
        taxonomy: tax.clone(),
        mode: SelectionMode::Random { seed },
        budget: budgets.iter().sum(),
        domains,
    })
}

pub fn select_by_quality(
    index: &CorpusIndex,
    tax: &Arc<Taxonomy>,
    budgets: &[u64],
    score: &str,
) -> Result<SelectionManifest> {
    check_budgets(tax, budgets)?;
    let lists = domain_lists(index, tax)?;
    let domains = lists
        .into_par_iter()
        .enumerate()
        .map(|(d, docs)| {
            let mut scored = Vec::with_capacity(docs.len());
            for (id, doc) in docs {
                match doc.scores.get(score) {
                    Some(&s) => scored.push((s, id, doc)),
                    None if budgets[d] == 0 => {}
                    None => {
                        return Err(Error::MissingScore {
                            doc_id: id.to_string(),
                            score: score.to_string(),
                        })
                    }
                }
            }
            // Ids are already ascending, so a stable sort on score alone
            // breaks ties by id.
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            let order: Vec<(&str, &DocEntry)> = scored.iter().map(|&(_, id, doc)| (id, doc)).collect();
            let mut sel = fill(&tax.names()[d], budgets[d], &order);
            let k = sel.documents.len();
            sel.min_selected_score = k.checked_sub(1).map(|i| scored[i].0);
            sel.max_rejected_score = scored.get(k).map(|s| s.0);
            Ok(sel)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionManifest {
        taxonomy: tax.clone(),
        mode: SelectionMode::Quality {
            score: score.to_string(),
        },
        budget: budgets.iter().sum(),
        domains,
    })
}

/// Global top-score selection: the whole corpus treated as one domain.
pub fn select_top_global(index: &CorpusIndex, budget: u64, score: &str) -> Result<SelectionManifest> {
    let whole = Arc::new(Taxonomy::clusters(1)?);
    select_by_quality(index, &whole, &[budget], score)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Redistribution {
    pub mixture: Mixture,
    /// Cells pinned at their availability.
    pub clamped: Vec<usize>,
    pub rounds: usize,
    /// Set when the deficit had to go to zero-weight cells.
    pub availability_fallback: bool,
}

/// Water-filling: cells whose implied tokens exceed availability are pinned
/// at availability and the deficit is spread over the remaining cells in
/// proportion to their weights, until nothing exceeds availability.
pub fn redistribute_overflow(target: &Mixture, availability: &[u64], budget: u64) -> Result<Redistribution> {
    let n = target.arity();
    if availability.len() != n {
        return Err(Error::LengthMismatch(availability.len(), n));
    }
    let available: u64 = availability.iter().sum();
    if available < budget || budget == 0 {
        return Err(Error::InsufficientCorpus { available, budget });
    }
    let b = budget as f64;
    let w = target.weights();
    let mut pinned = vec![false; n];
    let mut out = w.to_vec();
    let mut rounds = 0;
    let mut fallback = false;
    loop {
        rounds += 1;
        let pinned_tokens: u64 = (0..n).filter(|&i| pinned[i]).map(|i| availability[i]).sum();
        let remaining = b - pinned_tokens as f64;
        let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
        let mut mass: f64 = free.iter().map(|&i| w[i]).sum();
        let mut basis: Vec<f64> = free.iter().map(|&i| w[i]).collect();
        if mass <= 0.0 && remaining > 0.0 {
            fallback = true;
            basis = free.iter().map(|&i| availability[i] as f64).collect();
            mass = basis.iter().sum();
        }
        let mut violated = false;
        for (k, &i) in free.iter().enumerate() {
            let tokens = if mass > 0.0 { basis[k] / mass * remaining } else { 0.0 };
            if tokens > availability[i] as f64 * (1.0 + 1e-12) {
                pinned[i] = true;
                violated = true;
            }
            out[i] = tokens / b;
        }
        if !violated {
            break;
        }
    }
    for i in 0..n {
        if pinned[i] {
            out[i] = availability[i] as f64 / b;
        }
    }
    let clamped = (0..n).filter(|&i| pinned[i]).collect();
    Ok(Redistribution {
        mixture: Mixture::from_raw(target.taxonomy().clone(), out),
        clamped,
        rounds,
        availability_fallback: fallback,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainAccount {
    pub domain: String,
    pub target_tokens: u64,
    pub realized_tokens: u64,
    pub shortfall: u64,
    pub overshoot: u64,
    pub max_doc_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestStats {
    pub realized: Mixture,
    pub total_target: u64,
    pub total_realized: u64,
    pub documents: usize,
    pub domains: Vec<DomainAccount>,
    pub exhausted: Vec<String>,
}

pub fn manifest_stats(manifest: &SelectionManifest) -> Result<ManifestStats> {
    let counts: Vec<DomainCount> = manifest
        .domains
        .iter()
        .map(|d| DomainCount {
            documents: d.documents.len() as u64,
            tokens: d.realized_tokens,
        })
        .collect();
    let realized =
        proportions_from_counts(&manifest.taxonomy, &counts, Weighting::Tokens).map_err(|_| Error::EmptySelection)?;
    Ok(ManifestStats {
        realized,
        total_target: manifest.domains.iter().map(|d| d.target_tokens).sum(),
        total_realized: manifest.total_realized(),
        documents: manifest.doc_count(),
        domains: manifest
            .domains
            .iter()
            .map(|d| DomainAccount {
                domain: d.domain.clone(),
                target_tokens: d.target_tokens,
                realized_tokens: d.realized_tokens,
                shortfall: d.target_tokens.saturating_sub(d.realized_tokens),
                overshoot: d.realized_tokens.saturating_sub(d.target_tokens),
                max_doc_tokens: d.max_doc_tokens,
            })
            .collect(),
        exhausted: manifest
            .domains
            .iter()
            .filter(|d| d.exhausted)
            .map(|d| d.domain.clone())
            .collect(),
    })
}

/// Token-weighted composition over `tax` of the documents `ids`.
pub fn implicit_mixture<'a>(
    index: &CorpusIndex,
    tax: &Arc<Taxonomy>,
    ids: impl IntoIterator<Item = &'a str>,
) -> Result<Mixture> {
    let mut counts = vec![DomainCount::default(); tax.arity()];
    let key = if tax.arity() == 1 {
        None
    } else {
        Some(index.domain_key(tax)?)
    };
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateDocId(id.to_string()));
        }
        let doc = index
            .document(id)
            .ok_or_else(|| Error::InvalidRecord(format!("selected document {id:?} is not in the corpus")))?;
        let d = match key {
            None => 0,
            Some(k) => k
                .of(doc)
                .ok_or_else(|| Error::MissingAnnotation(format!("{} for document {id:?}", tax.label())))?,
        };
        counts[d].documents += 1;
        counts[d].tokens += doc.tokens;
    }
    proportions_from_counts(tax, &counts, Weighting::Tokens).map_err(|_| Error::EmptySelection)
}

/// Composition of a whole corpus, i.e. the identity selection.
pub fn implicit_mixture_of_corpus(index: &CorpusIndex, tax: &Arc<Taxonomy>) -> Result<Mixture> {
    let counts = if tax.arity() == 1 {
        vec![index.total()]
    } else {
        index.counts(tax)?
    };
    proportions_from_counts(tax, &counts, Weighting::Tokens).map_err(|_| Error::EmptySelection)
}

/// Sets aside a random share of the corpus (by tokens) before selection.
/// Documents are shuffled and taken until the held-out tokens reach
/// `fraction` of the total. Returns `(remaining corpus, held-out ids)`.
pub fn split_holdout(index: &CorpusIndex, fraction: f64, seed: u64) -> Result<(CorpusIndex, Vec<String>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction {fraction} must lie in [0, 1)"
        )));
    }
    if !index.has_documents() {
        return Err(Error::InvalidConfig("holdout split needs document lists".into()));
    }
    let mut docs: Vec<(&str, &DocEntry)> = index.documents().collect();
    let mut rng = rng::stream(seed, rng::purpose::HOLDOUT, 0, 0);
    docs.shuffle(&mut rng);
    let target = fraction * index.total().tokens as f64;
    let mut held = 0u64;
    let mut cut = 0;
    while cut < docs.len() && (held as f64) < target {
        held += docs[cut].1.tokens;
        cut += 1;
    }
    let mut holdout: Vec<String> = docs[..cut].iter().map(|(id, _)| id.to_string()).collect();
    holdout.sort();
    let to_record = |(id, d): &(&str, &DocEntry)| DocumentRecord {
        doc_id: id.to_string(),
        tokens: d.tokens,
        topic: d.topic,
        format: d.format,
        cluster: d.cluster,
        scores: d.scores.clone(),
    };
    let rest = ingest(docs[cut..].iter().map(to_record), index.schema().clone(), false)?;
    Ok((rest, holdout))
}

/// Checks every manifest invariant; used by tests and the CLI's summary.
pub fn check_manifest(manifest: &SelectionManifest) -> Result<()> {
    let mut seen = BTreeSet::new();
    for d in &manifest.domains {
        let sum: u64 = d.documents.iter().map(|x| x.tokens).sum();
        if sum != d.realized_tokens {
            return Err(Error::InvalidConfig(format!(
                "domain {} token accounting is off",
                d.domain
            )));
        }
        if !d.exhausted && d.realized_tokens < d.target_tokens {
            return Err(Error::InvalidConfig(format!("domain {} is short", d.domain)));
        }
        if d.target_tokens > 0 && d.realized_tokens >= d.target_tokens + d.max_doc_tokens {
            return Err(Error::InvalidConfig(format!("domain {} overshoots", d.domain)));
        }
        if let (Some(lo), Some(hi)) = (d.min_selected_score, d.max_rejected_score) {
            if lo < hi {
                return Err(Error::InvalidConfig(format!(
                    "domain {} breaks the score threshold",
                    d.domain
                )));
            }
        }
        for x in &d.documents {
            if !seen.insert(x.id.as_str()) {
                return Err(Error::DuplicateDocId(x.id.clone()));
            }
        }
    }
    Ok(())
}
