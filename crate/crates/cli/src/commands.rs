use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::{json, Value};

use corpus_mixer::cluster::{cluster_taxonomy_nmi, kmeans, parse_ids, EmbeddingSet, KMeansParams};
use corpus_mixer::corpus::{
    composition_report, domain_proportions, CorpusIndex, CorpusSchema, IngestOptions, Weighting,
};
use corpus_mixer::lab::{
    generate_corpus, generate_embeddings, observe, regmix_from_observations, EmbeddingModel, LabCorpusSpec, MixingLaw,
    RegmixConfig, ScoreModel,
};
use corpus_mixer::mixture::{product_mixture, temper, MixtureFile};
use corpus_mixer::pipeline::{compose_quality_mixture, PipelineConfig};
use corpus_mixer::regression::{
    fit as fit_model, fit_with_holdout, parse_observations, GbtParams, MultiTargetPredictor, SurrogateModel,
};
use corpus_mixer::sampling::{sample_config_mixtures, SampleManifestEntry, SamplerConfig};
use corpus_mixer::search::{multi_seed_search, seed_list, SearchParams};
use corpus_mixer::selection::{
    check_manifest, implicit_mixture, implicit_mixture_of_corpus, manifest_stats, redistribute_overflow,
    select_by_quality, select_random, split_holdout, token_budgets, ManifestLine, SelectionManifest,
};
use corpus_mixer::taxonomy::TaxonomyKind;
use corpus_mixer::{Mixture, Taxonomy};

use crate::io::{self, envelope, load_corpus, load_mixture, mixture_value, write_atomic, write_json, write_mixture};
use crate::{
    ClusterArgs, ComposeArgs, CorpusArgs, FitArgs, GbtArgs, ImplicitArgs, LabGenerateArgs, LabRegmixArgs, ModeArg,
    PriorArgs, SampleArgs, SearchArgs, SearchParamArgs, SelectArgs, StatsArgs, WeightingArg,
};

const SAMPLE_MANIFEST: &str = "manifest.json";

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Tokens => Weighting::Tokens,
            WeightingArg::Documents => Weighting::Documents,
        }
    }
}

/// Cluster axis size implied by `tax`, looking through product factors.
fn cluster_arity(tax: &Taxonomy) -> Option<usize> {
    match (tax.kind(), tax.factors()) {
        (TaxonomyKind::Cluster, _) if tax.arity() > 1 => Some(tax.arity()),
        (TaxonomyKind::Product, Some((a, b))) => cluster_arity(a).or_else(|| cluster_arity(b)),
        _ => None,
    }
}

fn schema_for(tax: Option<&Taxonomy>, clusters: Option<usize>) -> Result<CorpusSchema> {
    io::schema(clusters.or_else(|| tax.and_then(cluster_arity)))
}

fn corpus(args: &CorpusArgs, schema: &CorpusSchema, stats_only: bool) -> Result<io::LoadedCorpus> {
    if args.input.is_empty() {
        bail!("--input is required");
    }
    load_corpus(
        &args.input,
        schema,
        IngestOptions {
            stats_only,
            skip_malformed: args.skip_malformed,
        },
    )
}

fn availability(index: &CorpusIndex, tax: &Taxonomy) -> Result<Vec<u64>> {
    Ok(if tax.arity() == 1 {
        vec![index.total().tokens]
    } else {
        index.counts(tax)?.iter().map(|c| c.tokens).collect()
    })
}

/// Corpus proportions from a mixture file, or measured from `--input`.
fn resolve_prior(args: &PriorArgs, weighting: Weighting) -> Result<Option<Mixture>> {
    if let Some(p) = &args.proportions {
        if !args.corpus.input.is_empty() {
            bail!("give either --corpus-proportions or --input, not both");
        }
        return Ok(Some(load_mixture(p)?));
    }
    if args.corpus.input.is_empty() {
        return Ok(None);
    }
    let spec = args
        .taxonomy
        .as_deref()
        .context("--taxonomy is required when the prior is measured from --input")?;
    let tax = io::taxonomy(spec)?;
    let schema = schema_for(Some(&tax), args.corpus.clusters)?;
    let loaded = corpus(&args.corpus, &schema, true)?;
    Ok(Some(domain_proportions(&loaded.index, &tax, weighting)?))
}

fn require_prior(args: &PriorArgs, weighting: Weighting) -> Result<Mixture> {
    resolve_prior(args, weighting)?.context("a prior is required: --corpus-proportions or --input with --taxonomy")
}

fn gbt_params(base: GbtParams, a: &GbtArgs) -> Result<GbtParams> {
    let p = GbtParams {
        n_trees: a.trees.unwrap_or(base.n_trees),
        max_depth: a.depth.unwrap_or(base.max_depth),
        learning_rate: a.learning_rate.unwrap_or(base.learning_rate),
        min_samples_leaf: a.min_leaf.unwrap_or(base.min_samples_leaf),
    };
    p.validate()?;
    Ok(p)
}

fn search_params(cfg: &PipelineConfig, a: &SearchParamArgs) -> Result<(SearchParams, usize)> {
    let base = cfg.search;
    let p = SearchParams {
        n_per_step: a.n.unwrap_or(base.n_per_step),
        steps: a.steps.unwrap_or(base.steps),
        kl_coeff: a.gamma.unwrap_or(base.kl_coeff),
        smoothing: a.eta.unwrap_or(base.smoothing),
        cap: a.cap.unwrap_or(base.cap),
        log_alpha_range: (
            a.log_alpha_low.unwrap_or(base.log_alpha_range.0),
            a.log_alpha_high.unwrap_or(base.log_alpha_range.1),
        ),
        line_search_points: a.line_search_points.unwrap_or(base.line_search_points),
        seed: a.seed.unwrap_or(base.seed),
    };
    p.validate()?;
    let seeds = a.seeds.unwrap_or(cfg.search_seeds);
    if seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    Ok((p, seeds))
}

pub fn stats(cfg: &PipelineConfig, a: StatsArgs) -> Result<()> {
    let weighting = a.weighting.map(Weighting::from).unwrap_or(cfg.stats.weighting);
    let tax = a.taxonomy.as_deref().map(io::taxonomy).transpose()?;
    let schema = schema_for(tax.as_deref(), a.corpus.clusters)?;
    let loaded = corpus(&a.corpus, &schema, a.stats_only)?;
    let report = composition_report(&loaded.index, weighting)?;
    let config = json!({ "weighting": weighting, "stats_only": a.stats_only });
    let body = json!({ "ingest": loaded.summary, "report": report });
    write_json(&a.report, &envelope("stats", &config, body)?)?;
    if let (Some(path), Some(tax)) = (&a.proportions, &tax) {
        write_mixture(path, &domain_proportions(&loaded.index, tax, weighting)?)?;
    }
    Ok(())
}

pub fn sample_mixtures(cfg: &PipelineConfig, a: SampleArgs) -> Result<()> {
    let mut sc = cfg.sampling;
    sc.tau = a.tau.unwrap_or(sc.tau);
    sc.n_mixtures = a.n.unwrap_or(sc.n_mixtures);
    sc.log_alpha_range.0 = a.log_alpha_low.unwrap_or(sc.log_alpha_range.0);
    sc.log_alpha_range.1 = a.log_alpha_high.unwrap_or(sc.log_alpha_range.1);
    sc.cap = a.cap.or(sc.cap);
    let reference = require_prior(&a.prior, cfg.stats.weighting)?;
    let prior = temper(&reference, sc.tau)?;
    let sampler = SamplerConfig {
        prior: prior.clone(),
        n_mixtures: sc.n_mixtures,
        log_alpha_range: sc.log_alpha_range,
        cap: sc.cap,
        seed: a.seed,
    };
    let draws = sample_config_mixtures(&sampler, &reference)?;
    let width = (sc.n_mixtures - 1).to_string().len().max(4);
    let mut entries = Vec::with_capacity(draws.len());
    for d in &draws {
        let file = format!("mixture-{:0width$}.json", d.index);
        write_mixture(&a.out.join(&file), &d.mixture)?;
        entries.push(SampleManifestEntry {
            index: d.index,
            alpha: d.alpha,
            attempts: d.attempts,
            file,
        });
    }
    let config = json!({ "sampling": sc, "seed": a.seed });
    let body = json!({
        "reference": mixture_value(&reference)?,
        "prior": mixture_value(&prior)?,
        "mixtures": entries,
    });
    write_json(
        &a.out.join(SAMPLE_MANIFEST),
        &envelope("sample-mixtures", &config, body)?,
    )
}

pub fn fit(cfg: &PipelineConfig, a: FitArgs) -> Result<()> {
    let params = gbt_params(cfg.regression, &a.gbt)?;
    let observations = parse_observations(&io::read_text(&a.observations)?)
        .with_context(|| format!("parsing {}", a.observations.display()))?;
    let (model, holdout) = if a.holdout > 0 {
        let (m, r) = fit_with_holdout(&observations, &a.target, &params, a.holdout)?;
        (m, Some(r))
    } else {
        (fit_model(&observations, &a.target, &params)?, None)
    };
    write_atomic(&a.out, model.to_json_string().as_bytes())?;
    if let Some(path) = &a.report {
        let config = json!({ "regression": params, "target": a.target, "holdout": a.holdout });
        let body =
            json!({ "observations": observations.len(), "fitted_on": model.n_observations(), "holdout": holdout });
        write_json(path, &envelope("fit", &config, body)?)?;
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<SurrogateModel> {
    SurrogateModel::from_json_str(&io::read_text(path)?).with_context(|| format!("loading model {}", path.display()))
}

pub fn search(cfg: &PipelineConfig, a: SearchArgs) -> Result<()> {
    let (params, n_seeds) = search_params(cfg, &a.params)?;
    let models = a
        .model
        .iter()
        .chain(&a.model2)
        .map(|p| load_model(p))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<String> = models.iter().map(|m| m.target().to_string()).collect();
    let predictor = MultiTargetPredictor::new(models)?;
    let prior = require_prior(&a.prior, cfg.stats.weighting)?;
    let seeds = seed_list(params.seed, n_seeds);
    let result = multi_seed_search(&predictor, &prior, &params, &seeds)?;
    write_mixture(&a.out, &result.mixture)?;
    if let Some(path) = &a.trace {
        let config = json!({ "search": params, "search_seeds": n_seeds });
        let body = json!({
            "targets": targets,
            "prior": mixture_value(&prior)?,
            "mixture": mixture_value(&result.mixture)?,
            "value": result.value,
            "seed": result.seed,
            "trace": result.trace,
        });
        write_json(path, &envelope("search", &config, body)?)?;
    }
    Ok(())
}

fn domain_names(tax: &Taxonomy, ids: &[usize]) -> Vec<String> {
    ids.iter()
        .map(|&i| tax.name(i).unwrap_or_default().to_string())
        .collect()
}

/// Summary body shared by `select` and `compose`.
fn selection_body(manifest: &SelectionManifest, budgets: &[u64]) -> Result<serde_json::Map<String, Value>> {
    check_manifest(manifest)?;
    let stats = manifest_stats(manifest)?;
    let mut out = serde_json::Map::new();
    out.insert("budgets".into(), json!(budgets));
    out.insert("realized".into(), mixture_value(&stats.realized)?);
    out.insert("total_target".into(), json!(stats.total_target));
    out.insert("total_realized".into(), json!(stats.total_realized));
    out.insert("documents".into(), json!(stats.documents));
    out.insert("exhausted".into(), json!(stats.exhausted));
    out.insert("domains".into(), serde_json::to_value(&manifest.domains)?);
    Ok(out)
}

pub fn select(a: SelectArgs) -> Result<()> {
    let target = load_mixture(&a.mixture)?;
    let tax = target.taxonomy().clone();
    let schema = schema_for(Some(&tax), a.corpus.clusters)?;
    let loaded = corpus(&a.corpus, &schema, false)?;
    let (index, held_out) = match a.holdout_fraction {
        Some(f) => split_holdout(&loaded.index, f, a.seed)?,
        None => (loaded.index, Vec::new()),
    };
    let feasible = if a.redistribute {
        Some(redistribute_overflow(&target, &availability(&index, &tax)?, a.budget)?)
    } else {
        None
    };
    let mix = feasible.as_ref().map_or(&target, |r| &r.mixture);
    let budgets = token_budgets(mix, a.budget);
    let manifest = match a.mode {
        ModeArg::Random => select_random(&index, &tax, &budgets, a.seed)?,
        ModeArg::Quality => {
            let score = a.score.as_deref().context("--mode quality needs --score")?;
            select_by_quality(&index, &tax, &budgets, score)?
        }
    };
    let mut body = selection_body(&manifest, &budgets)?;
    body.insert("intended".into(), mixture_value(&target)?);
    if let Some(r) = &feasible {
        body.insert("feasible".into(), mixture_value(&r.mixture)?);
        body.insert("clamped".into(), json!(domain_names(&tax, &r.clamped)));
        body.insert("availability_fallback".into(), json!(r.availability_fallback));
    }
    if a.holdout_fraction.is_some() {
        body.insert("holdout_documents".into(), json!(held_out.len()));
        let mut text = held_out.join("\n");
        text.push('\n');
        write_atomic(&a.out.join("holdout.txt"), text.as_bytes())?;
    }
    let config = json!({
        "mode": manifest.mode,
        "budget": a.budget,
        "redistribute": a.redistribute,
        "holdout_fraction": a.holdout_fraction,
    });
    write_atomic(&a.out.join("manifest.jsonl"), manifest.to_jsonl().as_bytes())?;
    write_json(
        &a.out.join("summary.json"),
        &envelope("select", &config, Value::Object(body))?,
    )
}

pub fn implicit(a: ImplicitArgs) -> Result<()> {
    let tax = io::taxonomy(&a.taxonomy)?;
    let schema = schema_for(Some(&tax), a.corpus.clusters)?;
    let loaded = corpus(&a.corpus, &schema, false)?;
    let mix = match &a.manifest {
        None => implicit_mixture_of_corpus(&loaded.index, &tax)?,
        Some(path) => {
            let text = io::read_text(path)?;
            let ids = text
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    serde_json::from_str::<ManifestLine>(l)
                        .map(|m| m.id)
                        .with_context(|| format!("{} line {}", path.display(), i + 1))
                })
                .collect::<Result<Vec<_>>>()?;
            implicit_mixture(&loaded.index, &tax, ids.iter().map(String::as_str))?
        }
    };
    write_mixture(&a.out, &mix)
}

pub fn cluster(cfg: &PipelineConfig, a: ClusterArgs) -> Result<()> {
    let base = cfg.clustering;
    let params = KMeansParams {
        k: a.k.unwrap_or(base.k),
        max_iters: a.max_iters.unwrap_or(base.max_iters),
        tol: a.tol.unwrap_or(base.tol),
        seed: a.seed.unwrap_or(base.seed),
        normalize: base.normalize && !a.no_normalize,
    };
    let ids = parse_ids(&io::read_text(&a.ids)?);
    let file = File::open(&a.embeddings).with_context(|| format!("opening {}", a.embeddings.display()))?;
    let embeds = EmbeddingSet::read_binary(BufReader::new(file), ids)?;
    let result = kmeans(&embeds, &params)?;
    let mut body = json!({ "documents": embeds.len(), "model": result.model });
    if !a.input.is_empty() {
        let weighting = cfg.stats.weighting;
        let schema = CorpusSchema::default();
        let loaded = corpus(
            &CorpusArgs {
                input: a.input.clone(),
                clusters: None,
                skip_malformed: false,
            },
            &schema,
            false,
        )?;
        let (mut topics, mut formats, mut weights) = (Vec::new(), Vec::new(), Vec::new());
        for id in embeds.ids() {
            let doc = loaded
                .index
                .document(id)
                .with_context(|| format!("embedded document {id:?} is not in the corpus"))?;
            topics.push(doc.topic);
            formats.push(doc.format);
            weights.push(match weighting {
                Weighting::Tokens => doc.tokens,
                Weighting::Documents => 1,
            });
        }
        let nmi = |labels: &[usize], tax: &Arc<Taxonomy>| {
            cluster_taxonomy_nmi(&result.assignments, params.k, labels, tax, Some(&weights))
        };
        body["nmi"] = json!({
            "weighting": weighting,
            "topic": nmi(&topics, &schema.topic)?,
            "format": nmi(&formats, &schema.format)?,
        });
    }
    write_json(&a.out, &envelope("cluster", &json!({ "clustering": params }), body)?)?;
    if let Some(path) = &a.assignments {
        let lines = embeds
            .ids()
            .iter()
            .zip(&result.assignments)
            .map(|(id, c)| json!({ "id": id, "cluster": c }));
        write_atomic(path, io::jsonl(lines)?.as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreSpec {
    name: String,
    #[serde(default)]
    topic_offsets: BTreeMap<String, f64>,
    #[serde(default)]
    format_offsets: BTreeMap<String, f64>,
    #[serde(default)]
    noise_sigma: f64,
}

/// `lab generate` input. Offsets are keyed by category name; missing ones
/// are 0. Without `joint`, cells are drawn from `topic` × `format`, each
/// uniform when absent.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabSpecFile {
    n_docs: usize,
    token_median: Option<f64>,
    token_sigma: Option<f64>,
    joint: Option<MixtureFile>,
    topic: Option<MixtureFile>,
    format: Option<MixtureFile>,
    #[serde(default)]
    scores: Vec<ScoreSpec>,
    embeddings: Option<EmbeddingModel>,
}

fn offsets(tax: &Taxonomy, named: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
    let mut out = vec![0.0; tax.arity()];
    for (name, v) in named {
        out[tax.resolve_label(name)?] = *v;
    }
    Ok(out)
}

pub fn lab_generate(a: LabGenerateArgs) -> Result<()> {
    let file: LabSpecFile =
        serde_json::from_str(&io::read_text(&a.spec)?).with_context(|| format!("parsing {}", a.spec.display()))?;
    let schema = CorpusSchema::default();
    let marginal = |m: &Option<MixtureFile>, tax: &Arc<Taxonomy>| -> Result<Mixture> {
        match m {
            None => Ok(Mixture::uniform(tax.clone())),
            Some(f) => {
                let mix = Mixture::from_file(f)?;
                mix.ensure_same_taxonomy(&Mixture::uniform(tax.clone()))?;
                Ok(mix)
            }
        }
    };
    let joint = match &file.joint {
        Some(f) => {
            if file.topic.is_some() || file.format.is_some() {
                bail!("give either joint or topic/format marginals, not both");
            }
            let j = Mixture::from_file(f)?;
            if j.taxonomy().label() != "product" {
                bail!(
                    "joint must be over the topic × format product, got {}",
                    j.taxonomy().label()
                );
            }
            j
        }
        None => product_mixture(
            &marginal(&file.topic, &schema.topic)?,
            &marginal(&file.format, &schema.format)?,
        ),
    };
    let mut spec = LabCorpusSpec::new(joint, file.n_docs);
    spec.token_median = file.token_median.unwrap_or(spec.token_median);
    spec.token_sigma = file.token_sigma.unwrap_or(spec.token_sigma);
    for s in &file.scores {
        spec.scores.push(ScoreModel {
            name: s.name.clone(),
            topic_offsets: offsets(&schema.topic, &s.topic_offsets)?,
            format_offsets: offsets(&schema.format, &s.format_offsets)?,
            noise_sigma: s.noise_sigma,
        });
    }
    let records = generate_corpus(&spec, a.seed)?;
    write_atomic(
        &a.out,
        io::jsonl(records.iter().map(|r| r.to_line(&schema)))?.as_bytes(),
    )?;
    if let (Some(emb_path), Some(ids_path)) = (&a.embeddings_out, &a.ids_out) {
        let model = file
            .embeddings
            .context("--embeddings-out needs an \"embeddings\" section in the spec")?;
        let set = generate_embeddings(&records, &model, schema.topic.arity(), schema.format.arity(), a.seed)?;
        let (mut bin, mut ids) = (Vec::new(), Vec::new());
        set.write_binary(&mut bin)?;
        set.write_ids(&mut ids)?;
        write_atomic(emb_path, &bin)?;
        write_atomic(ids_path, &ids)?;
    }
    Ok(())
}

/// Mixtures listed in a `sample-mixtures` directory, in index order, plus
/// the reference proportions they were drawn around.
fn read_sample_dir(dir: &Path) -> Result<(Vec<Mixture>, Mixture)> {
    let manifest: Value = serde_json::from_str(&io::read_text(&dir.join(SAMPLE_MANIFEST))?)?;
    let mut entries: Vec<SampleManifestEntry> =
        serde_json::from_value(manifest["mixtures"].clone()).context("manifest lacks a mixtures list")?;
    entries.sort_by_key(|e| e.index);
    let reference = Mixture::from_file(&serde_json::from_value(manifest["reference"].clone())?)?;
    let mixtures = entries
        .iter()
        .map(|e| load_mixture(&dir.join(&e.file)))
        .collect::<Result<Vec<_>>>()?;
    Ok((mixtures, reference))
}

pub fn lab_regmix(cfg: &PipelineConfig, a: LabRegmixArgs) -> Result<()> {
    let mut laws = Vec::with_capacity(a.law.len());
    for path in &a.law {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .with_context(|| format!("cannot name a target after {}", path.display()))?
            .to_string();
        let law: MixingLaw =
            serde_json::from_str(&io::read_text(path)?).with_context(|| format!("parsing law {}", path.display()))?;
        law.validate()?;
        if laws.iter().any(|(n, _)| *n == name) {
            bail!("two laws are named {name:?}");
        }
        laws.push((name, law));
    }
    let (mixtures, reference) = read_sample_dir(&a.mixtures)?;
    let prior = resolve_prior(&a.prior, cfg.stats.weighting)?.unwrap_or(reference);
    let (search, n_seeds) = search_params(cfg, &a.search)?;
    let rc = RegmixConfig {
        gbt: gbt_params(cfg.regression, &a.gbt)?,
        search,
        seeds: seed_list(search.seed, n_seeds),
        holdout: a.holdout,
    };
    let observations = observe(&laws, &mixtures, a.noise_seed)?;
    if let Some(path) = &a.observations {
        write_atomic(path, io::jsonl(observations.iter().map(|o| o.to_line()))?.as_bytes())?;
    }
    let report = regmix_from_observations(&laws, &observations, &prior, &rc)?;
    let config = json!({
        "regression": rc.gbt,
        "search": rc.search,
        "search_seeds": n_seeds,
        "holdout": rc.holdout,
        "noise_seed": a.noise_seed,
    });
    let body = json!({
        "targets": laws.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "observations": observations.len(),
        "prior": mixture_value(&prior)?,
        "predicted": mixture_value(&report.predicted)?,
        "search_value": report.search_value,
        "law_value": report.law_value,
        "optimum": {
            "mixture": mixture_value(&report.optimum.mixture)?,
            "value": report.optimum.value,
            "method": report.optimum.method,
        },
        "gap": report.gap,
        "validation": report.validation,
    });
    write_json(&a.out, &envelope("lab regmix", &config, body)?)
}

pub fn compose(a: ComposeArgs) -> Result<()> {
    let topic = load_mixture(&a.topic_mixture)?;
    let format = load_mixture(&a.format_mixture)?;
    let schema = schema_for(None, a.corpus.clusters)?;
    let loaded = corpus(&a.corpus, &schema, false)?;
    let c = compose_quality_mixture(&loaded.index, &topic, &format, &a.score, a.budget)?;
    let tax = c.intended.taxonomy().clone();
    let mut body = selection_body(&c.manifest, &c.budgets)?;
    body.insert("intended".into(), mixture_value(&c.intended)?);
    body.insert("feasible".into(), mixture_value(&c.feasible.mixture)?);
    body.insert("clamped".into(), json!(domain_names(&tax, &c.feasible.clamped)));
    body.insert("availability_fallback".into(), json!(c.feasible.availability_fallback));
    let config = json!({ "score": a.score, "budget": a.budget });
    write_atomic(&a.out.join("manifest.jsonl"), c.manifest.to_jsonl().as_bytes())?;
    write_json(
        &a.out.join("summary.json"),
        &envelope("compose", &config, Value::Object(body))?,
    )
}
