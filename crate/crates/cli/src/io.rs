use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use corpus_mixer::corpus::{ingest_reader, CorpusIndex, CorpusSchema, IngestOptions, IngestSummary};
use corpus_mixer::{Mixture, Taxonomy};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes through a temp file in the destination directory and renames it
/// into place, so readers never see a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Output document carrying the tool version and the effective settings.
pub fn envelope(command: &str, config: &impl Serialize, body: Value) -> Result<Value> {
    let mut out = json!({
        "tool_version": TOOL_VERSION,
        "command": command,
        "config": serde_json::to_value(config)?,
    });
    match body {
        Value::Object(map) => out.as_object_mut().expect("object").extend(map),
        other => {
            out["result"] = other;
        }
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Expands glob patterns; each pattern must match at least one file.
pub fn expand_inputs(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in patterns {
        let mut hits: Vec<PathBuf> = glob::glob(p)
            .with_context(|| format!("bad input pattern {p:?}"))?
            .collect::<std::result::Result<_, _>>()?;
        if hits.is_empty() {
            bail!("input pattern {p:?} matched no files");
        }
        hits.sort();
        files.extend(hits);
    }
    files.dedup();
    Ok(files)
}

pub struct LoadedCorpus {
    pub index: CorpusIndex,
    pub summary: IngestSummary,
}

pub fn schema(clusters: Option<usize>) -> Result<CorpusSchema> {
    let s = CorpusSchema::default();
    Ok(match clusters {
        Some(k) => s.with_clusters(k)?,
        None => s,
    })
}

/// Reads every file matched by `patterns` into one index. Shards are merged
/// in sorted path order.
pub fn load_corpus(patterns: &[String], schema: &CorpusSchema, options: IngestOptions) -> Result<LoadedCorpus> {
    let files = expand_inputs(patterns)?;
    let mut index = CorpusIndex::empty(schema.clone(), options.stats_only);
    let mut summary = IngestSummary::default();
    for f in files {
        let reader = BufReader::new(File::open(&f).with_context(|| format!("opening {}", f.display()))?);
        let (shard, s) =
            ingest_reader(reader, schema.clone(), options).with_context(|| format!("reading {}", f.display()))?;
        index = index.merge(shard)?;
        summary.lines += s.lines;
        summary.records += s.records;
        summary.skipped += s.skipped;
    }
    Ok(LoadedCorpus { index, summary })
}

pub fn load_mixture(path: &Path) -> Result<Mixture> {
    Mixture::from_json_str(&read_text(path)?).with_context(|| format!("parsing mixture {}", path.display()))
}

pub fn taxonomy(spec: &str) -> Result<Arc<Taxonomy>> {
    Ok(Arc::new(Taxonomy::from_spec(spec)?))
}

/// Mixture file contents as a JSON value.
pub fn mixture_value(m: &Mixture) -> Result<Value> {
    Ok(serde_json::to_value(m.to_file())?)
}

pub fn write_mixture(path: &Path, m: &Mixture) -> Result<()> {
    let mut s = m.to_json_string();
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item)?);
        out.push('\n');
    }
    Ok(out)
}
