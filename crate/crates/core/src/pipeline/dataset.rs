use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graphs::{build_bundle, GraphBundle};

use super::PipelineError;

/// Clone categories, from textual identity to purely semantic similarity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CloneType {
    T1,
    T2,
    VST3,
    ST3,
    MT3,
    WT3T4,
}

impl CloneType {
    pub const ALL: [CloneType; 6] = [
        CloneType::T1,
        CloneType::T2,
        CloneType::VST3,
        CloneType::ST3,
        CloneType::MT3,
        CloneType::WT3T4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CloneType::T1 => "T1",
            CloneType::T2 => "T2",
            CloneType::VST3 => "VST3",
            CloneType::ST3 => "ST3",
            CloneType::MT3 => "MT3",
            CloneType::WT3T4 => "WT3T4",
        }
    }
}

impl fmt::Display for CloneType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CloneType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CloneType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown clone type `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClonePair {
    pub id1: String,
    pub id2: String,
    pub label: bool,
    pub clone_type: Option<CloneType>,
}

impl ClonePair {
    /// Training target: `+1` for clones, `-1` otherwise.
    pub fn target(&self) -> f64 {
        if self.label {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub fragments: BTreeMap<String, GraphBundle>,
    pub pairs: Vec<ClonePair>,
    /// Fragments that failed to parse, with the diagnostic.
    pub failures: Vec<(String, String)>,
    /// Pairs dropped because a fragment failed to parse.
    pub dropped_pairs: usize,
}

impl Dataset {
    /// Builds bundles from in-memory sources. Parse failures are recorded
    /// and pairs touching them dropped; unknown ids are an error.
    pub fn from_sources<'a, I>(sources: I, pairs: Vec<ClonePair>) -> Result<Self, PipelineError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut ds = Dataset::default();
        let mut known = std::collections::BTreeSet::new();
        for (id, src) in sources {
            known.insert(id.to_string());
            match build_bundle(src, id) {
                Ok(b) => {
                    ds.fragments.insert(id.to_string(), b);
                }
                Err(e) => ds.failures.push((id.to_string(), e.to_string())),
            }
        }
        for (i, p) in pairs.into_iter().enumerate() {
            for id in [&p.id1, &p.id2] {
                if !known.contains(id) {
                    return Err(PipelineError::Format {
                        path: "<pairs>".into(),
                        line: i + 1,
                        message: format!("unknown fragment id `{id}`"),
                    });
                }
            }
            if ds.fragments.contains_key(&p.id1) && ds.fragments.contains_key(&p.id2) {
                ds.pairs.push(p);
            } else {
                ds.dropped_pairs += 1;
            }
        }
        Ok(ds)
    }

    pub fn bundle(&self, id: &str) -> &GraphBundle {
        &self.fragments[id]
    }

    /// Same fragments, pairs restricted to `indices`.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            fragments: self.fragments.clone(),
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
            failures: self.failures.clone(),
            dropped_pairs: 0,
        }
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

fn tsv_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split('\t').map(str::trim).collect()))
}

/// Reads `id<TAB>path` manifest lines (paths relative to the manifest) and
/// `id1<TAB>id2<TAB>{0|1}[<TAB>type]` pair lines.
pub fn load_dataset(manifest: &Path, pairs: &Path) -> Result<Dataset, PipelineError> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut sources = Vec::new();
    for (line, cols) in tsv_lines(&read(manifest)?) {
        let [id, rel] = cols[..] else {
            return Err(PipelineError::Format {
                path: manifest.into(),
                line,
                message: format!("expected 2 columns, found {}", cols.len()),
            });
        };
        let src = read(&base.join(rel))?;
        sources.push((id.to_string(), src));
    }

    let mut parsed = Vec::new();
    let fmt_err = |line, message| PipelineError::Format { path: pairs.into(), line, message };
    for (line, cols) in tsv_lines(&read(pairs)?) {
        if cols.len() != 3 && cols.len() != 4 {
            return Err(fmt_err(line, format!("expected 3 or 4 columns, found {}", cols.len())));
        }
        let label = match cols[2] {
            "0" => false,
            "1" => true,
            other => return Err(fmt_err(line, format!("label must be 0 or 1, found `{other}`"))),
        };
        let clone_type = match cols.get(3) {
            Some(t) if !t.is_empty() => Some(t.parse().map_err(|m| fmt_err(line, m))?),
            _ => None,
        };
        if !sources.iter().any(|(id, _)| id == cols[0]) || !sources.iter().any(|(id, _)| id == cols[1]) {
            let missing = if sources.iter().any(|(id, _)| id == cols[0]) { cols[1] } else { cols[0] };
            return Err(fmt_err(line, format!("unknown fragment id `{missing}`")));
        }
        parsed.push(ClonePair {
            id1: cols[0].to_string(),
            id2: cols[1].to_string(),
            label,
            clone_type,
        });
    }
    let ds = Dataset::from_sources(sources.iter().map(|(a, b)| (a.as_str(), b.as_str())), parsed)?;
    if !ds.failures.is_empty() {
        log::warn!(
            "{} fragment(s) failed to parse and were excluded ({} pair(s) dropped)",
            ds.failures.len(),
            ds.dropped_pairs
        );
        for (id, e) in &ds.failures {
            log::warn!("  {id}: {e}");
        }
    }
    Ok(ds)
}
