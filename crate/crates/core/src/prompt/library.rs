//! Example-script library.
//!
//! On disk a library is a directory of `.scn` files plus `index.json`:
//!
//! ```json
//! { "rear-end-basic": { "scenario_type": "rear-end-collision",
//!                       "description": "...", "file": "rear_end_basic.scn" } }
//! ```
//!
//! Entries are kept in id order.

use super::ScenarioType;
use crate::dsl::{self, SourceScript};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad index.json: {0}")]
    Index(#[from] serde_json::Error),
    #[error("example `{id}` does not validate: {message}")]
    InvalidExample { id: String, message: String },
    #[error("the example library is empty")]
    EmptyLibrary,
    #[error("requested {requested} examples but the library holds {available}")]
    InsufficientExamples { requested: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub scenario_type: ScenarioType,
    pub description: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LibraryEntry {
    pub id: String,
    pub scenario_type: ScenarioType,
    pub script: SourceScript,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExampleLibrary {
    entries: Vec<LibraryEntry>,
}

const BUILTIN_INDEX: &str = include_str!("../../assets/library/index.json");
const BUILTIN_FILES: &[(&str, &str)] = &[
    ("occluded_pedestrian.scn", include_str!("../../assets/library/occluded_pedestrian.scn")),
    ("cut_in.scn", include_str!("../../assets/library/cut_in.scn")),
    ("intersection_conflict.scn", include_str!("../../assets/library/intersection_conflict.scn")),
    ("rain_lane_change.scn", include_str!("../../assets/library/rain_lane_change.scn")),
    ("cyclist_crossing.scn", include_str!("../../assets/library/cyclist_crossing.scn")),
    ("tbone_basic.scn", include_str!("../../assets/library/tbone_basic.scn")),
    ("tbone_truck.scn", include_str!("../../assets/library/tbone_truck.scn")),
    ("rear_end_basic.scn", include_str!("../../assets/library/rear_end_basic.scn")),
    ("rear_end_truck.scn", include_str!("../../assets/library/rear_end_truck.scn")),
];

impl ExampleLibrary {
    /// Build from entries, rejecting duplicate ids and scripts with errors.
    pub fn new(mut entries: Vec<LibraryEntry>) -> Result<Self, LibraryError> {
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = entries.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(LibraryError::InvalidExample { id: w[0].id.clone(), message: "duplicate id".into() });
        }
        for e in &entries {
            if let Err(diags) = dsl::compile(&e.script) {
                let first = diags.iter().find(|d| d.is_error()).map_or(String::new(), |d| d.message.clone());
                return Err(LibraryError::InvalidExample { id: e.id.clone(), message: first });
            }
        }
        Ok(ExampleLibrary { entries })
    }

    fn from_index(index: &str, mut read: impl FnMut(&str) -> Result<SourceScript, LibraryError>) -> Result<Self, LibraryError> {
        let index: BTreeMap<String, IndexEntry> = serde_json::from_str(index)?;
        let mut entries = Vec::with_capacity(index.len());
        for (id, e) in index {
            entries.push(LibraryEntry {
                id,
                scenario_type: e.scenario_type,
                script: read(&e.file)?,
                description: e.description,
            });
        }
        ExampleLibrary::new(entries)
    }

    pub fn load(dir: &Path) -> Result<Self, LibraryError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| LibraryError::Io { path, source }
        };
        let index_path = dir.join("index.json");
        let index = std::fs::read_to_string(&index_path).map_err(io(&index_path))?;
        Self::from_index(&index, |file| {
            let p = dir.join(file);
            SourceScript::read(&p).map_err(io(&p))
        })
    }

    /// The library bundled with the crate.
    pub fn builtin() -> Self {
        Self::from_index(BUILTIN_INDEX, |file| {
            let text = BUILTIN_FILES.iter().find(|(f, _)| *f == file).map(|(_, t)| *t).unwrap_or_else(|| {
                panic!("bundled index names unknown file {file}")
            });
            Ok(SourceScript::new(text, format!("builtin:{file}")))
        })
        .expect("bundled library is valid")
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&LibraryEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// `k` examples: entries of the requested type first, then other types.
/// Each group is shuffled with `ChaCha8Rng::seed_from_u64(seed)`.
pub fn select_examples(
    library: &ExampleLibrary,
    ty: ScenarioType,
    k: usize,
    seed: u64,
) -> Result<Vec<&LibraryEntry>, LibraryError> {
    if library.is_empty() {
        return Err(LibraryError::EmptyLibrary);
    }
    if k > library.len() {
        return Err(LibraryError::InsufficientExamples { requested: k, available: library.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut exact, mut rest): (Vec<&LibraryEntry>, Vec<&LibraryEntry>) =
        library.entries.iter().partition(|e| e.scenario_type == ty);
    exact.shuffle(&mut rng);
    rest.shuffle(&mut rng);
    Ok(exact.into_iter().chain(rest).take(k).collect())
}
