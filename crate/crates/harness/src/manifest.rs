//! Image lists with their subjective scores.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use iqa_attack::Bounds;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

/// Stream reserved for choosing the image sample, disjoint from the
/// per-image attack streams (which use the manifest index).
const SAMPLE_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub mos: f64,
}

#[derive(Clone, Debug)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    bounds: Bounds,
}

#[derive(Deserialize)]
struct Row {
    path: String,
    mos: f64,
}

impl DatasetManifest {
    /// Checks that paths are unique and every MOS already lies in `bounds`.
    pub fn new(entries: Vec<ManifestEntry>, bounds: Bounds) -> Result<Self> {
        ensure!(!entries.is_empty(), "manifest lists no images");
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            ensure!(
                seen.insert(&e.path),
                "duplicate manifest path {} (row {})",
                e.path.display(),
                i + 1
            );
            ensure!(
                e.mos.is_finite() && bounds.contains(e.mos),
                "MOS {} for {} lies outside [{}, {}]; rescale the manifest first",
                e.mos,
                e.path.display(),
                bounds.beta1(),
                bounds.beta2()
            );
        }
        Ok(DatasetManifest { entries, bounds })
    }

    /// Reads a `path,mos` CSV. Relative paths resolve against the manifest's
    /// directory.
    pub fn load(path: impl AsRef<Path>, bounds: Bounds) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["path", "mos"] {
            bail!(
                "manifest {} must start with the header `path,mos`",
                path.display()
            );
        }
        let mut entries = Vec::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.with_context(|| format!("{} row {}", path.display(), i + 1))?;
            let p = PathBuf::from(&row.path);
            let p = if p.is_absolute() { p } else { base.join(p) };
            entries.push(ManifestEntry { path: p, mos: row.mos });
        }
        Self::new(entries, bounds).with_context(|| format!("manifest {}", path.display()))
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Indices of a seeded random sample of `k` entries, in manifest order.
    /// Returns every index when `k` is `None` or at least the manifest size.
    pub fn sample(&self, k: Option<usize>, seed: u64) -> Vec<usize> {
        let n = self.entries.len();
        match k {
            Some(k) if k < n => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(SAMPLE_STREAM);
                let mut picked = index::sample(&mut rng, n, k).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..n).collect(),
        }
    }

    /// Looks an entry up by path, comparing canonical forms when possible.
    pub fn find(&self, path: &Path) -> Option<&ManifestEntry> {
        let want = canonical(path);
        self.entries.iter().find(|e| canonical(&e.path) == want)
    }
}

pub(crate) fn canonical(path: &Path) -> PathBuf {
    path.canonicalize().unwrap_or_else(|_| path.to_path_buf())
}
