//! Dataset manifests: one tab-separated line per sample.
//!
//! ```text
//! id <TAB> image-path <TAB> geometry-path <TAB> pose-path-or-"-" <TAB> split
//! ```
//!
//! Paths are stored relative to the manifest file and resolved against its
//! directory on load; `#` starts a comment line. Loading checks that every
//! referenced file exists and that ids are unique.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use pcrecon::geometry::write_atomic;
use pcrecon::{Error, Result};

/// Which part of the dataset a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// One dataset sample: an image, its geometry (mesh or point cloud), and
/// optionally the camera pose the image was taken from.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub geom: PathBuf,
    pub pose: Option<PathBuf>,
    pub split: Split,
}

/// Loads and validates a manifest, resolving paths against its directory.
pub fn load(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("expected 5 tab-separated fields, got {}", fields.len()),
            });
        }
        let id = fields[0].to_string();
        if id.is_empty() || !seen.insert(id.clone()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("duplicate or empty sample id {id:?}"),
            });
        }
        let split = Split::parse(fields[4]).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg: format!("unknown split {:?} (train|val|test)", fields[4]),
        })?;
        let resolve = |field: &str| -> Result<PathBuf> {
            let p = dir.join(field);
            if !p.is_file() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    msg: format!("referenced file {} does not exist", p.display()),
                });
            }
            Ok(p)
        };
        entries.push(ManifestEntry {
            id,
            image: resolve(fields[1])?,
            geom: resolve(fields[2])?,
            pose: match fields[3] {
                "-" => None,
                f => Some(resolve(f)?),
            },
            split,
        });
    }
    if entries.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "manifest lists no samples".into(),
        });
    }
    Ok(entries)
}

/// Writes a manifest whose paths are the entries' file names (the dataset
/// layout this tool produces keeps all files beside the manifest).
pub fn write(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::new();
    for e in entries {
        let name = |p: &Path| {
            p.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            e.id,
            name(&e.image),
            name(&e.geom),
            e.pose.as_deref().map(name).unwrap_or_else(|| "-".into()),
            e.split.as_str()
        ));
    }
    write_atomic(path, out.as_bytes())
}
