//! On-disk dataset layout:
//!
//! ```text
//! <root>/ir/<scene>.pgm|png
//! <root>/vis/<scene>.pgm|png
//! <root>/fused/<method>/<scene>.pgm|png
//! <root>/env_labels.json        (optional)
//! ```
//!
//! Scene ids are the file stems under `ir/`; method ids the directory names
//! under `fused/`. Every scene must have a visible image and an image from
//! every method.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::environment::{load_labels, normalize_labels, NormalizedLabels};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::io::load_gray;
use crate::metrics::FusionTriple;

pub const LABELS_FILE: &str = "env_labels.json";
const EXTENSIONS: [&str; 2] = ["pgm", "png"];

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub scenes: Vec<String>,
    pub methods: Vec<String>,
    ir: BTreeMap<String, PathBuf>,
    vis: BTreeMap<String, PathBuf>,
    fused: BTreeMap<(String, String), PathBuf>,
}

fn images_in(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|_| Error::Layout(format!("missing directory {}", dir.display())))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
        if !path.is_file() || !ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned);
        let Some(stem) = stem else { continue };
        if let Some(prev) = out.insert(stem.clone(), path.clone()) {
            return Err(Error::Layout(format!(
                "scene {stem} appears twice: {} and {}",
                prev.display(),
                path.display()
            )));
        }
    }
    Ok(out)
}

impl Dataset {
    pub fn scan(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let ir = images_in(&root.join("ir"))?;
        if ir.is_empty() {
            return Err(Error::Layout(format!("no images under {}", root.join("ir").display())));
        }
        let vis = images_in(&root.join("vis"))?;
        if let Some(s) = ir.keys().find(|s| !vis.contains_key(*s)) {
            return Err(Error::Layout(format!("scene {s} has no visible image")));
        }
        let fused_root = root.join("fused");
        let entries = std::fs::read_dir(&fused_root)
            .map_err(|_| Error::Layout(format!("missing directory {}", fused_root.display())))?;
        let mut methods = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&fused_root, e))?.path();
            if path.is_dir() {
                if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                    methods.push(name.to_owned());
                }
            }
        }
        methods.sort();
        if methods.is_empty() {
            return Err(Error::Layout(format!("no method directories under {}", fused_root.display())));
        }
        let mut fused = BTreeMap::new();
        for m in &methods {
            let files = images_in(&fused_root.join(m))?;
            for s in ir.keys() {
                let path = files
                    .get(s)
                    .ok_or_else(|| Error::Layout(format!("method {m} has no image for scene {s}")))?;
                fused.insert((s.clone(), m.clone()), path.clone());
            }
        }
        Ok(Dataset {
            root,
            scenes: ir.keys().cloned().collect(),
            methods,
            ir,
            vis,
            fused,
        })
    }

    pub fn len(&self) -> usize {
        self.scenes.len() * self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All (scene, method) pairs, sorted by scene then method.
    pub fn pairs(&self) -> Vec<(String, String)> {
        self.fused.keys().cloned().collect()
    }

    pub fn load_sources(&self, scene: &str) -> Result<(GrayImage, GrayImage)> {
        let (ir, vis) = match (self.ir.get(scene), self.vis.get(scene)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Layout(format!("unknown scene {scene}"))),
        };
        Ok((load_gray(ir)?, load_gray(vis)?))
    }

    pub fn load_fused(&self, scene: &str, method: &str) -> Result<GrayImage> {
        let path = self
            .fused
            .get(&(scene.to_owned(), method.to_owned()))
            .ok_or_else(|| Error::Layout(format!("unknown pair {scene}/{method}")))?;
        load_gray(path)
    }

    pub fn load_triple(&self, scene: &str, method: &str) -> Result<FusionTriple> {
        let (ir, vis) = self.load_sources(scene)?;
        FusionTriple::new(ir, vis, self.load_fused(scene, method)?, scene, method)
    }

    pub fn labels_path(&self) -> PathBuf {
        self.root.join(LABELS_FILE)
    }

    /// Normalized labels from `env_labels.json`; every scene must be labelled.
    pub fn env_labels(&self) -> Result<NormalizedLabels> {
        let path = self.labels_path();
        if !path.is_file() {
            return Err(Error::Layout(format!("missing {}", path.display())));
        }
        let labels = normalize_labels(&load_labels(&path)?)?;
        if let Some(s) = self.scenes.iter().find(|s| labels.env_for(s).is_none()) {
            return Err(Error::Layout(format!("scene {s} has no environment label")));
        }
        Ok(labels)
    }
}
