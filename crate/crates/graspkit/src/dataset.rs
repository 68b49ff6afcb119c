//! Dataset discovery and loading.
//!
//! A manifest has one line per image: `id instance rgb depth grasps`, with
//! paths relative to the manifest's directory. Without a manifest, a raw
//! Cornell tree is scanned for `pcdNNNNcpos.txt` grasp files, `pcdNNNNr.png`
//! images and `pcdNNNNd.png`/`.txt` depth rasters; instance ids come from a
//! `z.txt` mapping (`image-number instance-id ...`) somewhere in the tree.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use graspkit_core::data::{parse_grasp_file, SampleRecord};
use graspkit_core::RotatedRect;

use crate::formats::{content_lines, load_depth, load_rgb, FormatError};

pub const DATA_ENV: &str = "GRASPKIT_DATA";
pub const MANIFEST_NAME: &str = "manifest.txt";
/// 16-bit depth PNGs store millimeters.
pub const PNG_DEPTH_SCALE: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub instance: String,
    pub rgb: PathBuf,
    pub depth: PathBuf,
    pub grasps: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub id: String,
    pub instance: String,
    pub grasps: Vec<RotatedRect>,
    /// Rectangles dropped while parsing.
    pub dropped: usize,
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>, FormatError> {
    let mut seen = HashMap::new();
    content_lines(text)
        .map(|(n, l)| {
            let f: Vec<&str> = l.split_ascii_whitespace().collect();
            if f.len() != 5 {
                return Err(FormatError::Line {
                    line: n,
                    message: format!("expected 5 fields, found {}", f.len()),
                });
            }
            if let Some(prev) = seen.insert(f[0].to_string(), n) {
                return Err(FormatError::Line {
                    line: n,
                    message: format!("id {:?} already on line {prev}", f[0]),
                });
            }
            Ok(ManifestEntry {
                id: f[0].into(),
                instance: f[1].into(),
                rgb: base.join(f[2]),
                depth: base.join(f[3]),
                grasps: base.join(f[4]),
            })
        })
        .collect()
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, FormatError> {
    let text = std::fs::read_to_string(path)?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Instance id per image number from `z.txt`-style lines.
pub fn parse_instance_map(text: &str) -> HashMap<u32, String> {
    content_lines(text)
        .filter_map(|(_, l)| {
            let mut f = l.split_ascii_whitespace();
            Some((f.next()?.parse().ok()?, f.next()?.to_string()))
        })
        .collect()
}

/// Manifest entries for a raw Cornell tree.
pub fn scan_cornell(root: &Path) -> Result<Vec<ManifestEntry>, FormatError> {
    let mut files = Vec::new();
    walk(root, &mut files)?;
    let zmap = files
        .iter()
        .find(|p| p.file_name().is_some_and(|n| n == "z.txt"))
        .map(|p| std::fs::read_to_string(p).map(|t| parse_instance_map(&t)))
        .transpose()?
        .ok_or_else(|| {
            FormatError::Content(format!(
                "no z.txt instance mapping under {}",
                root.display()
            ))
        })?;
    let mut out = Vec::new();
    for p in &files {
        let Some(name) = p.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(num) = name
            .strip_prefix("pcd")
            .and_then(|s| s.strip_suffix("cpos.txt"))
        else {
            continue;
        };
        let Ok(number) = num.parse::<u32>() else {
            continue;
        };
        let instance = zmap
            .get(&number)
            .ok_or_else(|| FormatError::Content(format!("image {number} missing from z.txt")))?;
        let dir = p.parent().unwrap_or(root);
        let depth_png = dir.join(format!("pcd{num}d.png"));
        let depth = if depth_png.exists() {
            depth_png
        } else {
            dir.join(format!("pcd{num}d.txt"))
        };
        out.push(ManifestEntry {
            id: format!("pcd{num}"),
            instance: instance.clone(),
            rgb: dir.join(format!("pcd{num}r.png")),
            depth,
            grasps: p.clone(),
        });
    }
    if out.is_empty() {
        return Err(FormatError::Content(format!(
            "no pcdNNNNcpos.txt files under {}",
            root.display()
        )));
    }
    Ok(out)
}

/// Manifest at `root/manifest.txt` if present, otherwise a Cornell scan.
pub fn discover(root: &Path) -> Result<Vec<ManifestEntry>, FormatError> {
    let manifest = root.join(MANIFEST_NAME);
    if manifest.is_file() {
        load_manifest(&manifest)
    } else {
        scan_cornell(root)
    }
}

pub fn data_root_from_env() -> Option<PathBuf> {
    std::env::var_os(DATA_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

pub fn load_annotation(e: &ManifestEntry) -> Result<Annotation, FormatError> {
    let text = std::fs::read_to_string(&e.grasps)?;
    let (grasps, warnings) = parse_grasp_file(&text)
        .map_err(|err| FormatError::Content(format!("{}: {err}", e.grasps.display())))?;
    Ok(Annotation {
        id: e.id.clone(),
        instance: e.instance.clone(),
        grasps,
        dropped: warnings.len(),
    })
}

pub fn load_sample(e: &ManifestEntry) -> Result<SampleRecord, FormatError> {
    let ann = load_annotation(e)?;
    let rgb = load_rgb(&e.rgb)?;
    let depth = load_depth(&e.depth, PNG_DEPTH_SCALE)?;
    if (rgb.width, rgb.height) != (depth.width(), depth.height()) {
        return Err(FormatError::Content(format!(
            "{}: RGB and depth sizes differ",
            e.id
        )));
    }
    Ok(SampleRecord {
        id: ann.id,
        instance: ann.instance,
        rgb,
        depth,
        grasps: ann.grasps,
    })
}
