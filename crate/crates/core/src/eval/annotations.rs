//! Ground-truth loading.
//!
//! A list file names one image per line (relative paths resolve against the
//! list file's directory). Each image has a sibling `.txt` file with one
//! `class cx cy w h` line per object, all normalized to `[0, 1]`.

use std::path::{Path, PathBuf};

use crate::detect::BBox;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthBox {
    pub class: usize,
    pub bbox: BBox<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageTruth {
    pub id: String,
    pub image_path: PathBuf,
    pub boxes: Vec<GroundTruthBox>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruthSet {
    pub images: Vec<ImageTruth>,
    pub warnings: Vec<String>,
}

impl GroundTruthSet {
    pub fn total_boxes(&self) -> usize {
        self.images.iter().map(|i| i.boxes.len()).sum()
    }
}

/// Parses annotation text. Boxes that straddle the image border are clipped
/// and reported in `warnings`; boxes entirely outside are dropped.
pub fn parse_annotation(
    text: &str,
    file: &Path,
    warnings: &mut Vec<String>,
) -> Result<Vec<GroundTruthBox>> {
    let mut boxes = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Annotation {
            file: file.to_path_buf(),
            line: n + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(format!(
                "expected `class cx cy w h`, found {} fields",
                fields.len()
            )));
        }
        let class = fields[0]
            .parse::<usize>()
            .map_err(|_| err(format!("invalid class id {:?}", fields[0])))?;
        let mut v = [0f64; 4];
        for (slot, s) in v.iter_mut().zip(&fields[1..]) {
            *slot = s
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(format!("invalid number {s:?}")))?;
        }
        if v[2] <= 0.0 || v[3] <= 0.0 {
            return Err(err("box width and height must be positive".into()));
        }
        let bbox = BBox::new(v[0], v[1], v[2], v[3]);
        if bbox.within_unit() {
            boxes.push(GroundTruthBox { class, bbox });
            continue;
        }
        match bbox.clamp_unit() {
            Some(clipped) => {
                let msg = format!("{}:{}: box clipped to the image", file.display(), n + 1);
                log::warn!("{msg}");
                warnings.push(msg);
                boxes.push(GroundTruthBox {
                    class,
                    bbox: clipped,
                });
            }
            None => {
                let msg = format!(
                    "{}:{}: box outside the image dropped",
                    file.display(),
                    n + 1
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    Ok(boxes)
}

/// Annotation path for an image: same stem, `.txt` extension.
pub fn annotation_path(image: &Path) -> PathBuf {
    image.with_extension("txt")
}

pub fn load_annotations(list_file: &Path) -> Result<GroundTruthSet> {
    let text = std::fs::read_to_string(list_file).map_err(|e| Error::io(list_file, e))?;
    let base = list_file.parent().unwrap_or_else(|| Path::new("."));
    let mut set = GroundTruthSet::default();
    for line in text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        let path = Path::new(line);
        let image_path = if path.is_absolute() {
            path.to_path_buf()
        } else {
            base.join(path)
        };
        let ann = annotation_path(&image_path);
        if !ann.is_file() {
            return Err(Error::MissingAnnotation(ann));
        }
        let ann_text = std::fs::read_to_string(&ann).map_err(|e| Error::io(&ann, e))?;
        let boxes = parse_annotation(&ann_text, &ann, &mut set.warnings)?;
        set.images.push(ImageTruth {
            id: line.to_string(),
            image_path,
            boxes,
        });
    }
    Ok(set)
}
