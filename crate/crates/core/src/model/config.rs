//! Network configuration files.
//!
//! The format is the darknet INI dialect restricted to the layer types this
//! engine runs:
//!
//! ```text
//! # comment
//! [net]            width, height, channels, name
//! [convolutional]  filters, size, stride, pad, batch_normalize, activation
//! [maxpool]        size, stride
//! [region]         anchors, classes, num
//! ```
//!
//! `pad=1` means "same" padding of `size/2` pixels. Unknown keys are logged and
//! ignored; unknown sections are rejected.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ops::conv::conv_output_dim;
use crate::ops::pool::pool_output_dim;
use crate::tensor::Shape;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NetInput {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Leaky,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Leaky => "leaky",
            Activation::Linear => "linear",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub size: usize,
    pub stride: usize,
    /// Darknet "same" padding flag: pads by `size / 2` when set.
    pub pad: bool,
    pub batch_normalize: bool,
    pub activation: Activation,
}

impl ConvSpec {
    pub fn padding(&self) -> usize {
        if self.pad {
            self.size / 2
        } else {
            0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PoolSpec {
    pub size: usize,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionSpec {
    /// Prior (width, height) pairs in grid-cell units.
    pub anchors: Vec<(f64, f64)>,
    pub classes: usize,
}

impl RegionSpec {
    pub fn num_anchors(&self) -> usize {
        self.anchors.len()
    }

    /// Channels per anchor: four box terms, objectness, class logits.
    pub fn entries_per_anchor(&self) -> usize {
        5 + self.classes
    }

    pub fn output_channels(&self) -> usize {
        self.num_anchors() * self.entries_per_anchor()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LayerSpec {
    Net(NetInput),
    Convolutional(ConvSpec),
    MaxPool(PoolSpec),
    Region(RegionSpec),
}

/// A validated layer list starting with `[net]` and ending with `[region]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    name: String,
    layers: Vec<LayerSpec>,
    /// Output shape of every layer, aligned with `layers`.
    shapes: Vec<Shape>,
}

impl NetworkConfig {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>) -> Result<Self> {
        let shapes = propagate(&layers)?;
        Ok(Self {
            name: name.into(),
            layers,
            shapes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn input(&self) -> NetInput {
        match self.layers[0] {
            LayerSpec::Net(net) => net,
            _ => unreachable!("validated config starts with [net]"),
        }
    }

    pub fn input_shape(&self) -> Shape {
        self.shapes[0]
    }

    pub fn region(&self) -> &RegionSpec {
        match self.layers.last() {
            Some(LayerSpec::Region(r)) => r,
            _ => unreachable!("validated config ends with [region]"),
        }
    }

    /// Shape of the prediction map fed to the region decoder.
    pub fn output_shape(&self) -> Shape {
        self.shapes[self.shapes.len() - 1]
    }

    pub fn grid_size(&self) -> usize {
        self.output_shape().height
    }

    pub fn conv_specs(&self) -> impl Iterator<Item = &ConvSpec> {
        self.layers.iter().filter_map(|l| match l {
            LayerSpec::Convolutional(c) => Some(c),
            _ => None,
        })
    }

    /// Input shape seen by each layer, aligned with `layers`.
    pub fn layer_inputs(&self) -> impl Iterator<Item = (&LayerSpec, Shape)> {
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| (l, self.shapes[i.saturating_sub(1)]))
    }

    /// The same network re-dimensioned to a square `size × size` input.
    pub fn with_input_size(&self, size: usize) -> Result<Self> {
        let mut layers = self.layers.clone();
        if let LayerSpec::Net(net) = &mut layers[0] {
            net.width = size;
            net.height = size;
        }
        Self::new(self.name.clone(), layers)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Canonical text form; `parse_config(c.to_text())` reproduces `c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            match layer {
                LayerSpec::Net(n) => {
                    let _ = writeln!(out, "[net]");
                    let _ = writeln!(out, "name={}", self.name);
                    let _ = writeln!(out, "width={}", n.width);
                    let _ = writeln!(out, "height={}", n.height);
                    let _ = writeln!(out, "channels={}", n.channels);
                }
                LayerSpec::Convolutional(c) => {
                    let _ = writeln!(out, "[convolutional]");
                    if c.batch_normalize {
                        let _ = writeln!(out, "batch_normalize=1");
                    }
                    let _ = writeln!(out, "filters={}", c.filters);
                    let _ = writeln!(out, "size={}", c.size);
                    let _ = writeln!(out, "stride={}", c.stride);
                    let _ = writeln!(out, "pad={}", u8::from(c.pad));
                    let _ = writeln!(out, "activation={}", c.activation.name());
                }
                LayerSpec::MaxPool(p) => {
                    let _ = writeln!(out, "[maxpool]");
                    let _ = writeln!(out, "size={}", p.size);
                    let _ = writeln!(out, "stride={}", p.stride);
                }
                LayerSpec::Region(r) => {
                    let anchors: Vec<String> =
                        r.anchors.iter().map(|(w, h)| format!("{w},{h}")).collect();
                    let _ = writeln!(out, "[region]");
                    let _ = writeln!(out, "anchors={}", anchors.join(", "));
                    let _ = writeln!(out, "classes={}", r.classes);
                    let _ = writeln!(out, "num={}", r.anchors.len());
                }
            }
        }
        out
    }
}

fn propagate(layers: &[LayerSpec]) -> Result<Vec<Shape>> {
    let Some(LayerSpec::Net(net)) = layers.first() else {
        return Err(Error::config("network must start with a [net] section"));
    };
    if net.width == 0 || net.height == 0 || net.channels == 0 {
        return Err(Error::config("[net] dimensions must be positive"));
    }
    let mut shape = Shape::new(net.channels, net.height, net.width);
    let mut shapes = vec![shape];
    let mut last_conv = None;
    for (index, layer) in layers.iter().enumerate().skip(1) {
        let position = index - 1;
        match layer {
            LayerSpec::Net(_) => {
                return Err(Error::config(format!(
                    "layer {position}: duplicate [net] section"
                )))
            }
            LayerSpec::Convolutional(c) => {
                if c.size != 1 && c.size != 3 {
                    return Err(Error::config(format!(
                        "layer {position}: convolution size {} not in {{1, 3}}",
                        c.size
                    )));
                }
                if c.stride == 0 || c.filters == 0 {
                    return Err(Error::config(format!(
                        "layer {position}: filters and stride must be positive"
                    )));
                }
                let oh = conv_output_dim(shape.height, c.size, c.stride, c.padding())
                    .map_err(|e| Error::config(format!("layer {position}: {e}")))?;
                let ow = conv_output_dim(shape.width, c.size, c.stride, c.padding())
                    .map_err(|e| Error::config(format!("layer {position}: {e}")))?;
                shape = Shape::new(c.filters, oh, ow);
                last_conv = Some(c.filters);
            }
            LayerSpec::MaxPool(p) => {
                if p.size == 0 || p.stride == 0 {
                    return Err(Error::config(format!(
                        "layer {position}: max-pool size and stride must be positive"
                    )));
                }
                if p.size > shape.height || p.size > shape.width {
                    return Err(Error::config(format!(
                        "layer {position}: shape underflow, {}x{} max-pool on {}x{} feature map \
                         (too many pools for the input size)",
                        p.size, p.size, shape.height, shape.width
                    )));
                }
                shape = Shape::new(
                    shape.channels,
                    pool_output_dim(shape.height, p.stride),
                    pool_output_dim(shape.width, p.stride),
                );
            }
            LayerSpec::Region(r) => {
                if index != layers.len() - 1 {
                    return Err(Error::config("[region] must be the last section"));
                }
                if r.anchors.is_empty() {
                    return Err(Error::config("[region] needs at least one anchor"));
                }
                if r.classes == 0 {
                    return Err(Error::config("[region] classes must be positive"));
                }
                if r.anchors.iter().any(|&(w, h)| !(w > 0.0 && h > 0.0)) {
                    return Err(Error::config("[region] anchor dimensions must be positive"));
                }
                match last_conv {
                    Some(filters) if filters == r.output_channels() => {}
                    Some(filters) => {
                        return Err(Error::config(format!(
                        "final convolution has {filters} filters, region needs {} = {} x (5 + {})",
                        r.output_channels(),
                        r.num_anchors(),
                        r.classes
                    )))
                    }
                    None => return Err(Error::config("[region] needs a preceding convolution")),
                }
                if shape.channels != r.output_channels() {
                    return Err(Error::config(
                        "[region] input channels do not match anchors x (5 + classes)",
                    ));
                }
                if shape.height != shape.width {
                    return Err(Error::config("[region] expects a square grid"));
                }
            }
        }
        shapes.push(shape);
    }
    if !matches!(layers.last(), Some(LayerSpec::Region(_))) {
        return Err(Error::config("network must end with a [region] section"));
    }
    Ok(shapes)
}

/// Parses a configuration, returning it with any warnings about ignored keys.
pub fn parse_config_with_warnings(text: &str) -> Result<(NetworkConfig, Vec<String>)> {
    let mut sections: Vec<Section> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("unterminated section header {line:?}"),
                })?
                .trim()
                .to_ascii_lowercase();
            let kind = SectionKind::from_name(&name).ok_or(Error::UnknownSection {
                name: name.clone(),
                line: line_no,
            })?;
            sections.push(Section {
                kind,
                line: line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected key=value, found {line:?}"),
        })?;
        let section = sections.last_mut().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "key outside of any section".into(),
        })?;
        section.entries.push((
            key.trim().to_ascii_lowercase(),
            value.trim().to_string(),
            line_no,
        ));
    }

    match sections.first() {
        Some(s) if s.kind == SectionKind::Net => {}
        Some(s) => {
            return Err(Error::Parse {
                line: s.line,
                message: "missing [net] section before the first layer".into(),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 0,
                message: "missing [net] section".into(),
            })
        }
    }

    let mut warnings = Vec::new();
    let mut name = String::from("network");
    let mut layers = Vec::with_capacity(sections.len());
    for section in &sections {
        let mut reader = SectionReader::new(section);
        let layer = match section.kind {
            SectionKind::Net => {
                if let Some(v) = reader.take("name") {
                    name = v.to_string();
                }
                let width = reader.usize_or("width", 0)?;
                let height = reader.usize_or("height", 0)?;
                let channels = reader.usize_or("channels", 3)?;
                if width == 0 || height == 0 {
                    return Err(Error::Parse {
                        line: section.line,
                        message: "[net] requires positive width and height".into(),
                    });
                }
                LayerSpec::Net(NetInput {
                    width,
                    height,
                    channels,
                })
            }
            SectionKind::Convolutional => {
                let filters = reader.required_usize("filters")?;
                let size = reader.usize_or("size", 1)?;
                let stride = reader.usize_or("stride", 1)?;
                let pad = reader.flag_or("pad", false)?;
                let batch_normalize = reader.flag_or("batch_normalize", false)?;
                let activation = match reader.take_with_line("activation") {
                    None => Activation::Linear,
                    Some(("leaky", _)) => Activation::Leaky,
                    Some(("linear", _)) => Activation::Linear,
                    Some((other, line)) => {
                        return Err(Error::Parse {
                            line,
                            message: format!("unsupported activation {other:?}"),
                        })
                    }
                };
                LayerSpec::Convolutional(ConvSpec {
                    filters,
                    size,
                    stride,
                    pad,
                    batch_normalize,
                    activation,
                })
            }
            SectionKind::MaxPool => {
                let stride = reader.usize_or("stride", 1)?;
                let size = reader.usize_or("size", stride)?;
                LayerSpec::MaxPool(PoolSpec { size, stride })
            }
            SectionKind::Region => {
                let (anchor_text, anchor_line) =
                    reader
                        .take_with_line("anchors")
                        .ok_or_else(|| Error::Parse {
                            line: section.line,
                            message: "[region] requires anchors".into(),
                        })?;
                let values = anchor_text
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<f64>().map_err(|_| Error::Parse {
                            line: anchor_line,
                            message: format!("invalid anchor value {s:?}"),
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if values.len() % 2 != 0 {
                    return Err(Error::Parse {
                        line: anchor_line,
                        message: "anchors must come in (width, height) pairs".into(),
                    });
                }
                let anchors: Vec<(f64, f64)> = values.chunks(2).map(|p| (p[0], p[1])).collect();
                let classes = reader.usize_or("classes", 1)?;
                let num = reader.usize_or("num", anchors.len())?;
                if num != anchors.len() {
                    return Err(Error::Parse {
                        line: section.line,
                        message: format!("num={num} but {} anchor pairs given", anchors.len()),
                    });
                }
                LayerSpec::Region(RegionSpec { anchors, classes })
            }
        };
        for (key, _, line) in reader.unused() {
            let msg = format!(
                "line {line}: ignoring unknown key {key:?} in [{}]",
                section.kind.name()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        layers.push(layer);
    }
    Ok((NetworkConfig::new(name, layers)?, warnings))
}

pub fn parse_config(text: &str) -> Result<NetworkConfig> {
    parse_config_with_warnings(text).map(|(c, _)| c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SectionKind {
    Net,
    Convolutional,
    MaxPool,
    Region,
}

impl SectionKind {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "net" | "network" => SectionKind::Net,
            "convolutional" | "conv" => SectionKind::Convolutional,
            "maxpool" | "max" => SectionKind::MaxPool,
            "region" => SectionKind::Region,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            SectionKind::Net => "net",
            SectionKind::Convolutional => "convolutional",
            SectionKind::MaxPool => "maxpool",
            SectionKind::Region => "region",
        }
    }
}

struct Section {
    kind: SectionKind,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

struct SectionReader<'a> {
    section: &'a Section,
    used: Vec<bool>,
}

impl<'a> SectionReader<'a> {
    fn new(section: &'a Section) -> Self {
        Self {
            section,
            used: vec![false; section.entries.len()],
        }
    }

    /// Last occurrence wins, as in darknet.
    fn take_with_line(&mut self, key: &str) -> Option<(&'a str, usize)> {
        let mut found = None;
        for (i, (k, v, line)) in self.section.entries.iter().enumerate() {
            if k == key {
                self.used[i] = true;
                found = Some((v.as_str(), *line));
            }
        }
        found
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        self.take_with_line(key).map(|(v, _)| v)
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take_with_line(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|_| Error::Parse {
                line,
                message: format!("{key} expects a non-negative integer, found {v:?}"),
            }),
        }
    }

    fn required_usize(&mut self, key: &str) -> Result<usize> {
        if !self.section.entries.iter().any(|(k, _, _)| k == key) {
            return Err(Error::Parse {
                line: self.section.line,
                message: format!("[{}] requires {key}", self.section.kind.name()),
            });
        }
        self.usize_or(key, 0)
    }

    fn flag_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take_with_line(key) {
            None => Ok(default),
            Some(("0", _)) => Ok(false),
            Some(("1", _)) => Ok(true),
            Some((v, line)) => Err(Error::Parse {
                line,
                message: format!("{key} expects 0 or 1, found {v:?}"),
            }),
        }
    }

    fn unused(&self) -> impl Iterator<Item = &'a (String, String, usize)> + '_ {
        self.section
            .entries
            .iter()
            .zip(&self.used)
            .filter(|(_, used)| !**used)
            .map(|(e, _)| e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[net]
width=512
height=512
channels=3

[convolutional]
filters=16
size=3
stride=1
pad=1
activation=leaky

[convolutional]
filters=30
size=1
activation=linear

[region]
anchors=1,1, 2,2, 3,3, 4,4, 5,5
classes=1
num=5
";

    #[test]
    fn parses_minimal_network() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.layers().len(), 4);
        assert_eq!(cfg.region().num_anchors(), 5);
        assert_eq!(cfg.output_shape(), Shape::new(30, 512, 512));
    }

    #[test]
    fn four_pools_reduce_512_to_32() {
        let mut text = String::from("[net]\nwidth=512\nheight=512\n");
        for _ in 0..4 {
            text.push_str("[convolutional]\nfilters=4\nsize=3\npad=1\nactivation=leaky\n");
            text.push_str("[maxpool]\nsize=2\nstride=2\n");
        }
        text.push_str("[convolutional]\nfilters=6\nsize=1\n[region]\nanchors=1,1\nclasses=1\n");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.grid_size(), 32);
    }

    #[test]
    fn unknown_section_is_named() {
        let text = MINIMAL.replace("[convolutional]\nfilters=16", "[pooling]\nfilters=16");
        match parse_config(&text) {
            Err(Error::UnknownSection { name, line }) => {
                assert_eq!(name, "pooling");
                assert_eq!(line, 6);
            }
            other => panic!("expected unknown section error, got {other:?}"),
        }
    }

    #[test]
    fn requires_net_section() {
        let text = MINIMAL.replacen("[net]\nwidth=512\nheight=512\nchannels=3\n", "", 1);
        assert!(matches!(parse_config(&text), Err(Error::Parse { .. })));
        assert!(parse_config("# only a comment\n").is_err());
    }

    #[test]
    fn rejects_filter_anchor_mismatch() {
        let text = MINIMAL.replace("filters=30", "filters=25");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("30"), "{err}");
    }

    #[test]
    fn rejects_too_many_pools() {
        let mut text = String::from("[net]\nwidth=32\nheight=32\n");
        for _ in 0..6 {
            text.push_str("[maxpool]\nsize=2\nstride=2\n");
        }
        text.push_str("[convolutional]\nfilters=6\nsize=1\n[region]\nanchors=1,1\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("underflow"), "{err}");
    }

    #[test]
    fn warns_on_unknown_keys() {
        let text = MINIMAL.replace("channels=3", "channels=3\nbatch=64\nmomentum=0.9");
        let (_, warnings) = parse_config_with_warnings(&text).unwrap();
        assert_eq!(warnings.len(), 2);
        assert!(warnings[0].contains("batch"));
    }

    #[test]
    fn rejects_unsupported_kernel_size() {
        let text = MINIMAL.replace("size=3", "size=5");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn canonical_text_is_fixed_point() {
        let cfg = parse_config(MINIMAL).unwrap();
        let text = cfg.to_text();
        let again = parse_config(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_text(), text);
    }

    #[test]
    fn resizing_repropagates_shapes() {
        let cfg = parse_config(MINIMAL).unwrap().with_input_size(416).unwrap();
        assert_eq!(cfg.output_shape(), Shape::new(30, 416, 416));
    }
}
