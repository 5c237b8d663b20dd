//! Character chart probes.
//!
//! A chart replaces the video frame for a short time. It is a grid of labeled triplets (one
//! letter followed by two digits) spread over the frame; a participant reports the triplet they
//! saw most clearly and [`ChartSpec::lookup`] resolves that report back to a frame location.
//!
//! Geometry: with vertical spacing `d_v = round(f_s / D_r)` and horizontal spacing
//! `d_h = 2 d_v`, the frame is tiled by `floor(W / d_h) × floor(H / d_v)` cells and every cell
//! holds one node at its center, `(d_h/2 + i d_h, d_v/2 + j d_v)`. Each triplet occupies a
//! `1.8 f_s × f_s` box around its anchor.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FrameSize, Point, Rect};
use crate::rng::rng_from_seed;

/// Letters that may start a triplet: `I` and `O` are left out, they read as `1` and `0`.
pub const LETTERS: &[u8; 24] = b"ABCDEFGHJKLMNPQRSTUVWXYZ";

/// Number of distinct triplet labels.
pub const LABEL_SPACE: usize = LETTERS.len() * 100;

/// Triplet box width in units of the font size (three glyphs at 0.6 f_s advance).
pub const TRIPLET_WIDTH_EM: f64 = 1.8;

/// Gray level of the characters; the background is black.
pub const CHARACTER_GRAY: f64 = 0.4;

/// Jitter re-draws per node before falling back to the node position.
pub const JITTER_ATTEMPTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("invalid chart parameter {name}: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("chart layout impossible: {0}")]
    Layout(String),
}

fn param_error(name: &'static str, reason: impl Into<String>) -> ChartError {
    ChartError::Parameter {
        name,
        reason: reason.into(),
    }
}

/// Letter + two digits, e.g. `K07`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripletLabel {
    letter: u8,
    number: u8,
}

impl TripletLabel {
    pub fn new(letter: char, number: u8) -> Option<Self> {
        let letter = letter.to_ascii_uppercase();
        (letter.is_ascii() && LETTERS.contains(&(letter as u8)) && number < 100).then_some(Self {
            letter: letter as u8,
            number,
        })
    }

    /// Label with dense index `0..LABEL_SPACE`.
    pub fn from_index(index: usize) -> Option<Self> {
        (index < LABEL_SPACE).then(|| Self {
            letter: LETTERS[index / 100],
            number: (index % 100) as u8,
        })
    }

    pub fn index(&self) -> usize {
        let letter = LETTERS
            .iter()
            .position(|&l| l == self.letter)
            .expect("label letter is always in the alphabet");
        letter * 100 + self.number as usize
    }

    pub fn letter(&self) -> char {
        self.letter as char
    }

    pub fn number(&self) -> u8 {
        self.number
    }

    /// Parses the canonical three character form. Case-insensitive, no surrounding whitespace.
    pub fn parse(text: &str) -> Option<Self> {
        let bytes = text.as_bytes();
        if bytes.len() != 3 || !bytes[1].is_ascii_digit() || !bytes[2].is_ascii_digit() {
            return None;
        }
        Self::new(bytes[0] as char, (bytes[1] - b'0') * 10 + (bytes[2] - b'0'))
    }
}

impl fmt::Display for TripletLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:02}", self.letter as char, self.number)
    }
}

impl FromStr for TripletLabel {
    type Err = ChartError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s).ok_or_else(|| param_error("label", format!("{s:?} is not a triplet label")))
    }
}

impl Serialize for TripletLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TripletLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Self::parse(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid triplet label {text:?}")))
    }
}

/// Normalizes free text typed by a participant: surrounding whitespace trimmed, uppercased.
pub fn normalize_report(raw: &str) -> String {
    raw.trim().to_uppercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartParams {
    pub frame_width: u32,
    pub frame_height: u32,
    /// Font size `f_s` in pixels.
    pub font_size: f64,
    /// Relative triplet density `D_r = f_s / d_v`.
    pub relative_density: f64,
    /// Per-axis jitter amplitude as a fraction of `d_v`.
    pub jitter_fraction: f64,
    pub seed: u64,
}

impl Default for ChartParams {
    fn default() -> Self {
        Self {
            frame_width: 1024,
            frame_height: 576,
            font_size: 20.0,
            relative_density: 0.5,
            jitter_fraction: 0.25,
            seed: 0,
        }
    }
}

impl ChartParams {
    pub fn for_frame(frame: FrameSize) -> Self {
        Self {
            frame_width: frame.width,
            frame_height: frame.height,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn frame(&self) -> FrameSize {
        FrameSize::new(self.frame_width, self.frame_height)
    }

    pub fn validate(&self) -> Result<(), ChartError> {
        if self.frame_width == 0 || self.frame_height == 0 {
            return Err(param_error("frame", "frame dimensions must be positive"));
        }
        if !(self.font_size.is_finite() && self.font_size > 0.0) {
            return Err(param_error("font_size", "must be positive"));
        }
        if !(self.relative_density.is_finite() && self.relative_density > 0.0) {
            return Err(param_error("relative_density", "must be positive"));
        }
        if !(0.0..0.5).contains(&self.jitter_fraction) {
            return Err(param_error("jitter_fraction", "must lie in [0, 0.5)"));
        }
        Ok(())
    }

    pub fn triplet_size(&self) -> (f64, f64) {
        (TRIPLET_WIDTH_EM * self.font_size, self.font_size)
    }
}

/// Vertical and horizontal triplet spacing in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Spacing {
    pub vertical: u32,
    pub horizontal: u32,
}

/// `d_v = round(f_s / D_r)`, `d_h = 2 d_v`.
pub fn derive_spacing(font_size: f64, relative_density: f64) -> Result<Spacing, ChartError> {
    if !(font_size.is_finite() && font_size > 0.0) {
        return Err(param_error("font_size", "must be positive"));
    }
    if !(relative_density.is_finite() && relative_density > 0.0) {
        return Err(param_error("relative_density", "must be positive"));
    }
    let vertical = (font_size / relative_density).round();
    if vertical < 1.0 || vertical > u32::MAX as f64 / 2.0 {
        return Err(param_error(
            "relative_density",
            format!("spacing {vertical} px is out of range"),
        ));
    }
    let vertical = vertical as u32;
    Ok(Spacing {
        vertical,
        horizontal: 2 * vertical,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletPlacement {
    pub label: TripletLabel,
    #[serde(flatten)]
    pub anchor: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub params: ChartParams,
    pub d_v: u32,
    pub d_h: u32,
    pub columns: u32,
    pub rows: u32,
    /// Row-major: placement `j * columns + i` belongs to grid node `(i, j)`.
    pub placements: Vec<TripletPlacement>,
    pub character_gray: f64,
    pub background: String,
}

impl ChartSpec {
    /// Position of grid node `(i, j)` before jitter.
    pub fn node(&self, column: u32, row: u32) -> Point {
        node_position(self.d_v, self.d_h, column, row)
    }

    pub fn bbox(&self, placement: &TripletPlacement) -> Rect {
        let (w, h) = self.params.triplet_size();
        Rect::centered(placement.anchor, w, h)
    }

    /// Largest per-axis offset of an anchor from its node.
    pub fn jitter_bound(&self) -> f64 {
        self.params.jitter_fraction * self.d_v as f64
    }

    pub fn placement(&self, label: TripletLabel) -> Option<&TripletPlacement> {
        self.placements.iter().find(|p| p.label == label)
    }

    /// Resolves a participant's report to the anchor of the matching triplet.
    pub fn lookup(&self, raw_text: &str) -> Option<Point> {
        let label = TripletLabel::parse(&normalize_report(raw_text))?;
        self.placement(label).map(|p| p.anchor)
    }

    /// The placement whose anchor is closest to `point`.
    ///
    /// Searches rings of grid cells outward from the cell containing `point` and stops once no
    /// farther ring can hold a closer anchor.
    pub fn nearest(&self, point: Point) -> Option<&TripletPlacement> {
        if self.placements.is_empty() {
            return None;
        }
        let d_v = self.d_v as f64;
        let d_h = self.d_h as f64;
        let slack = self.jitter_bound() * std::f64::consts::SQRT_2;
        let ci = (point.x / d_h).floor() as i64;
        let cj = (point.y / d_v).floor() as i64;
        let (cols, rows) = (self.columns as i64, self.rows as i64);
        let max_ring = [ci, cols - 1 - ci, cj, rows - 1 - cj]
            .iter()
            .map(|v| v.abs())
            .max()
            .unwrap_or(0)
            + 1;

        let mut best: Option<(f64, usize)> = None;
        for ring in 0..=max_ring {
            for j in (cj - ring)..=(cj + ring) {
                if j < 0 || j >= rows {
                    continue;
                }
                let on_edge_row = (j - cj).abs() == ring;
                let mut i = ci - ring;
                while i <= ci + ring {
                    if i >= 0 && i < cols {
                        let idx = (j * cols + i) as usize;
                        let d = self.placements[idx].anchor.distance(&point);
                        if best.is_none_or(|(bd, bi)| d < bd || (d == bd && idx < bi)) {
                            best = Some((d, idx));
                        }
                    }
                    // interior rows only contribute their two end cells
                    i += if on_edge_row || ring == 0 { 1 } else { 2 * ring };
                }
            }
            // any node `ring + 1` cells away is at least (ring + 0.5) d_v from `point`
            if let Some((bd, _)) = best {
                if bd < (ring as f64 + 0.5) * d_v - slack {
                    break;
                }
            }
        }
        best.map(|(_, idx)| &self.placements[idx])
    }
}

fn node_position(d_v: u32, d_h: u32, column: u32, row: u32) -> Point {
    Point::new(
        d_h as f64 / 2.0 + column as f64 * d_h as f64,
        d_v as f64 / 2.0 + row as f64 * d_v as f64,
    )
}

/// Builds the chart for `params`. The output is a pure function of `params`, seed included.
pub fn generate_chart(params: &ChartParams) -> Result<ChartSpec, ChartError> {
    params.validate()?;
    let spacing = derive_spacing(params.font_size, params.relative_density)?;
    let (d_v, d_h) = (spacing.vertical, spacing.horizontal);
    let columns = params.frame_width / d_h;
    let rows = params.frame_height / d_v;
    if columns == 0 || rows == 0 {
        return Err(ChartError::Layout(format!(
            "frame {}x{} holds no {d_h}x{d_v} grid cell",
            params.frame_width, params.frame_height
        )));
    }
    let (box_w, box_h) = params.triplet_size();
    if box_w > d_h as f64 || box_h > d_v as f64 {
        return Err(ChartError::Layout(format!(
            "{box_w}x{box_h} triplets do not fit in {d_h}x{d_v} cells"
        )));
    }
    let count = (columns * rows) as usize;
    if count > LABEL_SPACE {
        return Err(ChartError::Layout(format!(
            "{count} grid nodes exceed the {LABEL_SPACE} distinct labels"
        )));
    }

    let mut rng = rng_from_seed(params.seed);
    let labels = index::sample(&mut rng, LABEL_SPACE, count);

    let (frame_w, frame_h) = (params.frame_width as f64, params.frame_height as f64);
    let jitter = params.jitter_fraction * d_v as f64;
    let node_box = |i: u32, j: u32| Rect::centered(node_position(d_v, d_h, i, j), box_w, box_h);

    let mut boxes: Vec<Rect> = Vec::with_capacity(count);
    let mut placements = Vec::with_capacity(count);
    for (k, label_index) in labels.into_iter().enumerate() {
        let (i, j) = ((k as u32) % columns, (k as u32) / columns);
        let node = node_position(d_v, d_h, i, j);
        let mut anchor = node;
        if jitter > 0.0 {
            for _ in 0..JITTER_ATTEMPTS {
                let candidate = Point::new(
                    node.x + rng.random_range(-jitter..=jitter),
                    node.y + rng.random_range(-jitter..=jitter),
                );
                let bbox = Rect::centered(candidate, box_w, box_h);
                if !bbox.inside(frame_w, frame_h) {
                    continue;
                }
                // Jitter stays below half a cell, so only the 8 neighbours can collide. Nodes not
                // placed yet are represented by their unjittered box, which keeps the fallback
                // position free for them.
                let collides = neighbours(i, j, columns, rows).any(|(ni, nj)| {
                    let nk = (nj * columns + ni) as usize;
                    let other = if nk < k { boxes[nk] } else { node_box(ni, nj) };
                    bbox.overlaps(&other)
                });
                if !collides {
                    anchor = candidate;
                    break;
                }
            }
        }
        boxes.push(Rect::centered(anchor, box_w, box_h));
        placements.push(TripletPlacement {
            label: TripletLabel::from_index(label_index).expect("sampled below LABEL_SPACE"),
            anchor,
        });
    }

    Ok(ChartSpec {
        params: *params,
        d_v,
        d_h,
        columns,
        rows,
        placements,
        character_gray: CHARACTER_GRAY,
        background: "black".to_owned(),
    })
}

fn neighbours(i: u32, j: u32, columns: u32, rows: u32) -> impl Iterator<Item = (u32, u32)> {
    let (i, j) = (i as i64, j as i64);
    (-1..=1i64)
        .flat_map(move |dj| (-1..=1i64).map(move |di| (i + di, j + dj)))
        .filter(move |&(ni, nj)| {
            (ni, nj) != (i, j) && ni >= 0 && nj >= 0 && ni < columns as i64 && nj < rows as i64
        })
        .map(|(ni, nj)| (ni as u32, nj as u32))
}
