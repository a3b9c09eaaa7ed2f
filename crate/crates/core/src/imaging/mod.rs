//! Earth-observation frames, tiling and onboard redundancy filtering.

pub mod annotations;
pub mod corpus;

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, FieldError, Result};

pub use corpus::{generate_corpus, generate_frame, CorpusSpec};

/// Axis-aligned box in pixel coordinates, `min` inclusive, `max` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let b = BBox {
            x_min: self.x_min.max(other.x_min),
            y_min: self.y_min.max(other.y_min),
            x_max: self.x_max.min(other.x_max),
            y_max: self.y_max.min(other.y_max),
        };
        b.is_valid().then_some(b)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    /// Lexicographic total order on the four coordinates.
    pub fn total_cmp(&self, other: &BBox) -> std::cmp::Ordering {
        self.x_min
            .total_cmp(&other.x_min)
            .then(self.y_min.total_cmp(&other.y_min))
            .then(self.x_max.total_cmp(&other.x_max))
            .then(self.y_max.total_cmp(&other.y_max))
    }
}

/// Integer pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl PixelRect {
    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn as_bbox(&self) -> BBox {
        BBox::new(
            self.x as f64,
            self.y as f64,
            (self.x + self.width) as f64,
            (self.y + self.height) as f64,
        )
    }

    pub fn overlap_area(&self, other: &PixelRect) -> u64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.width).min(other.x + other.width);
        let y1 = (self.y + self.height).min(other.y + other.height);
        if x1 > x0 && y1 > y0 {
            (x1 - x0) as u64 * (y1 - y0) as u64
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub class_id: u32,
}

/// Per-cell cloud cover over a frame, laid out row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudField {
    pub cell_px: u32,
    pub cols: u32,
    pub rows: u32,
    pub values: Vec<f64>,
}

impl CloudField {
    pub fn uniform(width_px: u32, height_px: u32, cell_px: u32, value: f64) -> Self {
        let cols = width_px.div_ceil(cell_px);
        let rows = height_px.div_ceil(cell_px);
        Self {
            cell_px,
            cols,
            rows,
            values: vec![value; (cols * rows) as usize],
        }
    }

    fn cell_rect(&self, col: u32, row: u32, width_px: u32, height_px: u32) -> PixelRect {
        let x = col * self.cell_px;
        let y = row * self.cell_px;
        PixelRect {
            x,
            y,
            width: self.cell_px.min(width_px - x),
            height: self.cell_px.min(height_px - y),
        }
    }

    /// Area-weighted cover over `rect`.
    pub fn cover(&self, rect: &PixelRect, width_px: u32, height_px: u32) -> f64 {
        let c0 = rect.x / self.cell_px;
        let r0 = rect.y / self.cell_px;
        let c1 = ((rect.x + rect.width).div_ceil(self.cell_px)).min(self.cols);
        let r1 = ((rect.y + rect.height).div_ceil(self.cell_px)).min(self.rows);
        let mut weighted = 0.0;
        let mut area = 0u64;
        let mut single = None;
        for r in r0..r1 {
            for c in c0..c1 {
                let overlap = self.cell_rect(c, r, width_px, height_px).overlap_area(rect);
                if overlap == 0 {
                    continue;
                }
                let v = self.values[(r * self.cols + c) as usize];
                single = if area == 0 { Some(v) } else { None };
                weighted += v * overlap as f64;
                area += overlap;
            }
        }
        match single {
            Some(v) => v,
            None if area > 0 => weighted / area as f64,
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFrame {
    pub id: u64,
    pub width_px: u32,
    pub height_px: u32,
    /// Compressed-equivalent bytes per pixel.
    pub bytes_per_px: u32,
    pub capture_s: f64,
    /// Area-weighted mean of `cloud`.
    pub cloud_fraction: f64,
    pub cloud: CloudField,
    pub objects: Vec<GroundTruthObject>,
}

impl ImageFrame {
    pub fn payload_bytes(&self) -> u64 {
        self.width_px as u64 * self.height_px as u64 * self.bytes_per_px as u64
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let p = format!("frame[{}]", self.id);
        if self.width_px == 0 || self.height_px == 0 {
            v.push(FieldError::new(format!("{p}.size"), "dimensions must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.cloud_fraction) {
            v.push(FieldError::new(format!("{p}.cloud_fraction"), "must be in [0, 1]"));
        }
        if self.cloud.cell_px == 0
            || self.cloud.values.len() != (self.cloud.cols * self.cloud.rows) as usize
            || self.cloud.cols != self.width_px.div_ceil(self.cloud.cell_px.max(1))
            || self.cloud.rows != self.height_px.div_ceil(self.cloud.cell_px.max(1))
        {
            v.push(FieldError::new(
                format!("{p}.cloud"),
                "cloud grid does not match the frame",
            ));
        }
        if self.cloud.values.iter().any(|c| !(0.0..=1.0).contains(c)) {
            v.push(FieldError::new(format!("{p}.cloud"), "cell cover must be in [0, 1]"));
        }
        let frame = BBox::new(0.0, 0.0, self.width_px as f64, self.height_px as f64);
        for (i, o) in self.objects.iter().enumerate() {
            if !o.bbox.is_valid() || o.bbox.intersect(&frame) != Some(o.bbox) {
                v.push(FieldError::new(
                    format!("{p}.objects[{i}]"),
                    "box must be non-degenerate and inside the frame",
                ));
            }
        }
        check(v)
    }
}

/// Identifies a tile across a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileId {
    pub frame: u64,
    pub row: u32,
    pub col: u32,
}

impl TileId {
    pub fn stream_index(&self) -> [u64; 3] {
        [self.frame, self.row as u64, self.col as u64]
    }
}

impl std::fmt::Display for TileId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "f{}-r{}-c{}", self.frame, self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub id: TileId,
    pub capture_s: f64,
    /// Rectangle in parent-frame pixels.
    pub rect: PixelRect,
    pub payload_bytes: u64,
    pub cloud_fraction: f64,
    /// Clipped objects in tile-local coordinates.
    pub objects: Vec<GroundTruthObject>,
}

impl Tile {
    pub fn parent_frame_id(&self) -> u64 {
        self.id.frame
    }
}

/// Split a frame into `tile_px` squares in row-major order. Edge tiles are
/// truncated, never padded.
pub fn split_frame(frame: &ImageFrame, tile_px: u32) -> Result<Vec<Tile>> {
    if tile_px == 0 {
        return Err(Error::invalid("tile_px must be > 0"));
    }
    let cols = frame.width_px.div_ceil(tile_px);
    let rows = frame.height_px.div_ceil(tile_px);
    let mut tiles = Vec::with_capacity((cols * rows) as usize);
    for row in 0..rows {
        for col in 0..cols {
            let x = col * tile_px;
            let y = row * tile_px;
            let rect = PixelRect {
                x,
                y,
                width: tile_px.min(frame.width_px - x),
                height: tile_px.min(frame.height_px - y),
            };
            let bounds = rect.as_bbox();
            let objects = frame
                .objects
                .iter()
                .filter_map(|o| {
                    let clipped = o.bbox.intersect(&bounds)?;
                    (clipped.area() >= 1.0).then(|| GroundTruthObject {
                        bbox: clipped.translate(-(x as f64), -(y as f64)),
                        class_id: o.class_id,
                    })
                })
                .collect();
            tiles.push(Tile {
                id: TileId {
                    frame: frame.id,
                    row,
                    col,
                },
                capture_s: frame.capture_s,
                rect,
                payload_bytes: rect.area() * frame.bytes_per_px as u64,
                cloud_fraction: frame.cloud.cover(&rect, frame.width_px, frame.height_px),
                objects,
            });
        }
    }
    Ok(tiles)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterPolicy {
    #[serde(default = "default_cloud_threshold")]
    pub cloud_threshold: f64,
    #[serde(default = "default_true")]
    pub drop_empty: bool,
    #[serde(default = "default_min_area")]
    pub min_object_area_px: f64,
}

fn default_cloud_threshold() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_min_area() -> f64 {
    64.0
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            cloud_threshold: default_cloud_threshold(),
            drop_empty: true,
            min_object_area_px: default_min_area(),
        }
    }
}

impl FilterPolicy {
    pub fn violations(&self, prefix: &str) -> Vec<FieldError> {
        let mut v = Vec::new();
        if !(0.0..=1.0).contains(&self.cloud_threshold) {
            v.push(FieldError::new(
                format!("{prefix}.cloud_threshold"),
                format!("must be in [0, 1], got {}", self.cloud_threshold),
            ));
        }
        if !(self.min_object_area_px.is_finite() && self.min_object_area_px >= 0.0) {
            v.push(FieldError::new(format!("{prefix}.min_object_area_px"), "must be >= 0"));
        }
        v
    }

    pub fn is_redundant(&self, tile: &Tile) -> bool {
        tile.cloud_fraction >= self.cloud_threshold
            || (self.drop_empty && !tile.objects.iter().any(|o| o.bbox.area() >= self.min_object_area_px))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<Tile>,
    pub discarded: Vec<Tile>,
    pub filter_rate: f64,
}

impl FilterOutcome {
    pub fn kept_bytes(&self) -> u64 {
        self.kept.iter().map(|t| t.payload_bytes).sum()
    }

    pub fn discarded_bytes(&self) -> u64 {
        self.discarded.iter().map(|t| t.payload_bytes).sum()
    }
}

/// Partition tiles into kept and discarded; the filter rate is the discarded
/// share by count (0 for no input).
pub fn filter_redundant(tiles: Vec<Tile>, policy: &FilterPolicy) -> FilterOutcome {
    let total = tiles.len();
    let (discarded, kept): (Vec<Tile>, Vec<Tile>) = tiles.into_iter().partition(|t| policy.is_redundant(t));
    let filter_rate = if total == 0 {
        0.0
    } else {
        discarded.len() as f64 / total as f64
    };
    FilterOutcome {
        kept,
        discarded,
        filter_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(w: u32, h: u32, objects: Vec<GroundTruthObject>) -> ImageFrame {
        ImageFrame {
            id: 3,
            width_px: w,
            height_px: h,
            bytes_per_px: 3,
            capture_s: 0.0,
            cloud_fraction: 0.1,
            cloud: CloudField::uniform(w, h, 512, 0.1),
            objects,
        }
    }

    fn obj(x0: f64, y0: f64, x1: f64, y1: f64) -> GroundTruthObject {
        GroundTruthObject {
            bbox: BBox::new(x0, y0, x1, y1),
            class_id: 0,
        }
    }

    #[test]
    fn split_even_frame() {
        let tiles = split_frame(&frame(4096, 4096, vec![]), 1024).unwrap();
        assert_eq!(tiles.len(), 16);
        assert!(tiles.iter().all(|t| t.rect.width == 1024 && t.rect.height == 1024));
        assert!(tiles.iter().all(|t| t.payload_bytes == 1024 * 1024 * 3));
    }

    #[test]
    fn identity_split() {
        let f = frame(800, 600, vec![obj(10.0, 10.0, 50.0, 40.0)]);
        let tiles = split_frame(&f, 800).unwrap();
        // tile_px = 800 covers the 800x600 frame in one tile
        assert_eq!(tiles.len(), 1);
        assert_eq!(
            tiles[0].rect,
            PixelRect {
                x: 0,
                y: 0,
                width: 800,
                height: 600
            }
        );
        assert_eq!(tiles[0].objects, f.objects);
        assert_eq!(tiles[0].payload_bytes, f.payload_bytes());
    }

    #[test]
    fn straddling_box_is_clipped_into_four_tiles() {
        let f = frame(1000, 1000, vec![obj(500.0, 500.0, 530.0, 530.0)]);
        let tiles = split_frame(&f, 512).unwrap();
        assert_eq!(tiles.len(), 4);
        let dims: Vec<(u32, u32)> = tiles.iter().map(|t| (t.rect.width, t.rect.height)).collect();
        assert_eq!(dims, vec![(512, 512), (488, 512), (512, 488), (488, 488)]);
        // direct rectangle intersection, translated to each tile's origin
        let expect = [
            BBox::new(500.0, 500.0, 512.0, 512.0),
            BBox::new(0.0, 500.0, 18.0, 512.0),
            BBox::new(500.0, 0.0, 512.0, 18.0),
            BBox::new(0.0, 0.0, 18.0, 18.0),
        ];
        for (t, e) in tiles.iter().zip(expect) {
            assert_eq!(t.objects.len(), 1);
            assert_eq!(t.objects[0].bbox, e);
        }
    }

    #[test]
    fn sliver_fragments_are_dropped() {
        // 0.5 px overlap with the second tile
        let f = frame(1024, 512, vec![obj(100.0, 100.0, 512.5, 101.0)]);
        let tiles = split_frame(&f, 512).unwrap();
        assert_eq!(tiles[0].objects.len(), 1);
        assert!(tiles[1].objects.is_empty());
    }

    #[test]
    fn zero_tile_size_rejected() {
        assert!(split_frame(&frame(10, 10, vec![]), 0).is_err());
    }

    #[test]
    fn cloud_cover_is_area_weighted() {
        let mut f = frame(1024, 512, vec![]);
        f.cloud.values = vec![0.2, 0.8];
        let tiles = split_frame(&f, 1024).unwrap();
        assert!((tiles[0].cloud_fraction - 0.5).abs() < 1e-12);
        let tiles = split_frame(&f, 512).unwrap();
        assert_eq!(tiles[0].cloud_fraction, 0.2);
        assert_eq!(tiles[1].cloud_fraction, 0.8);
    }

    #[test]
    fn vacuous_and_saturated_policies() {
        let mut f = frame(2048, 2048, vec![]);
        f.cloud = CloudField::uniform(2048, 2048, 1024, 0.95);
        let tiles = split_frame(&f, 1024).unwrap();
        let vacuous = FilterPolicy {
            cloud_threshold: 1.0,
            drop_empty: false,
            min_object_area_px: 0.0,
        };
        assert_eq!(filter_redundant(tiles, &vacuous).filter_rate, 0.0);

        f.cloud = CloudField::uniform(2048, 2048, 1024, 1.0);
        let tiles = split_frame(&f, 1024).unwrap();
        let saturated = FilterPolicy {
            cloud_threshold: 0.5,
            drop_empty: false,
            min_object_area_px: 0.0,
        };
        let out = filter_redundant(tiles, &saturated);
        assert_eq!(out.filter_rate, 1.0);
        assert!(out.kept.is_empty());
    }

    #[test]
    fn empty_input_rate_is_zero() {
        assert_eq!(filter_redundant(vec![], &FilterPolicy::default()).filter_rate, 0.0);
    }

    #[test]
    fn small_objects_do_not_make_a_tile_interesting() {
        let f = frame(512, 512, vec![obj(0.0, 0.0, 4.0, 4.0)]);
        let tiles = split_frame(&f, 512).unwrap();
        let out = filter_redundant(tiles, &FilterPolicy::default());
        assert_eq!(out.discarded.len(), 1);
    }
}
