use std::path::Path;

use image::GrayImage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::MapError;
use crate::geometry::{Pose2D, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

impl CellState {
    pub fn is_free(self) -> bool {
        self == CellState::Free
    }
}

/// Sidecar metadata accompanying an occupancy image.
///
/// Pixel values are converted to an occupancy probability `p` (`(255 - v)/255`,
/// or `v/255` when `negate` is set) and then classified: `p >= occupied_threshold`
/// is occupied, `p <= free_threshold` is free, anything between is unknown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub resolution: f64,
    /// World pose `[x, y, yaw]` of the lower-left corner of cell (0, 0).
    pub origin: [f64; 3],
    #[serde(default = "default_occupied")]
    pub occupied_threshold: f64,
    #[serde(default = "default_free")]
    pub free_threshold: f64,
    #[serde(default)]
    pub negate: bool,
}

fn default_occupied() -> f64 {
    0.65
}
fn default_free() -> f64 {
    0.25
}

impl GridMetadata {
    pub fn new(resolution: f64, origin: [f64; 3]) -> Self {
        Self {
            image: None,
            resolution,
            origin,
            occupied_threshold: default_occupied(),
            free_threshold: default_free(),
            negate: false,
        }
    }

    pub fn classify(&self, value: u8) -> CellState {
        let v = f64::from(value) / 255.0;
        let p = if self.negate { v } else { 1.0 - v };
        if p >= self.occupied_threshold {
            CellState::Occupied
        } else if p <= self.free_threshold {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }

    fn validate(&self) -> Result<(), MapError> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(MapError::BadResolution(self.resolution));
        }
        let (f, o) = (self.free_threshold, self.occupied_threshold);
        if !(0.0..=1.0).contains(&f) || !(0.0..=1.0).contains(&o) || f >= o {
            return Err(MapError::BadThresholds { free: f, occupied: o });
        }
        Ok(())
    }
}

/// Rasterized floor plan. Cell `(col, row)` covers
/// `[ox + col·res, ox + (col+1)·res) × [oy + row·res, oy + (row+1)·res)`;
/// row 0 is the bottom of the map (the last row of the image file).
///
/// The origin yaw is carried for round-tripping metadata but the grid is
/// always axis-aligned with the world frame.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    /// A grid with every cell set to `fill`.
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        fill: CellState,
    ) -> Result<Self, MapError> {
        Self::from_cells(width, height, resolution, origin, vec![fill; width * height])
    }

    /// Builds a grid from a row-major buffer, row 0 at the bottom.
    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        cells: Vec<CellState>,
    ) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::BadDimensions { width, height });
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::BadResolution(resolution));
        }
        if cells.len() != width * height {
            return Err(MapError::DimensionMismatch {
                expected: width * height,
                actual: cells.len(),
            });
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    /// Classifies an 8-bit image (row 0 = top) with the given metadata.
    pub fn from_image(image: &GrayImage, meta: &GridMetadata) -> Result<Self, MapError> {
        meta.validate()?;
        let (w, h) = (image.width() as usize, image.height() as usize);
        let mut cells = Vec::with_capacity(w * h);
        for row in 0..h {
            let img_row = (h - 1 - row) as u32;
            for col in 0..w {
                cells.push(meta.classify(image.get_pixel(col as u32, img_row).0[0]));
            }
        }
        let origin = Pose2D {
            x: meta.origin[0],
            y: meta.origin[1],
            theta: meta.origin[2],
        };
        Self::from_cells(w, h, meta.resolution, origin, cells)
    }

    /// Renders the grid as an 8-bit image: free 255, occupied 0, unknown 128.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let row = self.height - 1 - y as usize;
            let v = match self.get(x as usize, row) {
                CellState::Free => 255,
                CellState::Occupied => 0,
                CellState::Unknown => 128,
            };
            image::Luma([v])
        })
    }

    pub fn metadata(&self) -> GridMetadata {
        GridMetadata::new(
            self.resolution,
            [self.origin.x, self.origin.y, self.origin.theta],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn resolution(&self) -> f64 {
        self.resolution
    }
    pub fn origin(&self) -> Pose2D {
        self.origin
    }
    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }
    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> CellState {
        self.cells[self.index(col, row)]
    }

    pub fn set(&mut self, col: usize, row: usize, state: CellState) {
        let i = self.index(col, row);
        self.cells[i] = state;
    }

    /// Signed cell coordinates of a world point (may lie outside the grid).
    #[inline]
    pub fn world_to_cell_unchecked(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.origin.x) / self.resolution).floor() as i64,
            ((y - self.origin.y) / self.resolution).floor() as i64,
        )
    }

    #[inline]
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (c, r) = self.world_to_cell_unchecked(x, y);
        self.in_bounds(c, r).then_some((c as usize, r as usize))
    }

    #[inline]
    pub fn in_bounds(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (col as f64 + 0.5) * self.resolution,
            self.origin.y + (row as f64 + 0.5) * self.resolution,
        )
    }

    /// World-frame extent `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (
            self.origin.x,
            self.origin.y,
            self.origin.x + self.width as f64 * self.resolution,
            self.origin.y + self.height as f64 * self.resolution,
        )
    }

    /// State at a world point; points outside the grid are unknown.
    pub fn state_at(&self, p: Vec2) -> CellState {
        match self.world_to_cell(p.x, p.y) {
            Some((c, r)) => self.get(c, r),
            None => CellState::Unknown,
        }
    }

    pub fn is_free_at(&self, p: Vec2) -> bool {
        self.state_at(p).is_free()
    }

    pub fn free_cell_indices(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.is_free().then_some(i))
            .collect()
    }

    /// SHA-256 over geometry and cell states.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"grid-v1");
        h.update((self.width as u64).to_le_bytes());
        h.update((self.height as u64).to_le_bytes());
        for v in [self.resolution, self.origin.x, self.origin.y, self.origin.theta] {
            h.update(v.to_bits().to_le_bytes());
        }
        let bytes: Vec<u8> = self
            .cells
            .iter()
            .map(|c| match c {
                CellState::Free => 0u8,
                CellState::Occupied => 1,
                CellState::Unknown => 2,
            })
            .collect();
        h.update(&bytes);
        hex::encode(h.finalize())
    }

    /// Writes `<stem>.png` plus `<stem>.json` metadata next to each other.
    pub fn save(&self, image_path: &Path, metadata_path: &Path) -> Result<(), MapError> {
        self.to_image()
            .save(image_path)
            .map_err(|e| MapError::Image {
                path: image_path.to_path_buf(),
                message: e.to_string(),
            })?;
        let mut meta = self.metadata();
        meta.image = image_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned());
        let text = serde_json::to_string_pretty(&meta)?;
        std::fs::write(metadata_path, text).map_err(|source| MapError::Io {
            path: metadata_path.to_path_buf(),
            source,
        })
    }
}

/// Loads an occupancy grid from an 8-bit image and its JSON metadata.
pub fn load_occupancy_grid(image_path: &Path, metadata_path: &Path) -> Result<OccupancyGrid, MapError> {
    let text = std::fs::read_to_string(metadata_path).map_err(|source| MapError::Io {
        path: metadata_path.to_path_buf(),
        source,
    })?;
    let meta: GridMetadata = serde_json::from_str(&text)?;
    let img = image::open(image_path).map_err(|e| match e {
        image::ImageError::IoError(source) => MapError::Io {
            path: image_path.to_path_buf(),
            source,
        },
        other => MapError::Image {
            path: image_path.to_path_buf(),
            message: other.to_string(),
        },
    })?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => return Err(MapError::NotSingleChannel(format!("{:?}", other.color()))),
    };
    OccupancyGrid::from_image(&gray, &meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> GridMetadata {
        GridMetadata::new(0.05, [0.0, 0.0, 0.0])
    }

    #[test]
    fn white_image_is_free() {
        let img = GrayImage::from_pixel(2, 2, image::Luma([255]));
        let g = OccupancyGrid::from_image(&img, &meta()).unwrap();
        assert!(g.cells().iter().all(|c| *c == CellState::Free));
        assert_eq!(g.len(), 4);
    }

    #[test]
    fn black_image_is_occupied() {
        let img = GrayImage::from_pixel(2, 2, image::Luma([0]));
        let g = OccupancyGrid::from_image(&img, &meta()).unwrap();
        assert!(g.cells().iter().all(|c| *c == CellState::Occupied));
    }

    #[test]
    fn mid_gray_is_unknown() {
        // p = (255 - 128) / 255 ≈ 0.498, strictly between 0.25 and 0.65.
        let m = meta();
        assert_eq!(m.classify(128), CellState::Unknown);
        // Exactly at the thresholds the comparisons are inclusive.
        let mut m2 = m.clone();
        m2.free_threshold = 0.0;
        assert_eq!(m2.classify(255), CellState::Free);
        m2.occupied_threshold = 1.0;
        assert_eq!(m2.classify(0), CellState::Occupied);
    }

    #[test]
    fn negate_flips_interpretation() {
        let mut m = meta();
        m.negate = true;
        assert_eq!(m.classify(255), CellState::Occupied);
        assert_eq!(m.classify(0), CellState::Free);
    }

    #[test]
    fn image_rows_are_flipped() {
        let mut img = GrayImage::from_pixel(3, 2, image::Luma([255]));
        img.put_pixel(0, 0, image::Luma([0])); // top-left in the image
        let g = OccupancyGrid::from_image(&img, &meta()).unwrap();
        assert_eq!(g.get(0, 1), CellState::Occupied);
        assert_eq!(g.get(0, 0), CellState::Free);
        assert_eq!(g.to_image(), img);
    }

    #[test]
    fn rejects_bad_geometry() {
        let o = Pose2D::default();
        assert!(matches!(
            OccupancyGrid::new(0, 3, 0.05, o, CellState::Free),
            Err(MapError::BadDimensions { .. })
        ));
        assert!(matches!(
            OccupancyGrid::new(2, 2, 0.0, o, CellState::Free),
            Err(MapError::BadResolution(_))
        ));
        assert!(matches!(
            OccupancyGrid::from_cells(2, 2, 0.05, o, vec![CellState::Free; 3]),
            Err(MapError::DimensionMismatch { .. })
        ));
        let img = GrayImage::from_pixel(2, 2, image::Luma([255]));
        let mut m = meta();
        m.resolution = -1.0;
        assert!(OccupancyGrid::from_image(&img, &m).is_err());
    }

    #[test]
    fn world_cell_round_trip() {
        let g = OccupancyGrid::new(10, 8, 0.05, Pose2D::new(-1.0, 2.0, 0.0), CellState::Free).unwrap();
        for row in 0..8 {
            for col in 0..10 {
                let c = g.cell_center(col, row);
                assert_eq!(g.world_to_cell(c.x, c.y), Some((col, row)));
            }
        }
        assert_eq!(g.world_to_cell(-1.01, 2.0), None);
        assert_eq!(g.state_at(Vec2::new(100.0, 0.0)), CellState::Unknown);
    }

    #[test]
    fn load_from_files_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut g = OccupancyGrid::new(5, 4, 0.1, Pose2D::new(1.0, -2.0, 0.0), CellState::Free).unwrap();
        g.set(1, 2, CellState::Occupied);
        g.set(3, 0, CellState::Unknown);
        let img = dir.path().join("map.png");
        let meta = dir.path().join("map.json");
        g.save(&img, &meta).unwrap();
        let back = load_occupancy_grid(&img, &meta).unwrap();
        assert_eq!(back, g);
        assert!(load_occupancy_grid(&dir.path().join("missing.png"), &meta).is_err());
    }
}
