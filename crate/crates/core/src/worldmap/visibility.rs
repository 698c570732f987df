//! Per-cell, per-class bearing sets of ray-visible semantic objects.
//!
//! Visibility predicate: a perimeter sample `s` of object `o` is visible from
//! the center `c` of a free cell when every march point
//! `p_k = c + (s - c) * (k * step / L)`, for `k = 1..=floor(L / step)` with
//! `L = |s - c|` and `step = resolution / 4`, falls in a cell that is either
//! free or touches `o` (closed cell square meets the closed rectangle).
//! Points off the grid block. A sample that coincides with the cell center
//! has no bearing and is skipped.
//!
//! Bearings are binned into `floor(2π / angular_resolution)` equal sectors
//! per (cell, class); each occupied sector is represented by its center
//! direction, so stored bearings are pairwise at least one sector apart.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::MapError;
use crate::geometry::{wrap_two_pi, Pose2D, Rect, Vec2};
use crate::worldmap::grid::OccupancyGrid;
use crate::worldmap::semantic_map::SemanticWorldMap;

pub const DEFAULT_ANGULAR_RESOLUTION: f64 = PI / 180.0;

/// Angular bins of the per-sample shadow tables used to skip marches.
const SHADOW_BINS: usize = 2048;
/// Longest side (in cells, plus one overlap cell) of an occluder block.
const CHUNK: i64 = 8;
/// Side, in cells, of the tiles dismissed together when fully shadowed.
const TILE: usize = 8;
const CACHE_MAGIC: &[u8; 8] = b"FLVISIDX";
const CACHE_VERSION: u32 = 1;

/// Inclusive range of consecutive occupied bearing bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BinRun {
    pub start: u16,
    pub end: u16,
}

#[derive(Clone, Debug, PartialEq)]
struct ClassLayer {
    /// `runs[offsets[cell]..offsets[cell + 1]]` belong to `cell`.
    offsets: Vec<u32>,
    runs: Vec<BinRun>,
}

/// Bearings of one class seen from one cell.
#[derive(Clone, Copy, Debug)]
pub struct BearingSet<'a> {
    runs: &'a [BinRun],
    bin_width: f64,
    n_bins: usize,
}

impl<'a> BearingSet<'a> {
    pub fn empty() -> BearingSet<'static> {
        BearingSet {
            runs: &[],
            bin_width: TAU,
            n_bins: 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Number of stored bearings.
    pub fn len(&self) -> usize {
        self.runs
            .iter()
            .map(|r| usize::from(r.end - r.start) + 1)
            .sum()
    }

    pub fn runs(&self) -> &'a [BinRun] {
        self.runs
    }

    pub fn bins(&self) -> impl Iterator<Item = usize> + 'a {
        self.runs
            .iter()
            .flat_map(|r| usize::from(r.start)..=usize::from(r.end))
    }

    pub fn bin_angle(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.bin_width
    }

    pub fn bearings(&self) -> Vec<Vec2> {
        self.bins().map(|b| Vec2::from_angle(self.bin_angle(b))).collect()
    }

    pub fn contains_bin(&self, bin: usize) -> bool {
        self.runs
            .iter()
            .any(|r| usize::from(r.start) <= bin && bin <= usize::from(r.end))
    }

    /// Largest cosine similarity between `b` (unit) and any stored bearing.
    pub fn best_cosine(&self, b: Vec2) -> Option<f64> {
        self.best_cosine_at(b.angle())
    }

    /// [`BearingSet::best_cosine`] for the unit vector at `angle`: the cosine
    /// of the angular distance to the nearest stored bin center.
    #[inline]
    pub fn best_cosine_at(&self, angle: f64) -> Option<f64> {
        if self.runs.is_empty() {
            return None;
        }
        let n = self.n_bins as f64;
        let u = wrap_two_pi(angle) / self.bin_width - 0.5;
        let mut nearest = f64::INFINITY;
        for r in self.runs {
            let (s, e) = (f64::from(r.start), f64::from(r.end));
            let d = if u >= s && u <= e {
                (u - u.round().clamp(s, e)).abs()
            } else {
                // Both differences lie in (-n, n + 0.5), so one shift wraps them.
                let wrap = |x: f64| if x < 0.0 { x + n } else { x };
                wrap(s - u).min(wrap(u - e))
            };
            nearest = nearest.min(d);
        }
        Some((nearest * self.bin_width).cos())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityIndex {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    angular_resolution: f64,
    n_bins: usize,
    classes: Vec<String>,
    /// Dynamic classes, left out of the index on purpose.
    excluded: Vec<bool>,
    layers: Vec<Option<ClassLayer>>,
}

/// Number of bearing sectors for an angular resolution.
pub fn bin_count(angular_resolution: f64) -> Result<usize, MapError> {
    if !(angular_resolution > 0.0 && angular_resolution <= TAU) {
        return Err(MapError::BadAngularResolution(angular_resolution));
    }
    // The epsilon keeps exact divisors such as 1° from rounding down.
    let n = (TAU / angular_resolution + 1e-9).floor() as usize;
    if n == 0 || n > usize::from(u16::MAX) {
        return Err(MapError::BadAngularResolution(angular_resolution));
    }
    Ok(n)
}

pub fn build_visibility_index(
    grid: &OccupancyGrid,
    map: &SemanticWorldMap,
    angular_resolution: f64,
) -> Result<VisibilityIndex, MapError> {
    VisibilityIndex::build(grid, map, angular_resolution)
}

/// Bearing set of `class_label` at the cell containing `p`.
pub fn query_visibility<'a>(
    index: &'a VisibilityIndex,
    p: Vec2,
    class_label: &str,
) -> Result<BearingSet<'a>, MapError> {
    index.query(p, class_label)
}

impl VisibilityIndex {
    pub fn build(
        grid: &OccupancyGrid,
        map: &SemanticWorldMap,
        angular_resolution: f64,
    ) -> Result<Self, MapError> {
        let n_bins = bin_count(angular_resolution)?;
        let builder = Builder::new(grid, n_bins);
        let classes: Vec<String> = map.class_vocabulary().to_vec();
        let excluded: Vec<bool> = classes.iter().map(|c| map.is_dynamic(c)).collect();
        let mut layers = Vec::with_capacity(classes.len());
        for class in &classes {
            if map.is_dynamic(class) {
                layers.push(None);
                continue;
            }
            let objects: Vec<Rect> = map
                .objects()
                .iter()
                .filter(|o| &o.class_label == class)
                .map(|o| o.rect)
                .filter(|r| {
                    let inside = builder.touches_grid(r);
                    if !inside {
                        log::warn!("object of class {class:?} at ({:.2}, {:.2}) lies outside the grid; skipped", r.cx, r.cy);
                    }
                    inside
                })
                .collect();
            layers.push((!objects.is_empty()).then(|| builder.build_class(&objects)));
        }
        Ok(Self {
            width: grid.width(),
            height: grid.height(),
            resolution: grid.resolution(),
            origin: grid.origin(),
            angular_resolution,
            n_bins,
            classes,
            excluded,
            layers,
        })
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
    pub fn angular_resolution(&self) -> f64 {
        self.angular_resolution
    }
    pub fn n_bins(&self) -> usize {
        self.n_bins
    }
    pub fn bin_width(&self) -> f64 {
        TAU / self.n_bins as f64
    }
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// Whether the class was left out as dynamic.
    pub fn is_excluded(&self, class: usize) -> bool {
        self.excluded.get(class).copied().unwrap_or(false)
    }

    /// Whether the class has any entries in the index.
    pub fn is_indexed(&self, class: usize) -> bool {
        self.layers.get(class).is_some_and(|l| l.is_some())
    }

    /// Sector containing a world-frame bearing angle.
    pub fn bin_of(&self, angle: f64) -> usize {
        ((wrap_two_pi(angle) / self.bin_width()).floor() as usize) % self.n_bins
    }

    /// Flat cell index of a world point, if it lies on the grid.
    #[inline]
    pub fn cell_of(&self, p: Vec2) -> Option<usize> {
        let c = ((p.x - self.origin.x) / self.resolution).floor();
        let r = ((p.y - self.origin.y) / self.resolution).floor();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return None;
        }
        Some(r as usize * self.width + c as usize)
    }

    #[inline]
    pub fn bearings_at_cell(&self, cell: usize, class: usize) -> BearingSet<'_> {
        let runs = match self.layers.get(class) {
            Some(Some(layer)) => {
                &layer.runs[layer.offsets[cell] as usize..layer.offsets[cell + 1] as usize]
            }
            _ => &[],
        };
        BearingSet {
            runs,
            bin_width: self.bin_width(),
            n_bins: self.n_bins,
        }
    }

    pub fn query(&self, p: Vec2, class_label: &str) -> Result<BearingSet<'_>, MapError> {
        let cell = self
            .cell_of(p)
            .ok_or(MapError::OutOfBounds { x: p.x, y: p.y })?;
        Ok(match self.class_index(class_label) {
            Some(k) => self.bearings_at_cell(cell, k),
            None => BearingSet::empty(),
        })
    }

    /// Classes with a non-empty bearing set at `cell`.
    pub fn visible_classes(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.classes.len()).filter(move |&k| !self.bearings_at_cell(cell, k).is_empty())
    }

    /// Total number of (cell, class) entries.
    pub fn entry_count(&self) -> usize {
        self.layers
            .iter()
            .flatten()
            .map(|l| l.offsets.windows(2).filter(|w| w[1] > w[0]).count())
            .sum()
    }

    /// Key identifying the inputs an index was built from.
    pub fn cache_key(grid: &OccupancyGrid, map: &SemanticWorldMap, angular_resolution: f64) -> String {
        let mut h = Sha256::new();
        h.update(b"visibility-v1");
        h.update(grid.content_hash().as_bytes());
        h.update(map.content_hash().as_bytes());
        h.update(angular_resolution.to_bits().to_le_bytes());
        hex::encode(h.finalize())
    }

    /// Serializes the index; identical indices yield identical bytes.
    pub fn to_bytes(&self, key: &str) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        put_str(&mut out, key);
        for v in [self.width as u64, self.height as u64, self.n_bins as u64] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in [
            self.resolution,
            self.origin.x,
            self.origin.y,
            self.origin.theta,
            self.angular_resolution,
        ] {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        out.extend_from_slice(&(self.classes.len() as u32).to_le_bytes());
        for ((name, layer), &excluded) in self.classes.iter().zip(&self.layers).zip(&self.excluded) {
            put_str(&mut out, name);
            match layer {
                None if excluded => out.push(2),
                None => out.push(0),
                Some(l) => {
                    out.push(1);
                    for o in &l.offsets {
                        out.extend_from_slice(&o.to_le_bytes());
                    }
                    out.extend_from_slice(&(l.runs.len() as u32).to_le_bytes());
                    for r in &l.runs {
                        out.extend_from_slice(&r.start.to_le_bytes());
                        out.extend_from_slice(&r.end.to_le_bytes());
                    }
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    /// Parses bytes written by [`to_bytes`](Self::to_bytes), returning the
    /// stored key alongside the index.
    pub fn from_bytes(bytes: &[u8]) -> Result<(String, Self), MapError> {
        let bad = |m: &str| MapError::Cache(m.to_string());
        if bytes.len() < CACHE_MAGIC.len() + 32 {
            return Err(bad("file too short"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(bad("checksum mismatch"));
        }
        let mut rd = Reader { buf: body, pos: 0 };
        if rd.take(8)? != CACHE_MAGIC {
            return Err(bad("not a visibility index"));
        }
        let version = rd.u32()?;
        if version != CACHE_VERSION {
            return Err(MapError::Cache(format!("unsupported version {version}")));
        }
        let key = rd.string()?;
        let width = rd.u64()? as usize;
        let height = rd.u64()? as usize;
        let n_bins = rd.u64()? as usize;
        let resolution = rd.f64()?;
        let origin = Pose2D {
            x: rd.f64()?,
            y: rd.f64()?,
            theta: rd.f64()?,
        };
        let angular_resolution = rd.f64()?;
        let n_classes = rd.u32()? as usize;
        let n_cells = width
            .checked_mul(height)
            .ok_or_else(|| bad("bad dimensions"))?;
        let mut classes = Vec::with_capacity(n_classes);
        let mut layers = Vec::with_capacity(n_classes);
        let mut excluded = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            classes.push(rd.string()?);
            let tag = rd.take(1)?[0];
            excluded.push(tag == 2);
            match tag {
                0 | 2 => layers.push(None),
                1 => {
                    let offsets = (0..=n_cells).map(|_| rd.u32()).collect::<Result<Vec<_>, _>>()?;
                    let n_runs = rd.u32()? as usize;
                    if offsets.last().copied() != Some(n_runs as u32)
                        || offsets.windows(2).any(|w| w[0] > w[1])
                    {
                        return Err(bad("inconsistent offsets"));
                    }
                    let mut runs = Vec::with_capacity(n_runs);
                    for _ in 0..n_runs {
                        let start = rd.u16()?;
                        let end = rd.u16()?;
                        if start > end || usize::from(end) >= n_bins {
                            return Err(bad("bin run out of range"));
                        }
                        runs.push(BinRun { start, end });
                    }
                    layers.push(Some(ClassLayer { offsets, runs }));
                }
                _ => return Err(bad("bad layer tag")),
            }
        }
        if rd.pos != body.len() {
            return Err(bad("trailing bytes"));
        }
        Ok((
            key,
            Self {
                width,
                height,
                resolution,
                origin,
                angular_resolution,
                n_bins,
                classes,
                excluded,
                layers,
            },
        ))
    }

    pub fn save(&self, path: &Path, key: &str) -> Result<(), MapError> {
        std::fs::write(path, self.to_bytes(key)).map_err(|source| MapError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<(String, Self), MapError> {
        let bytes = std::fs::read(path).map_err(|source| MapError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Loads the cache at `path` when its key matches the inputs, otherwise
    /// builds the index and rewrites the cache. The flag reports a rebuild.
    pub fn load_or_build(
        grid: &OccupancyGrid,
        map: &SemanticWorldMap,
        angular_resolution: f64,
        path: &Path,
    ) -> Result<(Self, bool), MapError> {
        let key = Self::cache_key(grid, map, angular_resolution);
        if path.exists() {
            match Self::load(path) {
                Ok((stored, index)) if stored == key => return Ok((index, false)),
                Ok(_) => log::info!("visibility cache {} is stale; rebuilding", path.display()),
                Err(e) => log::warn!("ignoring unreadable visibility cache {}: {e}", path.display()),
            }
        }
        let index = Self::build(grid, map, angular_resolution)?;
        index.save(path, &key)?;
        Ok((index, true))
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MapError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| MapError::Cache("unexpected end of file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u16(&mut self) -> Result<u16, MapError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, MapError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, MapError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, MapError> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn string(&mut self) -> Result<String, MapError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| MapError::Cache("bad utf-8".into()))
    }
}

/// Inclusive cell range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct CellRange {
    c0: i64,
    r0: i64,
    c1: i64,
    r1: i64,
}

impl CellRange {
    fn intersect(&self, o: &CellRange) -> Option<CellRange> {
        let r = CellRange {
            c0: self.c0.max(o.c0),
            r0: self.r0.max(o.r0),
            c1: self.c1.min(o.c1),
            r1: self.r1.min(o.r1),
        };
        (r.c0 <= r.c1 && r.r0 <= r.r1).then_some(r)
    }

    /// `self` minus `hole`, as up to four disjoint ranges.
    fn subtract(&self, hole: &CellRange, out: &mut Vec<CellRange>) {
        let Some(h) = self.intersect(hole) else {
            out.push(*self);
            return;
        };
        if self.r0 < h.r0 {
            out.push(CellRange { r1: h.r0 - 1, ..*self });
        }
        if h.r1 < self.r1 {
            out.push(CellRange { r0: h.r1 + 1, ..*self });
        }
        if self.c0 < h.c0 {
            out.push(CellRange { c1: h.c0 - 1, r0: h.r0, r1: h.r1, ..*self });
        }
        if h.c1 < self.c1 {
            out.push(CellRange { c0: h.c1 + 1, r0: h.r0, r1: h.r1, ..*self });
        }
    }
}

struct Builder<'a> {
    grid: &'a OccupancyGrid,
    free: Vec<bool>,
    free_cells: Vec<usize>,
    /// Inclusive-exclusive 2D prefix sums of non-free cells, `(w+1) x (h+1)`.
    blocked_prefix: Vec<u32>,
    /// Non-free cells tiled into overlapping blocks of at most `CHUNK + 1` cells a side.
    blocks: Vec<CellRange>,
    n_bins: usize,
    bin_width: f64,
    words: usize,
}

impl<'a> Builder<'a> {
    fn new(grid: &'a OccupancyGrid, n_bins: usize) -> Self {
        let (w, h) = (grid.width(), grid.height());
        let free: Vec<bool> = grid.cells().iter().map(|c| c.is_free()).collect();
        let free_cells = (0..w * h).filter(|&i| free[i]).collect();
        let mut blocked_prefix = vec![0u32; (w + 1) * (h + 1)];
        for r in 0..h {
            for c in 0..w {
                let v = u32::from(!free[r * w + c]);
                blocked_prefix[(r + 1) * (w + 1) + c + 1] = v
                    + blocked_prefix[r * (w + 1) + c + 1]
                    + blocked_prefix[(r + 1) * (w + 1) + c]
                    - blocked_prefix[r * (w + 1) + c];
            }
        }
        Self {
            grid,
            blocks: tile_blocked(&free, w, h),
            free,
            free_cells,
            blocked_prefix,
            n_bins,
            bin_width: TAU / n_bins as f64,
            words: n_bins.div_ceil(64),
        }
    }

    fn touches_grid(&self, r: &Rect) -> bool {
        let (x0, y0, x1, y1) = self.grid.bounds();
        r.max_x() >= x0 && r.min_x() <= x1 && r.max_y() >= y0 && r.min_y() <= y1
    }

    fn blocked_count(&self, r: &CellRange) -> u32 {
        let w1 = self.grid.width() + 1;
        let (c0, r0, c1, r1) = (r.c0 as usize, r.r0 as usize, r.c1 as usize + 1, r.r1 as usize + 1);
        self.blocked_prefix[r1 * w1 + c1] + self.blocked_prefix[r0 * w1 + c0]
            - self.blocked_prefix[r0 * w1 + c1]
            - self.blocked_prefix[r1 * w1 + c0]
    }

    /// Cells whose closed square meets the closed rectangle.
    fn touching_cells(&self, rect: &Rect) -> CellRange {
        let res = self.grid.resolution();
        let o = self.grid.origin();
        let touches_x = |c: i64| {
            o.x + c as f64 * res <= rect.max_x() && o.x + (c + 1) as f64 * res >= rect.min_x()
        };
        let touches_y = |r: i64| {
            o.y + r as f64 * res <= rect.max_y() && o.y + (r + 1) as f64 * res >= rect.min_y()
        };
        let mut c0 = ((rect.min_x() - o.x) / res).floor() as i64 + 1;
        while touches_x(c0 - 1) {
            c0 -= 1;
        }
        while !touches_x(c0) {
            c0 += 1;
        }
        let mut c1 = ((rect.max_x() - o.x) / res).floor() as i64 - 1;
        while touches_x(c1 + 1) {
            c1 += 1;
        }
        let mut r0 = ((rect.min_y() - o.y) / res).floor() as i64 + 1;
        while touches_y(r0 - 1) {
            r0 -= 1;
        }
        while !touches_y(r0) {
            r0 += 1;
        }
        let mut r1 = ((rect.max_y() - o.y) / res).floor() as i64 - 1;
        while touches_y(r1 + 1) {
            r1 += 1;
        }
        CellRange { c0, r0, c1, r1 }
    }

    fn bin_of(&self, d: Vec2) -> usize {
        ((wrap_two_pi(d.angle()) / self.bin_width).floor() as usize) % self.n_bins
    }

    fn build_class(&self, objects: &[Rect]) -> ClassLayer {
        let n_cells = self.grid.len();
        let words = self.words;
        let mut bits = vec![0u64; n_cells * words];
        for rect in objects {
            self.add_object(rect, &mut bits);
        }
        let mut offsets = Vec::with_capacity(n_cells + 1);
        let mut runs = Vec::new();
        offsets.push(0u32);
        for cell in 0..n_cells {
            let set = &bits[cell * words..(cell + 1) * words];
            let mut open: Option<usize> = None;
            for (wi, &word) in set.iter().enumerate() {
                if word == 0 && open.is_none() {
                    continue;
                }
                if word == u64::MAX && open.is_some() {
                    continue;
                }
                for bit in 0..64 {
                    let b = wi * 64 + bit;
                    if b >= self.n_bins {
                        break;
                    }
                    match (word >> bit & 1 == 1, open) {
                        (true, None) => open = Some(b),
                        (false, Some(start)) => {
                            runs.push(BinRun { start: start as u16, end: (b - 1) as u16 });
                            open = None;
                        }
                        _ => {}
                    }
                }
            }
            if let Some(start) = open {
                runs.push(BinRun { start: start as u16, end: (self.n_bins - 1) as u16 });
            }
            offsets.push(runs.len() as u32);
        }
        ClassLayer { offsets, runs }
    }

    fn add_object(&self, rect: &Rect, bits: &mut [u64]) {
        let grid = self.grid;
        let (w, h) = (grid.width() as i64, grid.height() as i64);
        let res = grid.resolution();
        let origin = grid.origin();
        let words = self.words;
        let samples = rect.perimeter_samples(res);
        let exempt = self.touching_cells(rect);
        let exempt_on_grid = exempt.intersect(&CellRange {
            c0: 0,
            r0: 0,
            c1: w - 1,
            r1: h - 1,
        });

        let mut pending = Vec::new();
        for &cell in &self.free_cells {
            let (col, row) = ((cell % w as usize) as i64, (cell / w as usize) as i64);
            let c = grid.cell_center(col as usize, row as usize);
            let set = &mut bits[cell * words..(cell + 1) * words];
            if self.all_clear(c, rect, exempt_on_grid.as_ref()) {
                for &s in &samples {
                    let d = s - c;
                    if d.x != 0.0 || d.y != 0.0 {
                        let b = self.bin_of(d);
                        set[b / 64] |= 1 << (b % 64);
                    }
                }
            } else {
                pending.push(cell);
            }
        }
        if pending.is_empty() {
            return;
        }

        let mut pieces = Vec::new();
        for b in &self.blocks {
            b.subtract(&exempt, &mut pieces);
        }
        let shadows: Vec<Vec<f32>> = samples
            .iter()
            .map(|&s| shadow_table(s, &pieces, origin, res))
            .collect();

        let is_blocking = |col: i64, row: i64| {
            if col < 0 || row < 0 || col >= w || row >= h {
                return true;
            }
            if self.free[(row * w + col) as usize] {
                return false;
            }
            !(col >= exempt.c0 && col <= exempt.c1 && row >= exempt.r0 && row <= exempt.r1)
        };
        let step = res / 4.0;
        let shadow_width = TAU / SHADOW_BINS as f64;
        let maxima: Vec<RangeMax> = shadows.iter().map(|t| RangeMax::new(t)).collect();

        // Group pending cells into tiles so whole tiles can be dismissed per sample.
        let tiles_w = (w as usize).div_ceil(TILE);
        let mut tiles: Vec<Vec<usize>> = vec![Vec::new(); tiles_w * (h as usize).div_ceil(TILE)];
        for cell in pending {
            let (col, row) = (cell % w as usize, cell / w as usize);
            tiles[(row / TILE) * tiles_w + col / TILE].push(cell);
        }
        let mut live = Vec::with_capacity(samples.len());
        for cells in tiles.iter().filter(|t| !t.is_empty()) {
            let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
            for &cell in cells {
                let c = grid.cell_center(cell % w as usize, cell / w as usize);
                lo = Vec2::new(lo.x.min(c.x), lo.y.min(c.y));
                hi = Vec2::new(hi.x.max(c.x), hi.y.max(c.y));
            }
            live.clear();
            live.extend((0..samples.len()).filter(|&k| !tile_in_shadow(samples[k], lo, hi, &maxima[k], shadow_width)));
            if live.is_empty() {
                continue;
            }
            for &cell in cells {
                let (col, row) = (cell % w as usize, cell / w as usize);
                let c = grid.cell_center(col, row);
                let set = &mut bits[cell * words..(cell + 1) * words];
                for &k in &live {
                    let s = samples[k];
                    let d = s - c;
                    if d.x == 0.0 && d.y == 0.0 {
                        continue;
                    }
                    let angle = wrap_two_pi(d.angle());
                    let b = ((angle / self.bin_width).floor() as usize) % self.n_bins;
                    if set[b / 64] >> (b % 64) & 1 == 1 {
                        continue;
                    }
                    let len = d.norm();
                    let back = wrap_two_pi(angle + PI);
                    let tb = ((back / shadow_width).floor() as usize) % SHADOW_BINS;
                    if len >= f64::from(shadows[k][tb]) {
                        continue;
                    }
                    if self.march_clear(c, s, step, &exempt, &is_blocking) {
                        set[b / 64] |= 1 << (b % 64);
                    }
                }
            }
        }
    }

    /// Same answer as walking every march point from `from` to `to`, but
    /// stretches whose cell bounding box holds no blocking cell are accepted
    /// from the prefix sums without visiting their points.
    fn march_clear(
        &self,
        from: Vec2,
        to: Vec2,
        step: f64,
        exempt: &CellRange,
        is_blocking: &impl Fn(i64, i64) -> bool,
    ) -> bool {
        let d = to - from;
        let len = d.norm();
        let n = (len / step).floor() as usize;
        if n == 0 {
            return true;
        }
        let res = self.grid.resolution();
        let o = self.grid.origin();
        let cell = |k: usize| {
            let p = from + d * (k as f64 * step / len);
            (((p.x - o.x) / res).floor() as i64, ((p.y - o.y) / res).floor() as i64)
        };
        let (w, h) = (self.grid.width() as i64, self.grid.height() as i64);
        let mut stack = vec![(1usize, n)];
        while let Some((k0, k1)) = stack.pop() {
            // March points move monotonically along each axis, so the cells of
            // the two end points bound the cells of every point between them.
            let (a, b) = (cell(k0), cell(k1));
            let range = CellRange {
                c0: a.0.min(b.0),
                r0: a.1.min(b.1),
                c1: a.0.max(b.0),
                r1: a.1.max(b.1),
            };
            if range.c0 >= 0 && range.r0 >= 0 && range.c1 < w && range.r1 < h {
                let excused = exempt.intersect(&range).map_or(0, |e| self.blocked_count(&e));
                if self.blocked_count(&range) == excused {
                    continue;
                }
            }
            if k1 - k0 < 8 {
                if (k0..=k1).any(|k| {
                    let (c, r) = cell(k);
                    is_blocking(c, r)
                }) {
                    return false;
                }
                continue;
            }
            let mid = k0 + (k1 - k0) / 2;
            stack.push((mid + 1, k1));
            stack.push((k0, mid));
        }
        true
    }

    /// True when no blocking cell can lie between `c` and any point of `rect`.
    fn all_clear(&self, c: Vec2, rect: &Rect, exempt: Option<&CellRange>) -> bool {
        const EPS: f64 = 1e-9;
        let res = self.grid.resolution();
        let o = self.grid.origin();
        let range = CellRange {
            c0: ((c.x.min(rect.min_x()) - EPS - o.x) / res).floor() as i64,
            r0: ((c.y.min(rect.min_y()) - EPS - o.y) / res).floor() as i64,
            c1: ((c.x.max(rect.max_x()) + EPS - o.x) / res).floor() as i64,
            r1: ((c.y.max(rect.max_y()) + EPS - o.y) / res).floor() as i64,
        };
        if range.c0 < 0
            || range.r0 < 0
            || range.c1 >= self.grid.width() as i64
            || range.r1 >= self.grid.height() as i64
        {
            return false;
        }
        let total = self.blocked_count(&range);
        let excused = exempt
            .and_then(|e| e.intersect(&range))
            .map_or(0, |e| self.blocked_count(&e));
        total == excused
    }
}

/// Whether every cell center in the box `[lo, hi]` is beyond the shadow
/// distance of its direction bin as seen from `s`.
fn tile_in_shadow(s: Vec2, lo: Vec2, hi: Vec2, maxima: &RangeMax, width: f64) -> bool {
    if s.x >= lo.x && s.x <= hi.x && s.y >= lo.y && s.y <= hi.y {
        return false;
    }
    let near = Vec2::new((lo.x - s.x).max(s.x - hi.x).max(0.0), (lo.y - s.y).max(s.y - hi.y).max(0.0)).norm();
    let mid = (Vec2::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)) - s).angle();
    let (mut a0, mut a1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in [(lo.x, lo.y), (hi.x, lo.y), (hi.x, hi.y), (lo.x, hi.y)] {
        let a = crate::geometry::wrap_pi(Vec2::new(x - s.x, y - s.y).angle() - mid);
        a0 = a0.min(a);
        a1 = a1.max(a);
    }
    // One spare bin each side absorbs rounding in the per-cell bin lookup.
    let first = ((mid + a0) / width).floor() as i64 - 1;
    let last = ((mid + a1) / width).floor() as i64 + 1;
    if last - first + 1 >= SHADOW_BINS as i64 {
        return false;
    }
    let n = SHADOW_BINS as i64;
    let (f, l) = (first.rem_euclid(n) as usize, last.rem_euclid(n) as usize);
    let far = if f <= l {
        maxima.query(f, l)
    } else {
        maxima.query(f, SHADOW_BINS - 1).max(maxima.query(0, l))
    };
    f64::from(far) <= near
}

/// Sparse table answering range-maximum queries over a shadow table.
struct RangeMax {
    levels: Vec<Vec<f32>>,
}

impl RangeMax {
    fn new(values: &[f32]) -> Self {
        let mut levels = vec![values.to_vec()];
        let mut span = 1;
        while 2 * span <= values.len() {
            let prev = levels.last().expect("at least one level");
            let next: Vec<f32> = (0..=values.len() - 2 * span)
                .map(|i| prev[i].max(prev[i + span]))
                .collect();
            levels.push(next);
            span *= 2;
        }
        Self { levels }
    }

    /// Maximum over `lo..=hi`.
    fn query(&self, lo: usize, hi: usize) -> f32 {
        let len = hi - lo + 1;
        let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
        self.levels[k][lo].max(self.levels[k][hi + 1 - (1 << k)])
    }
}

/// Per direction from `s`, a distance beyond which every cell center is
/// certainly occluded.
///
/// Each block is shrunk by slightly more than `step / 2` per side. A ray
/// through the shrunk block then crosses the block proper along a chord
/// longer than one march step, so some march point must land inside it.
/// Only table bins whose whole angular extent hits the shrunk block are
/// filled, with the block's farthest corner distance.
fn shadow_table(s: Vec2, blocks: &[CellRange], origin: Pose2D, res: f64) -> Vec<f32> {
    let shrink = 0.13 * res;
    let width = TAU / SHADOW_BINS as f64;
    let mut table = vec![f32::INFINITY; SHADOW_BINS];
    for b in blocks {
        let x0 = origin.x + b.c0 as f64 * res;
        let x1 = origin.x + (b.c1 + 1) as f64 * res;
        let y0 = origin.y + b.r0 as f64 * res;
        let y1 = origin.y + (b.r1 + 1) as f64 * res;
        let (sx0, sx1, sy0, sy1) = (x0 + shrink, x1 - shrink, y0 + shrink, y1 - shrink);
        if s.x >= x0 && s.x <= x1 && s.y >= y0 && s.y <= y1 {
            continue;
        }
        let center = Vec2::new(0.5 * (sx0 + sx1), 0.5 * (sy0 + sy1)) - s;
        let mid = center.angle();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in [(sx0, sy0), (sx1, sy0), (sx1, sy1), (sx0, sy1)] {
            let a = crate::geometry::wrap_pi(Vec2::new(x - s.x, y - s.y).angle() - mid);
            lo = lo.min(a);
            hi = hi.max(a);
        }
        let far = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
            .iter()
            .map(|&(x, y)| Vec2::new(x - s.x, y - s.y).norm())
            .fold(0.0, f64::max);
        let first = ((mid + lo) / width).ceil() as i64;
        let last = ((mid + hi) / width).floor() as i64 - 1;
        let far = far as f32;
        for bin in first..=last {
            let slot = &mut table[bin.rem_euclid(SHADOW_BINS as i64) as usize];
            if far < *slot {
                *slot = far;
            }
        }
    }
    table
}

/// Tiles the non-free cells with rectangles, then cuts them into blocks of
/// at most `CHUNK + 1` cells per side that overlap their neighbors by one cell.
fn tile_blocked(free: &[bool], w: usize, h: usize) -> Vec<CellRange> {
    let mut rects: Vec<CellRange> = Vec::new();
    let mut open: HashMap<(i64, i64), usize> = HashMap::new();
    for r in 0..h {
        let mut next = HashMap::new();
        let mut c = 0;
        while c < w {
            if free[r * w + c] {
                c += 1;
                continue;
            }
            let start = c;
            while c < w && !free[r * w + c] {
                c += 1;
            }
            let key = (start as i64, c as i64 - 1);
            let idx = match open.get(&key) {
                Some(&i) => {
                    rects[i].r1 = r as i64;
                    i
                }
                None => {
                    rects.push(CellRange {
                        c0: key.0,
                        r0: r as i64,
                        c1: key.1,
                        r1: r as i64,
                    });
                    rects.len() - 1
                }
            };
            next.insert(key, idx);
        }
        open = next;
    }
    let split = |a: i64, b: i64| -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        let mut s = a;
        loop {
            let e = (s + CHUNK).min(b);
            out.push((s, e));
            if e == b {
                break;
            }
            s += CHUNK;
        }
        out
    };
    let mut blocks = Vec::new();
    for r in rects {
        for &(c0, c1) in &split(r.c0, r.c1) {
            for &(r0, r1) in &split(r.r0, r.r1) {
                blocks.push(CellRange { c0, r0, c1, r1 });
            }
        }
    }
    blocks
}
