//! Brute-force oracles and random fixtures shared by the integration tests.
#![allow(dead_code)]

use floorloc::geometry::{angle_diff, Pose2D, Rect, Vec2};
use floorloc::worldmap::{
    CellState, OccupancyGrid, SemanticMapDocument, SemanticObject, SemanticWorldMap,
    VisibilityIndex,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Distance to the nearest non-free cell by exhaustive search, truncated.
pub fn brute_force_edt(grid: &OccupancyGrid, r_max: f64) -> Vec<f64> {
    let (w, h) = (grid.width(), grid.height());
    let mut obstacles = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if grid.get(c, r) != CellState::Free {
                obstacles.push((c as i64, r as i64));
            }
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            let best = obstacles
                .iter()
                .map(|&(oc, or)| (oc - c) * (oc - c) + (or - r) * (or - r))
                .min();
            out.push(match best {
                Some(d2) => ((d2 as f64).sqrt() * grid.resolution()).min(r_max),
                None => r_max,
            });
        }
    }
    out
}

pub fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize, res: f64) -> OccupancyGrid {
    let density = rng.random_range(0.0..0.35);
    let cells = (0..w * h)
        .map(|_| {
            let u: f64 = rng.random();
            if u < density * 0.8 {
                CellState::Occupied
            } else if u < density {
                CellState::Unknown
            } else {
                CellState::Free
            }
        })
        .collect();
    OccupancyGrid::from_cells(w, h, res, Pose2D::default(), cells).unwrap()
}

/// A walled world with random wall segments, unknown blobs and up to five
/// objects of three classes (one of them dynamic).
pub fn random_world(seed: u64, size: usize) -> (OccupancyGrid, SemanticWorldMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = 0.05;
    let origin = Pose2D::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0);
    let mut grid = OccupancyGrid::new(size, size, res, origin, CellState::Free).unwrap();
    let n_walls = rng.random_range(2..7);
    for _ in 0..n_walls {
        let horizontal: bool = rng.random();
        let len = rng.random_range(5..size);
        let thick = rng.random_range(1..3);
        let c0 = rng.random_range(0..size);
        let r0 = rng.random_range(0..size);
        for a in 0..len {
            for t in 0..thick {
                let (c, r) = if horizontal { (c0 + a, r0 + t) } else { (c0 + t, r0 + a) };
                if c < size && r < size {
                    grid.set(c, r, CellState::Occupied);
                }
            }
        }
    }
    for _ in 0..rng.random_range(0..3) {
        let c0 = rng.random_range(0..size - 3);
        let r0 = rng.random_range(0..size - 3);
        for c in c0..c0 + 3 {
            for r in r0..r0 + 3 {
                grid.set(c, r, CellState::Unknown);
            }
        }
    }
    let classes = ["desk", "sink", "person"];
    let (x0, y0, x1, y1) = grid.bounds();
    let objects = (0..rng.random_range(1..=5))
        .map(|_| {
            let class = classes[rng.random_range(0..classes.len())];
            let w = rng.random_range(0.05..0.8);
            let h = rng.random_range(0.05..0.8);
            // Some objects poke over the map edge.
            let cx = rng.random_range(x0 - 0.1..x1 + 0.1);
            let cy = rng.random_range(y0 - 0.1..y1 + 0.1);
            SemanticObject {
                class_label: class.to_string(),
                rect: Rect::new(cx, cy, w, h),
            }
        })
        .collect();
    let map = SemanticWorldMap::new(SemanticMapDocument {
        class_vocabulary: classes.iter().map(|s| s.to_string()).collect(),
        dynamic_classes: vec!["person".into()],
        room_categories: None,
        objects,
        rooms: vec![],
    })
    .unwrap();
    (grid, map)
}

/// Straight ray-march visibility oracle: per (cell, class), the exact
/// bearing angles of every reachable perimeter sample.
pub fn visibility_oracle(
    grid: &OccupancyGrid,
    map: &SemanticWorldMap,
) -> Vec<Vec<Vec<f64>>> {
    let res = grid.resolution();
    let o = grid.origin();
    let step = res / 4.0;
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let n_classes = map.class_vocabulary().len();
    let mut out = vec![vec![Vec::new(); n_classes]; grid.len()];
    for obj in map.objects() {
        if map.is_dynamic(&obj.class_label) {
            continue;
        }
        let k = map.class_index(&obj.class_label).unwrap();
        let r = obj.rect;
        let touches = |c: i64, row: i64| {
            let (cx0, cx1) = (o.x + c as f64 * res, o.x + (c + 1) as f64 * res);
            let (cy0, cy1) = (o.y + row as f64 * res, o.y + (row + 1) as f64 * res);
            cx0 <= r.max_x() && cx1 >= r.min_x() && cy0 <= r.max_y() && cy1 >= r.min_y()
        };
        let blocks = |c: i64, row: i64| {
            if c < 0 || row < 0 || c >= w || row >= h {
                return true;
            }
            grid.get(c as usize, row as usize) != CellState::Free && !touches(c, row)
        };
        let samples = r.perimeter_samples(res);
        for row in 0..grid.height() {
            for col in 0..grid.width() {
                if grid.get(col, row) != CellState::Free {
                    continue;
                }
                let c = Vec2::new(o.x + (col as f64 + 0.5) * res, o.y + (row as f64 + 0.5) * res);
                for &s in &samples {
                    let d = s - c;
                    let len = d.norm();
                    if len == 0.0 {
                        continue;
                    }
                    let n = (len / step).floor() as usize;
                    let clear = (1..=n).all(|kk| {
                        let p = c + d * (kk as f64 * step / len);
                        let pc = ((p.x - o.x) / res).floor() as i64;
                        let pr = ((p.y - o.y) / res).floor() as i64;
                        !blocks(pc, pr)
                    });
                    if clear {
                        out[grid.index(col, row)][k].push(d.y.atan2(d.x));
                    }
                }
            }
        }
    }
    out
}

/// Compares an index against the oracle; returns (missing, spurious, bearing mismatches).
pub fn compare_with_oracle(
    index: &VisibilityIndex,
    oracle: &[Vec<Vec<f64>>],
    angular_resolution: f64,
) -> (usize, usize, usize) {
    let (mut missing, mut spurious, mut far) = (0, 0, 0);
    for (cell, per_class) in oracle.iter().enumerate() {
        for (k, truth) in per_class.iter().enumerate() {
            let set = index.bearings_at_cell(cell, k);
            match (truth.is_empty(), set.is_empty()) {
                (false, true) => missing += 1,
                (true, false) => spurious += 1,
                (true, true) => {}
                (false, false) => {
                    let stored: Vec<f64> = set.bins().map(|b| set.bin_angle(b)).collect();
                    let near = |a: f64, pool: &[f64]| {
                        pool.iter().any(|&b| angle_diff(a, b).abs() <= angular_resolution)
                    };
                    far += stored.iter().filter(|&&a| !near(a, truth)).count();
                    far += truth.iter().filter(|&&a| !near(a, &stored)).count();
                }
            }
        }
    }
    (missing, spurious, far)
}
