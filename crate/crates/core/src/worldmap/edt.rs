//! Exact Euclidean distance transform of an occupancy grid.
//!
//! Uses the separable lower-envelope-of-parabolas algorithm, run on integer
//! squared cell distances so the result is exact: every cell ends up with
//! `sqrt(d²) · resolution` where `d²` is the true minimum squared cell
//! distance to a non-free cell.

use crate::error::MapError;
use crate::geometry::{Pose2D, Vec2};
use crate::worldmap::grid::{CellState, OccupancyGrid};

/// Marks "no obstacle seen yet".
const FAR: i64 = i64::MAX / 4;

/// Per-cell distance (meters) to the nearest non-free cell, truncated at `r_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    r_max: f64,
    dist: Vec<f64>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn resolution(&self) -> f64 {
        self.resolution
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn values(&self) -> &[f64] {
        &self.dist
    }

    pub fn at_cell(&self, col: usize, row: usize) -> f64 {
        self.dist[row * self.width + col]
    }

    /// Distance at a world point; anything off the grid reads as `r_max`.
    #[inline]
    pub fn at_world(&self, p: Vec2) -> f64 {
        let c = ((p.x - self.origin.x) / self.resolution).floor();
        let r = ((p.y - self.origin.y) / self.resolution).floor();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return self.r_max;
        }
        self.dist[r as usize * self.width + c as usize]
    }
}

/// Computes the truncated distance field. Unknown cells count as obstacles.
pub fn compute_distance_field(grid: &OccupancyGrid, r_max: f64) -> Result<DistanceField, MapError> {
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(MapError::BadRange(r_max));
    }
    let sq = squared_cell_distances(grid);
    let res = grid.resolution();
    let dist = sq
        .iter()
        .map(|&d2| {
            if d2 >= FAR {
                r_max
            } else {
                ((d2 as f64).sqrt() * res).min(r_max)
            }
        })
        .collect();
    Ok(DistanceField {
        width: grid.width(),
        height: grid.height(),
        resolution: res,
        origin: grid.origin(),
        r_max,
        dist,
    })
}

/// Squared distance in cell units to the nearest non-free cell, `FAR` if none.
fn squared_cell_distances(grid: &OccupancyGrid) -> Vec<i64> {
    let (w, h) = (grid.width(), grid.height());
    let mut buf: Vec<i64> = grid
        .cells()
        .iter()
        .map(|c| if *c == CellState::Free { FAR } else { 0 })
        .collect();

    let mut env = Envelope::with_capacity(w.max(h));
    let mut line = vec![0i64; w.max(h)];
    let mut out = vec![0i64; w.max(h)];

    for col in 0..w {
        for row in 0..h {
            line[row] = buf[row * w + col];
        }
        env.transform(&line[..h], &mut out[..h]);
        for row in 0..h {
            buf[row * w + col] = out[row];
        }
    }
    for row in 0..h {
        let span = row * w..(row + 1) * w;
        line[..w].copy_from_slice(&buf[span.clone()]);
        env.transform(&line[..w], &mut out[..w]);
        buf[span].copy_from_slice(&out[..w]);
    }
    buf
}

/// Scratch space for the 1D lower-envelope pass.
struct Envelope {
    /// Apex positions of the parabolas in the envelope.
    apex: Vec<i64>,
    /// Left boundary of each parabola as a fraction `num / den` (den > 0);
    /// the first entry is unused (−∞).
    bound: Vec<(i128, i128)>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            apex: Vec::with_capacity(n),
            bound: Vec::with_capacity(n),
        }
    }

    fn transform(&mut self, f: &[i64], out: &mut [i64]) {
        self.apex.clear();
        self.bound.clear();
        for (q, &fq) in f.iter().enumerate() {
            if fq >= FAR {
                continue;
            }
            let q = q as i64;
            loop {
                let Some(&p) = self.apex.last() else {
                    self.apex.push(q);
                    self.bound.push((0, 1));
                    break;
                };
                let fp = f[p as usize];
                let num = i128::from(fq + q * q) - i128::from(fp + p * p);
                let den = 2 * i128::from(q - p);
                let k = self.apex.len() - 1;
                if k > 0 {
                    let (zn, zd) = self.bound[k];
                    if num * zd <= zn * den {
                        self.apex.pop();
                        self.bound.pop();
                        continue;
                    }
                }
                self.apex.push(q);
                self.bound.push((num, den));
                break;
            }
        }
        if self.apex.is_empty() {
            out.fill(FAR);
            return;
        }
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            let q = q as i128;
            while k + 1 < self.apex.len() {
                let (zn, zd) = self.bound[k + 1];
                if zn < q * zd {
                    k += 1;
                } else {
                    break;
                }
            }
            let v = self.apex[k];
            let d = q as i64 - v;
            let fv = f[v as usize];
            *o = d * d + fv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(grid: &OccupancyGrid, r_max: f64) -> Vec<f64> {
        let (w, h) = (grid.width(), grid.height());
        let obstacles: Vec<(i64, i64)> = (0..h)
            .flat_map(|r| (0..w).map(move |c| (c, r)))
            .filter(|&(c, r)| grid.get(c, r) != CellState::Free)
            .map(|(c, r)| (c as i64, r as i64))
            .collect();
        let mut out = Vec::with_capacity(w * h);
        for r in 0..h as i64 {
            for c in 0..w as i64 {
                let best = obstacles
                    .iter()
                    .map(|&(oc, or)| (oc - c).pow(2) + (or - r).pow(2))
                    .min();
                out.push(match best {
                    Some(d2) => ((d2 as f64).sqrt() * grid.resolution()).min(r_max),
                    None => r_max,
                });
            }
        }
        out
    }

    fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> OccupancyGrid {
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
        OccupancyGrid::from_cells(w, h, 0.05, Pose2D::default(), cells).unwrap()
    }

    #[test]
    fn occupied_cell_is_zero() {
        let mut g = OccupancyGrid::new(5, 5, 0.05, Pose2D::default(), CellState::Free).unwrap();
        g.set(2, 2, CellState::Occupied);
        let f = compute_distance_field(&g, 15.0).unwrap();
        assert_eq!(f.at_cell(2, 2), 0.0);
        assert_eq!(f.at_cell(4, 2), 0.1);
    }

    #[test]
    fn empty_map_is_truncated() {
        let g = OccupancyGrid::new(7, 3, 0.05, Pose2D::default(), CellState::Free).unwrap();
        let f = compute_distance_field(&g, 15.0).unwrap();
        assert!(f.values().iter().all(|&d| d == 15.0));
    }

    #[test]
    fn truncation_applies() {
        let mut g = OccupancyGrid::new(40, 1, 1.0, Pose2D::default(), CellState::Free).unwrap();
        g.set(0, 0, CellState::Occupied);
        let f = compute_distance_field(&g, 15.0).unwrap();
        assert_eq!(f.at_cell(10, 0), 10.0);
        assert_eq!(f.at_cell(30, 0), 15.0);
    }

    #[test]
    fn unknown_counts_as_obstacle() {
        let mut g = OccupancyGrid::new(3, 1, 1.0, Pose2D::default(), CellState::Free).unwrap();
        g.set(0, 0, CellState::Unknown);
        let f = compute_distance_field(&g, 15.0).unwrap();
        assert_eq!(f.values(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn rejects_non_positive_range() {
        let g = OccupancyGrid::new(2, 2, 0.05, Pose2D::default(), CellState::Free).unwrap();
        assert!(compute_distance_field(&g, 0.0).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..25 {
            let w = rng.random_range(1..=40);
            let h = rng.random_range(1..=40);
            let density = rng.random_range(0.0..0.3);
            let g = random_grid(&mut rng, w, h, density);
            let f = compute_distance_field(&g, 1.0).unwrap();
            assert_eq!(f.values(), brute_force(&g, 1.0).as_slice());
        }
    }

    #[test]
    fn neighbors_are_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_grid(&mut rng, 32, 24, 0.05);
        let f = compute_distance_field(&g, 15.0).unwrap();
        let bound = g.resolution() * 2f64.sqrt() + 1e-12;
        for r in 0..24 {
            for c in 0..32 {
                for (dc, dr) in [(1i64, 0i64), (0, 1), (1, 1), (1, -1)] {
                    let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                    if g.in_bounds(nc, nr) {
                        let d = (f.at_cell(c, r) - f.at_cell(nc as usize, nr as usize)).abs();
                        assert!(d <= bound);
                    }
                }
            }
        }
    }

    #[test]
    fn off_grid_reads_r_max() {
        let g = OccupancyGrid::new(2, 2, 0.05, Pose2D::default(), CellState::Occupied).unwrap();
        let f = compute_distance_field(&g, 3.0).unwrap();
        assert_eq!(f.at_world(Vec2::new(-1.0, 0.0)), 3.0);
        assert_eq!(f.at_world(Vec2::new(0.01, 0.01)), 0.0);
    }
}
