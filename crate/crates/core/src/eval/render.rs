use image::{Rgb, RgbImage};

use crate::geometry::{Pose2D, Vec2};
use crate::mcl::ParticleSet;
use crate::worldmap::{CellState, OccupancyGrid, SemanticWorldMap};

pub const PARTICLE: Rgb<u8> = Rgb([0, 170, 0]);
pub const OBJECT: Rgb<u8> = Rgb([60, 110, 230]);
pub const ESTIMATE: Rgb<u8> = Rgb([230, 140, 0]);
pub const TRUTH: Rgb<u8> = Rgb([220, 0, 0]);

/// One pixel per grid cell, north up. Layers are drawn in order: map,
/// object outlines, particles, estimate (+ marker), truth (x marker).
pub fn render_frame(
    grid: &OccupancyGrid,
    map: &SemanticWorldMap,
    particles: &ParticleSet,
    estimate: Option<&Pose2D>,
    truth: Option<&Pose2D>,
) -> RgbImage {
    let (w, h) = (grid.width(), grid.height());
    let mut img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        match grid.get(x as usize, h - 1 - y as usize) {
            CellState::Free => Rgb([255, 255, 255]),
            CellState::Occupied => Rgb([0, 0, 0]),
            CellState::Unknown => Rgb([160, 160, 160]),
        }
    });
    let pixel = |p: Vec2| -> Option<(i64, i64)> {
        let (c, r) = grid.world_to_cell_unchecked(p.x, p.y);
        grid.in_bounds(c, r).then_some((c, h as i64 - 1 - r))
    };
    let put = |img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>| {
        if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
            img.put_pixel(x as u32, y as u32, color);
        }
    };
    for o in map.objects() {
        let (c0, r0) = grid.world_to_cell_unchecked(o.rect.min_x(), o.rect.min_y());
        let (c1, r1) = grid.world_to_cell_unchecked(o.rect.max_x(), o.rect.max_y());
        for c in c0..=c1 {
            for r in [r0, r1] {
                put(&mut img, c, h as i64 - 1 - r, OBJECT);
            }
        }
        for r in r0..=r1 {
            for c in [c0, c1] {
                put(&mut img, c, h as i64 - 1 - r, OBJECT);
            }
        }
    }
    for p in &particles.particles {
        if let Some((x, y)) = pixel(p.pose.position()) {
            put(&mut img, x, y, PARTICLE);
        }
    }
    if let Some((x, y)) = estimate.and_then(|e| pixel(e.position())) {
        for d in -3..=3 {
            put(&mut img, x + d, y, ESTIMATE);
            put(&mut img, x, y + d, ESTIMATE);
        }
    }
    if let Some((x, y)) = truth.and_then(|t| pixel(t.position())) {
        for d in -3..=3 {
            put(&mut img, x + d, y + d, TRUTH);
            put(&mut img, x + d, y - d, TRUTH);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcl::Particle;
    use sha2::{Digest, Sha256};

    fn setup() -> (OccupancyGrid, SemanticWorldMap) {
        let mut g = OccupancyGrid::new(40, 30, 0.05, Pose2D::default(), CellState::Free).unwrap();
        for c in 0..40 {
            g.set(c, 0, CellState::Occupied);
        }
        g.set(5, 5, CellState::Unknown);
        let m = SemanticWorldMap::from_json(
            r#"{"class_vocabulary": ["desk"], "objects": [{"class": "desk", "rect": {"cx": 1.0, "cy": 1.0, "w": 0.3, "h": 0.2}}]}"#,
        )
        .unwrap();
        (g, m)
    }

    #[test]
    fn empty_particles_render_only_the_map() {
        let (g, m) = setup();
        let empty = ParticleSet { particles: vec![] };
        let img = render_frame(&g, &m, &empty, None, None);
        assert_eq!(img.dimensions(), (40, 30));
        assert!(img.pixels().all(|p| *p != PARTICLE && *p != TRUTH && *p != ESTIMATE));
        assert_eq!(*img.get_pixel(3, 29), Rgb([0, 0, 0]));
        assert_eq!(*img.get_pixel(5, 24), Rgb([160, 160, 160]));
        assert!(img.pixels().any(|p| *p == OBJECT));
    }

    #[test]
    fn markers_coincide_for_a_particle_at_truth() {
        let (g, m) = setup();
        let truth = Pose2D::new(0.62, 0.88, 0.0);
        let set = ParticleSet { particles: vec![Particle { pose: truth, weight: 1.0 }] };
        let img = render_frame(&g, &m, &set, Some(&truth), Some(&truth));
        let (c, r) = g.world_to_cell(truth.x, truth.y).unwrap();
        let (x, y) = (c as u32, (29 - r) as u32);
        // Truth is drawn last, on top of the particle and the estimate.
        assert_eq!(*img.get_pixel(x, y), TRUTH);
        assert_eq!(*img.get_pixel(x + 1, y), ESTIMATE);
        assert_eq!(*img.get_pixel(x + 1, y + 1), TRUTH);
    }

    #[test]
    fn rendering_is_deterministic() {
        let (g, m) = setup();
        let set = ParticleSet {
            particles: (0..50).map(|k| Particle { pose: Pose2D::new(0.03 * k as f64, 0.5 + 0.01 * k as f64, 0.0), weight: 0.02 }).collect(),
        };
        let hash = || hex::encode(Sha256::digest(render_frame(&g, &m, &set, Some(&Pose2D::new(1.0, 0.7, 0.0)), None).as_raw()));
        assert_eq!(hash(), hash());
    }
}
