use crate::geom::{Bounds, ConvexPolygon, Segment, Vec2};

use super::WorldError;

/// Walls and obstacle edges as line segments, plus the regions where GPS
/// has a fix.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub segments: Vec<Segment>,
    pub gps_regions: Vec<ConvexPolygon>,
    pub bounds: Bounds,
}

impl WorldModel {
    pub fn new(
        segments: Vec<Segment>,
        gps_regions: Vec<ConvexPolygon>,
        bounds: Bounds,
    ) -> Result<Self, WorldError> {
        let w = Self { segments, gps_regions, bounds };
        w.validate()?;
        Ok(w)
    }

    pub fn empty(bounds: Bounds) -> Self {
        Self { segments: Vec::new(), gps_regions: Vec::new(), bounds }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        for (i, s) in self.segments.iter().enumerate() {
            let finite = [s.a.x, s.a.y, s.b.x, s.b.y].iter().all(|v| v.is_finite());
            if !finite {
                return Err(WorldError::InvalidWorld(format!("segment {i} is not finite")));
            }
            if s.length() <= 1e-6 {
                return Err(WorldError::InvalidWorld(format!("segment {i} is degenerate")));
            }
        }
        if !(self.bounds.width() > 0.0 && self.bounds.height() > 0.0) {
            return Err(WorldError::InvalidWorld("bounds are empty".into()));
        }
        Ok(())
    }

    /// Adds the four edges of an axis-aligned box.
    pub fn add_box(&mut self, min: Vec2, max: Vec2) {
        let c = [min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)];
        for i in 0..4 {
            self.segments.push(Segment::new(c[i], c[(i + 1) % 4]));
        }
    }

    /// Distance from `p` to the nearest segment; infinite in an empty world.
    pub fn clearance(&self, p: Vec2) -> f64 {
        self.segments
            .iter()
            .map(|s| s.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn gps_available(&self, p: Vec2) -> bool {
        self.gps_regions.iter().any(|r| r.contains(p))
    }

    /// Nearest hit along a ray, if any segment is crossed.
    pub fn raycast(&self, origin: Vec2, angle: f64) -> Option<f64> {
        let dir = Vec2::from_angle(angle);
        self.segments
            .iter()
            .filter_map(|s| s.ray_hit(origin, dir))
            .min_by(f64::total_cmp)
    }

    pub fn mirrored_y(&self) -> WorldModel {
        WorldModel {
            segments: self.segments.iter().map(Segment::mirrored_y).collect(),
            gps_regions: self
                .gps_regions
                .iter()
                .map(|r| ConvexPolygon::new(r.vertices.iter().map(|v| Vec2::new(v.x, -v.y)).collect()))
                .collect(),
            bounds: Bounds::new(
                Vec2::new(self.bounds.min.x, -self.bounds.max.y),
                Vec2::new(self.bounds.max.x, -self.bounds.min.y),
            ),
        }
    }
}
