//! Unit-cell geometry: a square cell of side `L` holding one closed membrane
//! curve (circle or rotated ellipse).

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellShape {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    /// Side length `L` of the square unit cell (m).
    pub cell_size: f64,
    pub shape: CellShape,
    /// Rotation of the cell inside the unit cell (rad), in `[0, pi)`.
    pub lattice_angle: f64,
    /// Offset of the cell center from the unit-cell center (m).
    pub center_offset: [f64; 2],
}

impl CellGeometry {
    pub fn circle(cell_size: f64, radius: f64) -> Self {
        Self {
            cell_size,
            shape: CellShape::Circle { radius },
            lattice_angle: 0.0,
            center_offset: [0.0, 0.0],
        }
    }

    pub fn ellipse(cell_size: f64, a: f64, b: f64, lattice_angle: f64) -> Self {
        Self {
            cell_size,
            shape: CellShape::Ellipse { a, b },
            lattice_angle,
            center_offset: [0.0, 0.0],
        }
    }

    /// Ellipse with aspect ratio `a/b` and the given volume fraction.
    pub fn ellipse_with_fraction(cell_size: f64, aspect: f64, fraction: f64, angle: f64) -> Self {
        let ab = fraction * cell_size * cell_size / PI;
        let a = (aspect * ab).sqrt();
        Self::ellipse(cell_size, a, a / aspect, angle)
    }

    /// The same shape uniformly scaled so that `|Y_i|/|Y| = fraction`.
    pub fn scaled_to_fraction(&self, fraction: f64) -> Self {
        let s = (fraction / self.volume_fraction()).sqrt();
        let shape = match self.shape {
            CellShape::Circle { radius } => CellShape::Circle { radius: radius * s },
            CellShape::Ellipse { a, b } => CellShape::Ellipse { a: a * s, b: b * s },
        };
        Self { shape, ..*self }
    }

    pub fn semi_axes(&self) -> (f64, f64) {
        match self.shape {
            CellShape::Circle { radius } => (radius, radius),
            CellShape::Ellipse { a, b } => (a, b),
        }
    }

    pub fn is_circle(&self) -> bool {
        let (a, b) = self.semi_axes();
        a == b
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * self.cell_size + self.center_offset[0],
            0.5 * self.cell_size + self.center_offset[1],
        ]
    }

    pub fn area(&self) -> f64 {
        let (a, b) = self.semi_axes();
        PI * a * b
    }

    pub fn volume_fraction(&self) -> f64 {
        self.area() / (self.cell_size * self.cell_size)
    }

    /// Half extents of the axis-aligned bounding box of the rotated cell.
    pub fn half_extents(&self) -> [f64; 2] {
        let (a, b) = self.semi_axes();
        let (s, c) = self.lattice_angle.sin_cos();
        [
            (a * a * c * c + b * b * s * s).sqrt(),
            (a * a * s * s + b * b * c * c).sqrt(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.semi_axes();
        if !(self.cell_size > 0.0) {
            return Err(Error::InvalidGeometry(format!("cell size {} must be positive", self.cell_size)));
        }
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidGeometry(format!("semi-axes ({a}, {b}) must be positive")));
        }
        if !(0.0..PI).contains(&self.lattice_angle) {
            return Err(Error::InvalidGeometry(format!(
                "lattice angle {} outside [0, pi)",
                self.lattice_angle
            )));
        }
        let c = self.center();
        let e = self.half_extents();
        let gap = (0..2)
            .map(|i| (c[i] - e[i]).min(self.cell_size - c[i] - e[i]))
            .fold(f64::INFINITY, f64::min);
        if gap <= 0.0 {
            return Err(Error::CellIntersectsBoundary(format!(
                "distance from cell to unit-cell boundary is {gap:e}"
            )));
        }
        let f = self.volume_fraction();
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidGeometry(format!("volume fraction {f} outside (0, 1)")));
        }
        Ok(())
    }

    /// Point on the membrane at ellipse parameter `t`.
    pub fn point_at(&self, t: f64) -> [f64; 2] {
        let (a, b) = self.semi_axes();
        let (s, c) = self.lattice_angle.sin_cos();
        let (x, y) = (a * t.cos(), b * t.sin());
        let ctr = self.center();
        [ctr[0] + c * x - s * y, ctr[1] + s * x + c * y]
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        let (a, b) = self.semi_axes();
        (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
    }

    pub fn curvature_radius_at(&self, t: f64) -> f64 {
        let (a, b) = self.semi_axes();
        self.speed_at(t).powi(3) / (a * b)
    }

    pub fn min_curvature_radius(&self) -> f64 {
        let (a, b) = self.semi_axes();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        lo * lo / hi
    }

    /// Perimeter by composite midpoint quadrature of the parametric speed.
    pub fn perimeter(&self) -> f64 {
        if let CellShape::Circle { radius } = self.shape {
            return 2.0 * PI * radius;
        }
        let n = 4096;
        let dt = 2.0 * PI / n as f64;
        (0..n).map(|i| self.speed_at((i as f64 + 0.5) * dt)).sum::<f64>() * dt
    }

    /// Coordinates of `p` in the cell's own frame (center at origin, axes aligned).
    fn local(&self, p: [f64; 2]) -> [f64; 2] {
        let c = self.center();
        let (s, co) = self.lattice_angle.sin_cos();
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        [co * dx + s * dy, -s * dx + co * dy]
    }

    /// Implicit level value: `< 1` inside the cell, `> 1` outside.
    pub fn level(&self, p: [f64; 2]) -> f64 {
        let (a, b) = self.semi_axes();
        let q = self.local(p);
        (q[0] / a).powi(2) + (q[1] / b).powi(2)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.level(p) < 1.0
    }
}

/// Polar angle of `p` about `center`, in `[0, 2 pi)`.
pub fn arc_angle(center: [f64; 2], p: [f64; 2]) -> f64 {
    let t = (p[1] - center[1]).atan2(p[0] - center[0]);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_circle_fraction() {
        let g = CellGeometry::circle(2e-4, 0.5e-4);
        assert!((g.volume_fraction() - PI / 16.0).abs() < 1e-15);
        g.validate().unwrap();
    }

    #[test]
    fn touching_boundary_is_rejected() {
        let g = CellGeometry::circle(2e-4, 1e-4);
        assert!(matches!(g.validate(), Err(Error::CellIntersectsBoundary(_))));
        let g = CellGeometry::ellipse(2e-4, 0.99e-4, 0.2e-4, 0.0);
        g.validate().unwrap();
        let g = CellGeometry { center_offset: [0.02e-4, 0.0], ..g };
        assert!(g.validate().is_err());
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(CellGeometry::circle(2e-4, -1e-5).validate().is_err());
        assert!(CellGeometry::ellipse(2e-4, 3e-5, 2e-5, PI).validate().is_err());
    }

    #[test]
    fn ellipse_with_fraction_hits_target() {
        let g = CellGeometry::ellipse_with_fraction(2e-4, 3.0, 0.1, 0.3);
        assert!((g.volume_fraction() - 0.1).abs() < 1e-14);
        let (a, b) = g.semi_axes();
        assert!((a / b - 3.0).abs() < 1e-12);
        let h = g.scaled_to_fraction(0.2);
        assert!((h.volume_fraction() - 0.2).abs() < 1e-14);
    }

    #[test]
    fn ellipse_perimeter_matches_ramanujan() {
        let g = CellGeometry::ellipse(1.0, 0.3, 0.1, 0.0);
        let (a, b) = (0.3f64, 0.1f64);
        let h = ((a - b) / (a + b)).powi(2);
        let ram = PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
        assert!((g.perimeter() - ram).abs() / ram < 1e-4);
    }

    #[test]
    fn points_lie_on_the_curve() {
        let g = CellGeometry::ellipse(1.0, 0.3, 0.1, 0.7);
        for i in 0..16 {
            let p = g.point_at(i as f64 * 0.4);
            assert!((g.level(p) - 1.0).abs() < 1e-12);
        }
    }
}
