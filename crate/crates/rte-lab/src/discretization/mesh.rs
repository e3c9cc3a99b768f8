use crate::{Error, Result};

/// Uniform rectangular mesh of a 2D box domain.
///
/// Cells are indexed `i = iy * nx + ix` with `ix` increasing along x.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Mesh2D {
    pub fn new(domain: [f64; 4], nx: usize, ny: usize) -> Result<Self> {
        let [x_min, x_max, y_min, y_max] = domain;
        if nx == 0 || ny == 0 {
            return Err(Error::Config(format!("mesh needs nx, ny >= 1, got ({nx}, {ny})")));
        }
        if !(x_max > x_min && y_max > y_min) {
            return Err(Error::Config(format!(
                "degenerate domain [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Mesh2D { x_min, x_max, y_min, y_max, nx, ny })
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    #[inline]
    pub fn cell_index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        iy * self.nx + ix
    }

    #[inline]
    pub fn cell_coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn cell_center(&self, cell: usize) -> (f64, f64) {
        let (ix, iy) = self.cell_coords(cell);
        (
            self.x_min + (ix as f64 + 0.5) * self.hx(),
            self.y_min + (iy as f64 + 0.5) * self.hy(),
        )
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> (f64, f64) {
        let (ix, iy) = self.cell_coords(cell);
        (self.x_min + ix as f64 * self.hx(), self.y_min + iy as f64 * self.hy())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let m = Mesh2D::new([0.0, 5.0, 0.0, 5.0], 4, 3).unwrap();
        assert_eq!(m.n_cells(), 12);
        for cell in 0..m.n_cells() {
            let (ix, iy) = m.cell_coords(cell);
            assert_eq!(m.cell_index(ix, iy), cell);
        }
        assert_eq!(m.hx(), 1.25);
        let (cx, cy) = m.cell_center(0);
        assert!((cx - 0.625).abs() < 1e-15 && (cy - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Mesh2D::new([0.0, 1.0, 0.0, 1.0], 0, 2).is_err());
        assert!(Mesh2D::new([1.0, 1.0, 0.0, 1.0], 2, 2).is_err());
    }
}
