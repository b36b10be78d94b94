//! Decision-boundary rasters over a 2-D input box.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::netcore::{Matrix, Network};

pub const DEFAULT_RESOLUTION: usize = 300;

/// Fractional margin added around the data extent by [`Bounds::fit`].
pub const FIT_MARGIN: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        let ok = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite())
            && x_min < x_max
            && y_min < y_max;
        if !ok {
            return Err(param(format!("degenerate raster bounds {b:?}")));
        }
        Ok(b)
    }

    /// Extent of `points` padded by [`FIT_MARGIN`] of its width on each side.
    pub fn fit(points: &Matrix) -> Result<Self> {
        if points.cols() != 2 || points.rows() == 0 {
            return Err(param(format!(
                "cannot fit bounds to a {:?} point set",
                points.shape()
            )));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points.iter_rows() {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let pad = |d: usize| FIT_MARGIN * (hi[d] - lo[d]).max(1e-6);
        Self::new(
            lo[0] - pad(0),
            hi[0] + pad(0),
            lo[1] - pad(1),
            hi[1] + pad(1),
        )
    }
}

/// Row-major class grid. Row 0 is `y_min`, column 0 is `x_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRaster {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub resolution: usize,
    pub cells: Vec<usize>,
}

impl BoundaryRaster {
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.cells[row * self.resolution + col]
    }
}

fn center(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    lo + (hi - lo) * (i as f64 + 0.5) / n as f64
}

/// Predicted class at every cell center.
pub fn rasterize_boundary(
    net: &Network,
    bounds: Bounds,
    resolution: usize,
) -> Result<BoundaryRaster> {
    if resolution < 2 {
        return Err(param(format!(
            "raster resolution must be at least 2, got {resolution}"
        )));
    }
    let b = Bounds::new(bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max)?;
    if net.input_dim() != 2 {
        return Err(param(format!(
            "rasters need a 2-D input network, got {}",
            net.input_dim()
        )));
    }
    let mut cells = Vec::with_capacity(resolution * resolution);
    for row in 0..resolution {
        let y = center(b.y_min, b.y_max, row, resolution);
        let mut grid = Vec::with_capacity(2 * resolution);
        for col in 0..resolution {
            grid.push(center(b.x_min, b.x_max, col, resolution));
            grid.push(y);
        }
        cells.extend(net.predict(&Matrix::from_vec(resolution, 2, grid)?)?);
    }
    Ok(BoundaryRaster {
        x_min: b.x_min,
        x_max: b.x_max,
        y_min: b.y_min,
        y_max: b.y_max,
        resolution,
        cells,
    })
}
