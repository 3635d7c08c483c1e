use crate::{Error, Result};

/// One raster frame on an equal-angle grid. Values are row-major with
/// the northmost row first; the bounds are the outer cell edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFrame {
    /// ISO-8601 UTC timestamp, e.g. "2013-01-01T00:00:00Z".
    pub timestamp: String,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
    /// Set once the frame has been divided by 255; the division is not
    /// idempotent, so the pipeline consults this before rescaling.
    pub scaled: bool,
}

impl GridFrame {
    pub fn new(
        timestamp: impl Into<String>,
        (lat_min, lat_max): (f64, f64),
        (lon_min, lon_max): (f64, f64),
        height: usize,
        width: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        if !(lat_min < lat_max && lon_min < lon_max) {
            return Err(Error::InvalidInput(format!(
                "degenerate bounds: lat [{lat_min}, {lat_max}], lon [{lon_min}, {lon_max}]"
            )));
        }
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "{height}x{width} grid with {} values",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite grid value {v}")));
        }
        Ok(GridFrame {
            timestamp: timestamp.into(),
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            height,
            width,
            values,
            scaled: false,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    /// Latitude of the cell center in `row` (row 0 is northmost).
    pub fn cell_lat(&self, row: usize) -> f64 {
        let step = (self.lat_max - self.lat_min) / self.height as f64;
        self.lat_max - (row as f64 + 0.5) * step
    }

    /// Longitude of the cell center in `col`.
    pub fn cell_lon(&self, col: usize) -> f64 {
        let step = (self.lon_max - self.lon_min) / self.width as f64;
        self.lon_min + (col as f64 + 0.5) * step
    }

    pub fn min_value(&self) -> f32 {
        self.values.iter().copied().fold(f32::INFINITY, f32::min)
    }

    pub fn max_value(&self) -> f32 {
        self.values.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }
}
