use crate::{Error, Result};

use super::grid::GridFrame;

/// Keeps exactly the cells whose centers fall inside the closed
/// latitude/longitude box and tightens the bounds to the retained
/// cells' outer edges.
pub fn crop_to_box(
    f: &GridFrame,
    lat0: f64,
    lat1: f64,
    lon0: f64,
    lon1: f64,
) -> Result<GridFrame> {
    if !(lat0 < lat1 && lon0 < lon1) {
        return Err(Error::InvalidInput(format!(
            "degenerate crop box: lat [{lat0}, {lat1}], lon [{lon0}, {lon1}]"
        )));
    }
    let rows: Vec<usize> = (0..f.height)
        .filter(|&r| {
            let lat = f.cell_lat(r);
            lat >= lat0 && lat <= lat1
        })
        .collect();
    let cols: Vec<usize> = (0..f.width)
        .filter(|&c| {
            let lon = f.cell_lon(c);
            lon >= lon0 && lon <= lon1
        })
        .collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::InvalidInput(
            "crop box contains no cell centers".into(),
        ));
    }
    // Retained rows/cols are contiguous because cell centers are
    // monotone in the index.
    let (r_first, r_last) = (rows[0], rows[rows.len() - 1]);
    let (c_first, c_last) = (cols[0], cols[cols.len() - 1]);

    let lat_step = (f.lat_max - f.lat_min) / f.height as f64;
    let lon_step = (f.lon_max - f.lon_min) / f.width as f64;
    let mut values = Vec::with_capacity(rows.len() * cols.len());
    for r in r_first..=r_last {
        values.extend_from_slice(&f.values[r * f.width + c_first..r * f.width + c_last + 1]);
    }
    let mut out = GridFrame::new(
        f.timestamp.clone(),
        (
            f.lat_max - (r_last + 1) as f64 * lat_step,
            f.lat_max - r_first as f64 * lat_step,
        ),
        (
            f.lon_min + c_first as f64 * lon_step,
            f.lon_min + (c_last + 1) as f64 * lon_step,
        ),
        r_last - r_first + 1,
        c_last - c_first + 1,
        values,
    )?;
    out.scaled = f.scaled;
    Ok(out)
}

/// Divides every value by 255, the raw-byte to unit-interval mapping.
/// Not idempotent; the `scaled` flag records that it has been applied.
pub fn rescale_unit(f: &GridFrame) -> Result<GridFrame> {
    for (i, v) in f.values.iter().enumerate() {
        if !(0.0..=255.0).contains(v) {
            return Err(Error::Range(format!(
                "value {v} at cell ({}, {}) outside [0, 255]",
                i / f.width,
                i % f.width
            )));
        }
    }
    let mut out = f.clone();
    for v in &mut out.values {
        *v /= 255.0;
    }
    out.scaled = true;
    Ok(out)
}

/// Align-corners bilinear resampling: output index i maps to source
/// coordinate i·(in−1)/(out−1), so the four corners are copied exactly
/// and every output is a convex combination of inputs.
pub fn bilinear_resize(f: &GridFrame, out_h: usize, out_w: usize) -> Result<GridFrame> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidInput("resize target must be at least 1x1".into()));
    }
    let src = |out_i: usize, out_n: usize, in_n: usize| -> f64 {
        if out_n == 1 {
            0.0
        } else {
            out_i as f64 * (in_n - 1) as f64 / (out_n - 1) as f64
        }
    };
    let mut values = Vec::with_capacity(out_h * out_w);
    for r in 0..out_h {
        let fy = src(r, out_h, f.height);
        let y0 = (fy.floor() as usize).min(f.height - 1);
        let y1 = (y0 + 1).min(f.height - 1);
        let dy = fy - y0 as f64;
        for c in 0..out_w {
            let fx = src(c, out_w, f.width);
            let x0 = (fx.floor() as usize).min(f.width - 1);
            let x1 = (x0 + 1).min(f.width - 1);
            let dx = fx - x0 as f64;
            let v00 = f.get(y0, x0) as f64;
            let v01 = f.get(y0, x1) as f64;
            let v10 = f.get(y1, x0) as f64;
            let v11 = f.get(y1, x1) as f64;
            let v = (1.0 - dy) * ((1.0 - dx) * v00 + dx * v01)
                + dy * ((1.0 - dx) * v10 + dx * v11);
            values.push(v as f32);
        }
    }
    let mut out = GridFrame::new(
        f.timestamp.clone(),
        (f.lat_min, f.lat_max),
        (f.lon_min, f.lon_max),
        out_h,
        out_w,
        values,
    )?;
    out.scaled = f.scaled;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_row_frame() -> GridFrame {
        // 10x6 over 0-10N, 100-106E; value encodes (row, col).
        let values: Vec<f32> = (0..60).map(|i| (i / 6 * 10 + i % 6) as f32).collect();
        GridFrame::new("t", (0.0, 10.0), (100.0, 106.0), 10, 6, values).unwrap()
    }

    #[test]
    fn crop_to_own_box_is_identity() {
        let f = ten_row_frame();
        let c = crop_to_box(&f, 0.0, 10.0, 100.0, 106.0).unwrap();
        assert_eq!(c, f);
    }

    #[test]
    fn crop_keeps_cells_whose_centers_lie_inside() {
        // Cell-center latitudes sit at 0.5, 1.5, ..., 9.5; the closed box
        // [0, 5] holds the five southmost rows.
        let f = ten_row_frame();
        let c = crop_to_box(&f, 0.0, 5.0, 100.0, 106.0).unwrap();
        assert_eq!(c.height, 5);
        assert_eq!(c.width, 6);
        assert!((c.lat_max - 5.0).abs() < 1e-12);
        assert!((c.lat_min - 0.0).abs() < 1e-12);
        // Northmost retained row is original row 5.
        assert_eq!(c.get(0, 0), 50.0);

        let narrow = crop_to_box(&f, 0.0, 5.0, 102.0, 104.0).unwrap();
        assert_eq!(narrow.width, 2);
        assert!((narrow.cell_lon(0) - 102.5).abs() < 1e-12);
    }

    #[test]
    fn crop_is_idempotent() {
        let f = ten_row_frame();
        let once = crop_to_box(&f, 2.0, 7.0, 101.0, 105.0).unwrap();
        let twice = crop_to_box(&once, 2.0, 7.0, 101.0, 105.0).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn disjoint_crop_box_errors() {
        let f = ten_row_frame();
        assert!(crop_to_box(&f, 40.0, 50.0, 100.0, 106.0).is_err());
        assert!(crop_to_box(&f, 5.0, 2.0, 100.0, 106.0).is_err());
    }

    #[test]
    fn rescale_divides_by_255_and_flags() {
        let f = GridFrame::new("t", (0.0, 1.0), (0.0, 1.0), 1, 3, vec![0.0, 51.0, 255.0]).unwrap();
        let s = rescale_unit(&f).unwrap();
        assert_eq!(s.values[0], 0.0);
        assert!((s.values[1] - 0.2).abs() < 1e-7);
        assert_eq!(s.values[2], 1.0);
        assert!(s.scaled);
        // A second application is legal arithmetic but shrinks values;
        // the flag is what prevents the pipeline from doing this.
        let again = rescale_unit(&s).unwrap();
        assert!((again.values[1] - 0.2 / 255.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_values_fail_rescale() {
        let f = GridFrame::new("t", (0.0, 1.0), (0.0, 1.0), 1, 2, vec![0.0, 300.0]).unwrap();
        let err = rescale_unit(&f).unwrap_err();
        assert!(matches!(err, Error::Range(ref m) if m.contains("300")));
    }

    #[test]
    fn resize_to_same_shape_is_identity() {
        let f = ten_row_frame();
        let r = bilinear_resize(&f, 10, 6).unwrap();
        assert_eq!(r, f);
    }

    #[test]
    fn checkerboard_upsample_has_half_at_center() {
        let f = GridFrame::new("t", (0.0, 2.0), (0.0, 2.0), 2, 2, vec![0.0, 1.0, 1.0, 0.0])
            .unwrap();
        let r = bilinear_resize(&f, 3, 3).unwrap();
        assert_eq!(r.get(1, 1), 0.5);
        // Corners preserved exactly under align-corners.
        assert_eq!(r.get(0, 0), 0.0);
        assert_eq!(r.get(0, 2), 1.0);
        assert_eq!(r.get(2, 0), 1.0);
        assert_eq!(r.get(2, 2), 0.0);
    }

    #[test]
    fn resize_stays_within_input_range() {
        let f = ten_row_frame();
        for (h, w) in [(3, 3), (17, 5), (1, 1), (20, 12)] {
            let r = bilinear_resize(&f, h, w).unwrap();
            assert!(r.min_value() >= f.min_value() - 1e-6);
            assert!(r.max_value() <= f.max_value() + 1e-6);
        }
    }

    #[test]
    fn constant_frame_resizes_to_constant() {
        let f = GridFrame::new("t", (0.0, 1.0), (0.0, 1.0), 4, 4, vec![0.37; 16]).unwrap();
        let r = bilinear_resize(&f, 9, 2).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.37));
    }
}
