use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use gridrep_core::{Error, Result};
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use std::fs;
use std::path::Path;

/// One montage row: a frame and its two reconstructions, row-major in [0, 1].
pub struct MontageRow {
    pub label: String,
    pub original: Vec<f64>,
    pub pca: Vec<f64>,
    pub cae: Vec<f64>,
}

const COLUMNS: [&str; 3] = ["Original", "PCA", "CAE"];
const TILE: f64 = 128.0;
const GAP: f64 = 12.0;
const LABEL_W: f64 = 96.0;
const HEADER_H: f64 = 28.0;

fn to_bytes(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// Writes a grayscale frame as a binary PGM (P5), clamping to [0, 1].
pub fn write_pgm(path: &Path, height: usize, width: usize, values: &[f64]) -> Result<()> {
    if values.len() != height * width {
        return Err(Error::InvalidInput(format!(
            "frame has {} values, expected {}x{}",
            values.len(),
            height,
            width
        )));
    }
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend(to_bytes(values));
    fs::write(path, bytes).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn png_data_uri(height: usize, width: usize, values: &[f64]) -> Result<String> {
    let mut png = Vec::new();
    PngEncoder::new(&mut png)
        .write_image(&to_bytes(values), width as u32, height as u32, ExtendedColorType::L8)
        .map_err(|e| Error::Format(format!("png encoding: {e}")))?;
    Ok(format!("data:image/png;base64,{}", BASE64.encode(&png)))
}

/// Lays out cases as rows and (original, PCA, CAE) as columns, embedding
/// each tile as a PNG so the montage stays a single self-contained file.
pub fn render_montage(rows: &[MontageRow], height: usize, width: usize) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("montage needs at least one case".to_string()));
    }
    let n = height * width;
    for row in rows {
        for values in [&row.original, &row.pca, &row.cae] {
            if values.len() != n {
                return Err(Error::InvalidInput(format!(
                    "case '{}' has {} values, expected {n}",
                    row.label,
                    values.len()
                )));
            }
        }
    }

    let total_w = LABEL_W + 3.0 * TILE + 3.0 * GAP;
    let total_h = HEADER_H + rows.len() as f64 * (TILE + GAP);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total_w}\" height=\"{total_h}\" \
         viewBox=\"0 0 {total_w} {total_h}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{total_w}\" height=\"{total_h}\" fill=\"#ffffff\"/>\n"
    ));
    for (ci, name) in COLUMNS.iter().enumerate() {
        let cx = LABEL_W + ci as f64 * (TILE + GAP) + TILE / 2.0;
        svg.push_str(&format!(
            "  <text x=\"{cx}\" y=\"19\" font-size=\"13\" text-anchor=\"middle\">{name}</text>\n"
        ));
    }
    for (ri, row) in rows.iter().enumerate() {
        let y = HEADER_H + ri as f64 * (TILE + GAP);
        let ly = y + TILE / 2.0 + 4.0;
        svg.push_str(&format!(
            "  <text x=\"{:.0}\" y=\"{ly}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
            LABEL_W - 8.0,
            row.label
        ));
        for (ci, values) in [&row.original, &row.pca, &row.cae].into_iter().enumerate() {
            let x = LABEL_W + ci as f64 * (TILE + GAP);
            let uri = png_data_uri(height, width, values)?;
            svg.push_str(&format!(
                "  <image x=\"{x}\" y=\"{y}\" width=\"{TILE}\" height=\"{TILE}\" \
                 preserveAspectRatio=\"none\" href=\"{uri}\"/>\n"
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
