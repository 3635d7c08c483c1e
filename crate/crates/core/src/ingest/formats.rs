use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::grid::GridFrame;

/// Manifest schema identifier; bump on any layout change.
pub const DATASET_FORMAT: &str = "gridrep-dataset/1";

/// Grid geometry shared by every frame in a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub height: usize,
    pub width: usize,
    pub scaled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub timestamp: String,
    /// Frame payload path relative to the dataset directory.
    pub path: String,
}

/// Index of a dataset directory: `index.json` plus one raw `.f32` file
/// per frame (row-major little-endian, northmost row first).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub descriptor: GridDescriptor,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    root: PathBuf,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn timestamps(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.timestamp.clone()).collect()
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

/// Writes every frame and an `index.json` into `dir`, which is created
/// if absent. All frames must share one geometry and arrive in strict
/// timestamp order.
pub fn save_dataset(dir: &Path, frames: &[GridFrame]) -> Result<DatasetManifest> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot save an empty dataset".into()))?;
    let descriptor = GridDescriptor {
        lat_min: first.lat_min,
        lat_max: first.lat_max,
        lon_min: first.lon_min,
        lon_max: first.lon_max,
        height: first.height,
        width: first.width,
        scaled: first.scaled,
    };
    for (i, f) in frames.iter().enumerate() {
        let same = f.lat_min == descriptor.lat_min
            && f.lat_max == descriptor.lat_max
            && f.lon_min == descriptor.lon_min
            && f.lon_max == descriptor.lon_max
            && f.height == descriptor.height
            && f.width == descriptor.width
            && f.scaled == descriptor.scaled;
        if !same {
            return Err(Error::Format(format!(
                "frame {i} ({}) does not match the dataset geometry",
                f.timestamp
            )));
        }
        if i > 0 && frames[i - 1].timestamp >= f.timestamp {
            return Err(Error::Format(format!(
                "timestamps out of order at entry {i} ({})",
                f.timestamp
            )));
        }
    }

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let name = format!("frame_{i:06}.f32");
        let mut payload = Vec::with_capacity(f.values.len() * 4);
        for v in &f.values {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        let path = dir.join(&name);
        fs::write(&path, payload).map_err(|e| Error::io(&path, e))?;
        entries.push(ManifestEntry { timestamp: f.timestamp.clone(), path: name });
    }

    let manifest = DatasetManifest {
        format: DATASET_FORMAT.to_string(),
        descriptor,
        entries,
        root: dir.to_path_buf(),
    };
    let index = dir.join("index.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(format!("manifest encoding failed: {e}")))?;
    fs::write(&index, text).map_err(|e| Error::io(&index, e))?;
    Ok(manifest)
}

/// Reads and validates `dir/index.json`.
pub fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    let index = dir.join("index.json");
    let text = fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
    let mut manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", index.display())))?;
    if manifest.format != DATASET_FORMAT {
        return Err(Error::Format(format!(
            "unsupported dataset format {:?} (expected {DATASET_FORMAT:?})",
            manifest.format
        )));
    }
    let d = &manifest.descriptor;
    if !(d.lat_min < d.lat_max && d.lon_min < d.lon_max) || d.height == 0 || d.width == 0 {
        return Err(Error::Format("manifest describes a degenerate grid".into()));
    }
    for i in 1..manifest.entries.len() {
        if manifest.entries[i - 1].timestamp >= manifest.entries[i].timestamp {
            return Err(Error::Format(format!(
                "timestamps out of order at entry {i} ({})",
                manifest.entries[i].timestamp
            )));
        }
    }
    manifest.root = dir.to_path_buf();
    Ok(manifest)
}

/// Loads one frame by manifest position.
pub fn load_frame(manifest: &DatasetManifest, index: usize) -> Result<GridFrame> {
    let entry = manifest.entries.get(index).ok_or_else(|| {
        Error::InvalidInput(format!(
            "frame {index} out of range (dataset has {})",
            manifest.len()
        ))
    })?;
    let d = &manifest.descriptor;
    let path = manifest.root.join(&entry.path);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let expect = d.height * d.width * 4;
    if bytes.len() != expect {
        return Err(Error::Format(format!(
            "{}: {} bytes, expected {expect}",
            path.display(),
            bytes.len()
        )));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let mut frame = GridFrame::new(
        entry.timestamp.clone(),
        (d.lat_min, d.lat_max),
        (d.lon_min, d.lon_max),
        d.height,
        d.width,
        values,
    )?;
    frame.scaled = d.scaled;
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(ts: &str, fill: f32) -> GridFrame {
        let values: Vec<f32> = (0..16).map(|i| fill + i as f32 * 0.125).collect();
        GridFrame::new(ts, (0.0, 4.0), (100.0, 104.0), 4, 4, values).unwrap()
    }

    #[test]
    fn dataset_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let frames = vec![
            frame("2013-01-01T00:00:00Z", 0.0),
            frame("2013-01-02T00:00:00Z", 1.0),
        ];
        let manifest = save_dataset(dir.path(), &frames).unwrap();
        assert_eq!(manifest.len(), 2);

        let loaded = load_manifest(dir.path()).unwrap();
        assert_eq!(loaded.format, DATASET_FORMAT);
        for (i, original) in frames.iter().enumerate() {
            let back = load_frame(&loaded, i).unwrap();
            assert_eq!(&back, original);
        }
    }

    #[test]
    fn out_of_order_timestamps_are_rejected_both_ways() {
        let dir = tempfile::tempdir().unwrap();
        let frames = vec![
            frame("2013-01-02T00:00:00Z", 0.0),
            frame("2013-01-01T00:00:00Z", 1.0),
        ];
        assert!(matches!(
            save_dataset(dir.path(), &frames).unwrap_err(),
            Error::Format(_)
        ));

        let ok = vec![frame("2013-01-01T00:00:00Z", 0.0), frame("2013-01-02T00:00:00Z", 1.0)];
        save_dataset(dir.path(), &ok).unwrap();
        let index = dir.path().join("index.json");
        let swapped = fs::read_to_string(&index)
            .unwrap()
            .replace("2013-01-02", "2012-12-31");
        fs::write(&index, swapped).unwrap();
        let err = load_manifest(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Format(ref m) if m.contains("entry 1")));
    }

    #[test]
    fn bad_format_string_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &[frame("2013-01-01T00:00:00Z", 0.0)]).unwrap();
        let index = dir.path().join("index.json");
        let text = fs::read_to_string(&index)
            .unwrap()
            .replace(DATASET_FORMAT, "gridrep-dataset/9");
        fs::write(&index, text).unwrap();
        assert!(matches!(load_manifest(dir.path()).unwrap_err(), Error::Format(_)));
    }

    #[test]
    fn missing_and_truncated_frames_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &[frame("2013-01-01T00:00:00Z", 0.0)]).unwrap();
        let manifest = load_manifest(dir.path()).unwrap();

        let payload = dir.path().join("frame_000000.f32");
        let bytes = fs::read(&payload).unwrap();
        fs::write(&payload, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_frame(&manifest, 0).unwrap_err(), Error::Format(_)));

        fs::remove_file(&payload).unwrap();
        let err = load_frame(&manifest, 0).unwrap_err();
        assert!(matches!(err, Error::Io { ref path, .. } if path.ends_with("frame_000000.f32")));
    }

    #[test]
    fn mixed_geometry_cannot_be_saved() {
        let dir = tempfile::tempdir().unwrap();
        let a = frame("2013-01-01T00:00:00Z", 0.0);
        let b = GridFrame::new(
            "2013-01-02T00:00:00Z",
            (0.0, 4.0),
            (100.0, 104.0),
            2,
            8,
            vec![0.0; 16],
        )
        .unwrap();
        assert!(save_dataset(dir.path(), &[a, b]).is_err());
    }
}
