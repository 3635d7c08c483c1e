use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::numerics::Matrix;
use crate::{Error, Result};

use super::formats::DatasetManifest;

const MAGIC: &[u8; 6] = b"GRFEA1";

/// Feature vectors for a run of frames, tagged with the method that
/// produced them. Row order matches the timestamps.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub method: String,
    pub timestamps: Vec<String>,
    pub matrix: Matrix,
}

impl FeatureSet {
    pub fn new(method: impl Into<String>, timestamps: Vec<String>, matrix: Matrix) -> Result<Self> {
        if timestamps.len() != matrix.rows() {
            return Err(Error::InvalidInput(format!(
                "{} timestamps for {} feature rows",
                timestamps.len(),
                matrix.rows()
            )));
        }
        if matrix.cols() == 0 {
            return Err(Error::InvalidInput("feature vectors must be non-empty".into()));
        }
        Ok(FeatureSet { method: method.into(), timestamps, matrix })
    }
}

/// Binary layout: magic, u64 row count, u64 width, length-prefixed
/// UTF-8 method tag, then row-major f64 little-endian payload.
pub fn export_features(set: &FeatureSet, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(
        MAGIC.len() + 24 + set.method.len() + set.matrix.values().len() * 8,
    );
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(set.matrix.rows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(set.matrix.cols() as u64).to_le_bytes());
    bytes.extend_from_slice(&(set.method.len() as u64).to_le_bytes());
    bytes.extend_from_slice(set.method.as_bytes());
    for v in set.matrix.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a feature file and aligns it to `manifest`: the row count must
/// equal the number of frames, and row `i` is stamped with frame `i`'s
/// timestamp. `tag_override` replaces the stored method tag.
pub fn import_features(
    path: &Path,
    manifest: &DatasetManifest,
    tag_override: Option<&str>,
) -> Result<FeatureSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |what: &str| Error::Format(format!("{}: {what}", path.display()));
    if bytes.len() < MAGIC.len() + 24 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(fail("not a feature file (bad magic)"));
    }
    let u64_at = |off: usize| {
        u64::from_le_bytes(bytes[off..off + 8].try_into().expect("8-byte slice"))
    };
    let n = u64_at(6) as usize;
    let d = u64_at(14) as usize;
    let tag_len = u64_at(22) as usize;
    let header = 30 + tag_len;
    if bytes.len() < header {
        return Err(fail("truncated method tag"));
    }
    let tag = std::str::from_utf8(&bytes[30..header])
        .map_err(|_| fail("method tag is not UTF-8"))?
        .to_string();
    let expect = header + n * d * 8;
    if bytes.len() != expect {
        return Err(fail(&format!(
            "payload is {} bytes, expected {expect}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();

    if n != manifest.len() {
        return Err(Error::Alignment(format!(
            "{} feature rows but the dataset has {} frames",
            n,
            manifest.len()
        )));
    }
    let matrix = Matrix::from_vec(n, d, values)?;
    FeatureSet::new(
        tag_override.map(str::to_string).unwrap_or(tag),
        manifest.timestamps(),
        matrix,
    )
}

/// Human-readable mirror of the binary format; values keep full
/// round-trip precision.
pub fn export_features_csv(set: &FeatureSet, path: &Path) -> Result<()> {
    let d = set.matrix.cols();
    let mut out = String::from("timestamp");
    for j in 0..d {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for (i, ts) in set.timestamps.iter().enumerate() {
        out.push_str(ts);
        for v in set.matrix.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{save_dataset, GridFrame};

    fn manifest_with(n: usize) -> (tempfile::TempDir, DatasetManifest) {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<GridFrame> = (0..n)
            .map(|i| {
                GridFrame::new(
                    format!("2013-01-{:02}T00:00:00Z", i + 1),
                    (0.0, 4.0),
                    (100.0, 104.0),
                    2,
                    2,
                    vec![0.5; 4],
                )
                .unwrap()
            })
            .collect();
        let manifest = save_dataset(dir.path(), &frames).unwrap();
        (dir, manifest)
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let (_dir, manifest) = manifest_with(3);
        let matrix = Matrix::from_rows(&[
            vec![0.1, -2.5, 3e-7],
            vec![1.0, 2.0, 3.0],
            vec![-0.0, 1e300, 5.5],
        ])
        .unwrap();
        let set = FeatureSet::new("pca", manifest.timestamps(), matrix).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.bin");
        export_features(&set, &path).unwrap();
        let back = import_features(&path, &manifest, None).unwrap();
        assert_eq!(back.method, "pca");
        assert_eq!(back.matrix.values(), set.matrix.values());
        assert_eq!(back.timestamps, set.timestamps);

        let renamed = import_features(&path, &manifest, Some("imported")).unwrap();
        assert_eq!(renamed.method, "imported");
    }

    #[test]
    fn wide_vectors_are_accepted() {
        let (_dir, manifest) = manifest_with(2);
        let matrix = Matrix::zeros(2, 2048);
        let set = FeatureSet::new("imported", manifest.timestamps(), matrix).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wide.bin");
        export_features(&set, &path).unwrap();
        let back = import_features(&path, &manifest, None).unwrap();
        assert_eq!(back.matrix.cols(), 2048);
    }

    #[test]
    fn row_count_mismatch_is_an_alignment_error() {
        let (_dir, manifest) = manifest_with(3);
        let (_dir2, other) = manifest_with(2);
        let set = FeatureSet::new("pca", other.timestamps(), Matrix::zeros(2, 4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.bin");
        export_features(&set, &path).unwrap();
        assert!(matches!(
            import_features(&path, &manifest, None).unwrap_err(),
            Error::Alignment(_)
        ));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (_dir, manifest) = manifest_with(1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        fs::write(&path, b"NOTFEA000000").unwrap();
        assert!(matches!(import_features(&path, &manifest, None).unwrap_err(), Error::Format(_)));

        let set = FeatureSet::new("x", manifest.timestamps(), Matrix::zeros(1, 2)).unwrap();
        export_features(&set, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(import_features(&path, &manifest, None).unwrap_err(), Error::Format(_)));
    }

    #[test]
    fn csv_mirror_lists_timestamps_and_values() {
        let (_dir, manifest) = manifest_with(2);
        let matrix = Matrix::from_rows(&[vec![0.25, -1.5], vec![3.0, 0.125]]).unwrap();
        let set = FeatureSet::new("cae", manifest.timestamps(), matrix).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        export_features_csv(&set, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "timestamp,f0,f1");
        assert_eq!(lines[1], "2013-01-01T00:00:00Z,0.25,-1.5");
        assert_eq!(lines[2], "2013-01-02T00:00:00Z,3,0.125");
    }
}
