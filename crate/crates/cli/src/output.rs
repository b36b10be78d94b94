//! Run artifacts: CSV, JSON and PGM writers plus CSV readers.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ictlab_core::data::SemiSupervisedDataset;
use ictlab_core::raster::BoundaryRaster;
use ictlab_core::trainer::StepRecord;
use ictlab_core::{LipschitzEstimate, NonLinRecord};
use serde::{Deserialize, Serialize};

pub const METRICS_FILE: &str = "metrics.csv";
pub const NONLIN_FILE: &str = "nonlin.csv";
pub const LIPSCHITZ_FILE: &str = "lipschitz.json";
pub const BOUNDARY_CSV_FILE: &str = "boundary.csv";
pub const BOUNDARY_PGM_FILE: &str = "boundary.pgm";
pub const DATASET_FILE: &str = "dataset.csv";
pub const CHECKPOINT_FILE: &str = "net.bin";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, OutputError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Fails unless `dir` can be created and written to.
pub fn preflight(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let probe = dir.join(".write-test");
    fs::write(&probe, b"").map_err(io_err(&probe))?;
    fs::remove_file(&probe).map_err(io_err(&probe))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub w_t: f64,
    pub sup_loss: f64,
    pub unsup_loss: f64,
    pub test_acc: f64,
}

impl From<&StepRecord> for MetricsRow {
    fn from(r: &StepRecord) -> Self {
        Self {
            step: r.step,
            w_t: r.w_t,
            sup_loss: r.sup_loss,
            unsup_loss: r.unsup_loss,
            test_acc: r.test_accuracy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonLinRow {
    pub step: u64,
    pub layer: usize,
    pub score: f64,
    pub pairs: usize,
}

impl From<&NonLinRecord> for NonLinRow {
    fn from(r: &NonLinRecord) -> Self {
        Self {
            step: r.step,
            layer: r.layer,
            score: r.score,
            pairs: r.pair_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub row: usize,
    pub col: usize,
    pub class: usize,
}

/// One point of a split dataset; `label` is -1 for unlabeled points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub x: f64,
    pub y: f64,
    pub label: i64,
    pub split: String,
}

const DATASET_HEADER: [&str; 4] = ["x", "y", "label", "split"];
const METRICS_HEADER: [&str; 5] = ["step", "w_t", "sup_loss", "unsup_loss", "test_acc"];
const NONLIN_HEADER: [&str; 4] = ["step", "layer", "score", "pairs"];
const BOUNDARY_HEADER: [&str; 3] = ["row", "col", "class"];

/// Writes `rows` under `header`. The header is written even with no rows.
fn write_csv<T: Serialize>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = T>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    csv::Reader::from_path(path)
        .map_err(csv_err(path))?
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err(path))
}

pub fn write_metrics(path: &Path, records: &[StepRecord]) -> Result<()> {
    write_csv(path, &METRICS_HEADER, records.iter().map(MetricsRow::from))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    read_csv(path)
}

pub fn write_nonlin(path: &Path, records: &[NonLinRecord]) -> Result<()> {
    write_csv(path, &NONLIN_HEADER, records.iter().map(NonLinRow::from))
}

pub fn read_nonlin(path: &Path) -> Result<Vec<NonLinRow>> {
    read_csv(path)
}

pub fn write_boundary_csv(path: &Path, raster: &BoundaryRaster) -> Result<()> {
    let n = raster.resolution;
    let rows = raster
        .cells
        .iter()
        .enumerate()
        .map(|(i, &class)| BoundaryRow {
            row: i / n,
            col: i % n,
            class,
        });
    write_csv(path, &BOUNDARY_HEADER, rows)
}

pub fn read_boundary_csv(path: &Path) -> Result<Vec<BoundaryRow>> {
    read_csv(path)
}

/// Labeled, unlabeled and test points in that order.
pub fn write_dataset(path: &Path, data: &SemiSupervisedDataset) -> Result<()> {
    let row = |p: &[f64], label: i64, split: &str| DatasetRow {
        x: p[0],
        y: p[1],
        label,
        split: split.to_string(),
    };
    let labeled = data.labeled.points.iter_rows().zip(&data.labeled.labels);
    let test = data.test.points.iter_rows().zip(&data.test.labels);
    let rows = labeled
        .map(|(p, &l)| row(p, l as i64, "labeled"))
        .chain(
            data.unlabeled
                .points
                .iter_rows()
                .map(|p| row(p, -1, "unlabeled")),
        )
        .chain(test.map(|(p, &l)| row(p, l as i64, "test")));
    write_csv(path, &DATASET_HEADER, rows)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRow>> {
    read_csv(path)
}

/// Gray level of class `c` out of `classes`: `floor(255 c / (classes - 1))`.
pub fn gray_level(c: usize, classes: usize) -> u8 {
    if classes <= 1 {
        0
    } else {
        (255 * c / (classes - 1)) as u8
    }
}

/// Binary P5 image of the raster, top row at `y_max`.
pub fn write_pgm(path: &Path, raster: &BoundaryRaster, classes: usize) -> Result<()> {
    let n = raster.resolution;
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    write!(w, "P5\n{n} {n}\n255\n").map_err(io_err(path))?;
    for row in (0..n).rev() {
        let pixels: Vec<u8> = raster.cells[row * n..(row + 1) * n]
            .iter()
            .map(|&c| gray_level(c, classes))
            .collect();
        w.write_all(&pixels).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| OutputError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_lipschitz(path: &Path, est: &LipschitzEstimate) -> Result<()> {
    write_json(path, est)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: u64, x: f64) -> StepRecord {
        StepRecord {
            step,
            w_t: x * 3.0,
            sup_loss: x,
            unsup_loss: x / 7.0,
            total_loss: x + x * 3.0 * x / 7.0,
            test_accuracy: 1.0 / 3.0,
        }
    }

    #[test]
    fn metrics_round_trip_losslessly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(METRICS_FILE);
        let recs = vec![
            record(1, 0.1),
            record(50, std::f64::consts::PI),
            record(100, 1e-300),
        ];
        write_metrics(&path, &recs).unwrap();
        let back = read_metrics(&path).unwrap();
        assert_eq!(back, recs.iter().map(MetricsRow::from).collect::<Vec<_>>());
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("step,w_t,sup_loss,unsup_loss,test_acc\n"));
    }

    #[test]
    fn nonlin_round_trip_and_empty_files_keep_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(NONLIN_FILE);
        let recs = vec![
            NonLinRecord {
                step: 0,
                layer: 2,
                score: 0.123_456_789_012_345_67,
                pair_count: 200,
            },
            NonLinRecord {
                step: 500,
                layer: 0,
                score: 0.0,
                pair_count: 200,
            },
        ];
        write_nonlin(&path, &recs).unwrap();
        assert_eq!(
            read_nonlin(&path).unwrap(),
            recs.iter().map(NonLinRow::from).collect::<Vec<_>>()
        );

        write_nonlin(&path, &[]).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "step,layer,score,pairs\n"
        );
        let m = dir.path().join(METRICS_FILE);
        write_metrics(&m, &[]).unwrap();
        assert_eq!(
            fs::read_to_string(&m).unwrap(),
            "step,w_t,sup_loss,unsup_loss,test_acc\n"
        );
        assert!(read_metrics(&m).unwrap().is_empty());
    }

    fn raster(cells: Vec<usize>, resolution: usize) -> BoundaryRaster {
        BoundaryRaster {
            x_min: -1.0,
            x_max: 1.0,
            y_min: -1.0,
            y_max: 1.0,
            resolution,
            cells,
        }
    }

    #[test]
    fn boundary_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(BOUNDARY_CSV_FILE);
        let r = raster(vec![0, 1, 2, 1, 0, 2, 2, 2, 1], 3);
        write_boundary_csv(&path, &r).unwrap();
        let back = read_boundary_csv(&path).unwrap();
        assert_eq!(back.len(), 9);
        for b in back {
            assert_eq!(r.get(b.row, b.col), b.class);
        }
    }

    #[test]
    fn dataset_round_trip_hides_unlabeled_labels() {
        use ictlab_core::trainer::{build_dataset, DatasetSpec};
        let cfg = ictlab_core::TrainConfig {
            dataset: DatasetSpec {
                n_points: 50,
                n_test: 10,
                ..Default::default()
            },
            ..Default::default()
        };
        let data = build_dataset(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(DATASET_FILE);
        write_dataset(&path, &data).unwrap();
        let rows = read_dataset(&path).unwrap();
        assert_eq!(rows.len(), 50);
        let count = |s: &str| rows.iter().filter(|r| r.split == s).count();
        assert_eq!(
            (count("labeled"), count("unlabeled"), count("test")),
            (3, 37, 10)
        );
        assert!(rows
            .iter()
            .filter(|r| r.split == "unlabeled")
            .all(|r| r.label == -1));
        assert_eq!(rows[0].x, data.labeled.points[(0, 0)]);
    }

    #[test]
    fn three_class_pgm_levels() {
        assert_eq!(
            (0..3).map(|c| gray_level(c, 3)).collect::<Vec<_>>(),
            vec![0, 127, 255]
        );
        assert_eq!(gray_level(1, 2), 255);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(BOUNDARY_PGM_FILE);
        write_pgm(&path, &raster(vec![0, 1, 2, 2], 2), 3).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        // top image row is the raster's last row
        assert_eq!(&bytes[11..], &[255, 255, 0, 127]);
    }

    #[test]
    fn preflight_rejects_unwritable_paths() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, b"x").unwrap();
        assert!(preflight(&file.join("sub")).is_err());
        preflight(&dir.path().join("a/b")).unwrap();
    }
}
