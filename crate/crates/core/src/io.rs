//! File formats: camera calibration (JSON), ground truth and detections
//! (JSON Lines, one object per frame) and tracks (CSV).
//!
//! Floats in JSON use shortest round-trip formatting; track coordinates are
//! written with six decimals.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::TrackRow;
use crate::geometry::{CameraExtrinsics, CameraIntrinsics, CameraModel, GeometryError};
use crate::metrics::TrackSet;
use crate::sim::{DetectionRecord, Scenario};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: camera {id}: {source}")]
    Calibration {
        path: PathBuf,
        id: i64,
        #[source]
        source: GeometryError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl ToString) -> FormatError {
    FormatError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    }
}

/// One camera of a calibration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationEntry {
    pub id: i64,
    #[serde(rename = "K")]
    pub k: [f64; 9],
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
    pub width: u32,
    pub height: u32,
}

impl CalibrationEntry {
    pub fn from_model(id: i64, cam: &CameraModel) -> Self {
        let k = cam.intrinsics.matrix();
        let r = cam.extrinsics.rotation;
        let row_major = |m: &Matrix3<f64>| {
            let mut out = [0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    out[3 * i + j] = m[(i, j)];
                }
            }
            out
        };
        let t = cam.extrinsics.translation;
        Self {
            id,
            k: row_major(&k),
            r: row_major(&r),
            t: [t[0], t[1], t[2]],
            width: cam.intrinsics.image_width,
            height: cam.intrinsics.image_height,
        }
    }

    pub fn to_model(&self, reorthonormalize: bool) -> Result<CameraModel, GeometryError> {
        let k = &self.k;
        if k[1] != 0.0 || k[3] != 0.0 || k[6] != 0.0 || k[7] != 0.0 || k[8] != 1.0 {
            return Err(GeometryError::Calibration(
                "K must be [[fx,0,cx],[0,fy,cy],[0,0,1]] (no skew)".into(),
            ));
        }
        let intrinsics = CameraIntrinsics::new(k[0], k[4], k[2], k[5], self.width, self.height)?;
        let rotation = Matrix3::from_row_slice(&self.r);
        let translation = Vector3::from_column_slice(&self.t);
        let extrinsics = if reorthonormalize {
            CameraExtrinsics::new_reorthonormalized(rotation, translation)?
        } else {
            CameraExtrinsics::new(rotation, translation)?
        };
        CameraModel::compose(intrinsics, extrinsics)
    }
}

pub fn write_calibration(path: &Path, cameras: &[CameraModel]) -> Result<(), FormatError> {
    let entries: Vec<CalibrationEntry> = cameras
        .iter()
        .enumerate()
        .map(|(i, c)| CalibrationEntry::from_model(i as i64, c))
        .collect();
    let mut text = serde_json::to_string_pretty(&entries).expect("calibration serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_calibration(path: &Path, reorthonormalize: bool) -> Result<Vec<(i64, CameraModel)>, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let entries: Vec<CalibrationEntry> =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e))?;
    entries
        .iter()
        .map(|e| {
            e.to_model(reorthonormalize)
                .map(|m| (e.id, m))
                .map_err(|source| FormatError::Calibration {
                    path: path.to_path_buf(),
                    id: e.id,
                    source,
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtPoint {
    pub id: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtFrame {
    pub frame: u32,
    pub gt: Vec<GtPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetPoint {
    pub x: f64,
    pub y: f64,
    pub score: f64,
    pub emb: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetFrame {
    pub frame: u32,
    pub detections: Vec<DetPoint>,
}

impl DetFrame {
    pub fn from_records(frame: u32, records: &[DetectionRecord]) -> Self {
        Self {
            frame,
            detections: records
                .iter()
                .map(|d| DetPoint {
                    x: d.x,
                    y: d.y,
                    score: d.score,
                    emb: d.embedding.clone(),
                })
                .collect(),
        }
    }

    pub fn records(&self) -> Vec<DetectionRecord> {
        self.detections
            .iter()
            .map(|d| DetectionRecord {
                frame: self.frame,
                x: d.x,
                y: d.y,
                score: d.score,
                embedding: d.emb.clone(),
            })
            .collect()
    }
}

pub fn gt_frames(scenario: &Scenario) -> Vec<GtFrame> {
    (0..scenario.duration)
        .map(|f| GtFrame {
            frame: f,
            gt: scenario
                .ground_truth(f)
                .into_iter()
                .map(|(id, [x, y])| GtPoint { id, x, y })
                .collect(),
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), FormatError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| parse_err(path, 0, e))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads one JSON object per non-empty line; errors carry the line number.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, FormatError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse_err(path, i + 1, e))?);
    }
    Ok(out)
}

/// Per-frame contents of either a ground-truth or a detections file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AnyFrame {
    Gt(GtFrame),
    Det(DetFrame),
}

impl AnyFrame {
    pub fn frame(&self) -> u32 {
        match self {
            AnyFrame::Gt(g) => g.frame,
            AnyFrame::Det(d) => d.frame,
        }
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        match self {
            AnyFrame::Gt(g) => g.gt.iter().map(|p| [p.x, p.y]).collect(),
            AnyFrame::Det(d) => d.detections.iter().map(|p| [p.x, p.y]).collect(),
        }
    }
}

pub fn read_gt(path: &Path) -> Result<TrackSet, FormatError> {
    let mut set = TrackSet::new();
    for f in read_jsonl::<GtFrame>(path)? {
        set.touch(f.frame);
        for p in f.gt {
            set.push(f.frame, p.id, [p.x, p.y]);
        }
    }
    Ok(set)
}

pub fn read_detections(path: &Path) -> Result<Vec<DetFrame>, FormatError> {
    read_jsonl(path)
}

pub fn detection_points(frames: &[DetFrame]) -> BTreeMap<u32, Vec<[f64; 2]>> {
    frames
        .iter()
        .map(|f| (f.frame, f.detections.iter().map(|d| [d.x, d.y]).collect()))
        .collect()
}

pub const TRACKS_HEADER: &str = "frame,track_id,x,y,score";

pub fn format_track_row(r: &TrackRow) -> String {
    format!("{},{},{:.6},{:.6},{:.6}", r.frame, r.track_id, r.x, r.y, r.score)
}

pub fn write_tracks(path: &Path, rows: &[TrackRow]) -> Result<(), FormatError> {
    let mut text = String::with_capacity(32 * (rows.len() + 1));
    text.push_str(TRACKS_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&format_track_row(r));
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    frame: u32,
    track_id: u64,
    x: f64,
    y: f64,
    score: f64,
}

pub fn read_tracks(path: &Path) -> Result<Vec<TrackRow>, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e))?;
    let headers = reader.headers().map_err(|e| parse_err(path, 1, e))?.clone();
    let expected: Vec<&str> = TRACKS_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(path, 1, format!("expected header `{TRACKS_HEADER}`")));
    }
    let mut rows = Vec::new();
    for rec in reader.deserialize::<CsvRow>() {
        let r = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e)
        })?;
        rows.push(TrackRow {
            frame: r.frame,
            track_id: r.track_id,
            x: r.x,
            y: r.y,
            score: r.score,
        });
    }
    Ok(rows)
}

pub fn tracks_to_set(rows: &[TrackRow]) -> TrackSet {
    let mut set = TrackSet::new();
    for r in rows {
        set.push(r.frame, r.track_id, [r.x, r.y]);
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{default_rig, Preset};

    #[test]
    fn calibration_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.json");
        let rig = default_rig(Preset::MultiviewxLike);
        write_calibration(&path, &rig.cameras).unwrap();
        let loaded = read_calibration(&path, false).unwrap();
        assert_eq!(loaded.len(), 6);
        for ((id, m), orig) in loaded.iter().zip(&rig.cameras) {
            assert!(*id >= 0);
            assert!((m.projection - orig.projection).abs().max() < 1e-9);
        }
    }

    #[test]
    fn calibration_rejects_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.json");
        let skewed = r#"[{"id":0,"K":[1,0.5,0,0,1,0,0,0,1],"R":[1,0,0,0,1,0,0,0,1],"t":[0,0,1],"width":10,"height":10}]"#;
        fs::write(&path, skewed).unwrap();
        assert!(matches!(read_calibration(&path, false), Err(FormatError::Calibration { .. })));
        let extra = r#"[{"id":0,"K":[1,0,0,0,1,0,0,0,1],"R":[1,0,0,0,1,0,0,0,1],"t":[0,0,1],"width":10,"height":10,"dist":[0]}]"#;
        fs::write(&path, extra).unwrap();
        assert!(matches!(read_calibration(&path, false), Err(FormatError::Parse { .. })));
        let rounded = r#"[{"id":3,"K":[1,0,0,0,1,0,0,0,1],"R":[1,0.00001,0,0,1,0,0,0,1],"t":[0,0,1],"width":10,"height":10}]"#;
        fs::write(&path, rounded).unwrap();
        assert!(read_calibration(&path, false).is_err());
        assert_eq!(read_calibration(&path, true).unwrap()[0].0, 3);
    }

    #[test]
    fn tracks_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tracks.csv");
        let rows = vec![TrackRow {
            frame: 3,
            track_id: 7,
            x: 1.0 / 3.0,
            y: 2.0,
            score: 0.95,
        }];
        write_tracks(&path, &rows).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "frame,track_id,x,y,score\n3,7,0.333333,2.000000,0.950000\n"
        );
        let back = read_tracks(&path).unwrap();
        assert_eq!((back[0].frame, back[0].track_id, back[0].x), (3, 7, 0.333333));
    }

    #[test]
    fn tracks_csv_errors_report_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tracks.csv");
        fs::write(&path, "frame,track_id,x,y,score\n0,1,0.0,0.0,0.9\n1,x,0.0,0.0,0.9\n").unwrap();
        match read_tracks(&path) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, "a,b\n").unwrap();
        assert!(read_tracks(&path).is_err());
    }

    #[test]
    fn jsonl_line_numbers_and_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.jsonl");
        fs::write(&path, "{\"frame\":0,\"gt\":[]}\n\n{\"frame\":1,\"gt\":[{\"id\":1,\"x\":0,\"y\":0,\"z\":1}]}\n").unwrap();
        match read_gt(&path) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn any_frame_distinguishes_files() {
        let g: AnyFrame = serde_json::from_str(r#"{"frame":2,"gt":[{"id":1,"x":1.5,"y":2}]}"#).unwrap();
        assert!(matches!(g, AnyFrame::Gt(_)));
        assert_eq!(g.points(), vec![[1.5, 2.0]]);
        let d: AnyFrame = serde_json::from_str(r#"{"frame":2,"detections":[]}"#).unwrap();
        assert!(matches!(d, AnyFrame::Det(_)));
        assert_eq!(d.frame(), 2);
    }
}
