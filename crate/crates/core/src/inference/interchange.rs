//! Line-delimited detection and ground-truth files.
//!
//! One CSV record per box with header
//! `tile_id,class_id,x_min,y_min,x_max,y_max,score`. Ground-truth files may
//! omit the `score` column. Tile ids are opaque strings compared bytewise.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{GtRecord, PredRecord};
use crate::error::{Error, Result};
use crate::imaging::BBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    tile_id: String,
    class_id: u32,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

fn read_rows<R: Read>(input: R, source: &str) -> Result<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<Row>().enumerate() {
        let row = rec.map_err(|e| Error::Parse {
            path: source.to_string(),
            message: e.to_string(),
        })?;
        let bbox = BBox::new(row.x_min, row.y_min, row.x_max, row.y_max);
        if !bbox.is_valid() {
            return Err(Error::Parse {
                path: source.to_string(),
                message: format!("record {}: degenerate box", i + 1),
            });
        }
        if let Some(s) = row.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Parse {
                    path: source.to_string(),
                    message: format!("record {}: score {s} outside [0, 1]", i + 1),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_ground_truth<R: Read>(input: R, source: &str) -> Result<Vec<GtRecord<String>>> {
    Ok(read_rows(input, source)?
        .into_iter()
        .map(|r| GtRecord {
            bbox: BBox::new(r.x_min, r.y_min, r.x_max, r.y_max),
            tile: r.tile_id,
            class_id: r.class_id,
        })
        .collect())
}

pub fn read_predictions<R: Read>(input: R, source: &str) -> Result<Vec<PredRecord<String>>> {
    read_rows(input, source)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let score = r.score.ok_or_else(|| Error::Parse {
                path: source.to_string(),
                message: format!("record {}: missing score", i + 1),
            })?;
            Ok(PredRecord {
                bbox: BBox::new(r.x_min, r.y_min, r.x_max, r.y_max),
                tile: r.tile_id,
                class_id: r.class_id,
                score,
            })
        })
        .collect()
}

fn write_rows<W: Write>(out: W, rows: impl Iterator<Item = Row>, with_score: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let mut header = vec!["tile_id", "class_id", "x_min", "y_min", "x_max", "y_max"];
    if with_score {
        header.push("score");
    }
    let wrap = |e: csv::Error| Error::invalid(e.to_string());
    w.write_record(&header).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::invalid(e.to_string()))
}

pub fn write_ground_truth<W: Write>(out: W, records: &[GtRecord<String>]) -> Result<()> {
    let rows = records.iter().map(|g| Row {
        tile_id: g.tile.clone(),
        class_id: g.class_id,
        x_min: g.bbox.x_min,
        y_min: g.bbox.y_min,
        x_max: g.bbox.x_max,
        y_max: g.bbox.y_max,
        score: None,
    });
    write_rows(out, rows, false)
}

pub fn write_predictions<W: Write>(out: W, records: &[PredRecord<String>]) -> Result<()> {
    let rows = records.iter().map(|p| Row {
        tile_id: p.tile.clone(),
        class_id: p.class_id,
        x_min: p.bbox.x_min,
        y_min: p.bbox.y_min,
        x_max: p.bbox.x_max,
        y_max: p.bbox.y_max,
        score: Some(p.score),
    });
    write_rows(out, rows, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let gt = vec![
            GtRecord {
                tile: "f0-r0-c0".to_string(),
                class_id: 2,
                bbox: BBox::new(1.5, 2.0, 30.25, 40.0),
            },
            GtRecord {
                tile: "f0-r0-c1".to_string(),
                class_id: 0,
                bbox: BBox::new(0.0, 0.0, 0.1, 1e-3),
            },
        ];
        let mut buf = Vec::new();
        write_ground_truth(&mut buf, &gt).unwrap();
        assert_eq!(read_ground_truth(&buf[..], "mem").unwrap(), gt);

        let preds: Vec<_> = gt
            .iter()
            .map(|g| PredRecord {
                tile: g.tile.clone(),
                class_id: g.class_id,
                bbox: g.bbox,
                score: 1.0 / 3.0,
            })
            .collect();
        let mut buf = Vec::new();
        write_predictions(&mut buf, &preds).unwrap();
        assert_eq!(read_predictions(&buf[..], "mem").unwrap(), preds);
    }

    #[test]
    fn header_only_is_empty() {
        let text = "tile_id,class_id,x_min,y_min,x_max,y_max,score\n";
        assert!(read_predictions(text.as_bytes(), "mem").unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_records() {
        let missing_score = "tile_id,class_id,x_min,y_min,x_max,y_max\na,0,0,0,1,1\n";
        assert!(read_predictions(missing_score.as_bytes(), "p.csv").is_err());
        let inverted = "tile_id,class_id,x_min,y_min,x_max,y_max\na,0,5,0,1,1\n";
        assert!(read_ground_truth(inverted.as_bytes(), "g.csv").is_err());
        let bad_score = "tile_id,class_id,x_min,y_min,x_max,y_max,score\na,0,0,0,1,1,1.5\n";
        assert!(read_predictions(bad_score.as_bytes(), "p.csv").is_err());
    }
}
