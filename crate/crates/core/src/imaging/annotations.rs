//! Line-delimited corpus annotation files.
//!
//! One JSON object per line, one line per frame:
//!
//! ```text
//! {"id":0,"width_px":4096,"height_px":4096,"bytes_per_px":3,"capture_s":0.0,
//!  "cloud_fraction":0.41,"cloud":{"cell_px":1024,"cols":4,"rows":4,"values":[...]},
//!  "objects":[{"box":{"x_min":10.0,"y_min":20.0,"x_max":40.0,"y_max":50.0},"class_id":2}]}
//! ```
//!
//! Blank lines are ignored. Every frame is validated on import.

use std::io::{BufRead, Write};

use super::ImageFrame;
use crate::error::{Error, Result};

pub fn write_corpus<W: Write>(mut out: W, frames: &[ImageFrame]) -> std::io::Result<()> {
    for frame in frames {
        serde_json::to_writer(&mut out, frame)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(input: R, source: &str) -> Result<Vec<ImageFrame>> {
    let mut frames = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: ImageFrame = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: format!("{source}:{}", n + 1),
            message: e.to_string(),
        })?;
        frame.validate()?;
        frames.push(frame);
    }
    Ok(frames)
}
