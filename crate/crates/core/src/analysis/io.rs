//! Sample files: a `# width=W height=H` comment on line 1, a `frame_time_ms,x,y` header, then
//! one point per row.

use std::io::{Read, Write};
use std::path::Path;

use super::{AnalysisError, DensityGrid, SampleSet};
use crate::geometry::{FrameSize, Point};
use crate::scalar::Scalar;

pub const SAMPLE_HEADER: [&str; 3] = ["frame_time_ms", "x", "y"];

#[derive(Debug, Clone, PartialEq)]
pub struct IngestedSamples<T: Scalar = f64> {
    pub samples: SampleSet<T>,
    /// Frame time of each kept point, parallel to `samples.points`.
    pub frame_times_ms: Vec<u64>,
    /// Rows dropped because the point lies outside the frame.
    pub dropped: usize,
}

fn parse_dimensions(line: &str) -> Option<FrameSize> {
    let rest = line.trim().strip_prefix('#')?;
    let (mut width, mut height) = (None, None);
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("width", v)) => width = v.parse().ok(),
            Some(("height", v)) => height = v.parse().ok(),
            _ => {}
        }
    }
    match (width, height) {
        (Some(w), Some(h)) if w > 0 && h > 0 => Some(FrameSize::new(w, h)),
        _ => None,
    }
}

/// Parses a sample file. Rows outside the frame are dropped and counted; any malformed row
/// fails the whole file with every offending line number. An empty input yields an empty set
/// with a zero-sized frame.
pub fn read_samples<T: Scalar, R: Read>(mut input: R) -> Result<IngestedSamples<T>, AnalysisError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    if text.trim().is_empty() {
        return Ok(IngestedSamples {
            samples: SampleSet::empty(FrameSize::new(0, 0)),
            frame_times_ms: Vec::new(),
            dropped: 0,
        });
    }
    let first = text.lines().next().unwrap_or_default();
    let frame = parse_dimensions(first).ok_or_else(|| AnalysisError::Parse {
        lines: vec![1],
        message: "expected `# width=W height=H`".into(),
    })?;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| AnalysisError::Parse {
        lines: vec![2],
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != SAMPLE_HEADER {
        return Err(AnalysisError::Parse {
            lines: vec![header.position().map_or(2, |p| p.line() as usize)],
            message: format!("expected header `{}`", SAMPLE_HEADER.join(",")),
        });
    }

    let mut set = SampleSet::empty(frame);
    let mut frame_times = Vec::new();
    let mut dropped = 0;
    let mut bad_lines = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                bad_lines.push(e.position().map_or(0, |p| p.line() as usize));
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parsed = (record.len() == 3)
            .then(|| {
                Some((
                    record[0].parse::<u64>().ok()?,
                    record[1].parse::<f64>().ok().filter(|v| v.is_finite())?,
                    record[2].parse::<f64>().ok().filter(|v| v.is_finite())?,
                ))
            })
            .flatten();
        match parsed {
            None => bad_lines.push(line),
            Some((t, x, y)) => {
                let p = Point::new(T::of(x), T::of(y));
                if set.contains(&p) {
                    set.points.push(p);
                    frame_times.push(t);
                } else {
                    dropped += 1;
                }
            }
        }
    }
    if !bad_lines.is_empty() {
        return Err(AnalysisError::Parse {
            lines: bad_lines,
            message: "expected `frame_time_ms,x,y` with an integer time and numeric coordinates"
                .into(),
        });
    }
    Ok(IngestedSamples {
        samples: set,
        frame_times_ms: frame_times,
        dropped,
    })
}

pub fn ingest_reference<T: Scalar>(path: impl AsRef<Path>) -> Result<IngestedSamples<T>, AnalysisError> {
    read_samples(std::fs::File::open(path)?)
}

/// Writes `samples` in the sample file format, all rows stamped with `frame_time_ms`.
pub fn write_samples<T: Scalar, W: Write>(
    samples: &SampleSet<T>,
    frame_time_ms: u64,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "# width={} height={}", samples.width, samples.height)?;
    writeln!(out, "{}", SAMPLE_HEADER.join(","))?;
    for p in &samples.points {
        writeln!(out, "{},{},{}", frame_time_ms, p.x.as_f64(), p.y.as_f64())?;
    }
    Ok(())
}

pub fn read_density_json<R: Read>(input: R) -> Result<DensityGrid<f64>, AnalysisError> {
    let grid: DensityGrid<f64> = serde_json::from_reader(input).map_err(|e| AnalysisError::Parse {
        lines: vec![e.line()],
        message: e.to_string(),
    })?;
    if grid.values.len() != grid.width as usize * grid.height as usize {
        return Err(AnalysisError::Parameter("density value count does not match its size".into()));
    }
    Ok(grid)
}
