use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Event, EventError, Polarity, SensorDims};

pub const BINARY_MAGIC: &[u8; 4] = b"EVT1";
const RECORD_LEN: usize = 16;

/// Lazy, validating reader over a `t,x,y,p` CSV event file.
///
/// Yields events in file order; a leading `t,x,y,p` header row is skipped.
pub struct EventReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    dims: SensorDims,
    prev_t: Option<u64>,
    first: bool,
}

impl<R: Read> EventReader<R> {
    pub fn new(reader: R, dims: SensorDims) -> Self {
        let records = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader)
            .into_records();
        Self {
            records,
            dims,
            prev_t: None,
            first: true,
        }
    }

    fn parse(&mut self, rec: &csv::StringRecord) -> Result<Event, EventError> {
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(EventError::Parse {
                line,
                msg: format!("expected 4 fields, found {}", rec.len()),
            });
        }
        let field = |i: usize, name: &str| -> Result<u64, EventError> {
            rec[i].parse::<u64>().map_err(|_| EventError::Parse {
                line,
                msg: format!("field `{name}` is not a non-negative integer: {:?}", &rec[i]),
            })
        };
        let (t, x, y, p) = (field(0, "t")?, field(1, "x")?, field(2, "y")?, field(3, "p")?);
        if !self.dims.contains(x, y) {
            return Err(EventError::OutOfBounds {
                line,
                x,
                y,
                width: self.dims.width,
                height: self.dims.height,
            });
        }
        let p = u8::try_from(p)
            .ok()
            .and_then(Polarity::from_bit)
            .ok_or_else(|| EventError::Parse {
                line,
                msg: format!("polarity must be 0 or 1, got {p}"),
            })?;
        if let Some(prev) = self.prev_t {
            if t < prev {
                return Err(EventError::Ordering { line, t, prev });
            }
        }
        self.prev_t = Some(t);
        Ok(Event::new(t, x as u16, y as u16, p))
    }
}

impl<R: Read> Iterator for EventReader<R> {
    type Item = Result<Event, EventError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let rec = match self.records.next()? {
                Ok(r) => r,
                Err(e) => return Some(Err(e.into())),
            };
            if std::mem::take(&mut self.first) && rec.get(0) == Some("t") {
                continue;
            }
            return Some(self.parse(&rec));
        }
    }
}

/// Opens a CSV event file for lazy reading.
pub fn read_event_stream(
    path: impl AsRef<Path>,
    dims: SensorDims,
) -> Result<EventReader<BufReader<File>>, EventError> {
    Ok(EventReader::new(BufReader::new(File::open(path)?), dims))
}

pub fn read_event_csv(path: impl AsRef<Path>, dims: SensorDims) -> Result<Vec<Event>, EventError> {
    read_event_stream(path, dims)?.collect()
}

pub fn write_event_csv(path: impl AsRef<Path>, events: &[Event]) -> Result<(), EventError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,x,y,p")?;
    for e in events {
        writeln!(w, "{},{},{},{}", e.t, e.x, e.y, e.p.bit())?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width little-endian format: `EVT1`, u32 width, u32 height, then
/// 16-byte records (u64 t, u16 x, u16 y, u8 p, 3 pad bytes).
pub fn write_event_binary(
    path: impl AsRef<Path>,
    dims: SensorDims,
    events: &[Event],
) -> Result<(), EventError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&dims.width.to_le_bytes())?;
    w.write_all(&dims.height.to_le_bytes())?;
    let mut rec = [0u8; RECORD_LEN];
    for e in events {
        rec[0..8].copy_from_slice(&e.t.to_le_bytes());
        rec[8..10].copy_from_slice(&e.x.to_le_bytes());
        rec[10..12].copy_from_slice(&e.y.to_le_bytes());
        rec[12] = e.p.bit();
        w.write_all(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_event_binary(path: impl AsRef<Path>) -> Result<(SensorDims, Vec<Event>), EventError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_binary(&bytes)
}

fn decode_binary(bytes: &[u8]) -> Result<(SensorDims, Vec<Event>), EventError> {
    if bytes.len() < 12 || &bytes[0..4] != BINARY_MAGIC {
        return Err(EventError::Format("missing EVT1 header".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let dims = SensorDims::new(u32_at(4), u32_at(8));
    let body = &bytes[12..];
    if body.len() % RECORD_LEN != 0 {
        return Err(EventError::Format(format!(
            "trailing {} bytes after last record",
            body.len() % RECORD_LEN
        )));
    }
    let mut events = Vec::with_capacity(body.len() / RECORD_LEN);
    let mut prev = 0u64;
    for (i, rec) in body.chunks_exact(RECORD_LEN).enumerate() {
        let line = i as u64 + 1;
        let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let x = u16::from_le_bytes(rec[8..10].try_into().unwrap());
        let y = u16::from_le_bytes(rec[10..12].try_into().unwrap());
        let p = Polarity::from_bit(rec[12]).ok_or_else(|| EventError::Parse {
            line,
            msg: format!("polarity byte {}", rec[12]),
        })?;
        if !dims.contains(x as u64, y as u64) {
            return Err(EventError::OutOfBounds {
                line,
                x: x as u64,
                y: y as u64,
                width: dims.width,
                height: dims.height,
            });
        }
        if t < prev {
            return Err(EventError::Ordering { line, t, prev });
        }
        prev = t;
        events.push(Event::new(t, x, y, p));
    }
    Ok((dims, events))
}

/// Reads either format, sniffing the binary magic. For binary files the
/// embedded dimensions must match `dims`.
pub fn read_event_file(path: impl AsRef<Path>, dims: SensorDims) -> Result<Vec<Event>, EventError> {
    let path = path.as_ref();
    let mut head = [0u8; 4];
    let n = File::open(path)?.read(&mut head)?;
    if n == 4 && &head == BINARY_MAGIC {
        let (file_dims, events) = read_event_binary(path)?;
        if file_dims != dims {
            return Err(EventError::Format(format!(
                "file is {}x{}, expected {}x{}",
                file_dims.width, file_dims.height, dims.width, dims.height
            )));
        }
        Ok(events)
    } else {
        read_event_csv(path, dims)
    }
}
