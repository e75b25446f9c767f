//! Field snapshots on disk: CSV (`x,re,im` or `xi,re,im`) and a
//! little-endian binary layout
//!
//! ```text
//! u64 n | f64 L | f64 t | u64 space (0 physical, 1 frequency) | n × (f64 re, f64 im)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{Field, Grid, Space};
use crate::error::{Error, Result};

pub fn write_csv<W: Write>(field: &Field, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let label = match field.space() {
        Space::Physical => "x",
        Space::Frequency => "xi",
    };
    w.write_record([label, "re", "im"])?;
    for (x, v) in field.nodes().iter().zip(field.values()) {
        w.write_record(&[x.to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot CSV back onto `grid`; node coordinates must match.
pub fn read_csv<R: Read>(grid: Grid, reader: R) -> Result<Field> {
    let mut r = csv::Reader::from_reader(reader);
    let space = match r.headers()?.get(0) {
        Some("x") => Space::Physical,
        Some("xi") => Space::Frequency,
        other => {
            return Err(Error::InvalidInput(format!(
                "snapshot header must start with x or xi, got {other:?}"
            )))
        }
    };
    let nodes = grid.nodes(space);
    let mut values = Vec::with_capacity(grid.n());
    for (k, record) in r.deserialize::<(f64, f64, f64)>().enumerate() {
        let (x, re, im) = record?;
        match nodes.get(k) {
            Some(&node) if (node - x).abs() <= 1e-9 * (1.0 + node.abs()) => {}
            _ => {
                return Err(Error::InvalidInput(format!(
                    "row {k}: node {x} does not match the grid"
                )))
            }
        }
        values.push(Complex64::new(re, im));
    }
    Field::new(grid, space, values)
}

pub fn write_binary<W: Write>(field: &Field, t: f64, mut writer: W) -> Result<()> {
    let grid = field.grid();
    writer.write_all(&(grid.n() as u64).to_le_bytes())?;
    writer.write_all(&grid.length().to_le_bytes())?;
    writer.write_all(&t.to_le_bytes())?;
    let tag: u64 = match field.space() {
        Space::Physical => 0,
        Space::Frequency => 1,
    };
    writer.write_all(&tag.to_le_bytes())?;
    let mut payload = Vec::with_capacity(16 * grid.n());
    for v in field.values() {
        payload.extend_from_slice(&v.re.to_le_bytes());
        payload.extend_from_slice(&v.im.to_le_bytes());
    }
    writer.write_all(&payload)?;
    Ok(())
}

/// Returns the field and its time stamp.
pub fn read_binary<R: Read>(mut reader: R) -> Result<(Field, f64)> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let n = u64::from_le_bytes(next(&mut reader)?);
    let length = f64::from_le_bytes(next(&mut reader)?);
    let t = f64::from_le_bytes(next(&mut reader)?);
    let space = match u64::from_le_bytes(next(&mut reader)?) {
        0 => Space::Physical,
        1 => Space::Frequency,
        tag => return Err(Error::InvalidInput(format!("unknown space tag {tag}"))),
    };
    let n = usize::try_from(n).map_err(|_| Error::InvalidInput(format!("n = {n} too large")))?;
    let grid = Grid::new(n, length)?;
    let mut payload = vec![0u8; 16 * n];
    reader.read_exact(&mut payload)?;
    let values = payload
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok((Field::new(grid, space, values)?, t))
}

pub fn save_binary(field: &Field, t: f64, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_binary(field, t, std::io::BufWriter::new(file))
}

pub fn load_binary(path: &Path) -> Result<(Field, f64)> {
    read_binary(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Field {
        let grid = Grid::new(16, 8.0).unwrap();
        Field::from_fn(grid, Space::Frequency, |xi| Complex64::new(xi.cos(), -0.25 * xi))
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let f = sample();
        let mut bytes = Vec::new();
        write_binary(&f, 12.5, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 32 + 16 * 16);
        assert_eq!(&bytes[..8], &16u64.to_le_bytes());
        let (g, t) = read_binary(bytes.as_slice()).unwrap();
        assert_eq!(t, 12.5);
        assert_eq!(g, f);
    }

    #[test]
    fn csv_round_trip() {
        let f = sample();
        let mut bytes = Vec::new();
        write_csv(&f, &mut bytes).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("xi,re,im\n"));
        let g = read_csv(*f.grid(), bytes.as_slice()).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn truncated_binary_fails() {
        let mut bytes = Vec::new();
        write_binary(&sample(), 1.0, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(read_binary(bytes.as_slice()), Err(Error::Io(_))));
    }
}
