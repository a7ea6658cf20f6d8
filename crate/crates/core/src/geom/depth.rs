//! Depth grids and their on-disk forms.
//!
//! Binary layout (little endian): magic `LMDEPTH\0`, u32 version (1),
//! u32 width, u32 height, then `width * height` f64 values row-major.
//! NaN marks an invalid pixel. The CSV form is one image row per record,
//! with `nan` or an empty field for invalid pixels.

use std::io::{Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LMDEPTH\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::LengthMismatch {
                what: "depth data",
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, d: f64) {
        self.data[v * self.width + u] = d;
    }

    /// Depth at a pixel if it is a usable measurement (finite and positive).
    pub fn valid(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.get(u, v);
        (d.is_finite() && d > 0.0).then_some(d)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        for d in &self.data {
            w.write_all(&d.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Shape("not a depth file".into()));
        }
        let mut word = [0u8; 4];
        let mut next_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        let version = next_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Shape(format!("unsupported depth version {version}")));
        }
        let width = next_u32(&mut r)? as usize;
        let height = next_u32(&mut r)? as usize;
        let mut data = Vec::with_capacity(width * height);
        let mut buf = [0u8; 8];
        for _ in 0..width * height {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        Self::from_vec(width, height, data)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for row in self.data.chunks(self.width) {
            out.write_record(row.iter().map(|d| {
                if d.is_nan() {
                    "nan".to_string()
                } else {
                    d.to_string()
                }
            }))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(r);
        let mut data = Vec::new();
        let mut width = None;
        let mut height = 0;
        for rec in rdr.records() {
            let rec = rec?;
            match width {
                None => width = Some(rec.len()),
                Some(w) if w != rec.len() => {
                    return Err(Error::Shape(format!(
                        "depth csv row {height} has {} columns, expected {w}",
                        rec.len()
                    )))
                }
                _ => {}
            }
            for field in rec.iter() {
                let d = if field.is_empty() || field.eq_ignore_ascii_case("nan") {
                    f64::NAN
                } else {
                    field
                        .parse::<f64>()
                        .map_err(|e| Error::Shape(format!("bad depth value {field:?}: {e}")))?
                };
                data.push(d);
            }
            height += 1;
        }
        Self::from_vec(width.unwrap_or(0), height, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn same(a: &DepthMap, b: &DepthMap) -> bool {
        a.width == b.width
            && a.height == b.height
            && a.data
                .iter()
                .zip(&b.data)
                .all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()))
    }

    proptest! {
        #[test]
        fn binary_and_csv_round_trip(
            w in 1usize..6,
            h in 1usize..6,
            vals in prop::collection::vec(prop_oneof![Just(f64::NAN), 0.01f64..30.0], 36),
        ) {
            let map = DepthMap::from_vec(w, h, vals[..w * h].to_vec()).unwrap();
            let mut bin = Vec::new();
            map.write_binary(&mut bin).unwrap();
            prop_assert!(same(&map, &DepthMap::read_binary(bin.as_slice()).unwrap()));
            let mut text = Vec::new();
            map.write_csv(&mut text).unwrap();
            prop_assert!(same(&map, &DepthMap::read_csv(text.as_slice()).unwrap()));
        }
    }

    #[test]
    fn csv_accepts_empty_fields() {
        let m = DepthMap::read_csv("1.5,,2\nnan,3,4\n".as_bytes()).unwrap();
        assert_eq!((m.width(), m.height()), (3, 2));
        assert!(m.valid(1, 0).is_none() && m.valid(0, 1).is_none());
        assert_eq!(m.valid(2, 1), Some(4.0));
        assert!(DepthMap::read_csv("1,2\n3\n".as_bytes()).is_err());
    }

    #[test]
    fn binary_rejects_garbage() {
        assert!(DepthMap::read_binary(&b"NOTDEPTH........"[..]).is_err());
    }
}
