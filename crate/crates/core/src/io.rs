//! Lossless binary dataset files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "SLSDATA\0"
//! version  u8       1
//! flags    u8       bit 0: a beta* block follows y
//! n, p, k  u64 x 3
//! X        n*p f64, row-major
//! Z        n*k f64, row-major
//! y        n   f64
//! beta*    k*p f64, row-major (optional)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Result, SlsError};
use crate::model::Dataset;

pub const MAGIC: [u8; 8] = *b"SLSDATA\0";
pub const VERSION: u8 = 1;
const FLAG_BETA: u8 = 1;

pub fn write_dataset_to<W: Write>(data: &Dataset, beta_star: Option<&Array2<f64>>, out: W) -> Result<()> {
    let (n, p, k) = (data.n(), data.p(), data.k());
    if let Some(b) = beta_star {
        if b.dim() != (k, p) {
            return Err(SlsError::DimensionMismatch(format!(
                "beta* is {:?}, expected ({k}, {p})",
                b.dim()
            )));
        }
    }
    let mut out = BufWriter::new(out);
    out.write_all(&MAGIC)?;
    out.write_all(&[VERSION, if beta_star.is_some() { FLAG_BETA } else { 0 }])?;
    for d in [n, p, k] {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut put = |values: &mut dyn Iterator<Item = &f64>| -> std::io::Result<()> {
        for v in values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    };
    // `iter` walks in logical row-major order whatever the memory layout
    put(&mut data.x().iter())?;
    put(&mut data.z().iter())?;
    put(&mut data.y().iter())?;
    if let Some(b) = beta_star {
        put(&mut b.iter())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_dataset(path: &Path, data: &Dataset, beta_star: Option<&Array2<f64>>) -> Result<()> {
    write_dataset_to(data, beta_star, File::create(path)?)
}

pub fn read_dataset_from<R: Read>(input: R) -> Result<(Dataset, Option<Array2<f64>>)> {
    let mut input = BufReader::new(input);
    let mut head = [0u8; 8 + 2 + 24];
    input.read_exact(&mut head).map_err(truncated)?;
    if head[..8] != MAGIC {
        return Err(SlsError::Format("not a dataset file (bad magic)".into()));
    }
    if head[8] != VERSION {
        return Err(SlsError::Format(format!("unsupported dataset version {}", head[8])));
    }
    let flags = head[9];
    if flags & !FLAG_BETA != 0 {
        return Err(SlsError::Format(format!("unknown flags {flags:#04x}")));
    }
    let dim = |i: usize| -> Result<usize> {
        let v = u64::from_le_bytes(head[10 + 8 * i..18 + 8 * i].try_into().unwrap());
        usize::try_from(v).map_err(|_| SlsError::Format(format!("dimension {v} too large")))
    };
    let (n, p, k) = (dim(0)?, dim(1)?, dim(2)?);
    let size = |a: usize, b: usize| {
        a.checked_mul(b)
            .filter(|&m| m.checked_mul(8).is_some())
            .ok_or_else(|| SlsError::Format(format!("block {a} x {b} too large")))
    };
    let x = Array2::from_shape_vec((n, p), read_f64s(&mut input, size(n, p)?)?).map_err(shape)?;
    let z = Array2::from_shape_vec((n, k), read_f64s(&mut input, size(n, k)?)?).map_err(shape)?;
    let y = Array1::from_vec(read_f64s(&mut input, n)?);
    let beta = if flags & FLAG_BETA != 0 {
        Some(Array2::from_shape_vec((k, p), read_f64s(&mut input, size(k, p)?)?).map_err(shape)?)
    } else {
        None
    };
    if input.read(&mut [0u8; 1])? != 0 {
        return Err(SlsError::Format("trailing bytes after dataset".into()));
    }
    Ok((Dataset::new(x, z, y)?, beta))
}

pub fn read_dataset(path: &Path) -> Result<(Dataset, Option<Array2<f64>>)> {
    read_dataset_from(File::open(path)?)
}

fn read_f64s<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count.min(1 << 24));
    let mut buf = vec![0u8; 8 * count.min(1 << 16)];
    let mut left = count;
    while left > 0 {
        let m = left.min(1 << 16);
        let bytes = &mut buf[..8 * m];
        input.read_exact(bytes).map_err(truncated)?;
        out.extend(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())));
        left -= m;
    }
    Ok(out)
}

fn truncated(e: std::io::Error) -> SlsError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        SlsError::Format("dataset file is truncated".into())
    } else {
        SlsError::Io(e)
    }
}

fn shape(e: ndarray::ShapeError) -> SlsError {
    SlsError::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinkKind;
    use crate::synth::{generate, SynthConfig};

    fn sample() -> (Dataset, Array2<f64>) {
        let (d, spec) = generate(&SynthConfig::new(50, 4, vec![LinkKind::Sigmoid, LinkKind::Identity], 3)).unwrap();
        (d, spec.beta_star.unwrap())
    }

    fn bits(a: impl IntoIterator<Item = f64>) -> Vec<u64> {
        a.into_iter().map(f64::to_bits).collect()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let (d, b) = sample();
        for with_beta in [true, false] {
            let mut buf = Vec::new();
            write_dataset_to(&d, with_beta.then_some(&b), &mut buf).unwrap();
            assert_eq!(buf.len(), 34 + 8 * (50 * 4 + 50 * 2 + 50 + if with_beta { 8 } else { 0 }));
            let (back, beta) = read_dataset_from(buf.as_slice()).unwrap();
            assert_eq!(bits(back.x().iter().copied()), bits(d.x().iter().copied()));
            assert_eq!(bits(back.z().iter().copied()), bits(d.z().iter().copied()));
            assert_eq!(bits(back.y().iter().copied()), bits(d.y().iter().copied()));
            assert_eq!(beta.is_some(), with_beta);
            if let Some(beta) = beta {
                assert_eq!(beta, b);
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let (d, b) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        write_dataset(&path, &d, Some(&b)).unwrap();
        let (back, beta) = read_dataset(&path).unwrap();
        assert_eq!(back, d);
        assert_eq!(beta.unwrap(), b);
        assert!(matches!(read_dataset(&dir.path().join("missing")), Err(SlsError::Io(_))));
    }

    #[test]
    fn rejects_corrupt_files() {
        let (d, b) = sample();
        let mut buf = Vec::new();
        write_dataset_to(&d, Some(&b), &mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_dataset_from(bad.as_slice()), Err(SlsError::Format(_))));
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(matches!(read_dataset_from(bad.as_slice()), Err(SlsError::Format(_))));
        let short = &buf[..buf.len() - 3];
        assert!(matches!(read_dataset_from(short), Err(SlsError::Format(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_dataset_from(long.as_slice()), Err(SlsError::Format(_))));
        let mut huge = buf;
        huge[10..18].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(read_dataset_from(huge.as_slice()).is_err());
    }

    #[test]
    fn beta_shape_is_checked() {
        let (d, _) = sample();
        let wrong = Array2::<f64>::zeros((1, 4));
        assert!(write_dataset_to(&d, Some(&wrong), Vec::new()).is_err());
    }
}
