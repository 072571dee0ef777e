//! Binary parameter checkpoints.
//!
//! Layout: magic `SPGP`, one version byte, then for every parameter until
//! end of file: name length (u64 LE), UTF-8 name bytes, rows and cols
//! (u64 LE each), then `rows * cols` row-major f64 LE values.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::matrix::Matrix;
use crate::error::{validation, Result};

const MAGIC: &[u8; 4] = b"SPGP";
const VERSION: u8 = 1;

pub fn write_checkpoint<W: Write>(mut out: W, params: &[(String, Matrix)]) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&[VERSION])?;
    for (name, m) in params {
        out.write_all(&(name.len() as u64).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(m.rows() as u64).to_le_bytes())?;
        out.write_all(&(m.cols() as u64).to_le_bytes())?;
        for v in m.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Vec<(String, Matrix)>> {
    let mut header = [0u8; 5];
    input.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(validation("checkpoint: bad magic bytes"));
    }
    if header[4] != VERSION {
        return Err(validation(format!("checkpoint: unsupported version {}", header[4])));
    }
    let mut params = Vec::new();
    loop {
        let mut len = [0u8; 8];
        match input.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let len = u64::from_le_bytes(len) as usize;
        let mut name = vec![0u8; len];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| validation("checkpoint: parameter name is not UTF-8"))?;
        let rows = read_u64(&mut input)? as usize;
        let cols = read_u64(&mut input)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut buf = [0u8; 8];
        for _ in 0..rows * cols {
            input.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        params.push((name, Matrix::from_vec(rows, cols, data)?));
    }
    Ok(params)
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &[(String, Matrix)]) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), params)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Vec<(String, Matrix)>> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
