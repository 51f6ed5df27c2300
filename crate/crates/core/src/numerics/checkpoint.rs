use std::io::{self, Read, Write};
use std::path::Path;

use super::{ParamStore, ParameterTensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RXS2S001";

/// Serializes a JSON header and every tensor's values (little-endian f32).
pub fn write_checkpoint<W: Write>(mut out: W, header: &serde_json::Value, params: &ParamStore<f32>) -> io::Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    let header = serde_json::to_vec(header).map_err(io::Error::other)?;
    out.write_all(&u32_len(header.len())?.to_le_bytes())?;
    out.write_all(&header)?;
    out.write_all(&u32_len(params.len())?.to_le_bytes())?;
    for t in params.iter() {
        out.write_all(&u32_len(t.name.len())?.to_le_bytes())?;
        out.write_all(t.name.as_bytes())?;
        out.write_all(&u32_len(t.shape.len())?.to_le_bytes())?;
        for &d in &t.shape {
            out.write_all(&u32_len(d)?.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(4 * t.len());
        for v in &t.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()
}

fn u32_len(n: usize) -> io::Result<u32> {
    u32::try_from(n).map_err(|_| invalid("length exceeds u32"))
}

fn invalid(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a checkpoint back into its header and a store of the saved tensors
/// (gradients zeroed).
pub fn read_checkpoint<R: Read>(mut input: R) -> io::Result<(serde_json::Value, ParamStore<f32>)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(invalid("not a checkpoint file (bad magic)"));
    }
    let n = read_u32(&mut input)? as usize;
    let mut header = vec![0u8; n];
    input.read_exact(&mut header)?;
    let header = serde_json::from_slice(&header).map_err(|e| invalid(&format!("bad checkpoint header: {e}")))?;

    let mut store = ParamStore::new();
    for _ in 0..read_u32(&mut input)? {
        let mut name = vec![0u8; read_u32(&mut input)? as usize];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| invalid("tensor name is not UTF-8"))?;
        let rank = read_u32(&mut input)? as usize;
        let shape = (0..rank).map(|_| read_u32(&mut input).map(|d| d as usize)).collect::<io::Result<Vec<_>>>()?;
        let mut bytes = vec![0u8; 4 * shape.iter().product::<usize>()];
        input.read_exact(&mut bytes)?;
        let values: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        if store.id(&name).is_some() {
            return Err(invalid("duplicate tensor name"));
        }
        let grad = vec![0.0; values.len()];
        store.push(ParameterTensor { name, shape, values, grad });
    }
    Ok((header, store))
}

/// Writes to a sibling temporary file and renames it into place.
pub fn save_checkpoint(path: &Path, header: &serde_json::Value, params: &ParamStore<f32>) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let file = std::fs::File::create(&tmp)?;
        write_checkpoint(io::BufWriter::new(file), header, params)?;
    }
    std::fs::rename(tmp, path)
}

pub fn load_checkpoint(path: &Path) -> io::Result<(serde_json::Value, ParamStore<f32>)> {
    read_checkpoint(io::BufReader::new(std::fs::File::open(path)?))
}
