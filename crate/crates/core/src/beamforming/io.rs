//! Binary sample-block files.
//!
//! Layout, all little-endian: a 16-byte header of magic (4 bytes, `LISA` for
//! antenna-domain and `LIST` for terminal-domain blocks), rows per symbol
//! (u32), symbol count (u32) and subcarrier count (u32); then for each
//! subcarrier, each symbol, each row, the real and imaginary parts as f64.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{BeamformingError, CMatrix, Domain, Result, SampleBlock};

pub const BLOCK_HEADER_LEN: usize = 16;

const ANTENNA_MAGIC: &[u8; 4] = b"LISA";
const TERMINAL_MAGIC: &[u8; 4] = b"LIST";

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| BeamformingError::Format(format!("{what} {v} exceeds u32")))
}

pub fn write_block(mut w: impl Write, block: &SampleBlock) -> Result<()> {
    let magic = match block.domain() {
        Domain::Antenna => ANTENNA_MAGIC,
        Domain::Terminal => TERMINAL_MAGIC,
    };
    let mut header = [0u8; BLOCK_HEADER_LEN];
    header[..4].copy_from_slice(magic);
    header[4..8].copy_from_slice(&to_u32(block.dim(), "rows")?.to_le_bytes());
    header[8..12].copy_from_slice(&to_u32(block.symbols(), "symbols")?.to_le_bytes());
    header[12..16].copy_from_slice(&to_u32(block.n_subcarriers(), "subcarriers")?.to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(block.dim() * block.symbols() * 16);
    for m in block.subcarriers() {
        buf.clear();
        // column-major storage: one column per symbol
        for z in m.iter() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_block(mut r: impl Read) -> Result<SampleBlock> {
    let mut header = [0u8; BLOCK_HEADER_LEN];
    r.read_exact(&mut header)?;
    let domain = match &header[..4] {
        m if m == ANTENNA_MAGIC => Domain::Antenna,
        m if m == TERMINAL_MAGIC => Domain::Terminal,
        m => {
            return Err(BeamformingError::Format(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(m)
            )))
        }
    };
    let field = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (dim, symbols, n_sc) = (field(4), field(8), field(12));
    if dim == 0 || n_sc == 0 {
        return Err(BeamformingError::Format("empty block".into()));
    }
    let mut raw = vec![0u8; dim * symbols * 16];
    let subcarriers = (0..n_sc)
        .map(|_| {
            r.read_exact(&mut raw)?;
            let values = raw.chunks_exact(16).map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            });
            Ok(CMatrix::from_iterator(dim, symbols, values))
        })
        .collect::<Result<Vec<_>>>()?;
    SampleBlock::new(domain, subcarriers)
}
