//! Checkpoint files: a versioned header (magic, format version, wiring,
//! layer shapes, seed) followed by little-endian 64-bit float tensors in
//! declaration order. `load(save(n))` is bit-exact.

use super::{NetConfig, NetworkSet, NnError, PlayerWiring, PvWiring};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"FZN1";
const VERSION: u32 = 1;

pub fn save_params(nets: &NetworkSet, path: &Path) -> Result<(), NnError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    let cfg = &nets.config;
    out.write_all(&cfg.seed.to_le_bytes())?;
    out.write_all(&[
        match cfg.pv_wiring {
            PvWiring::SharedHeads => 0u8,
            PvWiring::SeparatePv => 1u8,
        },
        match cfg.player_wiring {
            PlayerWiring::Shared => 0u8,
            PlayerWiring::PerPlayer => 1u8,
        },
    ])?;
    write_u32(&mut out, cfg.input_dim as u32)?;
    write_u32(&mut out, cfg.action_dim as u32)?;
    write_dims(&mut out, &cfg.trunk)?;
    write_dims(&mut out, &cfg.opponent_trunk)?;
    for net in nets.nets() {
        let mut failed = None;
        net.visit(&mut |v| {
            if failed.is_none() {
                if let Err(e) = out.write_all(&v.to_le_bytes()) {
                    failed = Some(e);
                }
            }
        });
        if let Some(e) = failed {
            return Err(e.into());
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<NetworkSet, NnError> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut input, &mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::CorruptCheckpoint("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(NnError::VersionMismatch { found: version });
    }
    let seed = read_u64(&mut input)?;
    let mut wiring = [0u8; 2];
    read_exact(&mut input, &mut wiring)?;
    let pv_wiring = match wiring[0] {
        0 => PvWiring::SharedHeads,
        1 => PvWiring::SeparatePv,
        other => {
            return Err(NnError::CorruptCheckpoint(format!(
                "unknown policy/value wiring tag {other}"
            )))
        }
    };
    let player_wiring = match wiring[1] {
        0 => PlayerWiring::Shared,
        1 => PlayerWiring::PerPlayer,
        other => {
            return Err(NnError::CorruptCheckpoint(format!(
                "unknown player wiring tag {other}"
            )))
        }
    };
    let input_dim = read_u32(&mut input)? as usize;
    let action_dim = read_u32(&mut input)? as usize;
    let trunk = read_dims(&mut input)?;
    let opponent_trunk = read_dims(&mut input)?;
    let config = NetConfig {
        input_dim,
        action_dim,
        trunk,
        opponent_trunk,
        pv_wiring,
        player_wiring,
        seed,
    };
    let mut nets = NetworkSet::init(config);
    for net in nets.nets_mut() {
        let mut failed: Option<NnError> = None;
        net.visit_mut(&mut |p| {
            if failed.is_none() {
                let mut buf = [0u8; 8];
                match read_exact(&mut input, &mut buf) {
                    Ok(()) => *p = f64::from_le_bytes(buf),
                    Err(e) => failed = Some(e),
                }
            }
        });
        if let Some(e) = failed {
            return Err(e);
        }
    }
    let mut trailing = [0u8; 1];
    match input.read(&mut trailing)? {
        0 => Ok(nets),
        _ => Err(NnError::CorruptCheckpoint(
            "trailing bytes after tensors".into(),
        )),
    }
}

fn write_u32(out: &mut impl Write, v: u32) -> std::io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

fn write_dims(out: &mut impl Write, dims: &[usize]) -> std::io::Result<()> {
    write_u32(out, dims.len() as u32)?;
    for &d in dims {
        write_u32(out, d as u32)?;
    }
    Ok(())
}

fn read_exact(input: &mut impl Read, buf: &mut [u8]) -> Result<(), NnError> {
    input
        .read_exact(buf)
        .map_err(|_| NnError::CorruptCheckpoint("unexpected end of file".into()))
}

fn read_u32(input: &mut impl Read) -> Result<u32, NnError> {
    let mut buf = [0u8; 4];
    read_exact(input, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(input: &mut impl Read) -> Result<u64, NnError> {
    let mut buf = [0u8; 8];
    read_exact(input, &mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_dims(input: &mut impl Read) -> Result<Vec<usize>, NnError> {
    let len = read_u32(input)? as usize;
    if len > 64 {
        return Err(NnError::CorruptCheckpoint(format!(
            "implausible trunk depth {len}"
        )));
    }
    let mut dims = Vec::with_capacity(len);
    for _ in 0..len {
        dims.push(read_u32(input)? as usize);
    }
    Ok(dims)
}
