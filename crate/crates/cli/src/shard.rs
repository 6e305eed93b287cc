//! Shard files and the byte <-> symbol packing.
//!
//! Layout (version 1), integers little-endian:
//!
//! ```text
//! "PMDS" | version u8 | construction u32 | mu n r s d u32 | N-or-M u32
//! | alpha_mode u32 | characteristic base_degree ext_degree u32
//! | base modulus: count u32, coefficients u32...
//! | ext modulus: count u32, packed base elements u32...
//! | node ell stripe_count payload_len u32 | data_len u64 | payload
//! ```
//!
//! The payload holds `stripe_count * ell` symbols of the node, stripe by
//! stripe, each in `element_byte_width` bytes.

use std::fs;
use std::path::{Path, PathBuf};

use pmds_core::construction_general::AlphaMode;
use pmds_core::{Field, FieldElement, FieldSpec};

use crate::config::{BuiltCode, CodeConfig, ConstructionKind};
use crate::error::CliError;

pub const MAGIC: &[u8; 4] = b"PMDS";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardHeader {
    pub construction: ConstructionKind,
    pub mu: u32,
    pub n: u32,
    pub r: u32,
    pub s: u32,
    pub d: u32,
    /// Stride N (s2 constructions) or extension degree M (general).
    pub n_or_m: u32,
    /// 0 none, 1 basis, 2 bch.
    pub alpha_mode: u32,
    pub characteristic: u32,
    pub base_degree: u32,
    pub ext_degree: u32,
    pub base_modulus: Vec<u32>,
    pub ext_modulus: Vec<u32>,
    pub node: u32,
    pub ell: u32,
    pub stripe_count: u32,
    pub payload_len: u32,
    pub data_len: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardFile {
    pub header: ShardHeader,
    pub payload: Vec<u8>,
}

fn pack_base(spec: &FieldSpec, coeffs: &[u64]) -> u32 {
    if spec.characteristic == 2 {
        coeffs.iter().enumerate().fold(0, |acc, (i, &c)| acc | ((c as u32) << i))
    } else {
        coeffs[0] as u32
    }
}

fn unpack_base(characteristic: u32, base_degree: u32, v: u32) -> Vec<u64> {
    if characteristic == 2 {
        (0..base_degree).map(|i| ((v >> i) & 1) as u64).collect()
    } else {
        vec![v as u64]
    }
}

impl ShardHeader {
    pub fn new(built: &BuiltCode, config: &CodeConfig, node: usize, stripes: usize, data_len: u64) -> ShardHeader {
        let field = built.code().field();
        let spec = field.spec();
        let shape = built.code().shape();
        ShardHeader {
            construction: config.construction,
            mu: shape.mu as u32,
            n: shape.n as u32,
            r: shape.r as u32,
            s: shape.s as u32,
            d: config.d as u32,
            n_or_m: built.n_or_m(),
            alpha_mode: match built.alpha_mode() {
                None => 0,
                Some(AlphaMode::Basis) => 1,
                Some(AlphaMode::Bch) => 2,
            },
            characteristic: spec.characteristic as u32,
            base_degree: spec.base_degree,
            ext_degree: spec.ext_degree,
            base_modulus: spec.base_modulus.iter().map(|&c| c as u32).collect(),
            ext_modulus: spec
                .ext_modulus
                .as_ref()
                .map(|m| m.iter().map(|c| pack_base(spec, c)).collect())
                .unwrap_or_default(),
            node: node as u32,
            ell: shape.ell as u32,
            stripe_count: stripes as u32,
            payload_len: (stripes * shape.ell * field.element_byte_width()) as u32,
            data_len,
        }
    }

    fn base_spec(&self) -> FieldSpec {
        FieldSpec {
            characteristic: self.characteristic as u64,
            base_degree: self.base_degree,
            ext_degree: 1,
            base_modulus: self.base_modulus.iter().map(|&c| c as u64).collect(),
            ext_modulus: None,
        }
    }

    pub fn config(&self) -> CodeConfig {
        let general = self.construction == ConstructionKind::GeneralPmds;
        CodeConfig {
            construction: self.construction,
            mu: self.mu as usize,
            n: self.n as usize,
            r: self.r as usize,
            s: self.s as usize,
            d: self.d as usize,
            alpha_mode: match self.alpha_mode {
                1 => Some(AlphaMode::Basis),
                2 => Some(AlphaMode::Bch),
                _ => None,
            },
            q: None,
            stride: (!general).then_some(self.n_or_m as u64),
            independence_limit: None,
            sabotage: None,
            field: Some(self.base_spec()),
        }
    }

    /// Rebuilds the code and checks it matches every header field.
    pub fn build(&self) -> Result<(CodeConfig, BuiltCode), CliError> {
        let config = self.config();
        let built = config.build()?;
        let expected = ShardHeader::new(&built, &config, self.node as usize, self.stripe_count as usize, self.data_len);
        if &expected != self {
            return Err(CliError::Io("shard header does not match the code it names".into()));
        }
        let spec = built.code().field().spec();
        let ext: Vec<u32> = spec
            .ext_modulus
            .as_ref()
            .map(|m| m.iter().map(|c| pack_base(spec, c)).collect())
            .unwrap_or_default();
        debug_assert_eq!(
            ext.iter().map(|&v| unpack_base(self.characteristic, self.base_degree, v)).collect::<Vec<_>>(),
            spec.ext_modulus.clone().unwrap_or_default()
        );
        Ok((config, built))
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        let mut put = |v: u32| out.extend_from_slice(&v.to_le_bytes());
        put(self.construction.id());
        for v in [self.mu, self.n, self.r, self.s, self.d, self.n_or_m, self.alpha_mode] {
            put(v);
        }
        for v in [self.characteristic, self.base_degree, self.ext_degree] {
            put(v);
        }
        put(self.base_modulus.len() as u32);
        self.base_modulus.iter().for_each(|&v| put(v));
        put(self.ext_modulus.len() as u32);
        self.ext_modulus.iter().for_each(|&v| put(v));
        for v in [self.node, self.ell, self.stripe_count, self.payload_len] {
            put(v);
        }
        out.extend_from_slice(&self.data_len.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CliError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::Io("truncated shard".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn list(&mut self) -> Result<Vec<u32>, CliError> {
        let len = self.u32()? as usize;
        if len > 1024 {
            return Err(CliError::Io("corrupt shard header".into()));
        }
        (0..len).map(|_| self.u32()).collect()
    }
}

impl ShardFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload.len() + 128);
        self.header.write(&mut out);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ShardFile, CliError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CliError::Io("not a shard file (bad magic)".into()));
        }
        let version = r.take(1)?[0];
        if version != VERSION {
            return Err(CliError::Io(format!("unsupported shard version {version}")));
        }
        let construction = ConstructionKind::from_id(r.u32()?)
            .ok_or_else(|| CliError::Io("unknown construction id".into()))?;
        let header = ShardHeader {
            construction,
            mu: r.u32()?,
            n: r.u32()?,
            r: r.u32()?,
            s: r.u32()?,
            d: r.u32()?,
            n_or_m: r.u32()?,
            alpha_mode: r.u32()?,
            characteristic: r.u32()?,
            base_degree: r.u32()?,
            ext_degree: r.u32()?,
            base_modulus: r.list()?,
            ext_modulus: r.list()?,
            node: r.u32()?,
            ell: r.u32()?,
            stripe_count: r.u32()?,
            payload_len: r.u32()?,
            data_len: u64::from_le_bytes(r.take(8)?.try_into().unwrap()),
        };
        let payload = r.take(header.payload_len as usize)?.to_vec();
        if r.pos != bytes.len() {
            return Err(CliError::Io("trailing bytes after shard payload".into()));
        }
        Ok(ShardFile { header, payload })
    }

    pub fn read(path: &Path) -> Result<ShardFile, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        ShardFile::from_bytes(&bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_bytes()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    /// Symbols of stripe `stripe`.
    pub fn stripe_symbols(&self, field: &Field, stripe: usize) -> Result<Vec<FieldElement>, CliError> {
        let width = field.element_byte_width();
        let ell = self.header.ell as usize;
        let start = stripe * ell * width;
        (0..ell)
            .map(|a| {
                let at = start + a * width;
                field
                    .read_element(&self.payload[at..at + width])
                    .map_err(|e| CliError::Io(format!("node {}: {e}", self.header.node)))
            })
            .collect()
    }
}

pub fn shard_path(dir: &Path, node: usize) -> PathBuf {
    dir.join(format!("node_{node:04}.shard"))
}

/// Serializes one node's symbols across all stripes.
pub fn payload_of(field: &Field, columns: &[Vec<FieldElement>]) -> Vec<u8> {
    let width = field.element_byte_width();
    let mut out = Vec::new();
    let mut buf = vec![0u8; width];
    for col in columns {
        for x in col {
            field.write_element(x, &mut buf);
            out.extend_from_slice(&buf);
        }
    }
    out
}

/// Bits of payload per symbol; symbols carry an integer below `2^bits`.
pub fn symbol_bits(field: &Field) -> Result<usize, CliError> {
    let bits = field.data_bits();
    if bits == 0 || bits > 127 {
        return Err(CliError::Config(format!("fields with {bits} data bits per symbol are not supported")));
    }
    Ok(bits)
}

/// Splits `data` (after an 8-byte length prefix, zero-padded) into stripes
/// of `info_nodes x ell` symbols. Symbols are filled row by row: all info
/// nodes of row 0, then row 1, and so on.
pub fn pack(field: &Field, data: &[u8], info_nodes: usize, ell: usize) -> Result<Vec<Vec<Vec<FieldElement>>>, CliError> {
    let bits = symbol_bits(field)?;
    let mut stream = Vec::with_capacity(data.len() + 8);
    stream.extend_from_slice(&(data.len() as u64).to_le_bytes());
    stream.extend_from_slice(data);
    let per_stripe = info_nodes * ell * bits;
    let total_bits = stream.len() * 8;
    let stripes = total_bits.div_ceil(per_stripe).max(1);
    let bit = |i: usize| -> u128 {
        stream.get(i / 8).map_or(0, |b| ((b >> (i % 8)) & 1) as u128)
    };
    let mut out = Vec::with_capacity(stripes);
    let mut pos = 0;
    for _ in 0..stripes {
        let mut columns = vec![Vec::with_capacity(ell); info_nodes];
        for _a in 0..ell {
            for col in columns.iter_mut() {
                let mut v = 0u128;
                for b in 0..bits {
                    v |= bit(pos + b) << b;
                }
                pos += bits;
                col.push(field.from_index(v).expect("value below the field size"));
            }
        }
        out.push(columns);
    }
    Ok(out)
}

/// Inverse of [`pack`].
pub fn unpack(field: &Field, stripes: &[Vec<Vec<FieldElement>>], ell: usize) -> Result<Vec<u8>, CliError> {
    let bits = symbol_bits(field)?;
    let mut stream = Vec::new();
    let mut acc = 0u8;
    let mut filled = 0;
    for columns in stripes {
        for a in 0..ell {
            for col in columns {
                let v = field
                    .to_index(&col[a])
                    .filter(|&v| v >> bits == 0)
                    .ok_or_else(|| CliError::Io("data symbol out of range".into()))?;
                for b in 0..bits {
                    acc |= (((v >> b) & 1) as u8) << filled;
                    filled += 1;
                    if filled == 8 {
                        stream.push(acc);
                        acc = 0;
                        filled = 0;
                    }
                }
            }
        }
    }
    if stream.len() < 8 {
        return Err(CliError::Io("missing length prefix".into()));
    }
    let len = u64::from_le_bytes(stream[..8].try_into().unwrap()) as usize;
    if len > stream.len() - 8 {
        return Err(CliError::Io("length prefix exceeds the decoded data".into()));
    }
    Ok(stream[8..8 + len].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_round_trip() {
        let f = Field::binary(6).unwrap();
        for len in [0usize, 1, 7, 100, 1000] {
            let data: Vec<u8> = (0..len).map(|i| (i * 37 + 11) as u8).collect();
            let stripes = pack(&f, &data, 4, 16).unwrap();
            assert_eq!(unpack(&f, &stripes, 16).unwrap(), data);
        }
        let p = Field::prime(11).unwrap().extension(3).unwrap();
        let data = b"odd characteristic".to_vec();
        let stripes = pack(&p, &data, 3, 1).unwrap();
        assert_eq!(unpack(&p, &stripes, 1).unwrap(), data);
    }

    #[test]
    fn empty_input_is_one_zero_stripe() {
        let f = Field::binary(5).unwrap();
        let stripes = pack(&f, &[], 4, 8).unwrap();
        assert_eq!(stripes.len(), 1);
        assert!(stripes[0].iter().flatten().all(|x| f.is_zero(x)));
    }

    #[test]
    fn header_round_trip() {
        let cfg = CodeConfig::from_json(
            r#"{"construction": "general-pmds", "mu": 2, "n": 4, "r": 1, "s": 2, "d": 3, "q": 4}"#,
        )
        .unwrap();
        let built = cfg.build().unwrap();
        let header = ShardHeader::new(&built, &cfg, 5, 3, 1234);
        let shard = ShardFile {
            payload: vec![7; header.payload_len as usize],
            header,
        };
        let back = ShardFile::from_bytes(&shard.to_bytes()).unwrap();
        assert_eq!(back, shard);
        let (_, rebuilt) = back.header.build().unwrap();
        assert_eq!(rebuilt.code().field(), built.code().field());
        let mut bytes = shard.to_bytes();
        bytes[0] = b'X';
        assert!(ShardFile::from_bytes(&bytes).is_err());
        assert!(ShardFile::from_bytes(&shard.to_bytes()[..20]).is_err());
    }
}
