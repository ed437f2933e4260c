//! UECS binary embedding stores.
//!
//! ```text
//! header:  "UECS" | version u32 | dim u32 | count u64 | name_len u32 | name
//! record:  id_len u32 | id | dim × f32 means | dim × f32 vars
//! ```
//!
//! All integers and floats are little-endian. Values are held as `f64` in
//! memory and stored as `f32`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{FormatError, Result};
use crate::types::{EmbeddingRecord, EmbeddingStore, GaussianEmbedding};

pub const MAGIC: [u8; 4] = *b"UECS";
pub const VERSION: u32 = 1;
/// Bytes before the model name.
pub const FIXED_HEADER_LEN: usize = 24;

fn refuse(msg: String) -> crate::error::Error {
    FormatError::SerializationRefused(msg).into()
}

fn to_f32(x: f64, what: &str, id: &str) -> Result<f32> {
    let y = x as f32;
    if !y.is_finite() {
        return Err(refuse(format!("{what} of `{id}` is not representable as a finite f32: {x}")));
    }
    Ok(y)
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u32::try_from(s.len()).map_err(|_| refuse(format!("string of {} bytes is too long", s.len())))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Serializes a store; refuses values that do not fit a finite `f32`.
pub fn encode_store(store: &EmbeddingStore) -> Result<Vec<u8>> {
    let dim = u32::try_from(store.dim()).map_err(|_| refuse(format!("dim {} is too large", store.dim())))?;
    let mut out = Vec::with_capacity(FIXED_HEADER_LEN + store.len() * (8 * store.dim() + 16));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(store.len() as u64).to_le_bytes());
    put_str(&mut out, store.model_name())?;
    for r in store.records() {
        put_str(&mut out, &r.id)?;
        for &m in r.embedding.mean() {
            out.extend_from_slice(&to_f32(m, "mean", &r.id)?.to_le_bytes());
        }
        for &v in r.embedding.var() {
            out.extend_from_slice(&to_f32(v, "variance", &r.id)?.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_store_to(writer: &mut impl Write, store: &EmbeddingStore) -> Result<()> {
    writer.write_all(&encode_store(store)?)?;
    writer.flush()?;
    Ok(())
}

/// Writes to a temporary file next to `path`, syncs it and renames it into place.
pub fn write_store(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_store(store)?;
    write_atomic(path.as_ref(), &bytes)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        w.write_all(bytes)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    /// Reads exactly `n` bytes without trusting `n` for allocation.
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        let got = (&mut self.inner).take(n as u64).read_to_end(&mut buf)?;
        if got < n {
            return Err(FormatError::Truncated {
                offset: self.offset,
                needed: n,
            }
            .into());
        }
        self.offset += n as u64;
        Ok(buf)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        let mut filled = 0;
        while filled < N {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(FormatError::Truncated {
                        offset: self.offset,
                        needed: N,
                    }
                    .into())
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += N as u64;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn string(&mut self) -> Result<(String, u64)> {
        let len = self.u32()? as usize;
        let start = self.offset;
        let raw = self.bytes(len)?;
        let s = String::from_utf8(raw).map_err(|_| FormatError::InvalidUtf8 { offset: start })?;
        Ok((s, start))
    }

    fn floats(&mut self, dim: usize) -> Result<(Vec<f64>, u64)> {
        let start = self.offset;
        let raw = self.bytes(dim.checked_mul(4).ok_or(FormatError::Truncated {
            offset: start,
            needed: usize::MAX,
        })?)?;
        Ok((
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect(),
            start,
        ))
    }
}

pub fn read_store_from(reader: impl Read) -> Result<EmbeddingStore> {
    let mut cur = Cursor {
        inner: reader,
        offset: 0,
    };
    let magic: [u8; 4] = cur.array()?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic { found: magic }.into());
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let dim = cur.u32()? as usize;
    if dim == 0 {
        return Err(FormatError::ZeroDim.into());
    }
    let count = cur.u64()?;
    let (model_name, _) = cur.string()?;
    let mut store = EmbeddingStore::new(model_name, dim)?;
    let mut seen = HashSet::new();
    for record in 0..count {
        let record_start = cur.offset;
        let (id, _) = cur.string()?;
        if id.is_empty() {
            return Err(FormatError::EmptyId {
                record,
                offset: record_start,
            }
            .into());
        }
        if !seen.insert(id.clone()) {
            return Err(FormatError::DuplicateId { record, id }.into());
        }
        let (mean, mean_at) = cur.floats(dim)?;
        let (var, var_at) = cur.floats(dim)?;
        if let Some(d) = mean.iter().position(|x| !x.is_finite()) {
            return Err(FormatError::NonFinite {
                record,
                offset: mean_at + 4 * d as u64,
            }
            .into());
        }
        for (d, v) in var.iter().enumerate() {
            let offset = var_at + 4 * d as u64;
            if !v.is_finite() {
                return Err(FormatError::NonFinite { record, offset }.into());
            }
            if *v < 0.0 {
                return Err(FormatError::NegativeVariance { record, offset }.into());
            }
        }
        store.push(EmbeddingRecord::new(id, GaussianEmbedding::new(mean, var)?))?;
    }
    let mut probe = [0u8; 1];
    loop {
        match cur.inner.read(&mut probe) {
            Ok(0) => break,
            Ok(_) => return Err(FormatError::TrailingBytes { offset: cur.offset }.into()),
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(store)
}

pub fn decode_store(bytes: &[u8]) -> Result<EmbeddingStore> {
    read_store_from(bytes)
}

pub fn read_store(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    read_store_from(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    fn sample() -> EmbeddingStore {
        let mut s = EmbeddingStore::new("enc-a", 3).unwrap();
        s.push(EmbeddingRecord::new("d1", GaussianEmbedding::new(vec![0.5, -1.0, 2.0], vec![0.25, 0.0, 1.5]).unwrap()))
            .unwrap();
        s.push(EmbeddingRecord::new("d2", GaussianEmbedding::new(vec![1.0, 0.0, -0.125], vec![0.0; 3]).unwrap()))
            .unwrap();
        s
    }

    fn format_err(bytes: &[u8]) -> FormatError {
        match decode_store(bytes) {
            Err(Error::Format(f)) => f,
            other => panic!("expected a format error, got {other:?}"),
        }
    }

    #[test]
    fn layout_is_little_endian() {
        let bytes = encode_store(&sample()).unwrap();
        assert_eq!(&bytes[..4], b"UECS");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[3, 0, 0, 0]);
        assert_eq!(&bytes[12..20], &[2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[20..24], &[5, 0, 0, 0]);
        assert_eq!(&bytes[24..29], b"enc-a");
        assert_eq!(&bytes[29..33], &[2, 0, 0, 0]);
        assert_eq!(&bytes[35..39], &0.5f32.to_le_bytes());
        assert_eq!(bytes.len(), 29 + 2 * (4 + 2 + 24));
    }

    #[test]
    fn round_trip_and_determinism() {
        let s = sample();
        assert_eq!(decode_store(&encode_store(&s).unwrap()).unwrap(), s);
        assert_eq!(encode_store(&s).unwrap(), encode_store(&s).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.uecs");
        write_store(&s, &path).unwrap();
        assert_eq!(read_store(&path).unwrap(), s);
        assert_eq!(std::fs::read(&path).unwrap(), encode_store(&s).unwrap());
    }

    #[test]
    fn empty_store_round_trips() {
        let s = EmbeddingStore::new("none", 4).unwrap();
        let back = decode_store(&encode_store(&s).unwrap()).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.dim(), 4);
    }

    #[test]
    fn refuses_values_outside_f32() {
        let mut s = EmbeddingStore::new("m", 1).unwrap();
        s.push(EmbeddingRecord::new("x", GaussianEmbedding::new(vec![1e300], vec![0.0]).unwrap()))
            .unwrap();
        assert!(matches!(encode_store(&s), Err(Error::Format(FormatError::SerializationRefused(_)))));
    }

    #[test]
    fn diagnostics() {
        let good = encode_store(&sample()).unwrap();

        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(format_err(&b), FormatError::BadMagic { .. }));

        let mut b = good.clone();
        b[4] = 2;
        assert_eq!(format_err(&b), FormatError::UnsupportedVersion(2));

        let mut b = good.clone();
        b[8] = 0;
        assert_eq!(format_err(&b), FormatError::ZeroDim);

        let cut = good.len() - 3;
        assert_eq!(
            format_err(&good[..cut]),
            FormatError::Truncated {
                offset: (good.len() - 12) as u64,
                needed: 12
            }
        );
        assert!(matches!(format_err(&good[..10]), FormatError::Truncated { offset: 8, needed: 4 }));

        let mut b = good.clone();
        b.push(0);
        assert_eq!(format_err(&b), FormatError::TrailingBytes { offset: good.len() as u64 });

        let mut b = good.clone();
        let first_var = 29 + 4 + 2 + 12;
        b[first_var..first_var + 4].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert_eq!(format_err(&b), FormatError::NegativeVariance { record: 0, offset: first_var as u64 });

        let mut b = good.clone();
        b[35..39].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(format_err(&b), FormatError::NonFinite { record: 0, offset: 35 });

        let mut b = good.clone();
        b[24] = 0xFF;
        assert_eq!(format_err(&b), FormatError::InvalidUtf8 { offset: 24 });

        let mut b = good.clone();
        b[64] = b'1';
        assert!(matches!(format_err(&b), FormatError::DuplicateId { record: 1, .. }));
    }

    #[test]
    fn huge_declared_sizes_do_not_allocate() {
        let mut b = encode_store(&sample()).unwrap();
        b[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(format_err(&b), FormatError::Truncated { .. }));
        let mut b = encode_store(&sample()).unwrap();
        b[20..24].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(format_err(&b), FormatError::Truncated { offset: 24, .. }));
        let mut b = encode_store(&sample()).unwrap();
        b[12..20].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(format_err(&b), FormatError::Truncated { .. }));
    }

    fn store_strategy() -> impl Strategy<Value = EmbeddingStore> {
        (1usize..6, 0usize..6, "[a-z]{0,8}").prop_flat_map(|(dim, n, name)| {
            prop::collection::vec(
                (
                    prop::collection::vec(any::<f32>().prop_filter("finite", |x| x.is_finite()), dim),
                    prop::collection::vec(0f32..1e6, dim),
                ),
                n,
            )
            .prop_map(move |rows| {
                let records: Vec<EmbeddingRecord> = rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, (m, v))| {
                        let e = GaussianEmbedding::new(
                            m.into_iter().map(f64::from).collect(),
                            v.into_iter().map(f64::from).collect(),
                        )
                        .unwrap();
                        EmbeddingRecord::new(format!("id-{i}"), e)
                    })
                    .collect();
                EmbeddingStore::from_records(name.clone(), dim, records).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn round_trip_identity(s in store_strategy()) {
            let bytes = encode_store(&s).unwrap();
            prop_assert_eq!(decode_store(&bytes).unwrap(), s);
        }

        #[test]
        fn every_truncation_is_rejected(s in store_strategy(), cut in any::<prop::sample::Index>()) {
            let bytes = encode_store(&s).unwrap();
            let at = cut.index(bytes.len());
            prop_assert!(decode_store(&bytes[..at]).is_err());
        }
    }
}
