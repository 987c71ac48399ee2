//! Binary shard layout, little-endian throughout:
//!
//! ```text
//! "GNIX" | version u16 | shard_id u32 | num_docs u32 | num_terms u32
//! doc table:   per doc  id_len u32, id, len u32, text_offset u64, text_len u64
//! dictionary:  per term (lexicographic) term_len u32, term, n u32, n × (ordinal u32, tf u32)
//! text blob
//! ```

use super::index::{IndexError, Posting, ShardIndex, StoredDoc};

const MAGIC: &[u8; 4] = b"GNIX";
const VERSION: u16 = 1;

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend((s.len() as u32).to_le_bytes());
    out.extend(s.as_bytes());
}

pub(super) fn encode(shard: &ShardIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend(MAGIC);
    out.extend(VERSION.to_le_bytes());
    out.extend(shard.shard_id.to_le_bytes());
    out.extend((shard.docs.len() as u32).to_le_bytes());
    out.extend((shard.terms.len() as u32).to_le_bytes());
    let mut offset = 0u64;
    for d in &shard.docs {
        put_str(&mut out, &d.id);
        out.extend(d.len.to_le_bytes());
        out.extend(offset.to_le_bytes());
        out.extend((d.text.len() as u64).to_le_bytes());
        offset += d.text.len() as u64;
    }
    for (term, postings) in &shard.terms {
        put_str(&mut out, term);
        out.extend((postings.len() as u32).to_le_bytes());
        for p in postings {
            out.extend(p.ordinal.to_le_bytes());
            out.extend(p.tf.to_le_bytes());
        }
    }
    for d in &shard.docs {
        out.extend(d.text.as_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(IndexError::Truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, IndexError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, IndexError> {
        let n = self.u32()? as usize;
        utf8(self.take(n)?)
    }
}

fn utf8(b: &[u8]) -> Result<String, IndexError> {
    String::from_utf8(b.to_vec()).map_err(|_| IndexError::Corrupt("invalid utf-8".into()))
}

pub(super) fn decode(bytes: &[u8]) -> Result<ShardIndex, IndexError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4).map_err(|_| IndexError::BadMagic)? != MAGIC {
        return Err(IndexError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(IndexError::UnsupportedVersion(version));
    }
    let shard_id = r.u32()?;
    let num_docs = r.u32()? as usize;
    let num_terms = r.u32()? as usize;
    let mut table = Vec::with_capacity(num_docs.min(1 << 20));
    for _ in 0..num_docs {
        let id = r.string()?;
        let len = r.u32()?;
        let (off, n) = (r.u64()?, r.u64()?);
        table.push((id, len, off, n));
    }
    let mut shard = ShardIndex { shard_id, ..Default::default() };
    let mut prev: Option<String> = None;
    for _ in 0..num_terms {
        let term = r.string()?;
        if prev.as_ref().is_some_and(|p| *p >= term) {
            return Err(IndexError::Corrupt("term dictionary not sorted".into()));
        }
        let n = r.u32()? as usize;
        let mut postings = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let p = Posting { ordinal: r.u32()?, tf: r.u32()? };
            if p.ordinal as usize >= num_docs || p.tf == 0 || postings.last().is_some_and(|q: &Posting| q.ordinal >= p.ordinal) {
                return Err(IndexError::Corrupt(format!("bad posting for term {term:?}")));
            }
            postings.push(p);
        }
        prev = Some(term.clone());
        shard.terms.insert(term, postings);
    }
    let blob = &bytes[r.pos..];
    for (id, len, off, n) in table {
        let (off, n) = (off as usize, n as usize);
        let text = blob.get(off..off.checked_add(n).ok_or(IndexError::Truncated)?).ok_or(IndexError::Truncated)?;
        shard.docs.push(StoredDoc { id, len, text: utf8(text)? });
    }
    Ok(shard)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn sample() -> ShardIndex {
        ShardIndex {
            shard_id: 3,
            terms: BTreeMap::from([
                ("a".to_string(), vec![Posting { ordinal: 0, tf: 2 }, Posting { ordinal: 1, tf: 1 }]),
                ("b".to_string(), vec![Posting { ordinal: 1, tf: 1 }]),
            ]),
            docs: vec![
                StoredDoc { id: "x".into(), len: 2, text: "a a".into() },
                StoredDoc { id: "y".into(), len: 2, text: "a, b".into() },
            ],
        }
    }

    #[test]
    fn roundtrip() {
        let s = sample();
        assert_eq!(decode(&encode(&s)).unwrap(), s);
    }

    #[test]
    fn rejects_damage() {
        let bytes = encode(&sample());
        assert!(matches!(decode(b"NOPE"), Err(IndexError::BadMagic)));
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(decode(&v), Err(IndexError::UnsupportedVersion(9))));
        for cut in [6, 20, bytes.len() - 1] {
            assert!(decode(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }
}
