//! `FDXS` inverted index file.
//!
//! ```text
//! magic "FDXS" | version u32
//! vocabulary: n_terms u32 | term str*            (strictly ascending)
//! postings:   per term: n varint | (doc_ord delta varint, tf varint)*
//! doc table:  n_docs u32 | (unit_id str, doc_len u32)*
//! ```
//! The first delta of a list is the doc ordinal itself.

use std::path::Path;

use super::{InvertedIndex, Posting};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

pub const SPARSE_MAGIC: &[u8; 4] = b"FDXS";
pub const SPARSE_VERSION: u32 = 1;

impl InvertedIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(SPARSE_MAGIC);
        w.u32(SPARSE_VERSION);
        w.u32(self.terms.len() as u32);
        for t in &self.terms {
            w.str(t);
        }
        for list in &self.postings {
            w.varint(list.len() as u64);
            let mut prev = 0u32;
            for p in list {
                w.varint(u64::from(p.doc_ord - prev));
                w.varint(u64::from(p.tf));
                prev = p.doc_ord;
            }
        }
        w.u32(self.doc_ids.len() as u32);
        for (id, len) in self.doc_ids.iter().zip(&self.doc_len) {
            w.str(id);
            w.u32(*len);
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(SPARSE_MAGIC)?;
        r.version(SPARSE_VERSION)?;
        let n_terms = r.count_u32(4)?;
        let terms = (0..n_terms).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let mut postings = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            let n = r.count_varint(2)?;
            let mut list = Vec::with_capacity(n);
            let mut ord = 0u64;
            for i in 0..n {
                let delta = r.varint()?;
                if i > 0 && delta == 0 {
                    return Err(Error::format("zero doc_ord delta"));
                }
                ord = ord
                    .checked_add(delta)
                    .filter(|&o| o <= u64::from(u32::MAX))
                    .ok_or_else(|| Error::format("doc_ord overflow"))?;
                let tf = u32::try_from(r.varint()?).map_err(|_| Error::format("tf overflow"))?;
                list.push(Posting { doc_ord: ord as u32, tf });
            }
            postings.push(list);
        }
        let n_docs = r.count_u32(8)?;
        let mut doc_ids = Vec::with_capacity(n_docs);
        let mut doc_len = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            doc_ids.push(r.str()?);
            doc_len.push(r.u32()?);
        }
        r.finish()?;
        Self::from_parts(terms, postings, doc_len, doc_ids)
            .map_err(|e| Error::format(format!("corrupt sparse index: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
