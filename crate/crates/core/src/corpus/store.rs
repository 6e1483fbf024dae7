//! `FDXC` corpus store.
//!
//! ```text
//! magic "FDXC" | version u32 | n_docs u64 | n_sentences u64 | text_bytes u64
//! n_tombstones u64 | tombstone str*
//! per document: doc_id str | title str | n_sentences u32 | sentence*
//! per sentence: sent_idx u32 | cited u8 | has_score u8 | [score f64] | text str
//! ```
//! `str` is a u32 byte length followed by UTF-8. All integers little-endian.

use std::path::Path;

use super::{Corpus, CorpusStats, Document, Sentence};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

pub const CORPUS_MAGIC: &[u8; 4] = b"FDXC";
pub const CORPUS_VERSION: u32 = 1;

impl Corpus {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(CORPUS_MAGIC);
        w.u32(CORPUS_VERSION);
        w.u64(self.stats.n_docs);
        w.u64(self.stats.n_sentences);
        w.u64(self.stats.text_bytes);
        w.u64(self.tombstones.len() as u64);
        for t in &self.tombstones {
            w.str(t);
        }
        for doc in &self.documents {
            w.str(&doc.doc_id);
            w.str(&doc.title);
            w.u32(doc.sentences.len() as u32);
            for s in &doc.sentences {
                w.u32(s.sent_idx);
                w.u8(u8::from(s.cited));
                match s.claim_score {
                    Some(score) => {
                        w.u8(1);
                        w.f64(score);
                    }
                    None => w.u8(0),
                }
                w.str(&s.text);
            }
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(CORPUS_MAGIC)?;
        r.version(CORPUS_VERSION)?;
        let stored = CorpusStats { n_docs: r.u64()?, n_sentences: r.u64()?, text_bytes: r.u64()? };
        let n_tombstones = r.count_u64(4)?;
        let tombstones = (0..n_tombstones).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        // Smallest document is two empty strings plus a count.
        let n_docs = usize::try_from(stored.n_docs).map_err(|_| Error::format("n_docs overflow"))?;
        if n_docs.saturating_mul(12) > r.remaining() {
            return Err(Error::format("declared document count exceeds input"));
        }
        let mut documents = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            let doc_id = r.str()?;
            let title = r.str()?;
            let n_sent = r.count_u32(10)?;
            let mut sentences = Vec::with_capacity(n_sent);
            for _ in 0..n_sent {
                let sent_idx = r.u32()?;
                let cited = match r.u8()? {
                    0 => false,
                    1 => true,
                    b => return Err(Error::format(format!("bad cited flag {b}"))),
                };
                let claim_score = match r.u8()? {
                    0 => None,
                    1 => Some(r.f64()?),
                    b => return Err(Error::format(format!("bad score flag {b}"))),
                };
                let text = r.str()?;
                sentences.push(Sentence { sent_idx, text, cited, claim_score });
            }
            documents.push(Document { doc_id, title, sentences });
        }
        r.finish()?;
        let corpus = Corpus::with_tombstones(documents, tombstones)
            .map_err(|e| Error::format(format!("corrupt corpus store: {e}")))?;
        if corpus.stats != stored {
            return Err(Error::format(format!(
                "stored stats {stored:?} disagree with contents {:?}",
                corpus.stats
            )));
        }
        Ok(corpus)
    }
}

pub fn save(corpus: &Corpus, path: &Path) -> Result<()> {
    std::fs::write(path, corpus.to_bytes())?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Corpus> {
    Corpus::from_bytes(&std::fs::read(path)?)
}
