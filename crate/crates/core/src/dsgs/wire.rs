//! Binary framing for parameter-server traffic.
//!
//! ```text
//! frame    = length:u32le  tag:u8  body
//! length   = 1 + len(body)          (covers the tag byte)
//! tag      = 1 FETCH | 2 SNAPSHOT | 3 PUSH | 4 ACK
//! FETCH    = (empty)
//! SNAPSHOT = K:u32le  V:u32le  lambda:f64le  triples
//! PUSH     = triples
//! ACK      = applied:u8 (0 or 1)
//! triples  = N:u32le  N x (topic:u32le  word:u32le  value:f64le)
//! ```

use std::io::{self, Read, Write};

use crate::stats::SparseEntry;

pub const TAG_FETCH: u8 = 1;
pub const TAG_SNAPSHOT: u8 = 2;
pub const TAG_PUSH: u8 = 3;
pub const TAG_ACK: u8 = 4;

const TRIPLE_BYTES: usize = 16;

/// Frames larger than this are rejected before allocating.
pub const MAX_FRAME_BYTES: usize = 1 << 30;

#[derive(Clone, Debug, PartialEq)]
pub enum WireMessage {
    Fetch,
    Snapshot {
        topics: u32,
        vocab: u32,
        lambda: f64,
        entries: Vec<SparseEntry>,
    },
    Push {
        entries: Vec<SparseEntry>,
    },
    Ack {
        applied: bool,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("truncated frame: needed {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("length mismatch: header says {declared} bytes, message has {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("frame of {0} bytes exceeds limit")]
    TooLarge(usize),
    #[error("invalid ACK flag {0}")]
    BadFlag(u8),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn put_triples(buf: &mut Vec<u8>, entries: &[SparseEntry]) {
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        buf.extend_from_slice(&e.topic.to_le_bytes());
        buf.extend_from_slice(&e.word.to_le_bytes());
        buf.extend_from_slice(&e.value.to_le_bytes());
    }
}

impl WireMessage {
    pub fn tag(&self) -> u8 {
        match self {
            WireMessage::Fetch => TAG_FETCH,
            WireMessage::Snapshot { .. } => TAG_SNAPSHOT,
            WireMessage::Push { .. } => TAG_PUSH,
            WireMessage::Ack { .. } => TAG_ACK,
        }
    }

    /// Complete frame, length prefix included.
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = vec![0u8; 4];
        buf.push(self.tag());
        match self {
            WireMessage::Fetch => {}
            WireMessage::Snapshot {
                topics,
                vocab,
                lambda,
                entries,
            } => {
                buf.extend_from_slice(&topics.to_le_bytes());
                buf.extend_from_slice(&vocab.to_le_bytes());
                buf.extend_from_slice(&lambda.to_le_bytes());
                put_triples(&mut buf, entries);
            }
            WireMessage::Push { entries } => put_triples(&mut buf, entries),
            WireMessage::Ack { applied } => buf.push(u8::from(*applied)),
        }
        let len = (buf.len() - 4) as u32;
        buf[..4].copy_from_slice(&len.to_le_bytes());
        buf
    }

    /// Decode exactly one complete frame.
    pub fn decode(frame: &[u8]) -> Result<WireMessage, WireError> {
        let mut r = Cursor::new(frame);
        let declared = r.u32()? as usize;
        if declared != frame.len() - 4 {
            if declared > frame.len() - 4 {
                return Err(WireError::Truncated {
                    needed: declared + 4,
                    available: frame.len(),
                });
            }
            return Err(WireError::LengthMismatch {
                declared,
                actual: frame.len() - 4,
            });
        }
        if declared == 0 {
            return Err(WireError::LengthMismatch { declared, actual: 0 });
        }
        Self::decode_body(&frame[4..])
    }

    /// Decode `tag + body`, i.e. a frame without its length prefix.
    fn decode_body(body: &[u8]) -> Result<WireMessage, WireError> {
        let mut r = Cursor::new(body);
        let msg = match r.u8()? {
            TAG_FETCH => WireMessage::Fetch,
            TAG_SNAPSHOT => WireMessage::Snapshot {
                topics: r.u32()?,
                vocab: r.u32()?,
                lambda: r.f64()?,
                entries: r.triples()?,
            },
            TAG_PUSH => WireMessage::Push { entries: r.triples()? },
            TAG_ACK => match r.u8()? {
                0 => WireMessage::Ack { applied: false },
                1 => WireMessage::Ack { applied: true },
                b => return Err(WireError::BadFlag(b)),
            },
            tag => return Err(WireError::UnknownTag(tag)),
        };
        if r.pos != body.len() {
            return Err(WireError::LengthMismatch {
                declared: body.len(),
                actual: r.pos,
            });
        }
        Ok(msg)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(
            WireError::Truncated {
                needed: self.pos.saturating_add(n),
                available: self.buf.len(),
            },
        )?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn triples(&mut self) -> Result<Vec<SparseEntry>, WireError> {
        let n = self.u32()? as usize;
        let remaining = self.buf.len() - self.pos;
        if n.saturating_mul(TRIPLE_BYTES) > remaining {
            return Err(WireError::Truncated {
                needed: self.pos + n.saturating_mul(TRIPLE_BYTES),
                available: self.buf.len(),
            });
        }
        (0..n)
            .map(|_| {
                Ok(SparseEntry {
                    topic: self.u32()?,
                    word: self.u32()?,
                    value: self.f64()?,
                })
            })
            .collect()
    }
}

pub fn write_message<W: Write>(w: &mut W, msg: &WireMessage) -> Result<(), WireError> {
    w.write_all(&msg.encode())?;
    w.flush()?;
    Ok(())
}

/// Read one frame. Returns `Ok(None)` on a clean end of stream before any
/// byte of a new frame.
pub fn read_message<R: Read>(r: &mut R) -> Result<Option<WireMessage>, WireError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => {
                return Err(WireError::Truncated {
                    needed: 4,
                    available: got,
                })
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let declared = u32::from_le_bytes(len) as usize;
    if declared == 0 {
        return Err(WireError::LengthMismatch { declared, actual: 0 });
    }
    if declared > MAX_FRAME_BYTES {
        return Err(WireError::TooLarge(declared));
    }
    let mut body = vec![0u8; declared];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => WireError::Truncated {
            needed: declared,
            available: 0,
        },
        _ => e.into(),
    })?;
    WireMessage::decode_body(&body).map(Some)
}
