//! Length-prefixed binary framing for offload requests.
//!
//! Frame: `ROBO` | version u8 | type u8 | payload_len u32 BE | payload.

use std::io::{Read, Write};

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"ROBO";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 10;
pub const MAX_PAYLOAD: usize = 16 * 1024 * 1024;

pub const TYPE_OBJ_REQUEST: u8 = 1;
pub const TYPE_OBJ_RESPONSE: u8 = 2;
pub const TYPE_ASR_REQUEST: u8 = 3;
pub const TYPE_ASR_RESPONSE: u8 = 4;
pub const TYPE_ERROR: u8 = 255;

/// Codes carried by error frames.
pub mod codes {
    pub const BAD_MAGIC: u16 = 1;
    pub const BAD_VERSION: u16 = 2;
    pub const UNKNOWN_TYPE: u16 = 3;
    pub const OVERSIZE: u16 = 4;
    pub const MALFORMED: u16 = 5;
    pub const UNSUPPORTED: u16 = 6;
    pub const PROCESSING: u16 = 7;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("truncated frame: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("payload of {0} bytes exceeds the 16 MiB limit")]
    Oversize(usize),
    #[error("malformed payload: {0}")]
    Malformed(String),
}

impl ProtocolError {
    pub fn code(&self) -> u16 {
        match self {
            ProtocolError::BadMagic(_) => codes::BAD_MAGIC,
            ProtocolError::BadVersion(_) => codes::BAD_VERSION,
            ProtocolError::UnknownType(_) => codes::UNKNOWN_TYPE,
            ProtocolError::Oversize(_) => codes::OVERSIZE,
            ProtocolError::Truncated { .. } | ProtocolError::Malformed(_) => codes::MALFORMED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireLabel {
    pub name: String,
    pub score: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage {
    ObjRequest { width: u16, height: u16, channels: u8, pixels: Vec<u8> },
    ObjResponse { labels: Vec<WireLabel> },
    AsrRequest { sample_rate: u32, samples: Vec<i16> },
    AsrResponse { text: String, server_processing_ns: u64 },
    Error { code: u16, message: String },
}

impl WireMessage {
    pub fn msg_type(&self) -> u8 {
        match self {
            WireMessage::ObjRequest { .. } => TYPE_OBJ_REQUEST,
            WireMessage::ObjResponse { .. } => TYPE_OBJ_RESPONSE,
            WireMessage::AsrRequest { .. } => TYPE_ASR_REQUEST,
            WireMessage::AsrResponse { .. } => TYPE_ASR_RESPONSE,
            WireMessage::Error { .. } => TYPE_ERROR,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            WireMessage::ObjRequest { .. } => "obj-request",
            WireMessage::ObjResponse { .. } => "obj-response",
            WireMessage::AsrRequest { .. } => "asr-request",
            WireMessage::AsrResponse { .. } => "asr-response",
            WireMessage::Error { .. } => "error",
        }
    }

    pub fn error(code: u16, message: impl Into<String>) -> Self {
        WireMessage::Error { code, message: message.into() }
    }
}

fn malformed<T>(m: impl Into<String>) -> Result<T, ProtocolError> {
    Err(ProtocolError::Malformed(m.into()))
}

fn encode_payload(msg: &WireMessage) -> Result<Vec<u8>, ProtocolError> {
    let mut out = Vec::new();
    match msg {
        WireMessage::ObjRequest { width, height, channels, pixels } => {
            let n = *width as usize * *height as usize * *channels as usize;
            if pixels.len() != n {
                return malformed(format!("{} pixels for {width}x{height}x{channels}", pixels.len()));
            }
            out.extend_from_slice(&width.to_be_bytes());
            out.extend_from_slice(&height.to_be_bytes());
            out.push(*channels);
            out.extend_from_slice(pixels);
        }
        WireMessage::ObjResponse { labels } => {
            let count = u8::try_from(labels.len()).or_else(|_| malformed("more than 255 labels"))?;
            out.push(count);
            for l in labels {
                let len = u8::try_from(l.name.len()).or_else(|_| malformed("label name over 255 bytes"))?;
                out.push(len);
                out.extend_from_slice(l.name.as_bytes());
                out.extend_from_slice(&l.score.to_bits().to_be_bytes());
            }
        }
        WireMessage::AsrRequest { sample_rate, samples } => {
            let count = u32::try_from(samples.len()).or_else(|_| malformed("too many samples"))?;
            out.extend_from_slice(&sample_rate.to_be_bytes());
            out.extend_from_slice(&count.to_be_bytes());
            for s in samples {
                out.extend_from_slice(&s.to_be_bytes());
            }
        }
        WireMessage::AsrResponse { text, server_processing_ns } => {
            let len = u16::try_from(text.len()).or_else(|_| malformed("text over 65535 bytes"))?;
            out.extend_from_slice(&len.to_be_bytes());
            out.extend_from_slice(text.as_bytes());
            out.extend_from_slice(&server_processing_ns.to_be_bytes());
        }
        WireMessage::Error { code, message } => {
            out.extend_from_slice(&code.to_be_bytes());
            out.extend_from_slice(message.as_bytes());
        }
    }
    if out.len() > MAX_PAYLOAD {
        return Err(ProtocolError::Oversize(out.len()));
    }
    Ok(out)
}

pub fn encode_message(msg: &WireMessage) -> Result<Vec<u8>, ProtocolError> {
    let payload = encode_payload(msg)?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg.msg_type());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub msg_type: u8,
    pub payload_len: usize,
}

/// Validates a 10-byte header.
pub fn parse_header(h: &[u8]) -> Result<FrameHeader, ProtocolError> {
    if h.len() < HEADER_LEN {
        return Err(ProtocolError::Truncated { needed: HEADER_LEN, have: h.len() });
    }
    let magic = [h[0], h[1], h[2], h[3]];
    if magic != MAGIC {
        return Err(ProtocolError::BadMagic(magic));
    }
    if h[4] != VERSION {
        return Err(ProtocolError::BadVersion(h[4]));
    }
    let msg_type = h[5];
    let payload_len = u32::from_be_bytes([h[6], h[7], h[8], h[9]]) as usize;
    if payload_len > MAX_PAYLOAD {
        return Err(ProtocolError::Oversize(payload_len));
    }
    if !matches!(
        msg_type,
        TYPE_OBJ_REQUEST | TYPE_OBJ_RESPONSE | TYPE_ASR_REQUEST | TYPE_ASR_RESPONSE | TYPE_ERROR
    ) {
        return Err(ProtocolError::UnknownType(msg_type));
    }
    Ok(FrameHeader { msg_type, payload_len })
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        if self.buf.len() - self.pos < n {
            return malformed(format!("payload ends at {} but {} more bytes expected", self.buf.len(), n));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ProtocolError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ProtocolError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn utf8(&mut self, n: usize) -> Result<String, ProtocolError> {
        String::from_utf8(self.take(n)?.to_vec()).or_else(|_| malformed("invalid UTF-8"))
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }

    fn finish(&self) -> Result<(), ProtocolError> {
        if self.pos != self.buf.len() {
            return malformed(format!("{} trailing payload bytes", self.buf.len() - self.pos));
        }
        Ok(())
    }
}

/// Parses a payload of the given type.
pub fn decode_payload(msg_type: u8, payload: &[u8]) -> Result<WireMessage, ProtocolError> {
    let mut c = Cursor { buf: payload, pos: 0 };
    let msg = match msg_type {
        TYPE_OBJ_REQUEST => {
            let width = c.u16()?;
            let height = c.u16()?;
            let channels = c.u8()?;
            let n = width as usize * height as usize * channels as usize;
            let pixels = c.take(n)?.to_vec();
            WireMessage::ObjRequest { width, height, channels, pixels }
        }
        TYPE_OBJ_RESPONSE => {
            let count = c.u8()?;
            let mut labels = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let len = c.u8()? as usize;
                let name = c.utf8(len)?;
                let score = f32::from_bits(c.u32()?);
                labels.push(WireLabel { name, score });
            }
            WireMessage::ObjResponse { labels }
        }
        TYPE_ASR_REQUEST => {
            let sample_rate = c.u32()?;
            let count = c.u32()? as usize;
            let raw = c.take(count.checked_mul(2).ok_or_else(|| ProtocolError::Malformed("sample count".into()))?)?;
            let samples = raw.chunks_exact(2).map(|b| i16::from_be_bytes([b[0], b[1]])).collect();
            WireMessage::AsrRequest { sample_rate, samples }
        }
        TYPE_ASR_RESPONSE => {
            let len = c.u16()? as usize;
            let text = c.utf8(len)?;
            let server_processing_ns = c.u64()?;
            WireMessage::AsrResponse { text, server_processing_ns }
        }
        TYPE_ERROR => {
            let code = c.u16()?;
            let message = String::from_utf8(c.rest().to_vec()).or_else(|_| malformed("invalid UTF-8"))?;
            WireMessage::Error { code, message }
        }
        t => return Err(ProtocolError::UnknownType(t)),
    };
    c.finish()?;
    Ok(msg)
}

/// Decodes the frame at the start of `bytes`, returning it with the number
/// of bytes it occupied.
pub fn decode_frame(bytes: &[u8]) -> Result<(WireMessage, usize), ProtocolError> {
    let h = parse_header(bytes)?;
    let end = HEADER_LEN + h.payload_len;
    if bytes.len() < end {
        return Err(ProtocolError::Truncated { needed: end, have: bytes.len() });
    }
    Ok((decode_payload(h.msg_type, &bytes[HEADER_LEN..end])?, end))
}

/// Decodes exactly one complete frame.
pub fn decode_message(bytes: &[u8]) -> Result<WireMessage, ProtocolError> {
    let (msg, used) = decode_frame(bytes)?;
    if used != bytes.len() {
        return malformed(format!("{} bytes after the frame", bytes.len() - used));
    }
    Ok(msg)
}

#[derive(Debug, Error)]
pub enum FrameIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

pub fn write_message(w: &mut impl Write, msg: &WireMessage) -> Result<(), FrameIoError> {
    w.write_all(&encode_message(msg)?)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame from a stream.
pub fn read_message(r: &mut impl Read) -> Result<WireMessage, FrameIoError> {
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head)?;
    let h = parse_header(&head)?;
    let mut payload = vec![0u8; h.payload_len];
    r.read_exact(&mut payload)?;
    Ok(decode_payload(h.msg_type, &payload)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_obj_response_is_eleven_bytes() {
        let b = encode_message(&WireMessage::ObjResponse { labels: vec![] }).unwrap();
        assert_eq!(b, [b'R', b'O', b'B', b'O', 1, 2, 0, 0, 0, 1, 0]);
    }

    #[test]
    fn bad_magic() {
        let mut b = encode_message(&WireMessage::error(1, "x")).unwrap();
        b[..4].copy_from_slice(b"XXXX");
        assert_eq!(decode_message(&b), Err(ProtocolError::BadMagic(*b"XXXX")));
    }

    #[test]
    fn truncated_and_oversize() {
        let b = encode_message(&WireMessage::AsrRequest { sample_rate: 8000, samples: vec![1, -2, 3] }).unwrap();
        assert!(matches!(decode_message(&b[..b.len() - 1]), Err(ProtocolError::Truncated { .. })));
        let mut h = b[..HEADER_LEN].to_vec();
        h[6..10].copy_from_slice(&((MAX_PAYLOAD + 1) as u32).to_be_bytes());
        assert_eq!(parse_header(&h), Err(ProtocolError::Oversize(MAX_PAYLOAD + 1)));
    }

    #[test]
    fn unknown_type_rejected() {
        let mut b = encode_message(&WireMessage::error(1, "")).unwrap();
        b[5] = 9;
        assert_eq!(decode_message(&b), Err(ProtocolError::UnknownType(9)));
    }

    #[test]
    fn inner_length_past_payload_is_malformed() {
        // text_len claims 5 bytes but the payload holds only 2 + 8.
        let mut b = encode_message(&WireMessage::AsrResponse { text: String::new(), server_processing_ns: 7 }).unwrap();
        b[HEADER_LEN + 1] = 5;
        assert!(matches!(decode_message(&b), Err(ProtocolError::Malformed(_))));
    }
}
