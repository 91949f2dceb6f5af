use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Instant;

use super::protocol::{
    decode_payload, encode_message, parse_header, ProtocolError, WireMessage, HEADER_LEN, MAGIC,
};
use super::{handle_request, OffloadError, OffloadModels};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Event {
    Frame(WireMessage, usize),
    Error(ProtocolError),
}

/// Splits a byte stream into frames, skipping garbage up to the next magic.
#[derive(Debug, Default)]
pub(crate) struct FrameAssembler {
    buf: Vec<u8>,
    in_garbage: bool,
}

fn magic_prefix_at(buf: &[u8], i: usize) -> bool {
    let m = (buf.len() - i).min(4);
    buf[i..i + m] == MAGIC[..m]
}

impl FrameAssembler {
    pub(crate) fn push(&mut self, data: &[u8]) {
        self.buf.extend_from_slice(data);
    }

    pub(crate) fn next_event(&mut self) -> Option<Event> {
        loop {
            if self.buf.is_empty() {
                return None;
            }
            if !magic_prefix_at(&self.buf, 0) {
                let mut bad = [0u8; 4];
                let n = self.buf.len().min(4);
                bad[..n].copy_from_slice(&self.buf[..n]);
                let skip = (1..self.buf.len()).find(|&i| magic_prefix_at(&self.buf, i)).unwrap_or(self.buf.len());
                self.buf.drain(..skip);
                if !self.in_garbage {
                    self.in_garbage = true;
                    return Some(Event::Error(ProtocolError::BadMagic(bad)));
                }
                continue;
            }
            if self.buf.len() < HEADER_LEN {
                return None;
            }
            match parse_header(&self.buf[..HEADER_LEN]) {
                Ok(h) => {
                    let end = HEADER_LEN + h.payload_len;
                    if self.buf.len() < end {
                        return None;
                    }
                    let r = decode_payload(h.msg_type, &self.buf[HEADER_LEN..end]);
                    self.buf.drain(..end);
                    self.in_garbage = false;
                    return Some(match r {
                        Ok(m) => Event::Frame(m, end),
                        Err(e) => Event::Error(e),
                    });
                }
                Err(e @ ProtocolError::UnknownType(_)) => {
                    let len = u32::from_be_bytes(self.buf[6..10].try_into().unwrap()) as usize;
                    if self.buf.len() < HEADER_LEN + len {
                        return None;
                    }
                    self.buf.drain(..HEADER_LEN + len);
                    self.in_garbage = false;
                    return Some(Event::Error(e));
                }
                Err(e) => {
                    // The length cannot be trusted; resynchronize after the magic.
                    self.buf.drain(..MAGIC.len());
                    self.in_garbage = true;
                    return Some(Event::Error(e));
                }
            }
        }
    }
}

pub struct OffloadServer {
    listener: TcpListener,
    models: Arc<OffloadModels>,
}

impl OffloadServer {
    pub fn bind(addr: impl ToSocketAddrs, models: Arc<OffloadModels>) -> Result<Self, OffloadError> {
        let listener = TcpListener::bind(addr).map_err(|e| OffloadError::Bind(e.to_string()))?;
        Ok(Self { listener, models })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener")
    }

    /// Accepts connections forever, one thread each.
    pub fn run(self) -> Result<(), OffloadError> {
        log::info!("serving on {}", self.local_addr());
        for conn in self.listener.incoming() {
            match conn {
                Ok(stream) => {
                    let models = Arc::clone(&self.models);
                    thread::spawn(move || {
                        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
                        if let Err(e) = serve_connection(stream, &models) {
                            log::warn!("{peer}: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
        Ok(())
    }

    pub fn spawn(self) -> JoinHandle<Result<(), OffloadError>> {
        thread::spawn(move || self.run())
    }
}

pub fn serve_offload(addr: impl ToSocketAddrs, models: Arc<OffloadModels>) -> Result<(), OffloadError> {
    OffloadServer::bind(addr, models)?.run()
}

fn send(stream: &mut TcpStream, msg: &WireMessage) -> std::io::Result<()> {
    let bytes = encode_message(msg).unwrap_or_else(|e| {
        encode_message(&WireMessage::error(e.code(), e.to_string())).expect("short error frame")
    });
    stream.write_all(&bytes)
}

/// Services requests in order until the peer disconnects.
pub fn serve_connection(mut stream: TcpStream, models: &OffloadModels) -> std::io::Result<()> {
    stream.set_nodelay(true).ok();
    let mut asm = FrameAssembler::default();
    let mut chunk = vec![0u8; 64 * 1024];
    loop {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            return Ok(());
        }
        asm.push(&chunk[..n]);
        while let Some(ev) = asm.next_event() {
            let reply = match ev {
                Event::Frame(req, bytes) => {
                    let started = Instant::now();
                    let reply = handle_request(models, &req);
                    log::info!(
                        "{} {} bytes {} ns",
                        req.type_name(),
                        bytes,
                        started.elapsed().as_nanos()
                    );
                    reply
                }
                Event::Error(e) => {
                    log::info!("protocol error: {e}");
                    WireMessage::error(e.code(), e.to_string())
                }
            };
            send(&mut stream, &reply)?;
        }
    }
}
