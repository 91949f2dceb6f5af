use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::protocol::{read_message, write_message, FrameIoError, WireMessage};
use super::{handle_request, Endpoint, OffloadError, OffloadModels, Transport};
use crate::rng::XorShift64Star;
use crate::runtime::ServiceId;

#[derive(Debug, Clone, PartialEq)]
pub struct OffloadResponse {
    pub message: WireMessage,
    pub latency_ms: f64,
}

/// Blocking client for one cloud endpoint, either modeled or over TCP.
#[derive(Debug)]
pub struct OffloadClient {
    endpoint: Endpoint,
    rng: XorShift64Star,
    models: Option<Arc<OffloadModels>>,
    timeout: Duration,
    stream: Option<TcpStream>,
}

impl OffloadClient {
    /// `models` backs simulated endpoints; socket endpoints ignore it.
    pub fn new(endpoint: Endpoint, models: Option<Arc<OffloadModels>>) -> Self {
        let rng = XorShift64Star::new(endpoint.seed);
        Self { endpoint, rng, models, timeout: Duration::from_secs(10), stream: None }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn call(&mut self, service: ServiceId, request: &WireMessage) -> Result<OffloadResponse, OffloadError> {
        match self.endpoint.transport {
            Transport::Simulated => self.call_simulated(service, request),
            Transport::Socket => self.call_socket(request),
        }
    }

    /// Draws the next modeled round trip without making a request.
    pub fn modeled_latency_ms(&mut self, service: ServiceId) -> Result<f64, OffloadError> {
        let model = *self.endpoint.services.get(&service).ok_or_else(|| {
            OffloadError::Unsupported(format!("endpoint {} does not offer {}", self.endpoint.name, service.name()))
        })?;
        Ok(model.sample_ms(&mut self.rng))
    }

    fn call_simulated(&mut self, service: ServiceId, request: &WireMessage) -> Result<OffloadResponse, OffloadError> {
        let model = *self.endpoint.services.get(&service).ok_or_else(|| {
            OffloadError::Unsupported(format!("endpoint {} does not offer {}", self.endpoint.name, service.name()))
        })?;
        let models = self
            .models
            .as_ref()
            .ok_or_else(|| OffloadError::Models("simulated endpoint has no models".into()))?;
        let latency_ms = model.sample_ms(&mut self.rng);
        let mut message = handle_request(models, request);
        // Modeled processing time keeps simulated responses reproducible.
        if let WireMessage::AsrResponse { server_processing_ns, .. } = &mut message {
            *server_processing_ns = (model.processing_ms * 1e6).round() as u64;
        }
        Ok(OffloadResponse { message, latency_ms })
    }

    fn connect(&self) -> Result<TcpStream, OffloadError> {
        let addr = self
            .endpoint
            .address
            .as_deref()
            .ok_or_else(|| OffloadError::Config(format!("endpoint {} has no address", self.endpoint.name)))?;
        let mut last = None;
        for a in addr.to_socket_addrs().map_err(|e| OffloadError::Transport(format!("{addr}: {e}")))? {
            match TcpStream::connect_timeout(&a, self.timeout) {
                Ok(s) => {
                    s.set_read_timeout(Some(self.timeout)).ok();
                    s.set_write_timeout(Some(self.timeout)).ok();
                    s.set_nodelay(true).ok();
                    return Ok(s);
                }
                Err(e) => last = Some(e),
            }
        }
        Err(OffloadError::Transport(format!(
            "{addr}: {}",
            last.map_or_else(|| "no addresses".to_string(), |e| e.to_string())
        )))
    }

    fn call_socket(&mut self, request: &WireMessage) -> Result<OffloadResponse, OffloadError> {
        let started = Instant::now();
        if self.stream.is_none() {
            self.stream = Some(self.connect()?);
        }
        let stream = self.stream.as_mut().expect("connected");
        let result = write_message(stream, request).and_then(|_| read_message(stream));
        match result {
            Ok(message) => Ok(OffloadResponse { message, latency_ms: started.elapsed().as_secs_f64() * 1e3 }),
            Err(e) => {
                self.stream = None;
                Err(match e {
                    FrameIoError::Io(e) => OffloadError::Transport(e.to_string()),
                    FrameIoError::Protocol(p) => OffloadError::Protocol(p),
                })
            }
        }
    }
}

pub fn offload_call(
    client: &mut OffloadClient,
    service: ServiceId,
    request: &WireMessage,
) -> Result<OffloadResponse, OffloadError> {
    client.call(service, request)
}
