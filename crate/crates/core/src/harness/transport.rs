use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use bytes::{Buf, Bytes, BytesMut};
use http::{Request, Response, Uri};
use http_body_util::{BodyExt, Full};
use hyper_util::rt::TokioIo;
use quinn::crypto::rustls::QuicClientConfig;
use rustls::pki_types::pem::PemObject;
use rustls::pki_types::CertificateDer;
use tokio::task::JoinHandle;

use super::HarnessError;
use crate::server::{tls, Api};

fn unreachable(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::ServerUnreachable(e.to_string())
}

fn transport(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Transport(e.to_string())
}

/// One HTTP/3 connection over QUIC.
pub struct H3Client {
    endpoint: quinn::Endpoint,
    send: h3::client::SendRequest<h3_quinn::OpenStreams, Bytes>,
    driver: JoinHandle<()>,
    authority: String,
}

impl H3Client {
    pub async fn connect(
        addr: SocketAddr,
        server_name: &str,
        roots: &[CertificateDer<'static>],
    ) -> Result<Self, HarnessError> {
        let crypto = tls::client_config(roots).map_err(unreachable)?;
        let crypto = QuicClientConfig::try_from(crypto).map_err(unreachable)?;
        let bind: SocketAddr = if addr.is_ipv6() { "[::]:0" } else { "0.0.0.0:0" }
            .parse()
            .expect("literal address");
        let mut endpoint = quinn::Endpoint::client(bind).map_err(unreachable)?;
        let mut transport_cfg = quinn::TransportConfig::default();
        transport_cfg.congestion_controller_factory(Arc::new(quinn::congestion::NewRenoConfig::default()));
        let mut cfg = quinn::ClientConfig::new(Arc::new(crypto));
        cfg.transport_config(Arc::new(transport_cfg));
        endpoint.set_default_client_config(cfg);
        let conn = endpoint
            .connect(addr, server_name)
            .map_err(unreachable)?
            .await
            .map_err(unreachable)?;
        let (mut driver, send) = h3::client::new(h3_quinn::Connection::new(conn))
            .await
            .map_err(unreachable)?;
        let driver = tokio::spawn(async move {
            let _ = driver.wait_idle().await;
        });
        Ok(Self { endpoint, send, driver, authority: format!("{server_name}:{}", addr.port()) })
    }

    pub async fn request(&mut self, req: Request<Bytes>) -> Result<Response<Bytes>, HarnessError> {
        let (mut parts, body) = req.into_parts();
        let path = parts.uri.path_and_query().map_or("/", |p| p.as_str()).to_owned();
        parts.uri = format!("https://{}{}", self.authority, path).parse().map_err(transport)?;
        let mut stream = self
            .send
            .send_request(Request::from_parts(parts, ()))
            .await
            .map_err(transport)?;
        if !body.is_empty() {
            stream.send_data(body).await.map_err(transport)?;
        }
        stream.finish().await.map_err(transport)?;
        let head = stream.recv_response().await.map_err(transport)?;
        let mut buf = BytesMut::new();
        while let Some(mut chunk) = stream.recv_data().await.map_err(transport)? {
            while chunk.has_remaining() {
                let part = chunk.chunk();
                let n = part.len();
                buf.extend_from_slice(part);
                chunk.advance(n);
            }
        }
        let (parts, ()) = head.into_parts();
        Ok(Response::from_parts(parts, buf.freeze()))
    }

    pub async fn close(self) {
        self.endpoint.close(0u32.into(), b"done");
        self.driver.abort();
        self.endpoint.wait_idle().await;
    }
}

/// One keep-alive HTTP/1.1 connection.
pub struct H1Client {
    send: hyper::client::conn::http1::SendRequest<Full<Bytes>>,
    driver: JoinHandle<()>,
    authority: String,
}

impl H1Client {
    pub async fn connect(addr: SocketAddr) -> Result<Self, HarnessError> {
        let tcp = tokio::net::TcpStream::connect(addr).await.map_err(unreachable)?;
        tcp.set_nodelay(true).map_err(unreachable)?;
        let (send, conn) = hyper::client::conn::http1::handshake(TokioIo::new(tcp))
            .await
            .map_err(unreachable)?;
        let driver = tokio::spawn(async move {
            let _ = conn.await;
        });
        Ok(Self { send, driver, authority: addr.to_string() })
    }

    pub async fn request(&mut self, req: Request<Bytes>) -> Result<Response<Bytes>, HarnessError> {
        let (mut parts, body) = req.into_parts();
        parts.headers.insert(http::header::HOST, self.authority.parse().map_err(transport)?);
        self.send.ready().await.map_err(transport)?;
        let resp = self
            .send
            .send_request(Request::from_parts(parts, Full::new(body)))
            .await
            .map_err(transport)?;
        let (parts, body) = resp.into_parts();
        let body = body.collect().await.map_err(transport)?.to_bytes();
        Ok(Response::from_parts(parts, body))
    }
}

impl Drop for H1Client {
    fn drop(&mut self) {
        self.driver.abort();
    }
}

/// How the harness reaches the server.
pub enum FrameTransport {
    H3(H3Client),
    H1(H1Client),
    /// Calls the request router directly, bypassing the network.
    InProcess(Api),
}

impl FrameTransport {
    /// Connects to `https://host:port` over HTTP/3 or `http://host:port` over
    /// HTTP/1.1. `ca_pem` holds the certificates trusted for HTTP/3.
    pub async fn connect(endpoint: &str, ca_pem: Option<&[u8]>) -> Result<Self, HarnessError> {
        let uri: Uri = endpoint
            .parse()
            .map_err(|e| HarnessError::ServerUnreachable(format!("bad endpoint {endpoint}: {e}")))?;
        let host = uri.host().ok_or_else(|| unreachable(format!("no host in {endpoint}")))?;
        let host = host.trim_start_matches('[').trim_end_matches(']').to_owned();
        let secure = match uri.scheme_str() {
            Some("https") => true,
            Some("http") => false,
            other => return Err(unreachable(format!("unsupported scheme {other:?}"))),
        };
        let port = uri.port_u16().unwrap_or(if secure { 443 } else { 80 });
        let addr = tokio::net::lookup_host((host.as_str(), port))
            .await
            .map_err(unreachable)?
            .next()
            .ok_or_else(|| unreachable(format!("{host} did not resolve")))?;
        if secure {
            let roots = match ca_pem {
                Some(pem) => CertificateDer::pem_slice_iter(pem)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(unreachable)?,
                None => Vec::new(),
            };
            let name = if host.parse::<std::net::IpAddr>().is_ok() { "localhost" } else { &host };
            Ok(Self::H3(H3Client::connect(addr, name, &roots).await?))
        } else {
            Ok(Self::H1(H1Client::connect(addr).await?))
        }
    }

    /// Like [`FrameTransport::connect`], reading the trusted certificates
    /// from a PEM file.
    pub async fn connect_with_ca_file(endpoint: &str, ca: Option<&Path>) -> Result<Self, HarnessError> {
        let pem = match ca {
            Some(p) => Some(std::fs::read(p)?),
            None => None,
        };
        Self::connect(endpoint, pem.as_deref()).await
    }

    pub fn protocol(&self) -> &'static str {
        match self {
            Self::H3(_) => "h3",
            Self::H1(_) => "http/1.1",
            Self::InProcess(_) => "in-process",
        }
    }

    pub async fn request(&mut self, req: Request<Bytes>) -> Result<Response<Bytes>, HarnessError> {
        match self {
            Self::H3(c) => c.request(req).await,
            Self::H1(c) => c.request(req).await,
            Self::InProcess(api) => Ok(api.handle(req).await),
        }
    }

    pub async fn get(&mut self, path: &str) -> Result<Response<Bytes>, HarnessError> {
        let req = Request::get(path).body(Bytes::new()).map_err(transport)?;
        self.request(req).await
    }

    pub async fn post(&mut self, path: &str, body: Bytes) -> Result<Response<Bytes>, HarnessError> {
        let req = Request::post(path)
            .header(http::header::CONTENT_TYPE, "application/json")
            .body(body)
            .map_err(transport)?;
        self.request(req).await
    }

    pub async fn close(self) {
        if let Self::H3(c) = self {
            c.close().await;
        }
    }
}
