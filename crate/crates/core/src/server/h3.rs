use std::net::SocketAddr;
use std::sync::Arc;

use bytes::{Buf, Bytes, BytesMut};
use http::Request;
use log::{debug, warn};
use quinn::crypto::rustls::QuicServerConfig;
use tokio::sync::watch;

use super::api::Api;
use super::tls::{server_config, TlsIdentity};

/// Binds a QUIC endpoint with NewReno congestion control.
pub fn bind(addr: SocketAddr, identity: TlsIdentity) -> anyhow::Result<quinn::Endpoint> {
    let crypto = QuicServerConfig::try_from(server_config(identity)?)?;
    let mut cfg = quinn::ServerConfig::with_crypto(Arc::new(crypto));
    let mut transport = quinn::TransportConfig::default();
    transport.congestion_controller_factory(Arc::new(quinn::congestion::NewRenoConfig::default()));
    cfg.transport_config(Arc::new(transport));
    Ok(quinn::Endpoint::server(cfg, addr)?)
}

/// Accepts connections until `stop` flips to true.
pub async fn serve(endpoint: quinn::Endpoint, api: Api, mut stop: watch::Receiver<bool>) {
    loop {
        let incoming = tokio::select! {
            i = endpoint.accept() => i,
            _ = stop.changed() => break,
        };
        let Some(incoming) = incoming else { break };
        let api = api.clone();
        let stop = stop.clone();
        tokio::spawn(async move {
            if let Err(e) = connection(incoming, api, stop).await {
                debug!("h3 connection ended: {e}");
            }
        });
    }
}

async fn connection(
    incoming: quinn::Incoming,
    api: Api,
    mut stop: watch::Receiver<bool>,
) -> anyhow::Result<()> {
    let conn = incoming.await?;
    let mut h3 = h3::server::Connection::<_, Bytes>::new(h3_quinn::Connection::new(conn)).await?;
    loop {
        let resolver = tokio::select! {
            r = h3.accept() => r,
            _ = stop.changed() => return Ok(()),
        };
        match resolver {
            Ok(Some(resolver)) => {
                let api = api.clone();
                tokio::spawn(async move {
                    if let Err(e) = request(resolver, api).await {
                        warn!("h3 request failed: {e}");
                    }
                });
            }
            Ok(None) => return Ok(()),
            Err(e) => return Err(e.into()),
        }
    }
}

async fn request(
    resolver: h3::server::RequestResolver<h3_quinn::Connection, Bytes>,
    api: Api,
) -> anyhow::Result<()> {
    let (head, mut stream) = resolver.resolve_request().await?;
    let mut body = BytesMut::new();
    while let Some(mut chunk) = stream.recv_data().await? {
        while chunk.has_remaining() {
            let part = chunk.chunk();
            body.extend_from_slice(part);
            let n = part.len();
            chunk.advance(n);
        }
    }
    let (parts, ()) = head.into_parts();
    let resp = api.handle(Request::from_parts(parts, body.freeze())).await;
    let (parts, body) = resp.into_parts();
    stream.send_response(http::Response::from_parts(parts, ())).await?;
    if !body.is_empty() {
        stream.send_data(body).await?;
    }
    stream.finish().await?;
    Ok(())
}
