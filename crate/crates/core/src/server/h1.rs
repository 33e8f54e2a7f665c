//! Plain HTTP/1.1 listener for tooling without HTTP/3 support.

use bytes::Bytes;
use http_body_util::{BodyExt, Full};
use hyper::service::service_fn;
use hyper_util::rt::TokioIo;
use log::debug;
use tokio::net::TcpListener;
use tokio::sync::watch;

use super::api::{error_response, Api};

pub async fn serve(listener: TcpListener, api: Api, mut stop: watch::Receiver<bool>) {
    loop {
        let accepted = tokio::select! {
            a = listener.accept() => a,
            _ = stop.changed() => break,
        };
        let Ok((tcp, _)) = accepted else { continue };
        let api = api.clone();
        tokio::spawn(async move {
            let service = service_fn(move |req: hyper::Request<hyper::body::Incoming>| {
                let api = api.clone();
                async move {
                    let (parts, body) = req.into_parts();
                    let resp = match body.collect().await {
                        Ok(b) => api.handle(http::Request::from_parts(parts, b.to_bytes())).await,
                        Err(e) => error_response(http::StatusCode::BAD_REQUEST, e.to_string()),
                    };
                    Ok::<_, std::convert::Infallible>(resp.map(Full::<Bytes>::new))
                }
            });
            if let Err(e) = hyper::server::conn::http1::Builder::new()
                .serve_connection(TokioIo::new(tcp), service)
                .await
            {
                debug!("h1 connection ended: {e}");
            }
        });
    }
}
