use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use rustls::pki_types::pem::PemObject;
use rustls::pki_types::{CertificateDer, PrivateKeyDer, PrivatePkcs8KeyDer};

pub const ALPN_H3: &[u8] = b"h3";

/// Certificate chain plus key for the QUIC listener.
pub struct TlsIdentity {
    pub chain: Vec<CertificateDer<'static>>,
    pub key: PrivateKeyDer<'static>,
    /// PEM text of the chain, for clients to trust.
    pub cert_pem: String,
}

impl TlsIdentity {
    /// Self-signed certificate for `localhost` and the loopback addresses.
    pub fn self_signed() -> anyhow::Result<Self> {
        let names = ["localhost".to_owned(), "127.0.0.1".to_owned(), "::1".to_owned()];
        let cert = rcgen::generate_simple_self_signed(names)?;
        Ok(Self {
            chain: vec![cert.cert.der().clone()],
            key: PrivatePkcs8KeyDer::from(cert.key_pair.serialize_der()).into(),
            cert_pem: cert.cert.pem(),
        })
    }

    pub fn from_pem_files(cert: &Path, key: &Path) -> anyhow::Result<Self> {
        let cert_pem =
            std::fs::read_to_string(cert).with_context(|| format!("reading {}", cert.display()))?;
        let chain = CertificateDer::pem_slice_iter(cert_pem.as_bytes()).collect::<Result<Vec<_>, _>>()?;
        let key = PrivateKeyDer::from_pem_file(key).with_context(|| format!("reading {}", key.display()))?;
        Ok(Self { chain, key, cert_pem })
    }
}

fn provider() -> Arc<rustls::crypto::CryptoProvider> {
    Arc::new(rustls::crypto::ring::default_provider())
}

pub fn server_config(identity: TlsIdentity) -> anyhow::Result<rustls::ServerConfig> {
    let mut cfg = rustls::ServerConfig::builder_with_provider(provider())
        .with_protocol_versions(&[&rustls::version::TLS13])?
        .with_no_client_auth()
        .with_single_cert(identity.chain, identity.key)?;
    cfg.alpn_protocols = vec![ALPN_H3.to_vec()];
    Ok(cfg)
}

/// Client config trusting exactly the given certificates.
pub fn client_config(roots: &[CertificateDer<'static>]) -> anyhow::Result<rustls::ClientConfig> {
    let mut store = rustls::RootCertStore::empty();
    for cert in roots {
        store.add(cert.clone())?;
    }
    let mut cfg = rustls::ClientConfig::builder_with_provider(provider())
        .with_protocol_versions(&[&rustls::version::TLS13])?
        .with_root_certificates(store)
        .with_no_client_auth();
    cfg.alpn_protocols = vec![ALPN_H3.to_vec()];
    Ok(cfg)
}

pub fn load_certs(path: &Path) -> anyhow::Result<Vec<CertificateDer<'static>>> {
    Ok(CertificateDer::pem_file_iter(path)
        .with_context(|| format!("reading {}", path.display()))?
        .collect::<Result<Vec<_>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pem_round_trip() {
        let id = TlsIdentity::self_signed().unwrap();
        let pem = &id.cert_pem;
        let parsed: Vec<_> = CertificateDer::pem_slice_iter(pem.as_bytes()).collect::<Result<_, _>>().unwrap();
        assert_eq!(parsed, id.chain);
    }

    #[test]
    fn configs_build() {
        let id = TlsIdentity::self_signed().unwrap();
        let roots = id.chain.clone();
        assert_eq!(server_config(id).unwrap().alpn_protocols, [b"h3".to_vec()]);
        assert!(client_config(&roots).is_ok());
    }
}
