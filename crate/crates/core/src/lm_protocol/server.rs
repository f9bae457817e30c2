//! Serves an in-process model under the HTTP protocol, one request at a
//! time on a background thread.

use std::net::{SocketAddr, TcpListener, ToSocketAddrs};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::de::DeserializeOwned;
use serde::Serialize;
use socket2::{Domain, Protocol, Socket, Type};
use tiny_http::{Header, Method, Request, Response, Server};

use super::{
    format_probability, DetokenizeRequest, DetokenizeResponse, DistributionRequest,
    DistributionResponse, ErrorResponse, TokenizeRequest, TokenizeResponse, VocabResponse,
};
use crate::error::{Error, Result};
use crate::probmodel::{top_k, LanguageModel};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServerConfig {
    /// Send only the `n` most probable tokens plus the remainder mass.
    pub sparse_top: Option<usize>,
    /// Longest context accepted and advertised.
    pub max_context: Option<usize>,
}

/// A running server; dropping the handle stops it.
pub struct ServerHandle {
    server: Arc<Server>,
    addr: SocketAddr,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    /// Blocks until the server thread exits.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves `model` until the
/// handle is dropped.
pub fn serve<M>(model: M, addr: &str, config: ServerConfig) -> Result<ServerHandle>
where
    M: LanguageModel + 'static,
{
    let server = Server::from_listener(bind(addr)?, None)
        .map_err(|e| Error::Transport(format!("bind {addr}: {e}")))?;
    let bound = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| Error::Transport("server is not on an IP socket".into()))?;
    let server = Arc::new(server);
    let worker = Arc::clone(&server);
    let thread = std::thread::spawn(move || {
        for request in worker.incoming_requests() {
            handle(&model, &config, request);
        }
    });
    Ok(ServerHandle {
        server,
        addr: bound,
        thread: Some(thread),
    })
}

/// A listener with `TCP_NODELAY`, which accepted connections inherit.
fn bind(addr: &str) -> Result<TcpListener> {
    let fail = |e: std::io::Error| Error::Transport(format!("bind {addr}: {e}"));
    let sock_addr = addr
        .to_socket_addrs()
        .map_err(fail)?
        .next()
        .ok_or_else(|| Error::Transport(format!("bind {addr}: no address")))?;
    let socket = Socket::new(Domain::for_address(sock_addr), Type::STREAM, Some(Protocol::TCP))
        .map_err(fail)?;
    socket.set_reuse_address(true).map_err(fail)?;
    socket.set_nodelay(true).map_err(fail)?;
    socket.bind(&sock_addr.into()).map_err(fail)?;
    socket.listen(128).map_err(fail)?;
    Ok(socket.into())
}

fn json_response<T: Serialize>(status: u16, body: &T) -> Response<std::io::Cursor<Vec<u8>>> {
    let bytes = serde_json::to_vec(body).expect("serializable");
    Response::from_data(bytes)
        .with_status_code(status)
        .with_header(
            Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).expect("valid header"),
        )
}

fn read_body<T: DeserializeOwned>(request: &mut Request) -> Result<T> {
    let mut body = String::new();
    request.as_reader().read_to_string(&mut body)?;
    serde_json::from_str(&body).map_err(|e| Error::Protocol(format!("bad request body: {e}")))
}

fn handle<M: LanguageModel>(model: &M, config: &ServerConfig, mut request: Request) {
    let route = (request.method().clone(), request.url().to_owned());
    let result: Result<serde_json::Value> = match (&route.0, route.1.as_str()) {
        (Method::Get, "/vocab") => {
            let vocab = model.vocabulary();
            to_value(&VocabResponse {
                tokens: vocab.surfaces().to_vec(),
                bos: vocab.bos(),
                eos: vocab.eos(),
                max_context: config.max_context,
                fingerprint: Some(vocab.fingerprint()),
            })
        }
        (Method::Post, "/distribution") => read_body::<DistributionRequest>(&mut request)
            .and_then(|req| distribution(model, config, &req))
            .and_then(|r| to_value(&r)),
        (Method::Post, "/tokenize") => read_body::<TokenizeRequest>(&mut request)
            .and_then(|req| model.tokenize(&req.text))
            .and_then(|ids| to_value(&TokenizeResponse { ids })),
        (Method::Post, "/detokenize") => read_body::<DetokenizeRequest>(&mut request)
            .and_then(|req| model.detokenize(&req.ids))
            .and_then(|text| to_value(&DetokenizeResponse { text })),
        _ => Err(Error::Protocol(format!("no route {} {}", route.0, route.1))),
    };
    let response = match result {
        Ok(v) => json_response(200, &v),
        Err(e) => {
            let status = match e {
                Error::Protocol(ref m) if m.starts_with("no route") => 404,
                _ => 400,
            };
            json_response(status, &ErrorResponse { error: e.to_string() })
        }
    };
    let _ = request.respond(response);
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Format(e.to_string()))
}

fn distribution<M: LanguageModel>(
    model: &M,
    config: &ServerConfig,
    req: &DistributionRequest,
) -> Result<DistributionResponse> {
    if let Some(max) = config.max_context {
        if req.context.len() > max {
            return Err(Error::ContextTooLong {
                len: req.context.len(),
                max,
            });
        }
    }
    let n = model.vocabulary().len();
    if let Some(&bad) = req.context.iter().find(|&&t| t as usize >= n) {
        return Err(Error::UnknownToken(bad));
    }
    let raw = model.raw_distribution(&req.context)?;
    Ok(match config.sparse_top {
        Some(top) if top < raw.len() => {
            let kept = top_k(&raw, Some(top));
            let listed: f64 = kept.iter().map(|e| e.1).sum();
            DistributionResponse::Sparse {
                top: kept
                    .iter()
                    .map(|&(t, p)| (t, format_probability(p)))
                    .collect(),
                rest: format_probability((1.0 - listed).max(0.0)),
            }
        }
        _ => DistributionResponse::Dense {
            probs: raw.iter().map(|&p| format_probability(p)).collect(),
        },
    })
}
