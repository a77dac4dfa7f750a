//! Newline-delimited JSON wire protocol. One message per line, one session
//! per connection.
//!
//! Server to client: `hello`, `obs`, `end`, `error`.
//! Client to server: `reset`, `act`, `end`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{Environment, SessionConfig};
use crate::error::{Error, Result};
use crate::observation::ObservationFrame;

pub const PROTOCOL_VERSION: u32 = 1;
pub const SCHEMA_ID: &str = "cradle.observation.v1";
/// Environment variable holding the default endpoint.
pub const ENDPOINT_ENV: &str = "CRADLE_ENDPOINT";
pub const DEFAULT_ENDPOINT: &str = "127.0.0.1:7878";

pub fn default_endpoint() -> String {
    std::env::var(ENDPOINT_ENV).unwrap_or_else(|_| DEFAULT_ENDPOINT.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NoSession,
    BadMessage,
    BadAction,
    BadConfig,
    ParseError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello { version: u32, schema: String },
    Obs { observation: ObservationFrame },
    End,
    Error { code: ErrorCode, message: String },
}

impl ServerMessage {
    pub fn hello() -> Self {
        ServerMessage::Hello {
            version: PROTOCOL_VERSION,
            schema: SCHEMA_ID.to_string(),
        }
    }

    fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code,
            message: message.into(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Reset {
        #[serde(default)]
        config: serde_json::Value,
    },
    Act {
        action: serde_json::Value,
    },
    End,
}

/// What the connection loop should do after a message.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub messages: Vec<ServerMessage>,
    pub close: bool,
}

/// Interprets one client line against the connection's environment.
pub fn handle_line(env: &mut Environment, line: &str) -> Reply {
    let one = |m| Reply {
        messages: vec![m],
        close: false,
    };
    let value: serde_json::Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return one(ServerMessage::error(ErrorCode::ParseError, e.to_string())),
    };
    let msg: ClientMessage = match serde_json::from_value(value) {
        Ok(m) => m,
        Err(e) => return one(ServerMessage::error(ErrorCode::BadMessage, e.to_string())),
    };
    match msg {
        ClientMessage::Reset { config } => {
            let config = if config.is_null() {
                serde_json::json!({})
            } else {
                config
            };
            let cfg = match SessionConfig::from_value(config) {
                Ok(c) if c.record.is_some() => {
                    return one(ServerMessage::error(
                        ErrorCode::BadConfig,
                        "record: not available over the wire",
                    ))
                }
                Ok(c) => c,
                Err(e) => return one(ServerMessage::error(ErrorCode::BadConfig, e.to_string())),
            };
            match env.reset(cfg) {
                Ok(observation) => one(ServerMessage::Obs { observation }),
                Err(e) => one(ServerMessage::error(ErrorCode::BadConfig, e.to_string())),
            }
        }
        ClientMessage::Act { action } => match env.step_json(action) {
            Ok(observation) => one(ServerMessage::Obs { observation }),
            Err(Error::NoSession) => one(ServerMessage::error(
                ErrorCode::NoSession,
                "act before reset",
            )),
            Err(e) => one(ServerMessage::error(ErrorCode::BadAction, e.to_string())),
        },
        ClientMessage::End => {
            let _ = env.close();
            Reply {
                messages: vec![ServerMessage::End],
                close: true,
            }
        }
    }
}

/// Output side of a connection; once `end` went out nothing else does.
pub struct Outlet {
    out: Box<dyn Write + Send>,
    closed: bool,
}

impl Outlet {
    pub fn new<W: Write + Send + 'static>(out: W) -> Self {
        Self {
            out: Box::new(out),
            closed: false,
        }
    }

    pub fn send(&mut self, msg: &ServerMessage) -> std::io::Result<()> {
        if self.closed {
            return Ok(());
        }
        if matches!(msg, ServerMessage::End) {
            self.closed = true;
        }
        writeln!(self.out, "{}", msg.to_line())?;
        self.out.flush()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }
}

pub type SharedOutlet = Arc<Mutex<Outlet>>;

/// Live connections, so a shutdown can say goodbye to each.
#[derive(Default)]
pub struct Registry {
    next: AtomicU64,
    outlets: Mutex<HashMap<u64, SharedOutlet>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, outlet: SharedOutlet) -> u64 {
        let id = self.next.fetch_add(1, Ordering::Relaxed);
        self.outlets.lock().unwrap().insert(id, outlet);
        id
    }

    pub fn remove(&self, id: u64) {
        self.outlets.lock().unwrap().remove(&id);
    }

    pub fn len(&self) -> usize {
        self.outlets.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sends `end` on every open connection. Each outlet lock is taken in
    /// turn, so a reply being written completes first.
    pub fn end_all(&self) {
        let outlets: Vec<SharedOutlet> = self.outlets.lock().unwrap().values().cloned().collect();
        for o in outlets {
            let mut o = o.lock().unwrap_or_else(|p| p.into_inner());
            let _ = o.send(&ServerMessage::End);
        }
    }
}

/// Runs one connection to completion: hello, then request/reply until the
/// client ends or disconnects.
pub fn serve_connection<R: BufRead>(reader: R, outlet: &SharedOutlet) -> Result<()> {
    outlet.lock().unwrap().send(&ServerMessage::hello())?;
    let mut env = Environment::new();
    for line in reader.lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                log::debug!("connection read failed: {e}");
                break;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        // Hold the outlet while handling so a shutdown waits for the reply.
        let mut out = outlet.lock().unwrap();
        if out.is_closed() {
            break;
        }
        let reply = handle_line(&mut env, &line);
        for m in &reply.messages {
            out.send(m)?;
        }
        if reply.close {
            break;
        }
    }
    env.close()
}

/// Accepts connections forever, one thread each.
pub fn serve_tcp(listener: TcpListener, registry: Arc<Registry>) -> Result<()> {
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let registry = registry.clone();
        std::thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            let writer = match stream.try_clone() {
                Ok(w) => w,
                Err(e) => {
                    log::warn!("cannot clone stream: {e}");
                    return;
                }
            };
            let outlet: SharedOutlet = Arc::new(Mutex::new(Outlet::new(writer)));
            let id = registry.add(outlet.clone());
            log::info!("connection {id} from {peer:?}");
            if let Err(e) = serve_connection(std::io::BufReader::new(stream), &outlet) {
                log::info!("connection {id} ended: {e}");
            }
            registry.remove(id);
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(reply: &Reply) -> ErrorCode {
        match &reply.messages[0] {
            ServerMessage::Error { code, .. } => *code,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn act_before_reset() {
        let mut env = Environment::new();
        let r = handle_line(&mut env, r#"{"type":"act","action":{}}"#);
        assert_eq!(code(&r), ErrorCode::NoSession);
    }

    #[test]
    fn unknown_type_keeps_session() {
        let mut env = Environment::new();
        let r = handle_line(&mut env, r#"{"type":"reset","config":{"seed":3}}"#);
        assert!(matches!(r.messages[0], ServerMessage::Obs { .. }));
        assert_eq!(code(&handle_line(&mut env, r#"{"type":"dance"}"#)), ErrorCode::BadMessage);
        assert_eq!(code(&handle_line(&mut env, "{not json")), ErrorCode::ParseError);
        assert_eq!(
            code(&handle_line(&mut env, r#"{"type":"act","action":{"vocal":{"type":"sing"}}}"#)),
            ErrorCode::BadAction
        );
        let r = handle_line(&mut env, r#"{"type":"act","action":{}}"#);
        match &r.messages[0] {
            ServerMessage::Obs { observation } => assert_eq!(observation.t, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_config_names_field() {
        let mut env = Environment::new();
        let r = handle_line(&mut env, r#"{"type":"reset","config":{"drives":{"cry_threshold":7}}}"#);
        match &r.messages[0] {
            ServerMessage::Error { code, message } => {
                assert_eq!(*code, ErrorCode::BadConfig);
                assert!(message.contains("drives.cry_threshold"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn end_closes() {
        let mut env = Environment::new();
        let r = handle_line(&mut env, r#"{"type":"end"}"#);
        assert_eq!(r.messages, vec![ServerMessage::End]);
        assert!(r.close);
    }

    #[test]
    fn outlet_is_silent_after_end() {
        let buf = std::sync::Arc::new(Mutex::new(Vec::<u8>::new()));
        struct W(std::sync::Arc<Mutex<Vec<u8>>>);
        impl Write for W {
            fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
                self.0.lock().unwrap().extend_from_slice(b);
                Ok(b.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let mut o = Outlet::new(W(buf.clone()));
        o.send(&ServerMessage::End).unwrap();
        o.send(&ServerMessage::hello()).unwrap();
        assert_eq!(String::from_utf8(buf.lock().unwrap().clone()).unwrap(), "{\"type\":\"end\"}\n");
    }
}
