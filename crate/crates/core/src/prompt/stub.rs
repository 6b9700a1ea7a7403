//! Scriptable stand-in for a chat-completions endpoint.
//!
//! Each request receives the next scripted reply; once the script runs out
//! the last reply repeats. Request bodies are recorded for inspection.
//!
//! A script file is a JSON array whose items are either a string (returned
//! as the assistant message content) or `{"status": 429, "body": "..."}`
//! (returned verbatim).

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StubReply {
    Content(String),
    Raw { status: u16, body: String },
}

impl StubReply {
    fn render(&self) -> (u16, String) {
        match self {
            StubReply::Content(text) => {
                let body = json!({
                    "id": "stub",
                    "object": "chat.completion",
                    "choices": [{ "index": 0, "message": { "role": "assistant", "content": text }, "finish_reason": "stop" }],
                });
                (200, body.to_string())
            }
            StubReply::Raw { status, body } => (*status, body.clone()),
        }
    }
}

pub fn parse_script(text: &str) -> serde_json::Result<Vec<StubReply>> {
    serde_json::from_str(text)
}

pub struct StubServer {
    server: Arc<tiny_http::Server>,
    port: u16,
    requests: Arc<Mutex<Vec<Value>>>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Bind `127.0.0.1:port` (0 picks a free port) and serve in a thread.
    pub fn start(replies: Vec<StubReply>, port: u16) -> std::io::Result<StubServer> {
        let server = tiny_http::Server::http(("127.0.0.1", port)).map_err(std::io::Error::other)?;
        let port = server.server_addr().to_ip().map(|a| a.port()).unwrap_or(port);
        let server = Arc::new(server);
        let requests = Arc::new(Mutex::new(Vec::new()));
        let (srv, log) = (Arc::clone(&server), Arc::clone(&requests));
        let handle = std::thread::spawn(move || {
            let mut next = 0usize;
            for mut req in srv.incoming_requests() {
                let mut body = String::new();
                let _ = req.as_reader().read_to_string(&mut body);
                log.lock().unwrap().push(serde_json::from_str(&body).unwrap_or(Value::String(body)));
                let (status, text) = match replies.get(next.min(replies.len().saturating_sub(1))) {
                    Some(r) => r.render(),
                    None => (500, "stub has no scripted replies".to_string()),
                };
                next += 1;
                let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
                let _ = req.respond(tiny_http::Response::from_string(text).with_status_code(status).with_header(header));
            }
        });
        Ok(StubServer { server, port, requests, handle: Some(handle) })
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    /// Base URL suitable for `EndpointConfig::base_url`.
    pub fn base_url(&self) -> String {
        format!("http://127.0.0.1:{}/v1", self.port)
    }

    pub fn requests(&self) -> Vec<Value> {
        self.requests.lock().unwrap().clone()
    }

    /// Serve until the process ends.
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::client::{call_llm, EndpointConfig, LlmError};

    #[test]
    fn echoes_and_repeats_last() {
        let stub = StubServer::start(vec![StubReply::Content("one".into()), StubReply::Content("two".into())], 0).unwrap();
        let cfg = EndpointConfig::new(stub.base_url(), "stub-model");
        assert_eq!(call_llm(&cfg, "p", 0.7, 1).unwrap(), "one");
        assert_eq!(call_llm(&cfg, "p", 0.7, 1).unwrap(), "two");
        assert_eq!(call_llm(&cfg, "p", 0.7, 1).unwrap(), "two");
        let reqs = stub.requests();
        assert_eq!(reqs.len(), 3);
        assert_eq!(reqs[0]["model"], "stub-model");
        assert_eq!(reqs[0]["temperature"], 0.7);
    }

    #[test]
    fn status_propagates() {
        let stub = StubServer::start(vec![StubReply::Raw { status: 429, body: "slow down".into() }], 0).unwrap();
        let cfg = EndpointConfig::new(stub.base_url(), "m");
        assert_eq!(call_llm(&cfg, "p", 0.0, 0), Err(LlmError::ApiError { status: 429, body: "slow down".into() }));
        assert_eq!(stub.requests().len(), 1);
    }

    #[test]
    fn script_file_format() {
        let s = parse_script(r#"["a", {"status": 500, "body": "x"}]"#).unwrap();
        assert_eq!(s, vec![StubReply::Content("a".into()), StubReply::Raw { status: 500, body: "x".into() }]);
    }
}
