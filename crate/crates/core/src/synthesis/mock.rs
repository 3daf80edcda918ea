//! A scripted HTTP/1.1 server for exercising [`super::RemoteBackend`].
//!
//! Each request receives the next scripted reply; once the script runs
//! out the last reply repeats. Requests are recorded for inspection.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct MockReply {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
    /// Delay before responding.
    pub delay: Duration,
}

impl MockReply {
    pub fn status(status: u16) -> MockReply {
        MockReply {
            status,
            content_type: "text/plain".into(),
            body: format!("status {status}").into_bytes(),
            delay: Duration::ZERO,
        }
    }

    /// Raw little-endian PCM16.
    pub fn pcm(samples: &[i16]) -> MockReply {
        MockReply {
            status: 200,
            content_type: "audio/L16".into(),
            body: samples.iter().flat_map(|s| s.to_le_bytes()).collect(),
            delay: Duration::ZERO,
        }
    }

    pub fn wav(bytes: &[u8]) -> MockReply {
        MockReply {
            status: 200,
            content_type: "audio/wav".into(),
            body: bytes.to_vec(),
            delay: Duration::ZERO,
        }
    }

    pub fn json(text: &str) -> MockReply {
        MockReply {
            status: 200,
            content_type: "application/json".into(),
            body: text.as_bytes().to_vec(),
            delay: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub method: String,
    pub path: String,
    /// Header names lowercased.
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl RecordedRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        let name = name.to_lowercase();
        self.headers.iter().find(|(k, _)| *k == name).map(|(_, v)| v.as_str())
    }
}

struct State {
    script: Vec<MockReply>,
    served: usize,
    requests: Vec<RecordedRequest>,
}

pub struct MockServer {
    addr: std::net::SocketAddr,
    state: Arc<Mutex<State>>,
}

impl MockServer {
    /// Binds an ephemeral localhost port and serves in background threads
    /// for the life of the process.
    pub fn start(script: Vec<MockReply>) -> MockServer {
        assert!(!script.is_empty(), "mock server needs at least one reply");
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let addr = listener.local_addr().expect("local addr");
        let state = Arc::new(Mutex::new(State {
            script,
            served: 0,
            requests: Vec::new(),
        }));
        let shared = Arc::clone(&state);
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let shared = Arc::clone(&shared);
                thread::spawn(move || {
                    let _ = serve(stream, &shared);
                });
            }
        });
        MockServer { addr, state }
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.state.lock().expect("mock state").requests.clone()
    }
}

fn serve(stream: TcpStream, state: &Mutex<State>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();
    let mut headers = Vec::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            headers.push((k.trim().to_lowercase(), v.trim().to_string()));
        }
    }
    let len: usize = headers
        .iter()
        .find(|(k, _)| k == "content-length")
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(0);
    let mut body = vec![0; len];
    reader.read_exact(&mut body)?;

    let reply = {
        let mut st = state.lock().expect("mock state");
        st.requests.push(RecordedRequest {
            method,
            path,
            headers,
            body,
        });
        let i = st.served.min(st.script.len() - 1);
        st.served += 1;
        st.script[i].clone()
    };
    thread::sleep(reply.delay);
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {} Mock\r\nContent-Type: {}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        reply.status,
        reply.content_type,
        reply.body.len()
    )?;
    out.write_all(&reply.body)?;
    out.flush()
}
