#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

/// Responses handed out in turn. Index 5 is rejected by the sanitizer.
pub const POOL: [&str; 9] = [
    "Problem: f(x) = x[0]**2 + x[1]**2 + x[2]**2 + x[3]**2 + x[4]**2",
    "Problem: f(x) = abs(x[0]) + abs(x[1]*x[2]) + sin(x[3])**2 + x[4]**2",
    "Problem: f(x) = sqrt(abs(x[0]*x[1])) + x[2]**2 - sin(x[3]*x[4])",
    "```python\nProblem: f(x) = sinh(x[0])**2 + abs(x[1] - x[2]) + x[3]**2*x[4]**2\n```",
    "Problem: f(x) = x[0]**2 + sin(5*x[1])**2 + abs(x[2]) + x[3]*x[4]",
    "Problem: f(x) = x[0] +",
    "Problem: f(x) = abs(x[0] + x[1] + x[2] + x[3] + x[4]) + sin(x[0]*x[4])**2",
    "Problem: f(x) = x[0]**4 + abs(x[1])**0.5 + sin(x[2] + x[3])**2 + abs(x[4])",
    "Problem: f(x) = (x[0] - 0.5)**2 + (x[1] + 0.3)**2 + abs(sin(3*x[2])) + x[3]**2 + sqrt(abs(x[4]))",
];

#[derive(Debug, Clone)]
pub struct Seen {
    pub authorization: Option<String>,
    pub body: serde_json::Value,
}

/// A chat-completions endpoint on localhost. The first `failures` requests
/// get the given status; after that responses cycle through `POOL`.
pub struct MockServer {
    pub url: String,
    pub seen: Arc<Mutex<Vec<Seen>>>,
}

impl MockServer {
    pub fn start() -> Self {
        Self::with_failures(Vec::new())
    }

    pub fn with_failures(failures: Vec<u16>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let counter = Arc::new(AtomicUsize::new(0));
        let failures = Arc::new(failures);
        let log = seen.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (log, counter, failures) = (log.clone(), counter.clone(), failures.clone());
                thread::spawn(move || serve(stream, &log, &counter, &failures));
            }
        });
        MockServer { url, seen }
    }

    pub fn requests(&self) -> usize {
        self.seen.lock().unwrap().len()
    }
}

fn serve(stream: TcpStream, log: &Mutex<Vec<Seen>>, counter: &AtomicUsize, failures: &[u16]) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut stream = stream;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let mut length = 0;
        let mut authorization = None;
        loop {
            let mut h = String::new();
            if reader.read_line(&mut h).unwrap_or(0) == 0 {
                return;
            }
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            let (name, value) = h.split_once(':').unwrap_or((h, ""));
            match name.to_ascii_lowercase().as_str() {
                "content-length" => length = value.trim().parse().unwrap_or(0),
                "authorization" => authorization = Some(value.trim().to_owned()),
                _ => {}
            }
        }
        let mut body = vec![0; length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        let body: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
        log.lock().unwrap().push(Seen { authorization, body });
        let k = counter.fetch_add(1, Ordering::SeqCst);
        let (status, payload) = match failures.get(k) {
            Some(&s) => (s, String::from("{\"error\": \"try later\"}")),
            None => {
                let text = POOL[(k - failures.len()) % POOL.len()];
                (
                    200,
                    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string(),
                )
            }
        };
        let reply = format!(
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}",
            payload.len()
        );
        if stream.write_all(reply.as_bytes()).is_err() {
            return;
        }
    }
}

/// Small configuration used by the smoke fixture and the replay tests.
pub fn smoke_config(url: &str) -> serde_json::Value {
    serde_json::json!({
        "engine": {
            "population_size": 4,
            "max_generations": 3,
            "seed": 11,
            "fitness": {"trials": 3, "base_seed": 5},
            "inner": {
                "ga": {"population": 20, "generations": 50},
                "de": {"population": 20, "generations": 50}
            }
        },
        "backend": {
            "endpoint_url": url,
            "model": "mock",
            "retry_backoff_ms": 10
        }
    })
}
