use std::io::Write;

use serde_json::Value;

/// Payload writer for stdout. Diagnostics go to stderr elsewhere.
#[derive(Debug, Clone, Copy)]
pub struct Output {
    pub json: bool,
}

impl Output {
    pub fn new(json: bool) -> Self {
        Output { json }
    }

    /// One record: `text` in text mode, `value` as a JSON line otherwise.
    pub fn record(&self, text: &str, value: Value) {
        if self.json {
            self.raw(&format!("{value}\n"));
        } else {
            self.raw(&format!("{text}\n"));
        }
    }

    pub fn raw(&self, s: &str) {
        let mut out = std::io::stdout().lock();
        // a closed pipe is not worth a panic
        let _ = out.write_all(s.as_bytes());
        let _ = out.flush();
    }
}
