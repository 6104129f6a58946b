#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdout, Command, Output, Stdio};
use std::time::{Duration, Instant};

pub const PASSWORD: &str = "correct horse battery";

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_blockbot"));
    for var in [
        "BLOCKBOT_CONFIG",
        "BLOCKBOT_SERVICE_URL",
        "BLOCKBOT_ROBOT_KEY",
        "BLOCKBOT_TOKEN",
        "BLOCKBOT_EMAIL",
        "BLOCKBOT_PASSWORD",
        "BLOCKBOT_BIND",
        "BLOCKBOT_DATA_DIR",
        "BLOCKBOT_SESSION_TTL_MS",
    ] {
        c.env_remove(var);
    }
    c.env("RUST_LOG", "warn");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).stdin(Stdio::null()).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn core_tests() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests")
}

/// A `blockbot serve` child process, killed on drop.
pub struct Service {
    pub child: Child,
    pub url: String,
    pub data: PathBuf,
    _stdout: BufReader<ChildStdout>,
}

impl Service {
    pub fn start(data: &Path) -> Service {
        Service::start_on(data, "127.0.0.1:0")
    }

    pub fn start_on(data: &Path, bind: &str) -> Service {
        Service::start_with(data, bind, &[])
    }

    pub fn start_with(data: &Path, bind: &str, extra: &[&str]) -> Service {
        let mut child = bin()
            .args(["serve", "--bind", bind, "--data"])
            .arg(data)
            .args(extra)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("serve starts");
        let mut out = BufReader::new(child.stdout.take().unwrap());
        let mut line = String::new();
        out.read_line(&mut line).expect("serve prints its address");
        let url = line.trim().strip_prefix("listening ").unwrap_or_else(|| panic!("unexpected: {line:?}")).to_owned();
        Service { child, url, data: data.to_owned(), _stdout: out }
    }

    pub fn port(&self) -> u16 {
        self.url.rsplit(':').next().unwrap().parse().unwrap()
    }

    /// SIGKILL, no chance to flush anything.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }

    pub fn signup(&self, email: &str) -> (String, String) {
        let o = run(&["signup", "--service", &self.url, "--email", email, "--password", PASSWORD]);
        assert!(o.status.success(), "{}", stderr(&o));
        let line = stdout(&o);
        let field = |k: &str| {
            line.split_whitespace()
                .find_map(|kv| kv.strip_prefix(&format!("{k}=")))
                .unwrap_or_else(|| panic!("{k} missing in {line:?}"))
                .to_owned()
        };
        (field("user_id"), field("robot_key"))
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Waits for `child` to exit, killing it after `limit`.
pub fn wait_output(mut child: Child, limit: Duration) -> Output {
    let start = Instant::now();
    loop {
        if child.try_wait().unwrap().is_some() {
            return child.wait_with_output().unwrap();
        }
        if start.elapsed() > limit {
            let _ = child.kill();
            let o = child.wait_with_output().unwrap();
            panic!("timed out; stdout: {} stderr: {}", stdout(&o), stderr(&o));
        }
        std::thread::sleep(Duration::from_millis(20));
    }
}

pub fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}
