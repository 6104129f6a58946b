//! Persistence for accounts and queue documents.
//!
//! The file backend keeps an append-only `accounts.jsonl` and one
//! `queues/<user_id>.json` per user, replaced atomically (write temp file,
//! fsync, rename, fsync directory) on every change.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::queue::QueueDocument;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt record in {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_owned(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountRecord {
    pub user_id: String,
    /// Normalized (lowercase) address.
    pub email: String,
    /// PHC-format salted password hash.
    pub password_digest: String,
    /// Hex SHA-256 of the robot API key.
    pub robot_key_sha256: String,
    pub created_at_ms: u64,
}

#[derive(Debug, Default)]
pub struct Loaded {
    pub accounts: Vec<AccountRecord>,
    pub queues: Vec<QueueDocument>,
}

pub trait Backend: Send + Sync {
    fn load(&self) -> Result<Loaded, StoreError>;
    fn append_account(&self, record: &AccountRecord) -> Result<(), StoreError>;
    fn put_queue(&self, doc: &QueueDocument) -> Result<(), StoreError>;
}

pub struct FileBackend {
    dir: PathBuf,
    fsync: bool,
    // serializes appends to the accounts log
    accounts_lock: Mutex<()>,
}

impl FileBackend {
    /// Opens (creating if needed) a data directory. The parent directory
    /// must already exist.
    pub fn open(dir: &Path, fsync: bool) -> Result<Self, StoreError> {
        if !dir.exists() {
            fs::create_dir(dir).map_err(io_err(dir))?;
        }
        let queues = dir.join("queues");
        if !queues.exists() {
            fs::create_dir(&queues).map_err(io_err(&queues))?;
        }
        Ok(FileBackend { dir: dir.to_owned(), fsync, accounts_lock: Mutex::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn accounts_path(&self) -> PathBuf {
        self.dir.join("accounts.jsonl")
    }

    fn queue_path(&self, user_id: &str) -> PathBuf {
        self.dir.join("queues").join(format!("{user_id}.json"))
    }

    fn sync_dir(&self, dir: &Path) -> Result<(), StoreError> {
        if self.fsync {
            File::open(dir).and_then(|f| f.sync_all()).map_err(io_err(dir))?;
        }
        Ok(())
    }
}

impl Backend for FileBackend {
    fn load(&self) -> Result<Loaded, StoreError> {
        let mut loaded = Loaded::default();
        let path = self.accounts_path();
        match fs::read_to_string(&path) {
            Ok(text) => {
                let complete = text.ends_with('\n');
                let lines: Vec<&str> = text.lines().collect();
                for (i, line) in lines.iter().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str(line) {
                        Ok(rec) => loaded.accounts.push(rec),
                        // a torn final append from a crash is dropped
                        Err(_) if i + 1 == lines.len() && !complete => {}
                        Err(e) => {
                            return Err(StoreError::Corrupt { path, message: format!("line {}: {e}", i + 1) })
                        }
                    }
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(StoreError::Io { path, source: e }),
        }
        let qdir = self.dir.join("queues");
        for entry in fs::read_dir(&qdir).map_err(io_err(&qdir))? {
            let entry = entry.map_err(io_err(&qdir))?;
            let p = entry.path();
            if p.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&p).map_err(io_err(&p))?;
            let doc: QueueDocument = serde_json::from_str(&text)
                .map_err(|e| StoreError::Corrupt { path: p.clone(), message: e.to_string() })?;
            loaded.queues.push(doc);
        }
        Ok(loaded)
    }

    fn append_account(&self, record: &AccountRecord) -> Result<(), StoreError> {
        let _guard = self.accounts_lock.lock().unwrap();
        let path = self.accounts_path();
        let mut line = serde_json::to_string(record).expect("account records serialize");
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        f.write_all(line.as_bytes()).map_err(io_err(&path))?;
        if self.fsync {
            f.sync_all().map_err(io_err(&path))?;
        }
        Ok(())
    }

    fn put_queue(&self, doc: &QueueDocument) -> Result<(), StoreError> {
        let path = self.queue_path(&doc.user_id);
        let tmp = path.with_extension("json.tmp");
        let bytes = serde_json::to_vec(doc).expect("queue documents serialize");
        {
            let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(&bytes).map_err(io_err(&tmp))?;
            if self.fsync {
                f.sync_all().map_err(io_err(&tmp))?;
            }
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        self.sync_dir(path.parent().expect("queue files live in a directory"))
    }
}

/// In-memory backend. Clones share the same contents, so a new service
/// opened on a clone behaves like a restarted process. Documents are kept
/// serialized to exercise the same encoding as the file backend.
#[derive(Clone, Default)]
pub struct MemoryBackend {
    inner: Arc<Mutex<MemoryInner>>,
}

#[derive(Default)]
struct MemoryInner {
    accounts: Vec<String>,
    queues: HashMap<String, String>,
    writes: u64,
}

impl MemoryBackend {
    pub fn new() -> Self {
        MemoryBackend::default()
    }

    /// Number of successful writes so far.
    pub fn writes(&self) -> u64 {
        self.inner.lock().unwrap().writes
    }
}

impl Backend for MemoryBackend {
    fn load(&self) -> Result<Loaded, StoreError> {
        let inner = self.inner.lock().unwrap();
        let corrupt = |e: serde_json::Error| StoreError::Corrupt {
            path: PathBuf::from("<memory>"),
            message: e.to_string(),
        };
        Ok(Loaded {
            accounts: inner
                .accounts
                .iter()
                .map(|s| serde_json::from_str(s).map_err(corrupt))
                .collect::<Result<_, _>>()?,
            queues: inner
                .queues
                .values()
                .map(|s| serde_json::from_str(s).map_err(corrupt))
                .collect::<Result<_, _>>()?,
        })
    }

    fn append_account(&self, record: &AccountRecord) -> Result<(), StoreError> {
        let mut inner = self.inner.lock().unwrap();
        inner.accounts.push(serde_json::to_string(record).expect("account records serialize"));
        inner.writes += 1;
        Ok(())
    }

    fn put_queue(&self, doc: &QueueDocument) -> Result<(), StoreError> {
        let mut inner = self.inner.lock().unwrap();
        inner
            .queues
            .insert(doc.user_id.clone(), serde_json::to_string(doc).expect("queue documents serialize"));
        inner.writes += 1;
        Ok(())
    }
}
