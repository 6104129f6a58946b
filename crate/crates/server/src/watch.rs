//! Per-user change counters that long-polls park on.

use std::collections::HashMap;
use std::sync::Mutex;

use tokio::sync::watch;

#[derive(Default)]
pub struct Watchers {
    senders: Mutex<HashMap<String, watch::Sender<u64>>>,
}

impl Watchers {
    pub fn subscribe(&self, user_id: &str) -> watch::Receiver<u64> {
        let mut senders = self.senders.lock().unwrap();
        senders.entry(user_id.to_owned()).or_insert_with(|| watch::channel(0).0).subscribe()
    }

    pub fn bump(&self, user_id: &str) {
        if let Some(tx) = self.senders.lock().unwrap().get(user_id) {
            tx.send_modify(|v| *v += 1);
        }
    }
}
