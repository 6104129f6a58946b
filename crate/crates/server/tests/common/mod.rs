#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use blockbot_core::auth::{Clock, HashParams, SystemClock};
use blockbot_core::command::ExpressionRegistry;
use blockbot_core::service::{QueueService, ServiceSettings};
use blockbot_core::store::{Backend, MemoryBackend};
use blockbot_server::api::{router, AppState};
use blockbot_server::client::ServiceClient;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub struct Server {
    pub base: String,
    pub port: u16,
    pub svc: Arc<QueueService>,
    stop: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl Server {
    pub async fn start(backend: Arc<dyn Backend>, clock: Arc<dyn Clock>, addr: &str) -> Server {
        let settings = ServiceSettings { password_hash: HashParams::light(), ..ServiceSettings::default() };
        let svc = Arc::new(
            QueueService::open(backend, clock, settings, ExpressionRegistry::standard().clone()).unwrap(),
        );
        let listener = blockbot_server::bind(addr).await.unwrap();
        let port = listener.local_addr().unwrap().port();
        let app = router(AppState::new(svc.clone()), None);
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            blockbot_server::serve(listener, app, async {
                let _ = rx.await;
            })
            .await
            .unwrap();
        });
        Server { base: format!("http://127.0.0.1:{port}"), port, svc, stop: Some(tx), task: Some(task) }
    }

    pub async fn memory() -> Server {
        Server::start(Arc::new(MemoryBackend::new()), Arc::new(SystemClock), "127.0.0.1:0").await
    }

    pub fn client(&self) -> ServiceClient {
        ServiceClient::new(&self.base)
    }

    /// Stops accepting and drops the listener. In-flight long-polls are
    /// abandoned.
    pub async fn stop(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.task.take() {
            t.abort();
            let _ = t.await;
        }
    }
}

pub struct Account {
    pub user_id: String,
    pub robot_key: String,
    pub token: String,
}

pub async fn account(base: &str, email: &str) -> Account {
    let c = ServiceClient::new(base);
    let up = c.sign_up(email, "correct horse battery").await.unwrap();
    let inn = c.sign_in(email, "correct horse battery").await.unwrap();
    Account { user_id: up.user_id, robot_key: up.robot_key, token: inn.token }
}

pub async fn eventually<F, Fut>(limit: Duration, mut probe: F) -> bool
where
    F: FnMut() -> Fut,
    Fut: std::future::Future<Output = bool>,
{
    let deadline = tokio::time::Instant::now() + limit;
    while tokio::time::Instant::now() < deadline {
        if probe().await {
            return true;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    false
}
