//! Subcommands that talk to a running service or robot.

use std::time::Duration;

use blockbot_core::command::{encode_command_list, Command, ExpressionRegistry};
use blockbot_core::queue::{QueueSnapshot, QueueStatus};
use blockbot_core::runtime::Mode;
use blockbot_server::client::{ClientError, RobotClient, ServiceClient};
use serde_json::{json, Value};

use crate::compile::{build, read_input};
use crate::config::FileConfig;
use crate::exit::Failure;
use crate::output::Output;
use crate::{AccountArgs, CredentialArgs, DirectArgs, EventsArgs, ModeArgs, ModeName, StateArgs, SubmitArgs};

pub const DEFAULT_SERVICE: &str = "http://127.0.0.1:8700";
pub const DEFAULT_ROBOT: &str = "127.0.0.1:8701";

fn service_url(flag: Option<String>, file: &FileConfig) -> String {
    flag.or_else(|| file.client.service.clone()).unwrap_or_else(|| DEFAULT_SERVICE.to_owned())
}

fn robot_url(flag: Option<String>, file: &FileConfig) -> String {
    flag.or_else(|| file.client.robot.clone()).unwrap_or_else(|| DEFAULT_ROBOT.to_owned())
}

fn credentials(email: Option<String>, password: Option<String>, file: &FileConfig) -> Result<(String, String), Failure> {
    let email = email.or_else(|| file.client.email.clone());
    let password = password.or_else(|| file.client.password.clone());
    match (email, password) {
        (Some(e), Some(p)) => Ok((e, p)),
        _ => Err(Failure::Usage("--email and --password are required".into())),
    }
}

/// Authenticated client plus the user id it acts for.
async fn session(a: AccountArgs, file: &FileConfig) -> Result<(ServiceClient, String), Failure> {
    let client = ServiceClient::new(&service_url(a.service, file));
    if let Some(token) = a.token.or_else(|| file.client.token.clone()) {
        let client = client.with_token(token);
        let me = client.whoami().await?;
        return Ok((client, me.user_id));
    }
    let (email, password) = credentials(a.email, a.password, file)?;
    let grant = client.sign_in(&email, &password).await?;
    Ok((client.with_token(grant.token), grant.user_id))
}

fn snapshot_line(s: &QueueSnapshot) -> String {
    format!("seq_base={} status={} remaining={}", s.seq_base, s.status.as_str(), s.remaining)
}

fn snapshot_value(s: &QueueSnapshot) -> Value {
    json!({ "event": "queue", "seq_base": s.seq_base, "status": s.status, "remaining": s.remaining })
}

fn print_snapshot(out: &Output, s: &QueueSnapshot) {
    out.record(&snapshot_line(s), snapshot_value(s));
}

pub async fn submit(a: SubmitArgs, file: &FileConfig, out: &Output) -> Result<(), Failure> {
    let text = read_input(&a.input)?;
    let (list, diagnostics) = build(&text);
    for d in &diagnostics {
        eprintln!("{d}");
    }
    let list = list?;
    if list.is_empty() {
        eprintln!("blockbot: program is empty; nothing submitted");
        return Ok(());
    }
    let doc: Value = serde_json::from_str(&encode_command_list(&list)).expect("encoded lists are JSON");
    let (client, user) = session(a.account, file).await?;
    let snap = client.submit(&user, &doc).await?;
    print_snapshot(out, &snap);
    if a.watch {
        watch(&client, &user, snap, out).await?;
    }
    Ok(())
}

/// Prints every observed change until the queue is idle.
async fn watch(client: &ServiceClient, user: &str, mut last: QueueSnapshot, out: &Output) -> Result<(), Failure> {
    while last.status != QueueStatus::Idle {
        tokio::time::sleep(Duration::from_millis(100)).await;
        let snap = client.queue(user).await?;
        if (snap.seq_base, snap.status, snap.remaining) != (last.seq_base, last.status, last.remaining) {
            print_snapshot(out, &snap);
        }
        last = snap;
    }
    Ok(())
}

pub async fn events(a: EventsArgs, file: &FileConfig, out: &Output) -> Result<(), Failure> {
    let text = read_input(&a.input)?;
    let robot = RobotClient::new(&robot_url(a.robot, file));
    let n = robot.events(text).await?;
    out.record(&format!("accepted={n}"), json!({ "accepted": n }));
    Ok(())
}

pub async fn mode(a: ModeArgs, file: &FileConfig, out: &Output) -> Result<(), Failure> {
    let robot = RobotClient::new(&robot_url(a.robot, file));
    let m = match a.mode {
        ModeName::Command => Mode::Command,
        ModeName::Autonomous => Mode::Autonomous,
    };
    robot.mode(m).await?;
    out.record(&format!("mode {}", if m == Mode::Autonomous { "autonomous" } else { "command" }), json!({ "mode": m }));
    Ok(())
}

pub async fn state(a: StateArgs, file: &FileConfig, out: &Output) -> Result<(), Failure> {
    if let Some(addr) = a.robot {
        let s = RobotClient::new(&addr).state().await?;
        out.raw(&format!("{}\n", serde_json::to_string(&s).expect("state serializes")));
        return Ok(());
    }
    let (client, user) = session(a.account, file).await?;
    let snap = client.queue(&user).await?;
    let robot = match client.robot_state(&user).await {
        Ok(t) => Some(t),
        Err(ClientError::Api { status: 404, .. }) => None,
        Err(e) => return Err(e.into()),
    };
    if out.json {
        out.raw(&format!("{}\n", json!({ "queue": snap, "robot": robot })));
        return Ok(());
    }
    out.raw(&format!("{}\n", snapshot_line(&snap)));
    match robot {
        Some(t) => {
            let s = &t.state;
            let mode = if s.mode == Mode::Autonomous { "autonomous" } else { "command" };
            out.raw(&format!(
                "robot x={} y={} heading={} expression={} mode={mode} reported_at_ms={}\n",
                s.pose.x, s.pose.y, s.pose.heading, s.expression, t.reported_at_ms
            ));
        }
        None => out.raw("robot unreported\n"),
    }
    Ok(())
}

fn parse_direct(text: &str) -> Result<Command, Failure> {
    let text = text.trim();
    let value = if text.starts_with('{') {
        serde_json::from_str(text).map_err(|e| Failure::Usage(format!("command is not JSON: {e}")))?
    } else {
        json!({ "op": text })
    };
    Command::from_value(&value, ExpressionRegistry::standard()).map_err(|e| Failure::Invalid(e.to_string()))
}

pub async fn direct(a: DirectArgs, file: &FileConfig, out: &Output) -> Result<(), Failure> {
    let cmd = parse_direct(&a.command)?;
    let (client, user) = session(a.account, file).await?;
    print_snapshot(out, &client.direct(&user, &cmd).await?);
    Ok(())
}

pub async fn reset(a: AccountArgs, file: &FileConfig, out: &Output) -> Result<(), Failure> {
    let (client, user) = session(a, file).await?;
    print_snapshot(out, &client.reset(&user).await?);
    Ok(())
}

pub async fn signup(a: CredentialArgs, file: &FileConfig, out: &Output) -> Result<(), Failure> {
    let (email, password) = credentials(a.email, a.password, file)?;
    let client = ServiceClient::new(&service_url(a.service, file));
    let r = client.sign_up(&email, &password).await?;
    out.record(
        &format!("user_id={} robot_key={}", r.user_id, r.robot_key),
        json!({ "user_id": r.user_id, "email": r.email, "created_at_ms": r.created_at_ms, "robot_key": r.robot_key }),
    );
    Ok(())
}

pub async fn signin(a: CredentialArgs, file: &FileConfig, out: &Output) -> Result<(), Failure> {
    let (email, password) = credentials(a.email, a.password, file)?;
    let client = ServiceClient::new(&service_url(a.service, file));
    let g = client.sign_in(&email, &password).await?;
    out.record(
        &format!("user_id={} token={}", g.user_id, g.token),
        json!({ "user_id": g.user_id, "token": g.token, "expires_at_ms": g.expires_at_ms }),
    );
    Ok(())
}
