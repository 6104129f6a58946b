//! Fault-injection harness for the queue protocol.
//!
//! A simulated robot drains programs from a [`QueueService`] while the
//! harness duplicates and drops polls and acks, restarts the robot (keeping
//! only its on-disk journal), restarts the service (keeping only its
//! backend) and fails storage writes.

use std::path::Path;
use std::sync::{Arc, Mutex};

use blockbot_core::auth::{HashParams, ManualClock};
use blockbot_core::command::{Command, CommandList, ExpressionRegistry};
use blockbot_core::queue::{Head, QueueDocument, QueueStatus};
use blockbot_core::runtime::ExecutionJournal;
use blockbot_core::service::{Principal, QueueService, ServiceError, ServiceSettings};
use blockbot_core::store::{AccountRecord, Backend, Loaded, MemoryBackend, StoreError};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::oracles::EXPRESSIONS;

#[derive(Debug, Clone, Copy)]
pub struct FaultRates {
    pub duplicate_poll: f64,
    pub lost_poll_reply: f64,
    pub duplicate_ack: f64,
    pub stale_ack: f64,
    pub lost_ack_reply: f64,
    pub robot_restart: f64,
    pub service_restart: f64,
    pub storage_failure: f64,
}

impl FaultRates {
    pub fn heavy() -> Self {
        FaultRates {
            duplicate_poll: 0.2,
            lost_poll_reply: 0.1,
            duplicate_ack: 0.2,
            stale_ack: 0.1,
            lost_ack_reply: 0.1,
            robot_restart: 0.05,
            service_restart: 0.02,
            storage_failure: 0.05,
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct FaultReport {
    pub programs: usize,
    pub commands: usize,
    pub robot_restarts: usize,
    pub service_restarts: usize,
    pub storage_failures: usize,
    pub duplicate_acks: usize,
    pub duplicate_polls: usize,
}

/// Backend whose queue writes fail at random, as if the process died
/// before the write reached disk.
#[derive(Clone)]
struct FlakyBackend {
    inner: MemoryBackend,
    rng: Arc<Mutex<StdRng>>,
    rate: f64,
    failures: Arc<Mutex<usize>>,
}

impl Backend for FlakyBackend {
    fn load(&self) -> Result<Loaded, StoreError> {
        self.inner.load()
    }

    fn append_account(&self, record: &AccountRecord) -> Result<(), StoreError> {
        self.inner.append_account(record)
    }

    fn put_queue(&self, doc: &QueueDocument) -> Result<(), StoreError> {
        if self.rng.lock().unwrap().random_bool(self.rate) {
            *self.failures.lock().unwrap() += 1;
            return Err(StoreError::Io {
                path: "<flaky>".into(),
                source: std::io::Error::other("injected write failure"),
            });
        }
        self.inner.put_queue(doc)
    }
}

pub fn random_commands(rng: &mut StdRng, n: usize) -> Vec<Command> {
    let registry = ExpressionRegistry::standard();
    (0..n)
        .map(|i| match rng.random_range(0..7) {
            0 => Command::MoveForward,
            1 => Command::MoveBackward,
            2 => Command::TurnLeft,
            3 => Command::TurnRight,
            4 => Command::Stop,
            5 => Command::Express(registry.lookup(EXPRESSIONS[rng.random_range(0..11)]).unwrap()),
            _ => Command::say(format!("step {i}")).unwrap(),
        })
        .collect()
}

struct World {
    backend: FlakyBackend,
    clock: ManualClock,
    svc: QueueService,
    robot_key: String,
    email: String,
}

const PASSWORD: &str = "fault-injection";

impl World {
    fn open_service(backend: &FlakyBackend, clock: &ManualClock) -> QueueService {
        QueueService::open(
            Arc::new(backend.clone()),
            Arc::new(clock.clone()),
            ServiceSettings { password_hash: HashParams::light(), ..ServiceSettings::default() },
            ExpressionRegistry::default(),
        )
        .expect("service reopens from its backend")
    }

    fn restart_service(&mut self) {
        self.svc = World::open_service(&self.backend, &self.clock);
    }

    fn robot(&self) -> Principal {
        self.svc.authenticate(&self.robot_key).expect("robot key survives restarts")
    }

    fn user(&self) -> Principal {
        let grant = self.svc.sign_in(&self.email, PASSWORD).expect("sign in");
        self.svc.authenticate(&grant.token).unwrap()
    }
}

fn is_storage(e: &ServiceError) -> bool {
    matches!(e, ServiceError::Storage(_))
}

/// Submits `programs` random programs of 1..=`max_len` commands, one after
/// another, and drains each through a faulty robot. Returns an error
/// describing the first divergence.
pub fn run(seed: u64, programs: usize, max_len: usize, rates: FaultRates, journal_dir: &Path) -> Result<FaultReport, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let backend = FlakyBackend {
        inner: MemoryBackend::new(),
        rng: Arc::new(Mutex::new(StdRng::seed_from_u64(seed ^ 0x5eed))),
        rate: 0.0,
        failures: Arc::new(Mutex::new(0)),
    };
    let clock = ManualClock::new(1_000);
    let svc = World::open_service(&backend, &clock);
    let email = format!("robot{seed}@example.org");
    let receipt = svc.sign_up(&email, PASSWORD).map_err(|e| e.to_string())?;
    let user_id = receipt.account.user_id.clone();
    let mut world = World { backend, clock, svc, robot_key: receipt.robot_key, email };
    // turn failures on only after the account exists
    world.backend.rate = rates.storage_failure;
    world.restart_service();

    let journal_path = journal_dir.join(format!("journal-{seed}"));
    let mut journal = ExecutionJournal::open(&journal_path).map_err(|e| e.to_string())?;
    let mut report = FaultReport::default();

    for program in 0..programs {
        let n = rng.random_range(1..=max_len);
        let submitted = random_commands(&mut rng, n);
        let list = CommandList::new(submitted.clone()).unwrap();
        let start_seq = world.svc.get_queue_state(&world.robot(), &user_id).unwrap().seq_base;
        loop {
            let user = world.user();
            match world.svc.submit_program(&user, &user_id, list.clone()) {
                Ok(_) => break,
                Err(e) if is_storage(&e) => continue,
                Err(e) => return Err(format!("program {program}: submit failed: {e}")),
            }
        }

        let mut executed: Vec<Command> = Vec::new();
        let mut last_seq_base = start_seq;
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > 200 * n + 1_000 {
                return Err(format!("program {program}: no progress after {steps} steps"));
            }
            world.clock.advance(rng.random_range(0..50));
            if rng.random_bool(rates.service_restart) {
                world.restart_service();
                report.service_restarts += 1;
            }
            if rng.random_bool(rates.robot_restart) {
                journal = ExecutionJournal::open(&journal_path).map_err(|e| e.to_string())?;
                report.robot_restarts += 1;
            }
            let robot = world.robot();

            let snap = world.svc.get_queue_state(&robot, &user_id).unwrap();
            if snap.seq_base < last_seq_base {
                return Err(format!("program {program}: seq_base went back {last_seq_base} -> {}", snap.seq_base));
            }
            last_seq_base = snap.seq_base;
            let acked = (snap.seq_base - start_seq) as usize;
            if acked > n || snap.commands[..] != submitted[acked..] {
                return Err(format!("program {program}: queue is not the unacked suffix"));
            }

            let head = match world.svc.poll_head(&robot, &user_id) {
                Ok(h) => h,
                Err(e) if is_storage(&e) => continue,
                Err(e) => return Err(format!("program {program}: poll failed: {e}")),
            };
            if rng.random_bool(rates.duplicate_poll) {
                report.duplicate_polls += 1;
                match world.svc.poll_head(&robot, &user_id) {
                    Ok(again) if again != head => {
                        return Err(format!("program {program}: repeated poll changed the head"))
                    }
                    _ => {}
                }
            }
            if rng.random_bool(rates.lost_poll_reply) {
                continue;
            }
            let (seq, command) = match head {
                Head::Empty { .. } => break,
                Head::Command { seq, command } => (seq, command),
            };

            if !journal.is_done(seq) {
                executed.push(command);
                journal.record(seq).map_err(|e| e.to_string())?;
            }
            if rng.random_bool(rates.robot_restart) {
                journal = ExecutionJournal::open(&journal_path).map_err(|e| e.to_string())?;
                report.robot_restarts += 1;
                continue;
            }

            match world.svc.ack_head(&robot, &user_id, seq) {
                Ok(_) => {}
                Err(e) if is_storage(&e) => continue,
                Err(e) => return Err(format!("program {program}: ack {seq} failed: {e}")),
            }
            if rng.random_bool(rates.lost_ack_reply) {
                continue;
            }
            if rng.random_bool(rates.duplicate_ack) {
                report.duplicate_acks += 1;
                match world.svc.ack_head(&robot, &user_id, seq) {
                    Ok(_) => {}
                    Err(e) if is_storage(&e) => {}
                    Err(e) => return Err(format!("program {program}: duplicate ack {seq} rejected: {e}")),
                }
            }
            if seq > 1 && rng.random_bool(rates.stale_ack) {
                if let Err(e) = world.svc.ack_head(&robot, &user_id, seq - 1) {
                    return Err(format!("program {program}: stale ack rejected: {e}"));
                }
            }
        }

        if executed != submitted {
            return Err(format!(
                "program {program}: executed {} commands, submitted {}; first difference at {:?}",
                executed.len(),
                submitted.len(),
                executed.iter().zip(&submitted).position(|(a, b)| a != b)
            ));
        }
        let end = world.svc.get_queue_state(&world.robot(), &user_id).unwrap();
        if end.status != QueueStatus::Idle || end.remaining != 0 || end.seq_base != start_seq + n as u64 {
            return Err(format!("program {program}: queue ended as {end:?}"));
        }
        report.programs += 1;
        report.commands += n;
    }
    report.storage_failures = *world.backend.failures.lock().unwrap();
    Ok(report)
}
