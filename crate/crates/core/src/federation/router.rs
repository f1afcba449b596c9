//! In-process router: requests go to the optimiser queue, responses to the
//! requesting agent's mailbox. Everything crosses as encoded frames.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use super::codec::{decode, encode, Envelope, MessageKind, Payload};
use super::FederationError;

#[derive(Clone, Debug, PartialEq)]
pub struct DeadLetter {
    pub agent_id: Option<u32>,
    pub correlation_id: Option<u64>,
    pub kind: Option<MessageKind>,
    pub reason: String,
}

/// Receiving end of an endpoint. Frames are decoded on receipt.
#[derive(Debug)]
pub struct Mailbox {
    rx: Receiver<Vec<u8>>,
}

impl Mailbox {
    /// `None` when nothing is waiting or the router is gone.
    pub fn try_recv(&self) -> Option<Result<Envelope, FederationError>> {
        match self.rx.try_recv() {
            Ok(frame) => Some(decode(&frame)),
            Err(TryRecvError::Empty | TryRecvError::Disconnected) => None,
        }
    }

    /// Blocks until a frame arrives; `None` once the endpoint is closed.
    pub fn recv(&self) -> Option<Result<Envelope, FederationError>> {
        self.rx.recv().ok().map(|f| decode(&f))
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<Result<Envelope, FederationError>> {
        match self.rx.recv_timeout(timeout) {
            Ok(frame) => Some(decode(&frame)),
            Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => None,
        }
    }
}

#[derive(Default)]
struct State {
    optimizer: Option<Sender<Vec<u8>>>,
    agents: BTreeMap<u32, Sender<Vec<u8>>>,
    /// correlation id -> requesting agent
    outstanding: HashMap<u64, u32>,
    dead: Vec<DeadLetter>,
    delivered: u64,
}

/// Cheap to clone; all clones share one routing table.
#[derive(Clone, Default)]
pub struct Router {
    state: Arc<Mutex<State>>,
    next_correlation: Arc<AtomicU64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delivery {
    Delivered,
    DeadLettered,
}

impl Router {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn register_agent(&self, agent_id: u32) -> Mailbox {
        let (tx, rx) = channel();
        self.lock().agents.insert(agent_id, tx);
        Mailbox { rx }
    }

    pub fn register_optimizer(&self) -> Mailbox {
        let (tx, rx) = channel();
        self.lock().optimizer = Some(tx);
        Mailbox { rx }
    }

    /// Drops the optimiser endpoint so its queue drains and closes.
    pub fn close_optimizer(&self) {
        self.lock().optimizer = None;
    }

    /// Fresh, strictly increasing correlation id.
    pub fn next_correlation_id(&self) -> u64 {
        self.next_correlation.fetch_add(1, Ordering::Relaxed) + 1
    }

    pub fn route(&self, env: &Envelope) -> Result<Delivery, FederationError> {
        self.route_frame(encode(env)?)
    }

    /// Routes one encoded frame. Undeliverable messages are dead-lettered;
    /// only undecodable frames are errors.
    pub fn route_frame(&self, frame: Vec<u8>) -> Result<Delivery, FederationError> {
        let env = match decode(&frame) {
            Ok(env) => env,
            Err(e) => {
                self.lock().dead.push(DeadLetter {
                    agent_id: None,
                    correlation_id: None,
                    kind: None,
                    reason: e.to_string(),
                });
                return Err(e);
            }
        };
        let mut st = self.lock();
        let dead = |st: &mut State, reason: String| {
            log::warn!("dead letter for agent {}: {reason}", env.agent_id);
            st.dead.push(DeadLetter {
                agent_id: Some(env.agent_id),
                correlation_id: Some(env.correlation_id),
                kind: Some(env.kind()),
                reason,
            });
            Ok(Delivery::DeadLettered)
        };
        match &env.payload {
            Payload::Request(_) => {
                if !st.agents.contains_key(&env.agent_id) {
                    return dead(&mut st, "request from unregistered agent".into());
                }
                if st.outstanding.contains_key(&env.correlation_id) {
                    return dead(&mut st, "duplicate correlation id".into());
                }
                let Some(tx) = st.optimizer.clone() else {
                    return dead(&mut st, "no optimizer endpoint".into());
                };
                if tx.send(frame).is_err() {
                    return dead(&mut st, "optimizer endpoint closed".into());
                }
                st.outstanding.insert(env.correlation_id, env.agent_id);
            }
            Payload::Response(_) => {
                let Some(tx) = st.agents.get(&env.agent_id).cloned() else {
                    return dead(&mut st, "response for unknown agent".into());
                };
                if st.outstanding.get(&env.correlation_id) != Some(&env.agent_id) {
                    return dead(&mut st, "response without a matching request".into());
                }
                if tx.send(frame).is_err() {
                    return dead(&mut st, "agent mailbox closed".into());
                }
                st.outstanding.remove(&env.correlation_id);
            }
        }
        st.delivered += 1;
        Ok(Delivery::Delivered)
    }

    pub fn dead_letters(&self) -> Vec<DeadLetter> {
        self.lock().dead.clone()
    }

    /// Requests routed but not yet answered.
    pub fn outstanding(&self) -> usize {
        self.lock().outstanding.len()
    }

    pub fn delivered(&self) -> u64 {
        self.lock().delivered
    }
}
