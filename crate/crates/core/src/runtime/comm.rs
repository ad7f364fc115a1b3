use std::sync::mpsc::{Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::assembly::NeighborTrace;
use crate::{Error, Result};

/// Message contents. Everything a worker sends is one of these.
#[derive(Debug, Clone)]
pub enum Payload {
    Values(Vec<f64>),
    /// Values tagged by an index (a patch or a worker).
    Indexed(Vec<(usize, Vec<f64>)>),
    Traces(Vec<NeighborTrace>),
    Abort(String),
}

impl Payload {
    /// Size on the wire if sent as raw 8-byte words.
    pub fn bytes(&self) -> usize {
        match self {
            Payload::Values(v) => 8 * v.len(),
            Payload::Indexed(v) => v.iter().map(|(_, x)| 16 + 8 * x.len()).sum(),
            Payload::Traces(t) => t.iter().map(|t| 40 + 8 * t.lifting.len()).sum(),
            Payload::Abort(m) => m.len(),
        }
    }
}

#[derive(Debug)]
pub(crate) struct Envelope {
    src: usize,
    tag: u64,
    payload: Payload,
}

/// One line of the message log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub phase: String,
    pub src: usize,
    pub dst: usize,
    pub tag: u64,
    pub bytes: usize,
}

/// Completed on issue: channels never block the sender.
#[derive(Debug)]
#[must_use]
pub struct SendHandle;

impl SendHandle {
    pub fn wait(self) {}
}

/// A posted receive, completed by [`Comm::wait`].
#[derive(Debug)]
#[must_use]
pub struct RecvHandle {
    src: usize,
    tag: u64,
}

/// Point-to-point messaging of one worker: FIFO channels between every pair,
/// receives matched on `(source, tag)`.
pub struct Comm {
    rank: usize,
    size: usize,
    senders: Vec<Sender<Envelope>>,
    rx: Receiver<Envelope>,
    pending: Vec<Envelope>,
    seq: u64,
    phase: String,
    log: Vec<MessageRecord>,
    timeout: Duration,
}

impl Comm {
    pub(crate) fn new(rank: usize, senders: Vec<Sender<Envelope>>, rx: Receiver<Envelope>, timeout: Duration) -> Self {
        let size = senders.len();
        Self { rank, size, senders, rx, pending: Vec::new(), seq: 0, phase: "assemble".into(), log: Vec::new(), timeout }
    }

    /// Channels for a group of `n` workers.
    pub(crate) fn network(n: usize, timeout: Duration) -> Vec<Comm> {
        let (txs, rxs): (Vec<_>, Vec<_>) = (0..n).map(|_| std::sync::mpsc::channel()).unzip();
        rxs.into_iter().enumerate().map(|(q, rx)| Comm::new(q, txs.clone(), rx, timeout)).collect()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn set_phase(&mut self, phase: &str) {
        self.phase = phase.to_string();
    }

    pub fn phase(&self) -> &str {
        &self.phase
    }

    /// Fresh tag for the next collective; every worker calls collectives in
    /// the same order, so tags agree across the group.
    pub fn next_tag(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    pub fn log(&self) -> &[MessageRecord] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<MessageRecord> {
        std::mem::take(&mut self.log)
    }

    pub fn isend(&mut self, dst: usize, tag: u64, payload: Payload) -> Result<SendHandle> {
        if dst == self.rank {
            return Err(Error::Runtime(format!("worker {dst} sending to itself; local data must be copied")));
        }
        self.log.push(MessageRecord { phase: self.phase.clone(), src: self.rank, dst, tag, bytes: payload.bytes() });
        self.senders[dst].send(Envelope { src: self.rank, tag, payload }).map_err(|_| Error::Runtime(format!("worker {dst} has terminated")))?;
        Ok(SendHandle)
    }

    pub fn send(&mut self, dst: usize, tag: u64, payload: Payload) -> Result<()> {
        self.isend(dst, tag, payload).map(SendHandle::wait)
    }

    pub fn irecv(&self, src: usize, tag: u64) -> RecvHandle {
        RecvHandle { src, tag }
    }

    pub fn wait(&mut self, h: RecvHandle) -> Result<Payload> {
        self.recv(h.src, h.tag)
    }

    pub fn recv(&mut self, src: usize, tag: u64) -> Result<Payload> {
        if let Some(i) = self.pending.iter().position(|e| e.src == src && e.tag == tag) {
            return Ok(self.pending.remove(i).payload);
        }
        loop {
            let env = match self.rx.recv_timeout(self.timeout) {
                Ok(e) => e,
                Err(RecvTimeoutError::Timeout) => return Err(Error::Runtime(format!("worker {} timed out waiting for worker {src} (tag {tag})", self.rank))),
                Err(RecvTimeoutError::Disconnected) => return Err(Error::Runtime("message channels closed".into())),
            };
            if let Payload::Abort(msg) = &env.payload {
                return Err(Error::Runtime(format!("aborted by worker {}: {msg}", env.src)));
            }
            if env.src == src && env.tag == tag {
                return Ok(env.payload);
            }
            self.pending.push(env);
        }
    }

    /// Next message with `tag` from any of `sources`, in arrival order.
    pub fn recv_any(&mut self, sources: &[usize], tag: u64) -> Result<(usize, Payload)> {
        if let Some(i) = self.pending.iter().position(|e| e.tag == tag && sources.contains(&e.src)) {
            let e = self.pending.remove(i);
            return Ok((e.src, e.payload));
        }
        loop {
            let env = self.rx.recv_timeout(self.timeout).map_err(|_| Error::Runtime(format!("worker {} timed out in a collective (tag {tag})", self.rank)))?;
            if let Payload::Abort(msg) = &env.payload {
                return Err(Error::Runtime(format!("aborted by worker {}: {msg}", env.src)));
            }
            if env.tag == tag && sources.contains(&env.src) {
                return Ok((env.src, env.payload));
            }
            self.pending.push(env);
        }
    }

    /// A handle that can still stop the group after this `Comm` is gone.
    pub(crate) fn alarm(&self) -> Alarm {
        Alarm { rank: self.rank, senders: self.senders.clone() }
    }
}

/// Sends abort notices to every other worker; used when a worker fails.
pub(crate) struct Alarm {
    rank: usize,
    senders: Vec<Sender<Envelope>>,
}

impl Alarm {
    pub(crate) fn abort_all(&self, msg: &str) {
        for (q, s) in self.senders.iter().enumerate() {
            if q != self.rank {
                let _ = s.send(Envelope { src: self.rank, tag: u64::MAX, payload: Payload::Abort(msg.to_string()) });
            }
        }
    }
}

pub(crate) fn expect_values(p: Payload) -> Result<Vec<f64>> {
    match p {
        Payload::Values(v) => Ok(v),
        other => Err(Error::Runtime(format!("expected plain values, got {other:?}"))),
    }
}

pub(crate) fn expect_indexed(p: Payload) -> Result<Vec<(usize, Vec<f64>)>> {
    match p {
        Payload::Indexed(v) => Ok(v),
        other => Err(Error::Runtime(format!("expected indexed values, got {other:?}"))),
    }
}
