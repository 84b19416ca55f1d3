//! Simulated lossy channel with per-period mailboxes and byte accounting.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::codec::{Message, MessageKind};
use super::transport::{DirectTransport, Transport};
use super::NetError;

/// Sender id used by the central controller.
pub const CONTROLLER_ID: u16 = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Endpoint {
    Agent(u16),
    Controller,
}

impl Endpoint {
    pub fn id(self) -> u16 {
        match self {
            Endpoint::Agent(a) => a,
            Endpoint::Controller => CONTROLLER_ID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Drop probability for messages of the lossy kinds.
    pub loss: f64,
    pub seed: u64,
    /// Message kinds subject to loss.
    pub lossy_kinds: Vec<String>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { loss: 0.0, seed: 0, lossy_kinds: vec![MessageKind::FrameBatch.name().to_string()] }
    }
}

impl ChannelConfig {
    pub fn lossless() -> Self {
        Self::default()
    }

    pub fn with_loss(loss: f64, seed: u64) -> Self {
        Self { loss, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<Vec<MessageKind>, NetError> {
        if !(0.0..=1.0).contains(&self.loss) {
            return Err(NetError::InvalidConfig(format!("loss {} outside [0, 1]", self.loss)));
        }
        self.lossy_kinds
            .iter()
            .map(|n| {
                MessageKind::from_name(n)
                    .ok_or_else(|| NetError::InvalidConfig(format!("unknown message kind `{n}`")))
            })
            .collect()
    }
}

/// Whether a message travels between agents or involves the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bucket {
    PeerToPeer,
    Central,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BucketStats {
    pub attempted_msgs: u64,
    pub delivered_msgs: u64,
    pub attempted_bytes: u64,
    pub delivered_bytes: u64,
    /// Attempted sends keyed by (kind, encoded size).
    pub sizes: BTreeMap<(MessageKind, usize), u64>,
}

impl BucketStats {
    fn record(&mut self, kind: MessageKind, size: usize, delivered: bool) {
        self.attempted_msgs += 1;
        self.attempted_bytes += size as u64;
        if delivered {
            self.delivered_msgs += 1;
            self.delivered_bytes += size as u64;
        }
        *self.sizes.entry((kind, size)).or_default() += 1;
    }

    /// Byte total recomputed from the size histogram.
    pub fn histogram_bytes(&self) -> u64 {
        self.sizes.iter().map(|(&(_, size), &n)| size as u64 * n).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommReport {
    pub p2p: BucketStats,
    pub central: BucketStats,
}

impl CommReport {
    pub fn bucket(&self, b: Bucket) -> &BucketStats {
        match b {
            Bucket::PeerToPeer => &self.p2p,
            Bucket::Central => &self.central,
        }
    }

    pub fn total_attempted_bytes(&self) -> u64 {
        self.p2p.attempted_bytes + self.central.attempted_bytes
    }
}

struct Envelope {
    sender: u16,
    ordinal: u64,
    msg: Message,
}

/// Lock-step channel. Messages delivered during a period wait in the
/// receiver's mailbox until drained; [`Channel::end_period`] discards
/// anything left over.
pub struct Channel {
    loss: f64,
    lossy: Vec<MessageKind>,
    rng: ChaCha8Rng,
    transport: Box<dyn Transport>,
    num_agents: usize,
    agent_boxes: Vec<Vec<Envelope>>,
    controller_box: Vec<Envelope>,
    ordinal: u64,
    report: CommReport,
}

impl Channel {
    pub fn new(num_agents: usize, config: &ChannelConfig) -> Result<Self, NetError> {
        Self::with_transport(num_agents, config, Box::new(DirectTransport))
    }

    pub fn with_transport(
        num_agents: usize,
        config: &ChannelConfig,
        transport: Box<dyn Transport>,
    ) -> Result<Self, NetError> {
        let lossy = config.validate()?;
        Ok(Self {
            loss: config.loss,
            lossy,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            transport,
            num_agents,
            agent_boxes: (0..num_agents).map(|_| Vec::new()).collect(),
            controller_box: Vec::new(),
            ordinal: 0,
            report: CommReport::default(),
        })
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn sends(&self) -> u64 {
        self.ordinal
    }

    fn check(&self, e: Endpoint) -> Result<(), NetError> {
        match e {
            Endpoint::Agent(a) if a as usize >= self.num_agents || a == CONTROLLER_ID => {
                Err(NetError::UnknownEndpoint(a))
            }
            _ => Ok(()),
        }
    }

    /// Loss decision for the send with this ordinal.
    fn dropped(&mut self, ordinal: u64, kind: MessageKind) -> bool {
        if self.loss <= 0.0 || !self.lossy.contains(&kind) {
            return false;
        }
        self.rng.set_word_pos(ordinal as u128 * 2);
        let u = self.rng.next_u64() as f64 / 18_446_744_073_709_551_616.0;
        u < self.loss
    }

    /// Attempts delivery. Returns whether the message reached the mailbox.
    pub fn send(&mut self, from: Endpoint, to: Endpoint, msg: Message) -> Result<bool, NetError> {
        self.check(from)?;
        self.check(to)?;
        let ordinal = self.ordinal;
        self.ordinal += 1;
        let kind = msg.kind();
        let size = msg.encoded_len();
        let delivered = !self.dropped(ordinal, kind);
        let bucket = match (from, to) {
            (Endpoint::Agent(_), Endpoint::Agent(_)) => &mut self.report.p2p,
            _ => &mut self.report.central,
        };
        bucket.record(kind, size, delivered);
        if !delivered {
            return Ok(false);
        }
        let msg = self.transport.carry(msg)?;
        let env = Envelope { sender: from.id(), ordinal, msg };
        match to {
            Endpoint::Agent(a) => self.agent_boxes[a as usize].push(env),
            Endpoint::Controller => self.controller_box.push(env),
        }
        Ok(true)
    }

    /// Drains the receiver's mailbox ordered by (sender id, send ordinal).
    pub fn receive(&mut self, at: Endpoint) -> Result<Vec<Message>, NetError> {
        self.check(at)?;
        let inbox = match at {
            Endpoint::Agent(a) => &mut self.agent_boxes[a as usize],
            Endpoint::Controller => &mut self.controller_box,
        };
        let mut items = std::mem::take(inbox);
        items.sort_by_key(|e| (e.sender, e.ordinal));
        Ok(items.into_iter().map(|e| e.msg).collect())
    }

    /// Period barrier: undrained messages are discarded.
    pub fn end_period(&mut self) -> usize {
        let mut dropped = self.controller_box.len();
        self.controller_box.clear();
        for b in &mut self.agent_boxes {
            dropped += b.len();
            b.clear();
        }
        dropped
    }

    pub fn report(&self) -> &CommReport {
        &self.report
    }

    pub fn into_report(self) -> CommReport {
        self.report
    }
}
