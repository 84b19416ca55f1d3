//! Wire format. All integers little-endian.
//!
//! ```text
//! kind u8 | sender u16 | period u32 | payload_len u32 | payload
//! FrameBatch    : count u32, count x { index u32, D x f32 }
//! ScoreVector   : N u16, N x f32
//! StrategyOrder : N u16, N x u8 (strategy code)
//! ```

use thiserror::Error;

use crate::ffagent::Strategy;

pub const HEADER_LEN: usize = 1 + 2 + 4 + 4;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("buffer too short: need {needed} bytes, have {got}")]
    ShortBuffer { needed: usize, got: usize },
    #[error("unknown message kind {0:#04x}")]
    UnknownKind(u8),
    #[error("payload length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid strategy code {0}")]
    InvalidStrategy(u8),
    #[error("frame batch has ragged feature lengths")]
    RaggedBatch,
    #[error("{0} entries do not fit the wire format")]
    TooLarge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    FrameBatch,
    ScoreVector,
    StrategyOrder,
}

impl MessageKind {
    pub const ALL: [MessageKind; 3] =
        [MessageKind::FrameBatch, MessageKind::ScoreVector, MessageKind::StrategyOrder];

    pub fn code(self) -> u8 {
        match self {
            MessageKind::FrameBatch => 1,
            MessageKind::ScoreVector => 2,
            MessageKind::StrategyOrder => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::FrameBatch => "frame_batch",
            MessageKind::ScoreVector => "score_vector",
            MessageKind::StrategyOrder => "strategy_order",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedFrame {
    pub index: u32,
    pub feature: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    FrameBatch(Vec<IndexedFrame>),
    ScoreVector(Vec<f32>),
    StrategyOrder(Vec<Strategy>),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::FrameBatch(_) => MessageKind::FrameBatch,
            Payload::ScoreVector(_) => MessageKind::ScoreVector,
            Payload::StrategyOrder(_) => MessageKind::StrategyOrder,
        }
    }

    pub fn encoded_len(&self) -> usize {
        match self {
            Payload::FrameBatch(frames) => {
                let dim = frames.first().map_or(0, |f| f.feature.len());
                frame_batch_len(frames.len(), dim)
            }
            Payload::ScoreVector(v) => 2 + 4 * v.len(),
            Payload::StrategyOrder(v) => 2 + v.len(),
        }
    }
}

/// Payload size of a frame batch with `count` frames of dimension `dim`.
pub fn frame_batch_len(count: usize, dim: usize) -> usize {
    4 + count * (4 + 4 * dim)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: u16,
    pub period: u32,
    pub payload: Payload,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.encoded_len()
    }
}

pub fn encode(msg: &Message) -> Result<Vec<u8>, CodecError> {
    let mut payload = Vec::with_capacity(msg.payload.encoded_len());
    match &msg.payload {
        Payload::FrameBatch(frames) => {
            let dim = frames.first().map_or(0, |f| f.feature.len());
            if frames.iter().any(|f| f.feature.len() != dim) {
                return Err(CodecError::RaggedBatch);
            }
            let count = u32::try_from(frames.len()).map_err(|_| CodecError::TooLarge(frames.len()))?;
            payload.extend_from_slice(&count.to_le_bytes());
            for f in frames {
                payload.extend_from_slice(&f.index.to_le_bytes());
                for x in &f.feature {
                    payload.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        Payload::ScoreVector(v) => {
            let n = u16::try_from(v.len()).map_err(|_| CodecError::TooLarge(v.len()))?;
            payload.extend_from_slice(&n.to_le_bytes());
            for x in v {
                payload.extend_from_slice(&x.to_le_bytes());
            }
        }
        Payload::StrategyOrder(v) => {
            let n = u16::try_from(v.len()).map_err(|_| CodecError::TooLarge(v.len()))?;
            payload.extend_from_slice(&n.to_le_bytes());
            payload.extend(v.iter().map(|s| s.code()));
        }
    }
    let len = u32::try_from(payload.len()).map_err(|_| CodecError::TooLarge(payload.len()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.push(msg.kind().code());
    out.extend_from_slice(&msg.sender.to_le_bytes());
    out.extend_from_slice(&msg.period.to_le_bytes());
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Parsed fixed header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub kind: MessageKind,
    pub sender: u16,
    pub period: u32,
    pub payload_len: u32,
}

pub fn decode_header(bytes: &[u8]) -> Result<Header, CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::ShortBuffer { needed: HEADER_LEN, got: bytes.len() });
    }
    let kind = MessageKind::from_code(bytes[0]).ok_or(CodecError::UnknownKind(bytes[0]))?;
    Ok(Header {
        kind,
        sender: u16::from_le_bytes([bytes[1], bytes[2]]),
        period: u32::from_le_bytes(bytes[3..7].try_into().unwrap()),
        payload_len: u32::from_le_bytes(bytes[7..11].try_into().unwrap()),
    })
}

/// Decodes exactly one message; trailing bytes are a length mismatch.
pub fn decode(bytes: &[u8]) -> Result<Message, CodecError> {
    let header = decode_header(bytes)?;
    let total = HEADER_LEN + header.payload_len as usize;
    if bytes.len() < total {
        return Err(CodecError::ShortBuffer { needed: total, got: bytes.len() });
    }
    if bytes.len() > total {
        return Err(CodecError::LengthMismatch(format!(
            "{} trailing bytes after declared payload",
            bytes.len() - total
        )));
    }
    let payload = decode_payload(header.kind, &bytes[HEADER_LEN..])?;
    Ok(Message { sender: header.sender, period: header.period, payload })
}

fn decode_payload(kind: MessageKind, p: &[u8]) -> Result<Payload, CodecError> {
    match kind {
        MessageKind::FrameBatch => {
            if p.len() < 4 {
                return Err(CodecError::LengthMismatch(format!("frame batch payload of {} bytes", p.len())));
            }
            let count = u32::from_le_bytes(p[0..4].try_into().unwrap()) as usize;
            let body = p.len() - 4;
            let dim = if count == 0 {
                if body != 0 {
                    return Err(CodecError::LengthMismatch("empty batch with body bytes".into()));
                }
                0
            } else {
                if !body.is_multiple_of(count) || body / count < 4 || !(body / count - 4).is_multiple_of(4) {
                    return Err(CodecError::LengthMismatch(format!(
                        "{body} body bytes do not split into {count} frames"
                    )));
                }
                (body / count - 4) / 4
            };
            let stride = 4 + 4 * dim;
            let frames = (0..count)
                .map(|k| {
                    let rec = &p[4 + k * stride..4 + (k + 1) * stride];
                    IndexedFrame {
                        index: u32::from_le_bytes(rec[0..4].try_into().unwrap()),
                        feature: rec[4..]
                            .chunks_exact(4)
                            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                            .collect(),
                    }
                })
                .collect();
            Ok(Payload::FrameBatch(frames))
        }
        MessageKind::ScoreVector => {
            let n = count_prefix(p)?;
            if p.len() != 2 + 4 * n {
                return Err(CodecError::LengthMismatch(format!("score vector of {n} needs {} bytes, got {}", 2 + 4 * n, p.len())));
            }
            Ok(Payload::ScoreVector(
                p[2..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
            ))
        }
        MessageKind::StrategyOrder => {
            let n = count_prefix(p)?;
            if p.len() != 2 + n {
                return Err(CodecError::LengthMismatch(format!("strategy order of {n} needs {} bytes, got {}", 2 + n, p.len())));
            }
            let strategies = p[2..]
                .iter()
                .map(|&c| Strategy::from_code(c).ok_or(CodecError::InvalidStrategy(c)))
                .collect::<Result<_, _>>()?;
            Ok(Payload::StrategyOrder(strategies))
        }
    }
}

fn count_prefix(p: &[u8]) -> Result<usize, CodecError> {
    if p.len() < 2 {
        return Err(CodecError::LengthMismatch(format!("payload of {} bytes lacks a count", p.len())));
    }
    Ok(u16::from_le_bytes([p[0], p[1]]) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch() -> Message {
        Message {
            sender: 2,
            period: 7,
            payload: Payload::FrameBatch(vec![
                IndexedFrame { index: 3, feature: vec![1.0, -2.0] },
                IndexedFrame { index: 9, feature: vec![0.5, 4.0] },
            ]),
        }
    }

    #[test]
    fn frame_batch_layout() {
        let bytes = encode(&batch()).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 4 + 2 * (4 + 8));
        assert_eq!(&bytes[..11], &[1, 2, 0, 7, 0, 0, 0, 28, 0, 0, 0]);
        assert_eq!(&bytes[11..15], &[2, 0, 0, 0]);
        assert_eq!(&bytes[15..19], &[3, 0, 0, 0]);
        assert_eq!(&bytes[19..23], &1.0f32.to_le_bytes());
        assert_eq!(decode(&bytes).unwrap(), batch());
    }

    #[test]
    fn strategy_order_layout() {
        let m = Message {
            sender: u16::MAX,
            period: 1,
            payload: Payload::StrategyOrder(vec![Strategy::Fast, Strategy::Slow]),
        };
        let bytes = encode(&m).unwrap();
        assert_eq!(bytes, vec![3, 0xFF, 0xFF, 1, 0, 0, 0, 4, 0, 0, 0, 2, 0, 2, 0]);
        assert_eq!(decode(&bytes).unwrap(), m);
    }

    #[test]
    fn empty_batch_round_trips() {
        let m = Message { sender: 0, period: 0, payload: Payload::FrameBatch(vec![]) };
        let bytes = encode(&m).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 4);
        assert_eq!(decode(&bytes).unwrap(), m);
    }

    #[test]
    fn distinct_errors() {
        let mut bytes = encode(&batch()).unwrap();
        assert!(matches!(decode(&bytes[..5]), Err(CodecError::ShortBuffer { .. })));
        assert!(matches!(decode(&bytes[..20]), Err(CodecError::ShortBuffer { .. })));
        bytes.push(0);
        assert!(matches!(decode(&bytes), Err(CodecError::LengthMismatch(_))));
        bytes.pop();
        bytes[0] = 0xFF;
        assert_eq!(decode(&bytes), Err(CodecError::UnknownKind(0xFF)));

        let mut order = encode(&Message {
            sender: 0,
            period: 0,
            payload: Payload::StrategyOrder(vec![Strategy::Normal]),
        })
        .unwrap();
        *order.last_mut().unwrap() = 9;
        assert_eq!(decode(&order), Err(CodecError::InvalidStrategy(9)));
    }

    #[test]
    fn inconsistent_batch_body_rejected() {
        let mut bytes = encode(&batch()).unwrap();
        // A 24-byte body cannot hold five equal-sized frames.
        bytes[11] = 5;
        assert!(matches!(decode(&bytes), Err(CodecError::LengthMismatch(_))));
    }

    #[test]
    fn ragged_batch_rejected() {
        let m = Message {
            sender: 0,
            period: 0,
            payload: Payload::FrameBatch(vec![
                IndexedFrame { index: 0, feature: vec![1.0] },
                IndexedFrame { index: 1, feature: vec![1.0, 2.0] },
            ]),
        };
        assert_eq!(encode(&m), Err(CodecError::RaggedBatch));
    }

    #[test]
    fn kind_codes() {
        for k in MessageKind::ALL {
            assert_eq!(MessageKind::from_code(k.code()), Some(k));
            assert_eq!(MessageKind::from_name(k.name()), Some(k));
        }
        assert_eq!(MessageKind::from_code(0), None);
    }
}
