//! Wire-format golden files. The `.bin` files under `tests/golden` were
//! written by a separate encoder from the documented layout, so these tests
//! pin the byte layout rather than round-trip through our own code.

use std::path::PathBuf;

use ffward_core::ffagent::Strategy;
use ffward_core::netsim::{
    decode, decode_header, encode, frame_batch_len, CodecError, IndexedFrame, Message, MessageKind, Payload,
    HEADER_LEN,
};

fn golden(name: &str) -> Vec<u8> {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", name].iter().collect();
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn cases() -> Vec<(&'static str, Message)> {
    vec![
        (
            "frame_batch.bin",
            Message {
                sender: 2,
                period: 7,
                payload: Payload::FrameBatch(vec![
                    IndexedFrame { index: 5, feature: vec![1.0, -2.0] },
                    IndexedFrame { index: 9, feature: vec![0.5, 0.25] },
                ]),
            },
        ),
        ("score_vector.bin", Message { sender: 0, period: 3, payload: Payload::ScoreVector(vec![0.5, 1.0, 0.0]) }),
        (
            "strategy_order.bin",
            Message {
                sender: u16::MAX,
                period: 1,
                payload: Payload::StrategyOrder(vec![Strategy::Slow, Strategy::Fast, Strategy::Normal]),
            },
        ),
    ]
}

#[test]
fn encode_matches_golden_bytes() {
    for (file, msg) in cases() {
        assert_eq!(encode(&msg).unwrap(), golden(file), "{file}");
    }
}

#[test]
fn golden_bytes_decode_to_messages() {
    for (file, msg) in cases() {
        assert_eq!(decode(&golden(file)).unwrap(), msg, "{file}");
    }
}

#[test]
fn golden_headers() {
    let h = decode_header(&golden("frame_batch.bin")).unwrap();
    assert_eq!(h.kind, MessageKind::FrameBatch);
    assert_eq!(h.sender, 2);
    assert_eq!(h.period, 7);
    assert_eq!(h.payload_len as usize, frame_batch_len(2, 2));
    assert_eq!(golden("frame_batch.bin").len(), HEADER_LEN + 4 + 2 * (4 + 4 * 2));
}

#[test]
fn damaged_golden_bytes_are_rejected() {
    let fb = golden("frame_batch.bin");
    assert!(matches!(decode(&fb[..fb.len() - 3]), Err(CodecError::ShortBuffer { .. })));
    let mut bad_kind = fb.clone();
    bad_kind[0] = 0xFF;
    assert!(matches!(decode(&bad_kind), Err(CodecError::UnknownKind(0xFF))));
    let mut bad_strategy = golden("strategy_order.bin");
    let last = bad_strategy.len() - 1;
    bad_strategy[last] = 7;
    assert!(matches!(decode(&bad_strategy), Err(CodecError::InvalidStrategy(7))));
    let mut trailing = golden("score_vector.bin");
    trailing.push(0);
    assert!(decode(&trailing).is_err());
}
