//! Wire codec, lossy lock-step channel, and message transports.

mod channel;
mod codec;
mod transport;

pub use channel::{
    Bucket, BucketStats, Channel, ChannelConfig, CommReport, Endpoint, CONTROLLER_ID,
};
pub use codec::{
    decode, decode_header, encode, frame_batch_len, CodecError, Header, IndexedFrame, Message,
    MessageKind, Payload, HEADER_LEN,
};
pub use transport::{
    CodecTransport, DirectTransport, SocketTransport, Transport, TransportKind,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown endpoint agent {0}")]
    UnknownEndpoint(u16),
    #[error("invalid channel config: {0}")]
    InvalidConfig(String),
}
