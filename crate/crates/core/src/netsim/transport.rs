//! Carriers for messages that survived loss sampling.

use std::io::{Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::thread::JoinHandle;

use super::codec::{decode, decode_header, encode, Message, HEADER_LEN};
use super::NetError;

/// Moves one delivered message to its receiver.
pub trait Transport: Send {
    fn carry(&mut self, msg: Message) -> Result<Message, NetError>;
}

/// Hands the message over unchanged.
#[derive(Debug, Default)]
pub struct DirectTransport;

impl Transport for DirectTransport {
    fn carry(&mut self, msg: Message) -> Result<Message, NetError> {
        Ok(msg)
    }
}

/// Round-trips every message through the wire codec.
#[derive(Debug, Default)]
pub struct CodecTransport;

impl Transport for CodecTransport {
    fn carry(&mut self, msg: Message) -> Result<Message, NetError> {
        Ok(decode(&encode(&msg)?)?)
    }
}

/// Sends encoded frames over a loopback TCP connection to a relay thread
/// that writes each frame back; the returned frame is decoded.
pub struct SocketTransport {
    stream: TcpStream,
    relay: Option<JoinHandle<std::io::Result<()>>>,
}

impl SocketTransport {
    pub fn connect() -> Result<Self, NetError> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let relay = std::thread::spawn(move || -> std::io::Result<()> {
            let (mut conn, _) = listener.accept()?;
            conn.set_nodelay(true)?;
            let mut frame = vec![0u8; HEADER_LEN];
            loop {
                frame.resize(HEADER_LEN, 0);
                match conn.read_exact(&mut frame) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(()),
                    Err(e) => return Err(e),
                }
                let len = u32::from_le_bytes(frame[7..11].try_into().unwrap()) as usize;
                frame.resize(HEADER_LEN + len, 0);
                conn.read_exact(&mut frame[HEADER_LEN..])?;
                conn.write_all(&frame)?;
            }
        });
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { stream, relay: Some(relay) })
    }
}

impl Transport for SocketTransport {
    fn carry(&mut self, msg: Message) -> Result<Message, NetError> {
        let bytes = encode(&msg)?;
        self.stream.write_all(&bytes)?;
        let mut frame = vec![0u8; HEADER_LEN];
        self.stream.read_exact(&mut frame)?;
        let header = decode_header(&frame)?;
        frame.resize(HEADER_LEN + header.payload_len as usize, 0);
        self.stream.read_exact(&mut frame[HEADER_LEN..])?;
        Ok(decode(&frame)?)
    }
}

impl Drop for SocketTransport {
    fn drop(&mut self) {
        let _ = self.stream.shutdown(Shutdown::Both);
        if let Some(relay) = self.relay.take() {
            if let Ok(Err(e)) = relay.join() {
                log::warn!("socket relay ended with error: {e}");
            }
        }
    }
}

/// Transport selector used by configs and the CLI.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Direct,
    #[default]
    Codec,
    Socket,
}

impl TransportKind {
    pub fn open(self) -> Result<Box<dyn Transport>, NetError> {
        Ok(match self {
            TransportKind::Direct => Box::new(DirectTransport),
            TransportKind::Codec => Box::new(CodecTransport),
            TransportKind::Socket => Box::new(SocketTransport::connect()?),
        })
    }
}

impl std::str::FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Self::Direct),
            "codec" => Ok(Self::Codec),
            "socket" => Ok(Self::Socket),
            other => Err(format!("unknown transport `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::codec::{IndexedFrame, Payload};

    #[test]
    fn socket_relay_round_trips() {
        let mut t = SocketTransport::connect().unwrap();
        for k in 0..20u32 {
            let msg = Message {
                sender: k as u16,
                period: k,
                payload: Payload::FrameBatch(
                    (0..k).map(|i| IndexedFrame { index: i, feature: vec![i as f32; 16] }).collect(),
                ),
            };
            assert_eq!(t.carry(msg.clone()).unwrap(), msg);
        }
    }
}
