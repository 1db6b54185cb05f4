//! Wire and in-process transports.
//!
//! On the wire, every message travels as a length-prefixed frame: a 32-bit
//! big-endian byte count followed by the UTF-8 JSON encoding of exactly one
//! message. The loopback transport carries messages in-process with FIFO
//! delivery and is what the simulator and tests use.

use crate::protocol::Message;
use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;
use thiserror::Error;

/// Largest legitimate message (a batched reveal at the biggest planned N)
/// fits comfortably; the cap bounds adversarial memory pressure.
pub const MAX_FRAME_PAYLOAD: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("payload of {0} bytes exceeds the {MAX_FRAME_PAYLOAD}-byte frame cap")]
    Oversize(usize),
    #[error("channel closed")]
    Closed,
    #[error("receive timed out after {0:?}")]
    Timeout(Duration),
    #[error("frame decode failed: {0}")]
    Decode(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Encode one message as a frame: 4-byte big-endian length, then JSON.
pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, TransportError> {
    let payload = serde_json::to_vec(msg).map_err(|e| TransportError::Decode(e.to_string()))?;
    if payload.len() > MAX_FRAME_PAYLOAD {
        return Err(TransportError::Oversize(payload.len()));
    }
    let mut frame = Vec::with_capacity(4 + payload.len());
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(&payload);
    Ok(frame)
}

/// Decode one frame payload (without the length prefix) into a message.
pub fn decode_payload(payload: &[u8]) -> Result<Message, TransportError> {
    serde_json::from_slice(payload).map_err(|e| TransportError::Decode(e.to_string()))
}

/// A duplex message channel bound to one session.
pub trait Channel: Send {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError>;
    fn recv(&mut self, timeout: Duration) -> Result<Message, TransportError>;
}

/// One end of an in-process loopback pair.
pub struct LoopbackEndpoint {
    tx: Sender<Message>,
    rx: Receiver<Message>,
}

/// A connected in-process pair with deterministic FIFO delivery.
pub fn loopback_pair() -> (LoopbackEndpoint, LoopbackEndpoint) {
    let (tx_ab, rx_ab) = channel();
    let (tx_ba, rx_ba) = channel();
    (
        LoopbackEndpoint { tx: tx_ab, rx: rx_ba },
        LoopbackEndpoint { tx: tx_ba, rx: rx_ab },
    )
}

impl Channel for LoopbackEndpoint {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        self.tx.send(msg.clone()).map_err(|_| TransportError::Closed)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Message, TransportError> {
        match self.rx.recv_timeout(timeout) {
            Ok(msg) => Ok(msg),
            Err(RecvTimeoutError::Timeout) => Err(TransportError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(TransportError::Closed),
        }
    }
}

/// A TCP-backed channel speaking the frame format.
pub struct TcpEndpoint {
    stream: TcpStream,
}

impl TcpEndpoint {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, TransportError> {
        Ok(Self {
            stream: TcpStream::connect(addr)?,
        })
    }

    pub fn from_stream(stream: TcpStream) -> Self {
        Self { stream }
    }
}

impl Channel for TcpEndpoint {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        let frame = encode_frame(msg)?;
        // Single write call keeps the frame atomic with respect to other
        // writers on this stream.
        self.stream.write_all(&frame)?;
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> Result<Message, TransportError> {
        self.stream.set_read_timeout(Some(timeout))?;
        let mut len_bytes = [0u8; 4];
        read_exact_or(&mut self.stream, &mut len_bytes, timeout)?;
        let len = u32::from_be_bytes(len_bytes) as usize;
        if len > MAX_FRAME_PAYLOAD {
            return Err(TransportError::Oversize(len));
        }
        let mut payload = vec![0u8; len];
        read_exact_or(&mut self.stream, &mut payload, timeout)?;
        decode_payload(&payload)
    }
}

fn read_exact_or(
    stream: &mut TcpStream,
    buf: &mut [u8],
    timeout: Duration,
) -> Result<(), TransportError> {
    match stream.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(TransportError::Closed),
        Err(e)
            if e.kind() == std::io::ErrorKind::WouldBlock
                || e.kind() == std::io::ErrorKind::TimedOut =>
        {
            Err(TransportError::Timeout(timeout))
        }
        Err(e) => Err(TransportError::Io(e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Message;
    use std::net::TcpListener;
    use std::thread;

    fn sample_msg() -> Message {
        Message::RoundCommit {
            round: 5,
            digest: [0xab; 32],
        }
    }

    #[test]
    fn frame_is_length_prefixed_big_endian() {
        // Any message whose JSON is 17 bytes frames to 21 bytes starting
        // 00 00 00 11.
        let msg = Message::Abort {
            reason: "x".into(),
        };
        let json = serde_json::to_vec(&msg).unwrap();
        let frame = encode_frame(&msg).unwrap();
        assert_eq!(frame.len(), 4 + json.len());
        assert_eq!(&frame[..4], (json.len() as u32).to_be_bytes());
        // The spec'd byte-exact case: a 17-byte payload.
        let payload17 = br#"{"type":"error!"}"#;
        assert_eq!(payload17.len(), 17);
        let mut f = (17u32).to_be_bytes().to_vec();
        f.extend_from_slice(payload17);
        assert_eq!(f.len(), 21);
        assert_eq!(&f[..4], &[0, 0, 0, 0x11]);
    }

    #[test]
    fn oversize_payload_rejected() {
        let msg = Message::Abort {
            reason: "y".repeat(2 * 1024 * 1024),
        };
        assert!(matches!(encode_frame(&msg), Err(TransportError::Oversize(_))));
    }

    #[test]
    fn loopback_roundtrip_fifo() {
        let (mut a, mut b) = loopback_pair();
        let msgs: Vec<Message> = (0..3)
            .map(|i| Message::RoundCommit {
                round: i,
                digest: [i as u8; 32],
            })
            .collect();
        for m in &msgs {
            a.send(m).unwrap();
        }
        for m in &msgs {
            assert_eq!(&b.recv(Duration::from_millis(10)).unwrap(), m);
        }
        assert!(matches!(
            b.recv(Duration::from_millis(5)),
            Err(TransportError::Timeout(_))
        ));
    }

    #[test]
    fn independent_loopback_pairs_do_not_interfere() {
        let (mut a1, mut b1) = loopback_pair();
        let (mut a2, mut b2) = loopback_pair();
        a1.send(&Message::Abort { reason: "one".into() }).unwrap();
        a2.send(&Message::Abort { reason: "two".into() }).unwrap();
        assert_eq!(
            b2.recv(Duration::from_millis(10)).unwrap(),
            Message::Abort { reason: "two".into() }
        );
        assert_eq!(
            b1.recv(Duration::from_millis(10)).unwrap(),
            Message::Abort { reason: "one".into() }
        );
    }

    #[test]
    fn loopback_closed_channel_errors() {
        let (mut a, b) = loopback_pair();
        drop(b);
        assert!(matches!(
            a.send(&sample_msg()),
            Err(TransportError::Closed)
        ));
    }

    #[test]
    fn tcp_roundtrip_in_order() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut chan = TcpEndpoint::from_stream(stream);
            let mut got = vec![];
            for _ in 0..3 {
                got.push(chan.recv(Duration::from_secs(2)).unwrap());
            }
            chan.send(&Message::Abort { reason: "done".into() }).unwrap();
            got
        });

        let mut client = TcpEndpoint::connect(addr).unwrap();
        let msgs: Vec<Message> = (0..3)
            .map(|i| Message::RoundCommit {
                round: i,
                digest: [i as u8; 32],
            })
            .collect();
        for m in &msgs {
            client.send(m).unwrap();
        }
        assert_eq!(
            client.recv(Duration::from_secs(2)).unwrap(),
            Message::Abort { reason: "done".into() }
        );
        assert_eq!(server.join().unwrap(), msgs);
    }

    #[test]
    fn tcp_truncated_frame_is_decode_or_closed_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            // Claim 100 bytes but send garbage and close.
            stream.write_all(&100u32.to_be_bytes()).unwrap();
            stream.write_all(b"not json").unwrap();
        });
        let mut client = TcpEndpoint::connect(addr).unwrap();
        let err = client.recv(Duration::from_secs(2)).unwrap_err();
        assert!(matches!(err, TransportError::Closed | TransportError::Decode(_)));
        server.join().unwrap();
    }

    #[test]
    fn tcp_timeout_on_silence() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let mut client = TcpEndpoint::connect(addr).unwrap();
        assert!(matches!(
            client.recv(Duration::from_millis(50)),
            Err(TransportError::Timeout(_))
        ));
    }
}
