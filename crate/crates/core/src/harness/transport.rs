//! Reliable, ordered, private channels between parties.
//!
//! `in-memory` hands `Message` values over directly. `framed-stream` encodes
//! every message, seals it with ChaCha20-Poly1305 under a per-channel key
//! and writes it as a length-prefixed frame into a Unix stream socket; the
//! receiving end reads, authenticates and decodes it.

use std::collections::{HashMap, VecDeque};
use std::io::BufReader;
use std::os::unix::net::UnixStream;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use sha2::{Digest, Sha256};

use super::message::{read_frame, write_frame, Message, PartyId};
use crate::error::{Error, Result};
use crate::registry::Registry;

const NONCE_LEN: usize = 12;

pub trait Transport {
    fn name(&self) -> &'static str;

    fn send(&mut self, msg: &Message) -> Result<()>;

    /// Next message on the directed channel `from -> to`.
    fn recv(&mut self, from: PartyId, to: PartyId) -> Result<Message>;
}

pub type TransportFactory = fn(secret: [u8; 32]) -> Result<Box<dyn Transport>>;

pub fn builtin_transports() -> Registry<TransportFactory> {
    let mut r: Registry<TransportFactory> = Registry::new("transport");
    r.register("in-memory", |_| Ok(Box::new(InMemoryTransport::default())));
    r.register("framed-stream", |secret| Ok(Box::new(FramedStreamTransport::new(secret))));
    r
}

#[derive(Debug, Default)]
pub struct InMemoryTransport {
    queues: HashMap<(PartyId, PartyId), VecDeque<Message>>,
}

impl Transport for InMemoryTransport {
    fn name(&self) -> &'static str {
        "in-memory"
    }

    fn send(&mut self, msg: &Message) -> Result<()> {
        self.queues.entry((msg.sender, msg.receiver)).or_default().push_back(msg.clone());
        Ok(())
    }

    fn recv(&mut self, from: PartyId, to: PartyId) -> Result<Message> {
        self.queues
            .get_mut(&(from, to))
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| Error::Session(format!("nothing queued on {from} -> {to}")))
    }
}

/// AEAD state for one direction of one channel. Nonces are a message
/// counter, so frames must be opened in the order they were sealed.
pub struct SecureChannel {
    cipher: ChaCha20Poly1305,
    from: PartyId,
    to: PartyId,
    counter: u64,
}

impl SecureChannel {
    pub fn new(secret: &[u8; 32], from: PartyId, to: PartyId) -> Self {
        let mut h = Sha256::new();
        h.update(secret);
        h.update([from.to_byte(), to.to_byte()]);
        let key = h.finalize();
        Self { cipher: ChaCha20Poly1305::new(Key::from_slice(&key)), from, to, counter: 0 }
    }

    fn nonce(counter: u64) -> [u8; NONCE_LEN] {
        let mut n = [0u8; NONCE_LEN];
        n[4..].copy_from_slice(&counter.to_be_bytes());
        n
    }

    fn aad(&self) -> [u8; 2] {
        [self.from.to_byte(), self.to.to_byte()]
    }

    /// Encrypts `msg` into a complete frame: length, nonce, ciphertext, tag.
    pub fn seal(&mut self, msg: &Message) -> Result<Vec<u8>> {
        let nonce = Self::nonce(self.counter);
        self.counter += 1;
        let body = msg.encode()?;
        let aad = self.aad();
        let ct = self
            .cipher
            .encrypt(Nonce::from_slice(&nonce), Payload { msg: &body, aad: &aad })
            .map_err(|_| Error::Codec("encryption failed".into()))?;
        let mut sealed = nonce.to_vec();
        sealed.extend_from_slice(&ct);
        let mut frame = Vec::with_capacity(sealed.len() + 4);
        write_frame(&mut frame, &sealed)?;
        Ok(frame)
    }

    /// Opens the body of a frame (everything after the length prefix).
    pub fn open_body(&mut self, sealed: &[u8]) -> Result<Message> {
        let auth = || Error::Authentication { from: self.from, to: self.to };
        if sealed.len() < NONCE_LEN {
            return Err(auth());
        }
        let (nonce, ct) = sealed.split_at(NONCE_LEN);
        if nonce != Self::nonce(self.counter) {
            return Err(auth());
        }
        let aad = self.aad();
        let body = self.cipher.decrypt(Nonce::from_slice(nonce), Payload { msg: ct, aad: &aad }).map_err(|_| auth())?;
        self.counter += 1;
        let msg = Message::decode(&body)?;
        if msg.sender != self.from || msg.receiver != self.to {
            return Err(auth());
        }
        Ok(msg)
    }

    /// Opens a complete frame as produced by [`SecureChannel::seal`].
    pub fn open(&mut self, frame: &[u8]) -> Result<Message> {
        let mut cursor = std::io::Cursor::new(frame);
        let body = read_frame(&mut cursor)?;
        if cursor.position() as usize != frame.len() {
            return Err(Error::Codec("trailing bytes after frame".into()));
        }
        self.open_body(&body)
    }
}

struct StreamChannel {
    writer: UnixStream,
    reader: BufReader<UnixStream>,
    sealer: SecureChannel,
    opener: SecureChannel,
    /// Frames written but not yet read; reading with none pending would block.
    pending: usize,
}

pub struct FramedStreamTransport {
    secret: [u8; 32],
    channels: HashMap<(PartyId, PartyId), StreamChannel>,
}

impl FramedStreamTransport {
    pub fn new(secret: [u8; 32]) -> Self {
        Self { secret, channels: HashMap::new() }
    }

    fn channel(&mut self, from: PartyId, to: PartyId) -> Result<&mut StreamChannel> {
        if !self.channels.contains_key(&(from, to)) {
            let (writer, reader) = UnixStream::pair()?;
            let ch = StreamChannel {
                writer,
                reader: BufReader::new(reader),
                sealer: SecureChannel::new(&self.secret, from, to),
                opener: SecureChannel::new(&self.secret, from, to),
                pending: 0,
            };
            self.channels.insert((from, to), ch);
        }
        Ok(self.channels.get_mut(&(from, to)).expect("inserted above"))
    }
}

impl Transport for FramedStreamTransport {
    fn name(&self) -> &'static str {
        "framed-stream"
    }

    fn send(&mut self, msg: &Message) -> Result<()> {
        use std::io::Write;
        let ch = self.channel(msg.sender, msg.receiver)?;
        let frame = ch.sealer.seal(msg)?;
        ch.writer.write_all(&frame)?;
        ch.pending += 1;
        Ok(())
    }

    fn recv(&mut self, from: PartyId, to: PartyId) -> Result<Message> {
        let ch = self.channel(from, to)?;
        if ch.pending == 0 {
            return Err(Error::Session(format!("nothing queued on {from} -> {to}")));
        }
        ch.pending -= 1;
        let body = read_frame(&mut ch.reader)?;
        ch.opener.open_body(&body)
    }
}
