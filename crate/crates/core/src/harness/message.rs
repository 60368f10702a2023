//! Protocol messages and their bit-exact binary encoding.
//!
//! A frame is a 4-byte big-endian length followed by the encoded message:
//!
//! ```text
//! session   u64
//! step      u32
//! summand   u16
//! round     u16
//! sender    u8
//! receiver  u8
//! count     u16
//! count x { value u64, scale u8 }
//! ```
//!
//! All integers are big-endian. Party bytes: `0x00` distributor, `0xFF`
//! collector, `i + 1` for server `i`. The round field carries the message
//! tag: `0` for distribution and result frames, `k` for re-share round `k`,
//! `0x8000 | k` for zero-sharing exchange in round `k`, `0x4000` for key
//! setup, `0xC000`/`0xC001` for ping/pong.

use std::fmt;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::modring::Residue;

pub const HEADER_LEN: usize = 20;
pub const VALUE_LEN: usize = 9;
pub const LENGTH_PREFIX: usize = 4;
pub const MAX_FRAME: usize = 1 << 24;

const ZERO_SHARE_FLAG: u16 = 0x8000;
const KEY_SETUP: u16 = 0x4000;
const PING: u16 = 0xC000;
const PONG: u16 = 0xC001;
const MAX_ROUND: u16 = 0x3FFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartyId {
    Distributor,
    Server(u8),
    Collector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Distributor,
    Server,
    Collector,
}

impl PartyId {
    pub const MAX_SERVERS: usize = 0xFD + 1;

    pub fn to_byte(self) -> u8 {
        match self {
            PartyId::Distributor => 0x00,
            PartyId::Server(i) => i + 1,
            PartyId::Collector => 0xFF,
        }
    }

    pub fn from_byte(b: u8) -> Self {
        match b {
            0x00 => PartyId::Distributor,
            0xFF => PartyId::Collector,
            i => PartyId::Server(i - 1),
        }
    }

    pub fn server(index: usize) -> Self {
        assert!(index < Self::MAX_SERVERS, "server index {index} does not fit a party byte");
        PartyId::Server(index as u8)
    }

    pub fn role(self) -> Role {
        match self {
            PartyId::Distributor => Role::Distributor,
            PartyId::Server(_) => Role::Server,
            PartyId::Collector => Role::Collector,
        }
    }

    pub fn server_index(self) -> Option<usize> {
        match self {
            PartyId::Server(i) => Some(i as usize),
            _ => None,
        }
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::Distributor => f.write_str("distributor"),
            PartyId::Server(i) => write!(f, "server-{i}"),
            PartyId::Collector => f.write_str("collector"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    /// Factor shares, distributor to server.
    Bundle,
    /// Result component, server to collector.
    Result,
    /// Masked partial product in re-share round `k` (from 1).
    Reshare(u16),
    /// Zero-sharing randomness for round `k`.
    ZeroShare(u16),
    /// PRF key for correlated zero-sharing.
    KeySetup,
    Ping,
    Pong,
}

impl Tag {
    pub fn round_field(self) -> u16 {
        match self {
            Tag::Bundle | Tag::Result => 0,
            Tag::Reshare(k) => k,
            Tag::ZeroShare(k) => ZERO_SHARE_FLAG | k,
            Tag::KeySetup => KEY_SETUP,
            Tag::Ping => PING,
            Tag::Pong => PONG,
        }
    }

    fn parse(round: u16, sender: PartyId, receiver: PartyId) -> Result<Self> {
        let tag = match round {
            0 if sender == PartyId::Distributor && receiver.role() == Role::Server => Tag::Bundle,
            0 if sender.role() == Role::Server && receiver == PartyId::Collector => Tag::Result,
            KEY_SETUP => Tag::KeySetup,
            PING => Tag::Ping,
            PONG => Tag::Pong,
            r if r & ZERO_SHARE_FLAG != 0 && r & !ZERO_SHARE_FLAG != 0 && r & !ZERO_SHARE_FLAG <= MAX_ROUND => {
                Tag::ZeroShare(r & !ZERO_SHARE_FLAG)
            }
            r if (1..=MAX_ROUND).contains(&r) => Tag::Reshare(r),
            r => return Err(Error::Codec(format!("round field {r:#06x} is not valid on {sender} -> {receiver}"))),
        };
        Ok(tag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub session: u64,
    pub step: u32,
    pub summand: u16,
    pub tag: Tag,
    pub sender: PartyId,
    pub receiver: PartyId,
    pub payload: Vec<Residue>,
}

/// Uniqueness key of a message within a session.
pub type MessageKey = (u64, u32, u16, u16, u8, u8);

impl Message {
    pub fn key(&self) -> MessageKey {
        (self.session, self.step, self.summand, self.tag.round_field(), self.sender.to_byte(), self.receiver.to_byte())
    }

    pub fn is_server_to_server(&self) -> bool {
        self.sender.role() == Role::Server && self.receiver.role() == Role::Server
    }

    /// Size of the frame on the wire, length prefix included.
    pub fn frame_len(&self) -> usize {
        LENGTH_PREFIX + HEADER_LEN + VALUE_LEN * self.payload.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let count = u16::try_from(self.payload.len())
            .map_err(|_| Error::Codec(format!("{} payload values exceed u16", self.payload.len())))?;
        let round = self.tag.round_field();
        if let Tag::Reshare(k) | Tag::ZeroShare(k) = self.tag {
            if k == 0 || k > MAX_ROUND {
                return Err(Error::Codec(format!("round {k} out of range")));
            }
        }
        let mut out = Vec::with_capacity(HEADER_LEN + VALUE_LEN * self.payload.len());
        out.extend_from_slice(&self.session.to_be_bytes());
        out.extend_from_slice(&self.step.to_be_bytes());
        out.extend_from_slice(&self.summand.to_be_bytes());
        out.extend_from_slice(&round.to_be_bytes());
        out.push(self.sender.to_byte());
        out.push(self.receiver.to_byte());
        out.extend_from_slice(&count.to_be_bytes());
        for r in &self.payload {
            let scale =
                u8::try_from(r.scale).map_err(|_| Error::Codec(format!("scale {} does not fit a byte", r.scale)))?;
            out.extend_from_slice(&r.value.to_be_bytes());
            out.push(scale);
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Codec(format!("{} bytes is shorter than a header", bytes.len())));
        }
        let u16_at = |i: usize| u16::from_be_bytes([bytes[i], bytes[i + 1]]);
        let session = u64::from_be_bytes(bytes[0..8].try_into().expect("8 bytes"));
        let step = u32::from_be_bytes(bytes[8..12].try_into().expect("4 bytes"));
        let summand = u16_at(12);
        let round = u16_at(14);
        let sender = PartyId::from_byte(bytes[16]);
        let receiver = PartyId::from_byte(bytes[17]);
        let count = u16_at(18) as usize;
        let expected = HEADER_LEN + VALUE_LEN * count;
        if bytes.len() != expected {
            return Err(Error::Codec(format!("expected {expected} bytes, got {}", bytes.len())));
        }
        let payload = bytes[HEADER_LEN..]
            .chunks_exact(VALUE_LEN)
            .map(|c| {
                let value = u64::from_be_bytes(c[..8].try_into().expect("8 bytes"));
                Residue::new(value, c[8] as u32)
            })
            .collect();
        let tag = Tag::parse(round, sender, receiver)?;
        Ok(Self { session, step, summand, tag, sender, receiver, payload })
    }
}

pub fn write_frame<W: Write>(w: &mut W, body: &[u8]) -> Result<()> {
    if body.len() > MAX_FRAME {
        return Err(Error::Codec(format!("frame of {} bytes exceeds limit", body.len())));
    }
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(body)?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let mut len = [0u8; LENGTH_PREFIX];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(Error::Codec(format!("frame of {len} bytes exceeds limit")));
    }
    let mut body = vec![0; len];
    r.read_exact(&mut body)?;
    Ok(body)
}
