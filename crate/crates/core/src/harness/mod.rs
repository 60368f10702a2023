//! The simulated network: parties, wire messages, transports, sessions and
//! counters.

mod message;
mod metrics;
mod session;
mod transport;

pub use message::{
    read_frame, write_frame, Message, MessageKey, PartyId, Role, Tag, HEADER_LEN, LENGTH_PREFIX, MAX_FRAME, VALUE_LEN,
};
pub use metrics::{RoleMetrics, RunMetrics};
pub use session::{builtin_zero_sharers, AuditEntry, Direction, Session, SessionConfig, ZeroSharerFactory};
pub use transport::{
    builtin_transports, FramedStreamTransport, InMemoryTransport, SecureChannel, Transport, TransportFactory,
};
