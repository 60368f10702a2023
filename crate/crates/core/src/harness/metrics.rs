use crate::modring::OpCounts;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoleMetrics {
    pub ops: OpCounts,
    pub messages_sent: u64,
    pub bytes_sent: u64,
}

impl RoleMetrics {
    pub fn merge(&mut self, other: &RoleMetrics) {
        self.ops.merge(&other.ops);
        self.messages_sent += other.messages_sent;
        self.bytes_sent += other.bytes_sent;
    }
}

/// Exact operation and traffic counters. Bytes are frame sizes including the
/// length prefix, before any transport encryption overhead.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunMetrics {
    pub distributor: RoleMetrics,
    /// All servers together.
    pub server: RoleMetrics,
    pub collector: RoleMetrics,
    pub per_server: Vec<RoleMetrics>,
    pub server_to_server: u64,
    pub reshare_messages: u64,
    pub zero_share_messages: u64,
    pub setup_messages: u64,
}

impl RunMetrics {
    pub fn with_servers(n: usize) -> Self {
        Self { per_server: vec![RoleMetrics::default(); n], ..Self::default() }
    }

    pub fn merge(&mut self, other: &RunMetrics) {
        self.distributor.merge(&other.distributor);
        self.server.merge(&other.server);
        self.collector.merge(&other.collector);
        if self.per_server.len() < other.per_server.len() {
            self.per_server.resize(other.per_server.len(), RoleMetrics::default());
        }
        for (mine, theirs) in self.per_server.iter_mut().zip(&other.per_server) {
            mine.merge(theirs);
        }
        self.server_to_server += other.server_to_server;
        self.reshare_messages += other.reshare_messages;
        self.zero_share_messages += other.zero_share_messages;
        self.setup_messages += other.setup_messages;
    }

    pub fn total_messages(&self) -> u64 {
        self.distributor.messages_sent + self.server.messages_sent + self.collector.messages_sent
    }

    pub const CSV_HEADER: [&'static str; 16] = [
        "dist_add",
        "dist_mul",
        "dist_draw",
        "dist_msgs",
        "dist_bytes",
        "srv_add",
        "srv_mul",
        "srv_draw",
        "srv_msgs",
        "srv_bytes",
        "coll_add",
        "coll_mul",
        "coll_draw",
        "srv_to_srv",
        "reshare_msgs",
        "zero_share_msgs",
    ];

    pub fn csv_row(&self) -> [u64; 16] {
        let (d, s, c) = (&self.distributor, &self.server, &self.collector);
        [
            d.ops.additions,
            d.ops.multiplications,
            d.ops.draws,
            d.messages_sent,
            d.bytes_sent,
            s.ops.additions,
            s.ops.multiplications,
            s.ops.draws,
            s.messages_sent,
            s.bytes_sent,
            c.ops.additions,
            c.ops.multiplications,
            c.ops.draws,
            self.server_to_server,
            self.reshare_messages,
            self.zero_share_messages,
        ]
    }
}
