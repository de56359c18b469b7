//! Traffic capture loading, blocklist ingestion, and IP-space labeling.

mod blocklist;
mod label;
mod packet;

pub use blocklist::{load_blocklist, Blocklist, BlocklistError};
pub use label::{label_ips, IpLabel, LabelPolicy, LabeledIpSpace};
pub use packet::{
    load_traffic, parse_traffic, FlowDirection, PacketRecord, TcpFlags, TrafficError, ACK, CWR,
    ECE, FIN, PSH, RST, SYN, URG,
};
