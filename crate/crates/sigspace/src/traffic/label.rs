//! Ground-truth labels for observed source IPs.
//!
//! The default policy is deliberately counter-intuitive: sources on the
//! blocklist are known scanners and count as benign, while unlisted sources
//! sending to telescope space count as malicious. `blocklist_malicious` swaps
//! the labels for conventional use.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::blocklist::Blocklist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicy {
    #[default]
    PaperInverted,
    BlocklistMalicious,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IpLabel {
    Malicious,
    Benign,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledIpSpace {
    labels: BTreeMap<Ipv4Addr, IpLabel>,
    num_malicious: usize,
    num_benign: usize,
}

impl LabeledIpSpace {
    pub fn label_of(&self, ip: Ipv4Addr) -> Option<IpLabel> {
        self.labels.get(&ip).copied()
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.num_malicious, self.num_benign)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Ipv4Addr, IpLabel)> + '_ {
        self.labels.iter().map(|(ip, l)| (*ip, *l))
    }
}

pub fn label_ips(
    observed: &BTreeSet<Ipv4Addr>,
    blocklist: &Blocklist,
    policy: LabelPolicy,
) -> LabeledIpSpace {
    let listed = match policy {
        LabelPolicy::PaperInverted => IpLabel::Benign,
        LabelPolicy::BlocklistMalicious => IpLabel::Malicious,
    };
    let unlisted = match listed {
        IpLabel::Benign => IpLabel::Malicious,
        IpLabel::Malicious => IpLabel::Benign,
    };
    let mut labels = BTreeMap::new();
    let mut num_malicious = 0;
    let mut num_benign = 0;
    for &ip in observed {
        let label = if blocklist.contains(ip) { listed } else { unlisted };
        match label {
            IpLabel::Malicious => num_malicious += 1,
            IpLabel::Benign => num_benign += 1,
        }
        labels.insert(ip, label);
    }
    LabeledIpSpace {
        labels,
        num_malicious,
        num_benign,
    }
}
