use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Edge, Network};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub label: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: usize,
    pub to: usize,
    #[serde(rename = "K")]
    pub coupling: f64,
}

/// Native network format. Node ids must be `0..N` in order; edges keep
/// their order and orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub schema: u32,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

impl From<&Network> for NetworkDocument {
    fn from(net: &Network) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            nodes: net
                .labels()
                .iter()
                .zip(net.injections())
                .enumerate()
                .map(|(id, (label, &p))| NodeRecord {
                    id,
                    label: label.clone(),
                    p,
                })
                .collect(),
            edges: net
                .edges()
                .iter()
                .map(|e| EdgeRecord {
                    from: e.tail,
                    to: e.head,
                    coupling: e.coupling,
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkDocument> for Network {
    type Error = Error;

    fn try_from(doc: NetworkDocument) -> Result<Self> {
        if doc.schema != SCHEMA_VERSION {
            return Err(Error::InvalidNetwork(format!(
                "unsupported schema {}, expected {SCHEMA_VERSION}",
                doc.schema
            )));
        }
        if let Some((i, n)) = doc.nodes.iter().enumerate().find(|(i, n)| n.id != *i) {
            return Err(Error::InvalidNetwork(format!(
                "node at position {i} has id {}",
                n.id
            )));
        }
        let (labels, injections) = doc.nodes.into_iter().map(|n| (n.label, n.p)).unzip();
        let edges = doc
            .edges
            .iter()
            .map(|e| Edge::new(e.from, e.to, e.coupling))
            .collect();
        Network::new(labels, edges, injections)
    }
}

pub fn network_to_json(net: &Network) -> String {
    serde_json::to_string_pretty(&NetworkDocument::from(net)).expect("network serializes")
}

pub fn network_from_json(text: &str) -> Result<Network> {
    let doc: NetworkDocument = serde_json::from_str(text)?;
    doc.try_into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_roundtrip() {
        let net = Network::unlabeled(&[(0, 1, 2.5)], vec![0.1, -0.1]).unwrap();
        assert_eq!(network_from_json(&network_to_json(&net)).unwrap(), net);
    }

    #[test]
    fn triangle_keeps_edge_order() {
        let net =
            Network::unlabeled(&[(2, 0, 1.0), (0, 1, 3.0), (1, 2, 0.1)], vec![0.0; 3]).unwrap();
        let back = network_from_json(&network_to_json(&net)).unwrap();
        assert_eq!(back.edges(), net.edges());
    }

    #[test]
    fn tiny_imbalance_is_accepted() {
        let text = r#"{"schema":1,"nodes":[{"id":0,"label":"a","p":0.5},
            {"id":1,"label":"b","p":-0.49999999999999999}],"edges":[{"from":0,"to":1,"K":1}]}"#;
        let text = text.replace("-0.49999999999999999", &format!("{}", -0.5 + 1e-17));
        assert!(network_from_json(&text).is_ok());
    }

    #[test]
    fn schema_violations() {
        let ok = r#"{"schema":1,"nodes":[{"id":0,"label":"a","p":0},{"id":1,"label":"b","p":0}],
            "edges":[{"from":0,"to":1,"K":1}]}"#;
        assert!(network_from_json(ok).is_ok());
        assert!(network_from_json(&ok.replace("\"schema\":1", "\"schema\":2")).is_err());
        assert!(network_from_json(&ok.replace("\"id\":1", "\"id\":5")).is_err());
        assert!(network_from_json(&ok.replace("\"K\"", "\"k\"")).is_err());
        assert!(matches!(
            network_from_json(&ok.replace("\"to\":1", "\"to\":9")),
            Err(Error::InvalidNetwork(_))
        ));
        assert!(matches!(network_from_json("{"), Err(Error::Json(_))));
    }
}
