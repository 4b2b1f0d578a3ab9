//! Content fingerprints for candidate-pool deduplication.

use sha2::{Digest, Sha256};

use super::WorkflowGraph;

/// SHA-256 over the canonical form of the graph: nodes sorted by id, edges
/// sorted and deduplicated, entry ids sorted. Equal graphs modulo those
/// orderings fingerprint identically; any field change moves the hash.
pub fn fingerprint(graph: &WorkflowGraph) -> String {
    let mut canonical = graph.clone();
    canonical.nodes.sort_by(|a, b| a.id.cmp(&b.id));
    canonical.edges.sort();
    canonical.edges.dedup();
    canonical.entry_ids.sort();
    let bytes = serde_json::to_vec(&canonical).expect("workflow graph serializes");
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}
