//! Triple ingestion and per-predicate bipartite subgraphs.

mod bipartite;
mod triples;

pub use bipartite::{extract_bipartite, subgraph_stats, Adjacency, PredicateBipartiteGraph, SubgraphStats};
pub use triples::{parse_triples, KnowledgeGraph, MalformedLine, ParseReport, Triple, TripleFormat};
