use std::io::Write;

use serde::Serialize;

use super::KnowledgeGraph;
use crate::error::{Error, Result};

/// Subject-to-object adjacency with `m` subject rows over `n` object ids.
/// Rows are sorted and duplicate-free.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Adjacency {
    rows: Vec<Vec<usize>>,
    n_objects: usize,
    edge_count: usize,
}

impl Adjacency {
    /// Builds from an edge list; duplicates are dropped.
    pub fn from_edges(
        n_subjects: usize,
        n_objects: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut rows = vec![Vec::new(); n_subjects];
        for (s, o) in edges {
            if s >= n_subjects {
                return Err(Error::IndexOutOfRange { kind: "subject", index: s, len: n_subjects });
            }
            if o >= n_objects {
                return Err(Error::IndexOutOfRange { kind: "object", index: o, len: n_objects });
            }
            rows[s].push(o);
        }
        Ok(Self::from_rows_unchecked(rows, n_objects))
    }

    pub(crate) fn from_rows_unchecked(mut rows: Vec<Vec<usize>>, n_objects: usize) -> Self {
        let mut edge_count = 0;
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            edge_count += row.len();
        }
        Adjacency { rows, n_objects, edge_count }
    }

    pub fn n_subjects(&self) -> usize {
        self.rows.len()
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn row(&self, subject: usize) -> &[usize] {
        &self.rows[subject]
    }

    pub fn degree(&self, subject: usize) -> usize {
        self.rows[subject].len()
    }

    pub fn contains(&self, subject: usize, object: usize) -> bool {
        self.rows[subject].binary_search(&object).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.iter().enumerate().flat_map(|(s, row)| row.iter().map(move |&o| (s, o)))
    }

    /// Number of distinct subjects linked to each object.
    pub fn object_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_objects];
        for row in &self.rows {
            for &o in row {
                deg[o] += 1;
            }
        }
        deg
    }

    /// Copy of `self` with the given edges removed.
    pub fn without(&self, removed: impl IntoIterator<Item = (usize, usize)>) -> Adjacency {
        let mut rows = self.rows.clone();
        let mut edge_count = self.edge_count;
        for (s, o) in removed {
            if let Ok(pos) = rows[s].binary_search(&o) {
                rows[s].remove(pos);
                edge_count -= 1;
            }
        }
        Adjacency { rows, n_objects: self.n_objects, edge_count }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SubgraphStats {
    pub subjects: usize,
    pub objects: usize,
    pub edges: usize,
}

/// The bipartite subgraph of one predicate. Subject and object ids are
/// assigned independently, in lexicographic label order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateBipartiteGraph {
    predicate: String,
    subjects: Vec<String>,
    objects: Vec<String>,
    adjacency: Adjacency,
}

impl PredicateBipartiteGraph {
    /// Graph over generated labels `s000000..`, `o000000..`, which sort in id order.
    pub fn from_adjacency(predicate: &str, adjacency: Adjacency) -> Self {
        let subjects = (0..adjacency.n_subjects()).map(|i| format!("s{i:06}")).collect();
        let objects = (0..adjacency.n_objects()).map(|i| format!("o{i:06}")).collect();
        PredicateBipartiteGraph { predicate: predicate.to_owned(), subjects, objects, adjacency }
    }

    pub fn predicate(&self) -> &str {
        &self.predicate
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn m(&self) -> usize {
        self.subjects.len()
    }

    pub fn n(&self) -> usize {
        self.objects.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.edge_count()
    }

    pub fn subject_label(&self, id: usize) -> &str {
        &self.subjects[id]
    }

    pub fn object_label(&self, id: usize) -> &str {
        &self.objects[id]
    }

    pub fn subject_labels(&self) -> &[String] {
        &self.subjects
    }

    pub fn object_labels(&self) -> &[String] {
        &self.objects
    }

    pub fn subject_id(&self, label: &str) -> Option<usize> {
        self.subjects.binary_search_by(|s| s.as_str().cmp(label)).ok()
    }

    pub fn object_id(&self, label: &str) -> Option<usize> {
        self.objects.binary_search_by(|o| o.as_str().cmp(label)).ok()
    }

    pub fn stats(&self) -> SubgraphStats {
        subgraph_stats(self)
    }

    /// Dumps the subgraph as TSV triples, lines sorted lexicographically.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut lines: Vec<String> = self
            .adjacency
            .edges()
            .map(|(s, o)| format!("{}\t{}\t{}", self.subjects[s], self.predicate, self.objects[o]))
            .collect();
        lines.sort();
        for line in lines {
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

pub fn extract_bipartite(kg: &KnowledgeGraph, predicate: &str) -> Result<PredicateBipartiteGraph> {
    let pairs = kg.pairs(predicate).ok_or_else(|| Error::UnknownPredicate {
        predicate: predicate.to_owned(),
        available: kg.predicates().map(str::to_owned).collect(),
    })?;

    let mut subjects: Vec<String> = pairs.iter().map(|(s, _)| s.clone()).collect();
    subjects.dedup();
    let mut objects: Vec<String> = pairs.iter().map(|(_, o)| o.clone()).collect();
    objects.sort_unstable();
    objects.dedup();

    // pairs are sorted by subject, so rows fill in order
    let mut rows = vec![Vec::new(); subjects.len()];
    let mut s_id = 0;
    for (s, o) in pairs {
        while subjects[s_id] != *s {
            s_id += 1;
        }
        let o_id = objects.binary_search(o).expect("object collected above");
        rows[s_id].push(o_id);
    }
    let adjacency = Adjacency::from_rows_unchecked(rows, objects.len());
    Ok(PredicateBipartiteGraph { predicate: predicate.to_owned(), subjects, objects, adjacency })
}

pub fn subgraph_stats(g: &PredicateBipartiteGraph) -> SubgraphStats {
    SubgraphStats { subjects: g.m(), objects: g.n(), edges: g.edge_count() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{parse_triples, TripleFormat};

    fn kg(text: &str) -> KnowledgeGraph {
        parse_triples(text.as_bytes(), TripleFormat::Tsv).unwrap().0
    }

    #[test]
    fn singleton() {
        let g = extract_bipartite(&kg("a\tp\tb\n"), "p").unwrap();
        assert_eq!((g.m(), g.n(), g.edge_count()), (1, 1, 1));
    }

    #[test]
    fn complete_bipartite_counts() {
        let text = "s1\tp\tx\ns1\tp\ty\ns1\tp\tz\ns2\tp\tx\ns2\tp\ty\ns2\tp\tz\n";
        let g = extract_bipartite(&kg(text), "p").unwrap();
        assert_eq!(g.stats(), SubgraphStats { subjects: 2, objects: 3, edges: 6 });
    }

    #[test]
    fn empty_graph_stats() {
        let g = PredicateBipartiteGraph::from_adjacency("p", Adjacency::default());
        assert_eq!(subgraph_stats(&g), SubgraphStats { subjects: 0, objects: 0, edges: 0 });
    }

    #[test]
    fn ids_are_lexicographic_and_sides_independent() {
        let g = extract_bipartite(&kg("b\tp\ta\na\tp\tb\nc\tp\ta\nc\tq\tz\n"), "p").unwrap();
        assert_eq!(g.subject_labels(), ["a", "b", "c"]);
        assert_eq!(g.object_labels(), ["a", "b"]);
        assert_eq!(g.subject_id("a"), Some(0));
        assert_eq!(g.object_id("a"), Some(0));
        assert_eq!(g.adjacency().row(0), [1]);
        assert_eq!(g.adjacency().row(2), [0]);
    }

    #[test]
    fn unknown_predicate_lists_available() {
        let err = extract_bipartite(&kg("a\tp\tb\na\tq\tb\n"), "r").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("`r`") && msg.contains("p, q"), "{msg}");
    }

    #[test]
    fn adjacency_rejects_out_of_range() {
        assert!(Adjacency::from_edges(2, 2, [(0, 2)]).is_err());
        assert!(Adjacency::from_edges(2, 2, [(2, 0)]).is_err());
        let a = Adjacency::from_edges(2, 3, [(0, 2), (0, 2), (1, 0)]).unwrap();
        assert_eq!(a.edge_count(), 2);
        assert_eq!(a.without([(0, 2)]).edge_count(), 1);
    }
}
