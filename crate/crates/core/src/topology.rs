//! Topology metrics of predicate subgraphs and their regression against
//! link prediction quality.
//!
//! Definitions used here:
//!
//! - density: `edges / (m * n)`, the fill of the subject-object matrix;
//! - average degree: `2 * edges / (m + n)` over the combined vertex set;
//! - clustering coefficient: global transitivity `3 * triangles / wedges` of
//!   the undirected simple graph obtained by merging subjects and objects
//!   that share a label (self loops dropped). Without shared labels the
//!   graph is bipartite and the coefficient is 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::kg::PredicateBipartiteGraph;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopologyProfile {
    pub predicate: String,
    pub density: f64,
    pub average_degree: f64,
    pub clustering_coefficient: f64,
}

impl TopologyProfile {
    pub fn compute(g: &PredicateBipartiteGraph) -> Result<Self> {
        Ok(TopologyProfile {
            predicate: g.predicate().to_owned(),
            density: density(g)?,
            average_degree: average_degree(g)?,
            clustering_coefficient: clustering_coefficient(g),
        })
    }

    pub fn metric(&self, metric: TopologyMetric) -> f64 {
        match metric {
            TopologyMetric::Density => self.density,
            TopologyMetric::AverageDegree => self.average_degree,
            TopologyMetric::ClusteringCoefficient => self.clustering_coefficient,
        }
    }
}

pub fn density(g: &PredicateBipartiteGraph) -> Result<f64> {
    if g.m() == 0 || g.n() == 0 {
        return Err(Error::Degenerate(format!(
            "density of `{}` needs at least one subject and one object",
            g.predicate()
        )));
    }
    Ok(g.edge_count() as f64 / (g.m() as f64 * g.n() as f64))
}

pub fn average_degree(g: &PredicateBipartiteGraph) -> Result<f64> {
    if g.m() + g.n() == 0 {
        return Err(Error::Degenerate(format!("average degree of `{}` needs at least one vertex", g.predicate())));
    }
    Ok(2.0 * g.edge_count() as f64 / (g.m() + g.n()) as f64)
}

/// Undirected, label-merged neighbour sets (sorted, no self loops).
pub fn merged_neighbours(g: &PredicateBipartiteGraph) -> Vec<Vec<usize>> {
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for label in g.subject_labels().iter().chain(g.object_labels()) {
        let next = ids.len();
        ids.entry(label.as_str()).or_insert(next);
    }
    let subject_node: Vec<usize> = g.subject_labels().iter().map(|l| ids[l.as_str()]).collect();
    let object_node: Vec<usize> = g.object_labels().iter().map(|l| ids[l.as_str()]).collect();
    let mut nbrs = vec![Vec::new(); ids.len()];
    for (s, o) in g.adjacency().edges() {
        let (a, b) = (subject_node[s], object_node[o]);
        if a != b {
            nbrs[a].push(b);
            nbrs[b].push(a);
        }
    }
    for row in &mut nbrs {
        row.sort_unstable();
        row.dedup();
    }
    nbrs
}

/// `3 * triangles / connected triples` on the label-merged graph; 0 when
/// there is no path of length 2.
pub fn clustering_coefficient(g: &PredicateBipartiteGraph) -> f64 {
    transitivity(&merged_neighbours(g))
}

pub(crate) fn transitivity(nbrs: &[Vec<usize>]) -> f64 {
    let wedges: u64 = nbrs.iter().map(|r| (r.len() as u64) * (r.len() as u64).saturating_sub(1) / 2).sum();
    if wedges == 0 {
        return 0.0;
    }
    // orient each edge from lower to higher (degree, id) rank and count each
    // triangle once at its lowest-ranked vertex
    let rank = |v: usize| (nbrs[v].len(), v);
    let forward: Vec<Vec<usize>> = nbrs
        .iter()
        .enumerate()
        .map(|(v, r)| {
            let mut f: Vec<usize> = r.iter().copied().filter(|&w| rank(w) > rank(v)).collect();
            f.sort_unstable();
            f
        })
        .collect();
    let mut triangles: u64 = 0;
    for v in 0..nbrs.len() {
        for &w in &forward[v] {
            triangles += sorted_intersection_len(&forward[v], &forward[w]) as u64;
        }
    }
    3.0 * triangles as f64 / wedges as f64
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub rvalue: f64,
    pub n_points: usize,
}

/// Ordinary least squares fit of `y` on `x`, with the Pearson correlation.
/// A constant `y` gives slope 0 and rvalue 0.
pub fn linear_regression(points: &[(f64, f64)]) -> Result<RegressionFit> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::ZeroVariance);
    }
    let slope = sxy / sxx;
    let rvalue = if syy > 0.0 { (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0) } else { 0.0 };
    Ok(RegressionFit { slope, intercept: mean_y - slope * mean_x, rvalue, n_points: points.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TopologyMetric {
    #[serde(rename = "density")]
    Density,
    #[serde(rename = "average_degree")]
    AverageDegree,
    #[serde(rename = "clustering_coefficient")]
    ClusteringCoefficient,
}

impl TopologyMetric {
    pub const ALL: [TopologyMetric; 3] =
        [TopologyMetric::Density, TopologyMetric::AverageDegree, TopologyMetric::ClusteringCoefficient];

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyMetric::Density => "density",
            TopologyMetric::AverageDegree => "average_degree",
            TopologyMetric::ClusteringCoefficient => "clustering_coefficient",
        }
    }
}

impl fmt::Display for TopologyMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PerformanceMetric {
    #[serde(rename = "hr")]
    Hr,
    #[serde(rename = "arhr")]
    Arhr,
    #[serde(rename = "auc")]
    Auc,
}

impl PerformanceMetric {
    pub const ALL: [PerformanceMetric; 3] = [PerformanceMetric::Hr, PerformanceMetric::Arhr, PerformanceMetric::Auc];

    pub fn as_str(self) -> &'static str {
        match self {
            PerformanceMetric::Hr => "hr",
            PerformanceMetric::Arhr => "arhr",
            PerformanceMetric::Auc => "auc",
        }
    }

    pub fn of(self, report: &EvalReport) -> f64 {
        match self {
            PerformanceMetric::Hr => report.hr,
            PerformanceMetric::Arhr => report.arhr,
            PerformanceMetric::Auc => report.auc,
        }
    }
}

impl fmt::Display for PerformanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One cell of the topology-vs-performance grid, with its scatter points.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub x_metric: TopologyMetric,
    pub y_metric: PerformanceMetric,
    /// `(predicate, x, y)` in profile order.
    pub points: Vec<(String, f64, f64)>,
    pub fit: Result<RegressionFit, String>,
}

/// Pairs each profile with the report of the same predicate, then fits all
/// nine (topology metric, performance metric) combinations. Degenerate fits
/// are kept as `Err` cells.
pub fn topology_grid(profiles: &[TopologyProfile], reports: &[EvalReport]) -> Result<Vec<GridCell>> {
    let by_pred: BTreeMap<&str, &EvalReport> = reports.iter().map(|r| (r.predicate.as_str(), r)).collect();
    let profile_preds: BTreeSet<&str> = profiles.iter().map(|p| p.predicate.as_str()).collect();
    let report_preds: BTreeSet<&str> = by_pred.keys().copied().collect();
    if profile_preds != report_preds || by_pred.len() != reports.len() || profile_preds.len() != profiles.len() {
        let only_profiles = profile_preds.difference(&report_preds).map(|s| s.to_string()).collect();
        let only_reports = report_preds.difference(&profile_preds).map(|s| s.to_string()).collect();
        return Err(Error::PredicateMismatch { only_profiles, only_reports });
    }
    let mut cells = Vec::with_capacity(9);
    for x_metric in TopologyMetric::ALL {
        for y_metric in PerformanceMetric::ALL {
            let points: Vec<(String, f64, f64)> = profiles
                .iter()
                .map(|p| (p.predicate.clone(), p.metric(x_metric), y_metric.of(by_pred[p.predicate.as_str()])))
                .collect();
            let xy: Vec<(f64, f64)> = points.iter().map(|(_, x, y)| (*x, *y)).collect();
            let fit = linear_regression(&xy).map_err(|e| e.to_string());
            cells.push(GridCell { x_metric, y_metric, points, fit });
        }
    }
    Ok(cells)
}

/// The nine fits, failing on the first degenerate one.
pub fn correlate_topology(
    profiles: &[TopologyProfile],
    reports: &[EvalReport],
) -> Result<Vec<(TopologyMetric, PerformanceMetric, RegressionFit)>> {
    topology_grid(profiles, reports)?
        .into_iter()
        .map(|c| {
            let xy: Vec<(f64, f64)> = c.points.iter().map(|(_, x, y)| (*x, *y)).collect();
            Ok((c.x_metric, c.y_metric, linear_regression(&xy)?))
        })
        .collect()
}

pub fn write_topology_csv<W: Write>(profiles: &[TopologyProfile], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in profiles {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RegressionRow<'a> {
    x_metric: &'a str,
    y_metric: &'a str,
    slope: f64,
    intercept: f64,
    rvalue: f64,
    n_points: usize,
}

/// Successful fits only; degenerate cells are left out.
pub fn write_regression_csv<W: Write>(cells: &[GridCell], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["x_metric", "y_metric", "slope", "intercept", "rvalue", "n_points"])?;
    for c in cells {
        if let Ok(fit) = &c.fit {
            w.serialize(RegressionRow {
                x_metric: c.x_metric.as_str(),
                y_metric: c.y_metric.as_str(),
                slope: fit.slope,
                intercept: fit.intercept,
                rvalue: fit.rvalue,
                n_points: fit.n_points,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_scatter_csv<W: Write>(cell: &GridCell, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["predicate", "x", "y"])?;
    for (p, x, y) in &cell.points {
        w.serialize((p, x, y))?;
    }
    w.flush()?;
    Ok(())
}
