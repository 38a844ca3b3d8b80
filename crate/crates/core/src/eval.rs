//! Repeated leave-one-out evaluation with HR@N, ARHR and AUC.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{most_popular_ranker, pointwise_mf_train, random_ranker, PopularityTable};
use crate::bpr::train;
use crate::error::{Error, Result};
use crate::kg::{Adjacency, PredicateBipartiteGraph};
use crate::model::{rank_objects, EmbeddingModel, HyperParams};
use crate::seed::Seed;

pub const DEFAULT_REPEATS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "bpr")]
    Bpr,
    #[serde(rename = "mf")]
    Mf,
    #[serde(rename = "mp")]
    MostPopular,
    #[serde(rename = "random")]
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bpr, Method::Mf, Method::MostPopular, Method::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bpr => "bpr",
            Method::Mf => "mf",
            Method::MostPopular => "mp",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`; expected one of bpr, mf, mp, random")))
    }
}

/// One leave-one-out repeat: the held-out object per tested subject and the
/// training adjacency with those edges removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepeatSplit {
    pub held_out: BTreeMap<usize, usize>,
    pub training: Adjacency,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub seed: u64,
    pub repeats: Vec<RepeatSplit>,
    /// Subjects with degree < 2, never tested.
    pub ineligible_subjects: usize,
}

impl SplitSpec {
    pub fn repeat_count(&self) -> usize {
        self.repeats.len()
    }
}

/// For each repeat, every subject of degree >= 2 loses one uniformly chosen
/// edge to the test set. Repeat `r` draws from `Seed(seed).index(r).child("split")`.
pub fn make_split(g: &PredicateBipartiteGraph, repeat_count: usize, seed: u64) -> Result<SplitSpec> {
    let adj = g.adjacency();
    let eligible: Vec<usize> = (0..adj.n_subjects()).filter(|&s| adj.degree(s) >= 2).collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleSubject { predicate: g.predicate().to_owned() });
    }
    let repeats = (0..repeat_count)
        .map(|r| {
            let mut rng = Seed(seed).index(r as u64).child("split").rng();
            let held_out: BTreeMap<usize, usize> = eligible
                .iter()
                .map(|&s| {
                    let row = adj.row(s);
                    (s, row[rng.random_range(0..row.len())])
                })
                .collect();
            let training = adj.without(held_out.iter().map(|(&s, &o)| (s, o)));
            RepeatSplit { held_out, training }
        })
        .collect();
    Ok(SplitSpec { seed, repeats, ineligible_subjects: adj.n_subjects() - eligible.len() })
}

fn hit_positions<'a>(
    recommendations: &'a BTreeMap<usize, Vec<usize>>,
    held_out: &'a BTreeMap<usize, usize>,
) -> impl Iterator<Item = Result<Option<usize>>> + 'a {
    held_out.iter().map(move |(&s, &o)| {
        let list = recommendations.get(&s).ok_or(Error::MissingRecommendation { subject: s })?;
        Ok(list.iter().position(|&x| x == o).map(|p| p + 1))
    })
}

/// Fraction of tested subjects whose held-out object is in their list.
pub fn hit_rate(recommendations: &BTreeMap<usize, Vec<usize>>, held_out: &BTreeMap<usize, usize>) -> Result<f64> {
    if held_out.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut hits = 0usize;
    for pos in hit_positions(recommendations, held_out) {
        hits += pos?.is_some() as usize;
    }
    Ok(hits as f64 / held_out.len() as f64)
}

/// Sum of `1 / position` (1-based) over hits, divided by tested subjects.
pub fn arhr(recommendations: &BTreeMap<usize, Vec<usize>>, held_out: &BTreeMap<usize, usize>) -> Result<f64> {
    if held_out.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut sum = 0.0;
    for pos in hit_positions(recommendations, held_out) {
        if let Some(p) = pos? {
            sum += 1.0 / p as f64;
        }
    }
    Ok(sum / held_out.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AucOutcome {
    pub auc: f64,
    pub subjects_scored: usize,
    /// Tested subjects with no object outside their training and test links.
    pub subjects_without_negatives: usize,
}

/// Exact AUC: per tested subject, the fraction of never-linked objects that
/// score strictly below the held-out object (ties count 0), averaged over
/// subjects that have at least one such object.
pub fn auc<F>(scorer: F, split: &SplitSpec, repeat: usize) -> Result<AucOutcome>
where
    F: Fn(usize, usize) -> f64,
{
    let rs = split.repeats.get(repeat).ok_or(Error::IndexOutOfRange {
        kind: "repeat",
        index: repeat,
        len: split.repeats.len(),
    })?;
    let n = rs.training.n_objects();
    let mut linked = vec![false; n];
    let mut total = 0.0;
    let mut scored = 0usize;
    let mut without = 0usize;
    for (&s, &pos) in &rs.held_out {
        let row = rs.training.row(s);
        for &o in row {
            linked[o] = true;
        }
        linked[pos] = true;
        let x_pos = scorer(s, pos);
        let (mut wins, mut pairs) = (0usize, 0usize);
        for o in (0..n).filter(|&o| !linked[o]) {
            pairs += 1;
            wins += (x_pos > scorer(s, o)) as usize;
        }
        for &o in row {
            linked[o] = false;
        }
        linked[pos] = false;
        if pairs == 0 {
            without += 1;
        } else {
            total += wins as f64 / pairs as f64;
            scored += 1;
        }
    }
    if scored == 0 {
        return Err(Error::EmptyTestSet);
    }
    Ok(AucOutcome { auc: total / scored as f64, subjects_scored: scored, subjects_without_negatives: without })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepeatMetrics {
    pub repeat: usize,
    pub hr: f64,
    pub arhr: f64,
    pub auc: f64,
    pub n_subjects_tested: usize,
    pub auc_subjects_excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub predicate: String,
    pub method: Method,
    pub repeats: Vec<RepeatMetrics>,
    pub hr: f64,
    pub arhr: f64,
    pub auc: f64,
    pub n_subjects_tested: usize,
}

impl EvalReport {
    fn from_repeats(predicate: &str, method: Method, repeats: Vec<RepeatMetrics>) -> Self {
        let mean = |f: fn(&RepeatMetrics) -> f64| repeats.iter().map(f).sum::<f64>() / repeats.len() as f64;
        EvalReport {
            predicate: predicate.to_owned(),
            method,
            hr: mean(|r| r.hr),
            arhr: mean(|r| r.arhr),
            auc: mean(|r| r.auc),
            n_subjects_tested: repeats.first().map_or(0, |r| r.n_subjects_tested),
            repeats,
        }
    }
}

/// Seed for one `(repeat, method)` cell under a predicate-level seed.
pub fn cell_seed(predicate_seed: u64, repeat: usize, method: Method) -> u64 {
    Seed(predicate_seed).index(repeat as u64).child(method.as_str()).0
}

enum Fitted {
    Model(EmbeddingModel),
    Popularity(PopularityTable),
    /// Ranking seed and the pre-derived scoring seed `cell.child("auc")`.
    Random {
        cell: Seed,
        auc: Seed,
    },
}

impl Fitted {
    fn score(&self, s: usize, o: usize) -> f64 {
        match self {
            Fitted::Model(m) => m.score_unchecked(s, o),
            Fitted::Popularity(t) => t.counts[o] as f64,
            Fitted::Random { auc, .. } => auc.index(s as u64).index(o as u64).unit(),
        }
    }

    fn recommend(&self, s: usize, training: &Adjacency, top_n: usize) -> Result<Vec<usize>> {
        let exclude = training.row(s);
        Ok(match self {
            Fitted::Model(m) => rank_objects(m, s, exclude, top_n)?,
            Fitted::Popularity(t) => most_popular_ranker(t, exclude, top_n),
            Fitted::Random { cell, .. } => random_ranker(training.n_objects(), exclude, top_n, cell.index(s as u64).0),
        })
    }
}

fn fit(method: Method, training: &Adjacency, hp: &HyperParams) -> Result<Fitted> {
    Ok(match method {
        Method::Bpr => Fitted::Model(train(training, hp)?.0),
        Method::Mf => Fitted::Model(pointwise_mf_train(training, hp)?.0),
        Method::MostPopular => Fitted::Popularity(PopularityTable::build(training)),
        Method::Random => Fitted::Random { cell: Seed(hp.seed), auc: Seed(hp.seed).child("auc") },
    })
}

fn evaluate_repeat(method: Method, split: &SplitSpec, repeat: usize, hp: &HyperParams) -> Result<RepeatMetrics> {
    let rs = &split.repeats[repeat];
    let cell_hp = HyperParams { seed: cell_seed(hp.seed, repeat, method), ..hp.clone() };
    let fitted = fit(method, &rs.training, &cell_hp)?;
    let recommendations = rs
        .held_out
        .keys()
        .map(|&s| Ok((s, fitted.recommend(s, &rs.training, hp.top_n)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let auc = auc(|s, o| fitted.score(s, o), split, repeat)?;
    Ok(RepeatMetrics {
        repeat,
        hr: hit_rate(&recommendations, &rs.held_out)?,
        arhr: arhr(&recommendations, &rs.held_out)?,
        auc: auc.auc,
        n_subjects_tested: rs.held_out.len(),
        auc_subjects_excluded: auc.subjects_without_negatives,
    })
}

/// Trains and scores `method` on every repeat of `split`. `hp.seed` is the
/// predicate-level seed; each repeat derives its own via [`cell_seed`].
/// Lists exclude the subject's training objects.
pub fn evaluate(
    method: Method,
    g: &PredicateBipartiteGraph,
    split: &SplitSpec,
    hp: &HyperParams,
) -> Result<EvalReport> {
    hp.validate()?;
    let repeats = (0..split.repeat_count())
        .into_par_iter()
        .map(|r| {
            evaluate_repeat(method, split, r, hp).map_err(|e| Error::Cell {
                predicate: g.predicate().to_owned(),
                method: method.to_string(),
                repeat: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_repeats(g.predicate(), method, repeats))
}

/// One line of the evaluation CSV. `repeat` is the repeat index or `mean`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub predicate: String,
    pub method: String,
    pub repeat: String,
    pub hr: f64,
    pub arhr: f64,
    pub auc: f64,
    pub n_subjects_tested: usize,
}

pub fn eval_rows(report: &EvalReport) -> Vec<EvalRow> {
    let row = |repeat: String, hr, arhr, auc, n| EvalRow {
        predicate: report.predicate.clone(),
        method: report.method.to_string(),
        repeat,
        hr,
        arhr,
        auc,
        n_subjects_tested: n,
    };
    let mut rows: Vec<EvalRow> =
        report.repeats.iter().map(|r| row(r.repeat.to_string(), r.hr, r.arhr, r.auc, r.n_subjects_tested)).collect();
    rows.push(row("mean".into(), report.hr, report.arhr, report.auc, report.n_subjects_tested));
    rows
}

pub fn write_eval_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for report in reports {
        for row in eval_rows(report) {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_eval_csv<R: Read>(input: R) -> Result<Vec<EvalRow>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Rebuilds reports from CSV rows, recomputing means from the per-repeat rows.
pub fn reports_from_rows(rows: &[EvalRow]) -> Result<Vec<EvalReport>> {
    let mut grouped: BTreeMap<(String, Method), Vec<RepeatMetrics>> = BTreeMap::new();
    let mut order = Vec::new();
    for row in rows.iter().filter(|r| r.repeat != "mean") {
        let method: Method = row.method.parse()?;
        let repeat = row
            .repeat
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad repeat value `{}` in evaluation CSV", row.repeat)))?;
        let key = (row.predicate.clone(), method);
        if !grouped.contains_key(&key) {
            order.push(key.clone());
        }
        grouped.entry(key).or_default().push(RepeatMetrics {
            repeat,
            hr: row.hr,
            arhr: row.arhr,
            auc: row.auc,
            n_subjects_tested: row.n_subjects_tested,
            auc_subjects_excluded: 0,
        });
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let repeats = grouped.remove(&key).unwrap_or_default();
            EvalReport::from_repeats(&key.0, key.1, repeats)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(pairs: &[(usize, &[usize])]) -> BTreeMap<usize, Vec<usize>> {
        pairs.iter().map(|(s, l)| (*s, l.to_vec())).collect()
    }

    fn held(pairs: &[(usize, usize)]) -> BTreeMap<usize, usize> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn hr_formula_and_extremes() {
        let r = recs(&[(0, &[1, 2]), (1, &[3]), (2, &[0, 4])]);
        assert!((hit_rate(&r, &held(&[(0, 2), (1, 3), (2, 9)])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(hit_rate(&r, &held(&[(0, 9), (1, 9), (2, 9)])).unwrap(), 0.0);
        assert_eq!(hit_rate(&r, &held(&[(0, 1), (1, 3), (2, 4)])).unwrap(), 1.0);
    }

    #[test]
    fn arhr_formula() {
        let r = recs(&[(0, &[5, 1, 2, 3]), (1, &[7, 8, 9, 4]), (2, &[0])]);
        let v = arhr(&r, &held(&[(0, 5), (1, 4), (2, 3)])).unwrap();
        assert!((v - 1.25 / 3.0).abs() < 1e-15);
        let h = held(&[(0, 5), (1, 7), (2, 0)]);
        assert_eq!(arhr(&r, &h).unwrap(), hit_rate(&r, &h).unwrap());
    }

    #[test]
    fn missing_list_is_an_error() {
        let r = recs(&[(0, &[1])]);
        assert!(matches!(hit_rate(&r, &held(&[(0, 1), (1, 1)])), Err(Error::MissingRecommendation { subject: 1 })));
        assert!(matches!(arhr(&r, &held(&[(2, 1)])), Err(Error::MissingRecommendation { subject: 2 })));
        assert!(matches!(hit_rate(&r, &BTreeMap::new()), Err(Error::EmptyTestSet)));
    }

    fn graph(edges: &[(usize, usize)], m: usize, n: usize) -> PredicateBipartiteGraph {
        PredicateBipartiteGraph::from_adjacency("p", Adjacency::from_edges(m, n, edges.iter().copied()).unwrap())
    }

    #[test]
    fn split_protocol() {
        let g = graph(&[(0, 0), (0, 1), (0, 2), (1, 3)], 2, 4);
        let split = make_split(&g, 5, 10).unwrap();
        assert_eq!(split.repeat_count(), 5);
        assert_eq!(split.ineligible_subjects, 1);
        for rs in &split.repeats {
            assert_eq!(rs.held_out.len(), 1);
            let o = rs.held_out[&0];
            assert!(o < 3);
            assert_eq!(rs.training.row(0).len(), 2);
            assert!(!rs.training.contains(0, o));
            assert_eq!(rs.training.row(1), [3]);
        }
        assert_eq!(make_split(&g, 5, 10).unwrap(), split);
    }

    #[test]
    fn split_needs_an_eligible_subject() {
        let g = graph(&[(0, 0), (1, 1)], 2, 2);
        assert!(matches!(make_split(&g, 1, 0), Err(Error::NoEligibleSubject { .. })));
    }

    #[test]
    fn auc_perfect_and_constant() {
        let g = graph(&[(0, 0), (0, 1), (1, 2), (1, 3)], 2, 6);
        let split = make_split(&g, 1, 3).unwrap();
        let rs = &split.repeats[0];
        let held = rs.held_out.clone();
        let perfect = auc(|s, o| if held[&s] == o { 1.0 } else { 0.0 }, &split, 0).unwrap();
        assert_eq!(perfect.auc, 1.0);
        let constant = auc(|_, _| 0.25, &split, 0).unwrap();
        assert_eq!(constant.auc, 0.0);
    }

    #[test]
    fn auc_skips_subjects_without_negatives() {
        let g = graph(&[(0, 0), (0, 1), (1, 0), (1, 1), (1, 2)], 2, 3);
        let split = make_split(&g, 1, 0).unwrap();
        let out = auc(|_, o| -(o as f64), &split, 0).unwrap();
        assert_eq!(out.subjects_without_negatives, 1);
        assert_eq!(out.subjects_scored, 1);
    }

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("als".parse::<Method>().is_err());
    }
}
