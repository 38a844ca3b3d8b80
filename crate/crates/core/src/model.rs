//! Latent factor model for one predicate: `x(s, o) = U_s · V_o + b_o`.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Seed;

/// Standard deviation of every initial parameter.
pub const INIT_STD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Latent dimension `K`.
    pub factors: usize,
    pub learning_rate: f64,
    pub lambda_subject: f64,
    pub lambda_positive: f64,
    pub lambda_negative: f64,
    /// Passes over the training edges; the sample budget is `epochs * edge_count`.
    pub epochs: usize,
    /// Recommendation list length `N`.
    pub top_n: usize,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            factors: 50,
            learning_rate: 0.2,
            lambda_subject: 0.005,
            lambda_positive: 0.005,
            lambda_negative: 0.005,
            epochs: 50,
            top_n: 10,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyperParams(msg));
        if self.factors == 0 {
            return bad("factors must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, v) in [
            ("lambda_subject", self.lambda_subject),
            ("lambda_positive", self.lambda_positive),
            ("lambda_negative", self.lambda_negative),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.top_n == 0 {
            return bad("top_n must be >= 1".into());
        }
        Ok(())
    }
}

/// `U` (m x K), `V` (n x K) row-major, and object biases `b` (n).
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    m: usize,
    n: usize,
    k: usize,
    pub(crate) u: Vec<f64>,
    pub(crate) v: Vec<f64>,
    pub(crate) b: Vec<f64>,
}

impl EmbeddingModel {
    /// Zero-initialised model; mostly useful for tests and hand-built fixtures.
    pub fn zeros(m: usize, n: usize, k: usize) -> Self {
        EmbeddingModel { m, n, k, u: vec![0.0; m * k], v: vec![0.0; n * k], b: vec![0.0; n] }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn factors(&self) -> usize {
        self.k
    }

    pub fn subject_row(&self, s: usize) -> &[f64] {
        &self.u[s * self.k..(s + 1) * self.k]
    }

    pub fn subject_row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.u[s * self.k..(s + 1) * self.k]
    }

    pub fn object_row(&self, o: usize) -> &[f64] {
        &self.v[o * self.k..(o + 1) * self.k]
    }

    pub fn object_row_mut(&mut self, o: usize) -> &mut [f64] {
        &mut self.v[o * self.k..(o + 1) * self.k]
    }

    pub fn bias(&self, o: usize) -> f64 {
        self.b[o]
    }

    pub fn set_bias(&mut self, o: usize, value: f64) {
        self.b[o] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).chain(&self.b).all(|x| x.is_finite())
    }

    /// Every parameter, in dump order: `U`, then `V`, then `b`.
    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.u.iter().chain(&self.v).chain(&self.b).copied()
    }

    pub fn score(&self, s: usize, o: usize) -> Result<f64> {
        if s >= self.m {
            return Err(Error::IndexOutOfRange { kind: "subject", index: s, len: self.m });
        }
        if o >= self.n {
            return Err(Error::IndexOutOfRange { kind: "object", index: o, len: self.n });
        }
        Ok(self.score_unchecked(s, o))
    }

    #[inline]
    pub(crate) fn score_unchecked(&self, s: usize, o: usize) -> f64 {
        dot(self.subject_row(s), self.object_row(o)) + self.b[o]
    }

    /// Scores of subject `s` against every object.
    pub fn score_all(&self, s: usize) -> Result<Vec<f64>> {
        if s >= self.m {
            return Err(Error::IndexOutOfRange { kind: "subject", index: s, len: self.m });
        }
        Ok((0..self.n).map(|o| self.score_unchecked(s, o)).collect())
    }

    /// Writes the model in the text dump format:
    ///
    /// ```text
    /// kglink-embedding v1
    /// m <m>
    /// n <n>
    /// k <K>
    /// U
    /// <m lines of K space-separated values>
    /// V
    /// <n lines of K space-separated values>
    /// b
    /// <n lines, one value each>
    /// ```
    ///
    /// Values use Rust's shortest round-trip float formatting, so reading a
    /// dump back gives a bit-identical model.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "kglink-embedding v1")?;
        writeln!(out, "m {}\nn {}\nk {}", self.m, self.n, self.k)?;
        writeln!(out, "U")?;
        write_rows(&mut out, &self.u, self.k)?;
        writeln!(out, "V")?;
        write_rows(&mut out, &self.v, self.k)?;
        writeln!(out, "b")?;
        write_rows(&mut out, &self.b, 1)?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let mut next = || -> Result<String> {
            lines.next().ok_or_else(|| Error::ModelFormat("unexpected end of file".into()))?.map_err(Error::from)
        };
        if next()? != "kglink-embedding v1" {
            return Err(Error::ModelFormat("missing `kglink-embedding v1` header".into()));
        }
        let mut dim = |name: &str| -> Result<usize> {
            let line = next()?;
            line.strip_prefix(name)
                .and_then(|rest| rest.trim().parse().ok())
                .ok_or_else(|| Error::ModelFormat(format!("expected `{name} <count>`, got `{line}`")))
        };
        let m = dim("m ")?;
        let n = dim("n ")?;
        let k = dim("k ")?;
        let mut section = |tag: &str, rows: usize, width: usize| -> Result<Vec<f64>> {
            let line = next()?;
            if line != tag {
                return Err(Error::ModelFormat(format!("expected section `{tag}`, got `{line}`")));
            }
            let mut values = Vec::with_capacity(rows * width);
            for r in 0..rows {
                let line = next()?;
                let row: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::ModelFormat(format!("section {tag} row {r}: {e}")))?;
                if row.len() != width {
                    return Err(Error::ModelFormat(format!(
                        "section {tag} row {r}: expected {width} values, got {}",
                        row.len()
                    )));
                }
                values.extend(row);
            }
            Ok(values)
        };
        let u = section("U", m, k)?;
        let v = section("V", n, k)?;
        let b = section("b", n, 1)?;
        Ok(EmbeddingModel { m, n, k, u, v, b })
    }
}

fn write_rows<W: Write>(out: &mut W, values: &[f64], width: usize) -> Result<()> {
    if width == 0 {
        return Ok(());
    }
    for row in values.chunks(width) {
        let mut first = true;
        for x in row {
            if !first {
                out.write_all(b" ")?;
            }
            write!(out, "{x:?}")?;
            first = false;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draws every entry of `U`, `V` and `b` i.i.d. from N(0, 0.1²), in that
/// order, from a ChaCha8 stream seeded with `hp.seed`.
pub fn init_model(m: usize, n: usize, hp: &HyperParams) -> Result<EmbeddingModel> {
    if m == 0 || n == 0 {
        return Err(Error::Degenerate(format!("cannot build a model with {m} subjects and {n} objects")));
    }
    if hp.factors == 0 {
        return Err(Error::InvalidHyperParams("factors must be >= 1".into()));
    }
    let k = hp.factors;
    let mut rng = Seed(hp.seed).rng();
    let mut draw =
        |len: usize| -> Vec<f64> { (0..len).map(|_| INIT_STD * rng.sample::<f64, _>(StandardNormal)).collect() };
    let u = draw(m * k);
    let v = draw(n * k);
    let b = draw(n);
    Ok(EmbeddingModel { m, n, k, u, v, b })
}

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)`, stable for large `|x|`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Probability that a link exists, given its score.
pub fn probability(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::NanScore);
    }
    Ok(sigmoid(x))
}

/// Top `top_n` ids by descending score, ties by ascending id, skipping `exclude`.
pub fn top_n_by_score(scores: &[f64], exclude: &[usize], top_n: usize) -> Vec<usize> {
    let mut excluded = vec![false; scores.len()];
    for &o in exclude {
        if o < excluded.len() {
            excluded[o] = true;
        }
    }
    let mut candidates: Vec<usize> = (0..scores.len()).filter(|&o| !excluded[o]).collect();
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if candidates.len() > top_n {
        candidates.select_nth_unstable_by(top_n, cmp);
        candidates.truncate(top_n);
    }
    candidates.sort_unstable_by(cmp);
    candidates
}

pub fn rank_objects(model: &EmbeddingModel, s: usize, exclude: &[usize], top_n: usize) -> Result<Vec<usize>> {
    if let Some(&o) = exclude.iter().find(|&&o| o >= model.n) {
        return Err(Error::IndexOutOfRange { kind: "object", index: o, len: model.n });
    }
    let scores = model.score_all(s)?;
    Ok(top_n_by_score(&scores, exclude, top_n))
}
