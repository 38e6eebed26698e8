//! Classical minority oversampling: random duplication, SMOTE,
//! Borderline-SMOTE and ADASYN.
//!
//! All neighbor searches are exact brute force under Euclidean distance,
//! with ties broken by ascending point index. Distances are taken on the
//! features as given, so callers should standardize first.

use std::str::FromStr;

use rand::Rng;

use crate::dataio::LabeledDataset;
use crate::rng::{seeded, sub_seed};
use crate::{par, Error, Result};

pub const DEFAULT_K: usize = 5;

/// Exact k-nearest-neighbor search over a fixed point set.
#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    points: Vec<&'a [f64]>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(points: Vec<&'a [f64]>) -> Self {
        Self { points }
    }

    pub fn from_dataset(ds: &'a LabeledDataset) -> Self {
        Self::new(ds.rows().collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &'a [f64] {
        self.points[i]
    }

    /// The `k` nearest points to `query` as `(index, distance)`, sorted by
    /// distance then index. `exclude` removes one indexed point (the query
    /// itself) from consideration.
    pub fn knn(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<(usize, f64)>> {
        let available = self.points.len() - usize::from(exclude.is_some_and(|e| e < self.points.len()));
        if k == 0 || k > available {
            return Err(Error::invalid(format!("k = {k} but only {available} candidate points")));
        }
        let mut d: Vec<(usize, f64)> = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, p)| (i, squared_distance(p, query)))
            .collect();
        let by_dist = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, by_dist);
            d.truncate(k);
        }
        d.sort_by(by_dist);
        Ok(d.into_iter().map(|(i, s)| (i, s.sqrt())).collect())
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `a + lambda * (b - a)`.
pub fn interpolate(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + lambda * (y - x)).collect()
}

/// One generated row with its provenance (row indices into the source dataset).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub features: Vec<f64>,
    pub seed: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

/// Same-class neighbor lists for the rows of class `c` (dataset indices),
/// using `min(k, n_c - 1)` neighbors.
fn class_neighbors(ds: &LabeledDataset, class_rows: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    let k_eff = k.min(class_rows.len() - 1);
    let index = NeighborIndex::new(class_rows.iter().map(|&i| ds.row(i)).collect());
    par::map_range(class_rows.len(), |j| {
        index
            .knn(index.point(j), k_eff, Some(j))
            .map(|nn| nn.into_iter().map(|(p, _)| class_rows[p]).collect())
    })
    .into_iter()
    .collect()
}

fn check_class(ds: &LabeledDataset, c: usize, k: usize) -> Result<Vec<usize>> {
    if c >= ds.n_classes() {
        return Err(Error::ClassOutOfRange {
            class: c,
            classes: ds.n_classes(),
        });
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let rows = ds.indices_of(c);
    if rows.len() < 2 {
        return Err(Error::invalid(format!(
            "class \"{}\" needs at least 2 samples for interpolation",
            ds.class_names()[c]
        )));
    }
    Ok(rows)
}

/// Interpolates `counts[j]` samples from seed `seeds[j]` toward random members of its neighbor list.
fn interpolate_from<R: Rng>(
    ds: &LabeledDataset,
    seeds: &[usize],
    neighbors: &[Vec<usize>],
    counts: &[usize],
    rng: &mut R,
) -> Vec<SyntheticSample> {
    let mut out = Vec::with_capacity(counts.iter().sum());
    for ((&s, nn), &n) in seeds.iter().zip(neighbors).zip(counts) {
        for _ in 0..n {
            let neighbor = nn[rng.random_range(0..nn.len())];
            let lambda: f64 = rng.random();
            out.push(SyntheticSample {
                features: interpolate(ds.row(s), ds.row(neighbor), lambda),
                seed: s,
                neighbor,
                lambda,
            });
        }
    }
    out
}

/// Spreads `total` evenly over `n` slots, the remainder going to the first slots.
fn round_robin(total: usize, n: usize) -> Vec<usize> {
    (0..n).map(|j| total / n + usize::from(j < total % n)).collect()
}

/// SMOTE: `n_new` points on segments between class-`c` rows and their
/// same-class nearest neighbors.
pub fn smote(ds: &LabeledDataset, c: usize, n_new: usize, k: usize, seed: u64) -> Result<Vec<SyntheticSample>> {
    let rows = check_class(ds, c, k)?;
    let neighbors = class_neighbors(ds, &rows, k)?;
    let counts = round_robin(n_new, rows.len());
    Ok(interpolate_from(ds, &rows, &neighbors, &counts, &mut seeded(seed)))
}

/// Danger classification of a minority point from the number of other-class
/// points among its `k` nearest neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BorderlineLabel {
    Safe,
    Danger,
    Noise,
}

impl BorderlineLabel {
    pub fn from_counts(other_class: usize, k: usize) -> Self {
        if other_class == k {
            BorderlineLabel::Noise
        } else if 2 * other_class >= k {
            BorderlineLabel::Danger
        } else {
            BorderlineLabel::Safe
        }
    }
}

/// Labels every row of class `c` (ascending dataset index) using its `k`
/// nearest neighbors over the whole dataset.
pub fn borderline_labels(ds: &LabeledDataset, c: usize, k: usize) -> Result<Vec<(usize, BorderlineLabel)>> {
    let rows = ds.indices_of(c);
    let index = NeighborIndex::from_dataset(ds);
    par::map_range(rows.len(), |j| {
        let i = rows[j];
        let nn = index.knn(ds.row(i), k, Some(i))?;
        let other = nn.iter().filter(|(p, _)| ds.label(*p) != c).count();
        Ok((i, BorderlineLabel::from_counts(other, k)))
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BorderlineOutput {
    pub samples: Vec<SyntheticSample>,
    pub labels: Vec<(usize, BorderlineLabel)>,
    /// Set when there were no danger points and nothing was generated.
    pub warning: Option<String>,
}

/// Borderline-SMOTE: like [`smote`] but only danger points seed new samples.
pub fn borderline_smote(ds: &LabeledDataset, c: usize, n_new: usize, k: usize, seed: u64) -> Result<BorderlineOutput> {
    let rows = check_class(ds, c, k)?;
    let labels = borderline_labels(ds, c, k)?;
    let danger: Vec<usize> = labels
        .iter()
        .filter(|(_, l)| *l == BorderlineLabel::Danger)
        .map(|(i, _)| *i)
        .collect();
    if danger.is_empty() {
        let msg = format!("class \"{}\": no danger points, nothing generated", ds.class_names()[c]);
        log::warn!("{msg}");
        return Ok(BorderlineOutput {
            samples: Vec::new(),
            labels,
            warning: Some(msg),
        });
    }
    let class_nn = class_neighbors(ds, &rows, k)?;
    let neighbors: Vec<Vec<usize>> = danger
        .iter()
        .map(|d| class_nn[rows.binary_search(d).expect("danger rows belong to the class")].clone())
        .collect();
    let counts = round_robin(n_new, danger.len());
    let samples = interpolate_from(ds, &danger, &neighbors, &counts, &mut seeded(seed));
    Ok(BorderlineOutput {
        samples,
        labels,
        warning: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdasynWeights {
    /// Class-`c` row indices, ascending.
    pub rows: Vec<usize>,
    pub weights: Vec<f64>,
    /// Set when no point had other-class neighbors and weights fell back to uniform.
    pub warning: Option<String>,
}

/// Normalized ADASYN difficulty weights: each row's share of other-class
/// points among its `k` nearest neighbors.
pub fn adasyn_weights(ds: &LabeledDataset, c: usize, k: usize) -> Result<AdasynWeights> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let rows = ds.indices_of(c);
    if rows.is_empty() {
        return Err(Error::invalid(format!("class {c} is empty")));
    }
    let index = NeighborIndex::from_dataset(ds);
    let raw: Vec<f64> = par::map_range(rows.len(), |j| {
        let i = rows[j];
        let nn = index.knn(ds.row(i), k, Some(i))?;
        Ok(nn.iter().filter(|(p, _)| ds.label(*p) != c).count() as f64 / k as f64)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        let msg = format!("class \"{}\": no other-class neighbors, using uniform weights", ds.class_names()[c]);
        log::warn!("{msg}");
        let w = 1.0 / rows.len() as f64;
        return Ok(AdasynWeights {
            weights: vec![w; rows.len()],
            rows,
            warning: Some(msg),
        });
    }
    Ok(AdasynWeights {
        weights: raw.iter().map(|r| r / total).collect(),
        rows,
        warning: None,
    })
}

/// Largest-remainder apportionment of `total` over `weights` (which sum to 1).
/// Remainder ties go to the lower index.
pub fn allocate_largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &j in order.iter().take(total.saturating_sub(assigned)) {
        counts[j] += 1;
    }
    counts
}

/// ADASYN: SMOTE interpolation with per-seed counts proportional to difficulty.
pub fn adasyn(ds: &LabeledDataset, c: usize, n_new: usize, k: usize, seed: u64) -> Result<(Vec<SyntheticSample>, Option<String>)> {
    let rows = check_class(ds, c, k)?;
    let w = adasyn_weights(ds, c, k)?;
    let counts = allocate_largest_remainder(&w.weights, n_new);
    let neighbors = class_neighbors(ds, &rows, k)?;
    Ok((interpolate_from(ds, &rows, &neighbors, &counts, &mut seeded(seed)), w.warning))
}

/// Random oversampling with replacement.
pub fn random_oversample(ds: &LabeledDataset, c: usize, n_new: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let rows = ds.indices_of(c);
    if rows.is_empty() {
        return Err(Error::invalid(format!("class {c} is empty")));
    }
    let mut rng = seeded(seed);
    Ok((0..n_new)
        .map(|_| ds.row(rows[rng.random_range(0..rows.len())]).to_vec())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    None,
    Random,
    Smote,
    BorderlineSmote,
    Adasyn,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Random => "random",
            Method::Smote => "smote",
            Method::BorderlineSmote => "b-smote",
            Method::Adasyn => "adasyn",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Method::None),
            "random" => Ok(Method::Random),
            "smote" => Ok(Method::Smote),
            "b-smote" | "borderline-smote" => Ok(Method::BorderlineSmote),
            "adasyn" => Ok(Method::Adasyn),
            other => Err(Error::invalid(format!("unknown resampling method \"{other}\""))),
        }
    }
}

/// Synthetic rows to create per class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResamplePlan {
    pub counts: Vec<usize>,
}

impl ResamplePlan {
    /// Brings every class up to the majority count.
    pub fn to_majority(ds: &LabeledDataset) -> Self {
        let counts = ds.class_counts();
        let max = counts.iter().copied().max().unwrap_or(0);
        Self {
            counts: counts.iter().map(|&n| if n == 0 { 0 } else { max - n }).collect(),
        }
    }

    pub fn zeros(n_classes: usize) -> Self {
        Self {
            counts: vec![0; n_classes],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleOutcome {
    pub dataset: LabeledDataset,
    pub warnings: Vec<String>,
}

/// Appends the planned synthetic rows after the original rows, class by class.
pub fn apply_plan(ds: &LabeledDataset, plan: &ResamplePlan, method: Method, k: usize, seed: u64) -> Result<ResampleOutcome> {
    if plan.counts.len() != ds.n_classes() {
        return Err(Error::invalid("plan does not match the dataset's classes"));
    }
    let generated = par::map_range(ds.n_classes(), |c| -> Result<(Vec<Vec<f64>>, Option<String>)> {
        let n = plan.counts[c];
        if n == 0 || method == Method::None {
            return Ok((Vec::new(), None));
        }
        let s = sub_seed(seed, c as u64);
        Ok(match method {
            Method::None => unreachable!(),
            Method::Random => (random_oversample(ds, c, n, s)?, None),
            Method::Smote => (smote(ds, c, n, k, s)?.into_iter().map(|x| x.features).collect(), None),
            Method::BorderlineSmote => {
                let out = borderline_smote(ds, c, n, k, s)?;
                (out.samples.into_iter().map(|x| x.features).collect(), out.warning)
            }
            Method::Adasyn => {
                let (samples, warning) = adasyn(ds, c, n, k, s)?;
                (samples.into_iter().map(|x| x.features).collect(), warning)
            }
        })
    });
    let mut out = ds.clone();
    let mut warnings = Vec::new();
    for (c, g) in generated.into_iter().enumerate() {
        let (rows, warning) = g?;
        out.extend_rows(&rows, c)?;
        warnings.extend(warning);
    }
    Ok(ResampleOutcome { dataset: out, warnings })
}
