//! Random-set assembly and the selective weighted-mean transform.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::relevance::SelectionMask;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnonymizationParams {
    /// Size `g` of the random set, target included.
    pub set_size: usize,
    /// Purity `t`: share of the set with the target's class of interest.
    pub purity: f64,
    /// Weight `w` of the target on selected features.
    pub weight: f64,
    pub seed: u64,
}

impl Default for AnonymizationParams {
    fn default() -> Self {
        AnonymizationParams {
            set_size: 32,
            purity: 0.8,
            weight: 10.0,
            seed: 0,
        }
    }
}

impl AnonymizationParams {
    /// Check the parameters against a dataset of `n_records` records.
    ///
    /// A purity below `1/g` cannot be realised (the target always matches
    /// itself); it is accepted and reported, and behaves like `1/g`.
    pub fn validate(&self, n_records: usize) -> Result<Vec<String>> {
        let g = self.set_size;
        if g == 0 {
            return Err(Error::InvalidParams("set_size must be at least 1".into()));
        }
        if n_records == 0 {
            return Err(Error::EmptyDataset);
        }
        if g > n_records {
            return Err(Error::SetTooLarge {
                set_size: g,
                records: n_records,
            });
        }
        if !(0.0..=1.0).contains(&self.purity) {
            return Err(Error::InvalidParams(format!(
                "purity {} outside [0, 1]",
                self.purity
            )));
        }
        if !(self.weight.is_finite() && self.weight >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "weight {} must be finite and >= 1",
                self.weight
            )));
        }
        let mut warnings = Vec::new();
        if self.purity < 1.0 / g as f64 {
            warnings.push(format!(
                "purity {} is below 1/g = {}; the target alone sets the purity",
                self.purity,
                1.0 / g as f64
            ));
        }
        Ok(warnings)
    }

    /// `round(t * g)` before clamping.
    pub fn nominal_matching(&self) -> usize {
        (self.purity * self.set_size as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomSet {
    /// Target first, then same-class members, then the rest.
    pub member_indices: Vec<usize>,
    pub matching_count: usize,
    /// The nominal matching count was infeasible and had to be moved.
    pub clamped: bool,
}

/// Draws random sets for one labelling of the records.
#[derive(Debug, Clone)]
pub struct RandomSetSampler {
    codes: Vec<usize>,
    /// Sorted record indices of every class.
    members: Vec<Vec<usize>>,
    /// Position of each record within its class list.
    position: Vec<usize>,
}

impl RandomSetSampler {
    /// `codes[i]` is the class of record `i`.
    pub fn new(codes: Vec<usize>) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n_classes = codes.iter().max().map_or(0, |&c| c + 1);
        let mut members = vec![Vec::new(); n_classes];
        let mut position = Vec::with_capacity(codes.len());
        for (i, &c) in codes.iter().enumerate() {
            position.push(members[c].len());
            members[c].push(i);
        }
        Ok(RandomSetSampler {
            codes,
            members,
            position,
        })
    }

    pub fn for_dataset(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let labels = dataset.labels(&dataset.schema().attribute_of_interest)?;
        Self::new(labels.codes)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn sample(
        &self,
        target: usize,
        params: &AnonymizationParams,
        rng: &mut impl Rng,
    ) -> Result<RandomSet> {
        let n = self.codes.len();
        if target >= n {
            return Err(Error::InvalidArgument(format!(
                "target index {target} out of range for {n} records"
            )));
        }
        let g = params.set_size;
        if g == 0 {
            return Err(Error::InvalidParams("set_size must be at least 1".into()));
        }
        if g > n {
            return Err(Error::SetTooLarge {
                set_size: g,
                records: n,
            });
        }
        let same = &self.members[self.codes[target]];
        let n_other = n - same.len();

        let nominal = params.nominal_matching();
        let m = nominal.clamp(1, same.len().min(g)).max(g.saturating_sub(n_other));
        let clamped = m != nominal;

        let mut set = Vec::with_capacity(g);
        set.push(target);
        let skip = self.position[target];
        set.extend(
            index::sample(rng, same.len() - 1, m - 1)
                .into_iter()
                .map(|p| same[if p < skip { p } else { p + 1 }]),
        );
        set.extend(
            index::sample(rng, n_other, g - m)
                .into_iter()
                .map(|p| nth_outside(same, p)),
        );
        Ok(RandomSet {
            member_indices: set,
            matching_count: m,
            clamped,
        })
    }
}

/// The `p`-th smallest index not contained in the sorted list `members`.
fn nth_outside(members: &[usize], p: usize) -> usize {
    // members[i] - i counts the non-members below members[i]; it never
    // decreases, so binary search for the members preceding the answer.
    let (mut lo, mut hi) = (0, members.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if members[mid] - mid <= p {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    p + lo
}

/// Assemble the random set of record `target_index`.
pub fn assemble_random_set(
    dataset: &Dataset,
    target_index: usize,
    params: &AnonymizationParams,
    rng: &mut impl Rng,
) -> Result<RandomSet> {
    RandomSetSampler::for_dataset(dataset)?.sample(target_index, params, rng)
}

/// Selective weighted mean of `members` around `target`.
///
/// Selected coordinates get `((w-1) d + sum g) / ((w-1) + |G|)`, the others
/// the plain mean. Both are computed as `d + sum (g - d) / denom`, which
/// is the same value and keeps `|G| = 1` exact.
pub fn weighted_mean_transform(
    target: &[f64],
    members: &[&[f64]],
    w: f64,
    mask: &SelectionMask,
) -> Result<Vec<f64>> {
    if members.is_empty() {
        return Err(Error::EmptyMembers);
    }
    let d = target.len();
    if mask.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: mask.len(),
        });
    }
    if let Some(bad) = members.iter().find(|m| m.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    if !members.iter().any(|m| *m == target) {
        return Err(Error::TargetNotInMembers);
    }
    if !(w.is_finite() && w >= 1.0) {
        return Err(Error::InvalidParams(format!(
            "weight {w} must be finite and >= 1"
        )));
    }
    Ok(transform_unchecked(target, members.iter().copied(), w, mask))
}

fn transform_unchecked<'a>(
    target: &[f64],
    members: impl Iterator<Item = &'a [f64]> + Clone,
    w: f64,
    mask: &SelectionMask,
) -> Vec<f64> {
    let size = members.clone().count() as f64;
    let mut delta = vec![0.0; target.len()];
    for m in members {
        for ((acc, &x), &t) in delta.iter_mut().zip(m).zip(target) {
            *acc += x - t;
        }
    }
    target
        .iter()
        .zip(delta)
        .zip(&mask.included)
        .map(|((&t, s), &selected)| {
            let denom = if selected { (w - 1.0) + size } else { size };
            t + s / denom
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Anonymized {
    pub dataset: Dataset,
    /// Records whose nominal matching count was infeasible.
    pub clamped_records: usize,
    pub warnings: Vec<String>,
}

/// Replace every record by the transform over its own random set.
///
/// Record `i` draws from stream `i` of `params.seed` and reads only the
/// original features, so the result does not depend on scheduling.
pub fn anonymize(
    dataset: &Dataset,
    params: &AnonymizationParams,
    mask: &SelectionMask,
) -> Result<Anonymized> {
    let mut warnings = params.validate(dataset.len())?;
    if mask.len() != dataset.n_features() {
        return Err(Error::DimensionMismatch {
            expected: dataset.n_features(),
            found: mask.len(),
        });
    }
    let sampler = RandomSetSampler::for_dataset(dataset)?;
    let rows: Vec<(Vec<f64>, bool)> = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(params.seed, i as u64);
            let set = sampler.sample(i, params, &mut rng)?;
            let features = transform_unchecked(
                dataset.features(i),
                set.member_indices.iter().map(|&j| dataset.features(j)),
                params.weight,
                mask,
            );
            Ok((features, set.clamped))
        })
        .collect::<Result<_>>()?;
    let clamped_records = rows.iter().filter(|r| r.1).count();
    if clamped_records > 0 {
        warnings.push(format!(
            "matching count clamped for {clamped_records} of {} records",
            dataset.len()
        ));
    }
    let dataset = dataset.with_features(rows.into_iter().map(|r| r.0).collect())?;
    Ok(Anonymized {
        dataset,
        clamped_records,
        warnings,
    })
}
