use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// A train/evaluation partition of a dataset.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    /// False when stratification was impossible (a class with a single
    /// record, or a single class) and an unstratified split was used.
    pub stratified: bool,
}

/// Split stratified by the attribute of interest.
///
/// Each class contributes `round(train_fraction * class_size)` records to the
/// training side. Both sides keep the input record order.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument(
            "splitting needs at least two records".into(),
        ));
    }
    let labels = dataset.labels(&dataset.schema().attribute_of_interest)?;
    let counts = labels.class_counts();
    let stratified = counts.len() >= 2 && counts.iter().all(|&c| c >= 2);

    let mut rng = rng::stream(seed, 0);
    let mut train_idx = Vec::new();
    if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); labels.n_classes()];
        for (i, &c) in labels.codes.iter().enumerate() {
            by_class[c].push(i);
        }
        for mut members in by_class {
            members.shuffle(&mut rng);
            let take = (train_fraction * members.len() as f64).round() as usize;
            train_idx.extend_from_slice(&members[..take.min(members.len())]);
        }
    } else {
        let mut all: Vec<usize> = (0..dataset.len()).collect();
        all.shuffle(&mut rng);
        let take = ((train_fraction * all.len() as f64).round() as usize).clamp(1, all.len() - 1);
        train_idx.extend_from_slice(&all[..take]);
    }
    train_idx.sort_unstable();
    let mut in_train = vec![false; dataset.len()];
    for &i in &train_idx {
        in_train[i] = true;
    }
    let test_idx: Vec<usize> = (0..dataset.len()).filter(|&i| !in_train[i]).collect();
    Ok(Split {
        train: dataset.subset(&train_idx),
        test: dataset.subset(&test_idx),
        stratified,
    })
}
