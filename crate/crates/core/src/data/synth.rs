use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Record, Schema};
use crate::error::{Error, Result};
use crate::rng;

/// Half-open range of feature indices `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimRange {
    pub start: usize,
    pub end: usize,
}

impl DimRange {
    pub const fn new(start: usize, end: usize) -> Self {
        DimRange { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn overlaps(&self, other: &DimRange) -> bool {
        !self.is_empty() && !other.is_empty() && self.start < other.end && other.start < self.end
    }
}

/// Gaussian class-cluster benchmark.
///
/// Three label attributes are produced:
///
/// * `interest`: governs `interest_dims`,
/// * `identity`: governs `identity_dims`,
/// * `trait`: a per-identity sensitive class governing `sensitive_dims`.
///
/// Record `i` belongs to identity `i % n_identities`, interest class
/// `(i / n_identities) % n_interest_classes` and trait
/// `identity % n_sensitive_classes`, so every identity sees every interest
/// class equally often.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_records: usize,
    pub n_features: usize,
    pub n_identities: usize,
    pub n_interest_classes: usize,
    pub n_sensitive_classes: usize,
    pub interest_dims: DimRange,
    pub identity_dims: DimRange,
    pub sensitive_dims: DimRange,
    pub class_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// The 2,000 x 64 benchmark: 50 identities, 4 interest classes.
    fn default() -> Self {
        SynthConfig {
            n_records: 2000,
            n_features: 64,
            n_identities: 50,
            n_interest_classes: 4,
            n_sensitive_classes: 2,
            interest_dims: DimRange::new(0, 16),
            identity_dims: DimRange::new(16, 60),
            sensitive_dims: DimRange::new(60, 64),
            class_separation: 2.0,
            noise_sigma: 0.1,
            seed: 0,
        }
    }
}

pub const INTEREST: &str = "interest";
pub const IDENTITY: &str = "identity";
pub const TRAIT: &str = "trait";

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| {
            Err(Error::InvalidConfig {
                field: field.to_string(),
                reason,
            })
        };
        if self.n_features == 0 {
            return bad("n_features", "must be positive".into());
        }
        if self.n_identities < 2 {
            return bad("n_identities", "must be at least 2".into());
        }
        if self.n_records < self.n_identities {
            return bad(
                "n_records",
                format!("must be at least n_identities ({})", self.n_identities),
            );
        }
        if self.n_interest_classes < 2 {
            return bad("n_interest_classes", "must be at least 2".into());
        }
        if self.n_sensitive_classes < 2 {
            return bad("n_sensitive_classes", "must be at least 2".into());
        }
        let ranges = [
            ("interest_dims", self.interest_dims),
            ("identity_dims", self.identity_dims),
            ("sensitive_dims", self.sensitive_dims),
        ];
        for (name, r) in ranges {
            if r.start > r.end || r.end > self.n_features {
                return bad(
                    name,
                    format!(
                        "[{}, {}) is not a range within [0, {})",
                        r.start, r.end, self.n_features
                    ),
                );
            }
        }
        for i in 0..ranges.len() {
            for j in i + 1..ranges.len() {
                if ranges[i].1.overlaps(&ranges[j].1) {
                    return bad(ranges[j].0, format!("overlaps {}", ranges[i].0));
                }
            }
        }
        if !(self.class_separation.is_finite() && self.class_separation > 0.0) {
            return bad("class_separation", "must be a positive number".into());
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return bad("noise_sigma", "must be a positive number".into());
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        Schema {
            feature_names: (0..self.n_features).map(|j| format!("f{j}")).collect(),
            attribute_of_interest: INTEREST.into(),
            additional_attributes: vec![],
            sensitive_attributes: vec![IDENTITY.into(), TRAIT.into()],
            id_column: Some("id".into()),
        }
    }
}

/// Class means for `n_classes` classes within a block of `len` dims.
///
/// Every mean is a sign code: `±separation / 2` on each dim. Two classes
/// are antipodal; more classes get seeded random codes, distinct whenever
/// `2^len` allows it.
fn class_means(n_classes: usize, len: usize, separation: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let half = separation / 2.0;
    if n_classes == 2 {
        return vec![vec![-half; len], vec![half; len]];
    }
    let distinct_possible = len >= usize::BITS as usize || (1usize << len) >= n_classes;
    let mut codes: Vec<Vec<f64>> = Vec::with_capacity(n_classes);
    while codes.len() < n_classes {
        let code: Vec<f64> = (0..len)
            .map(|_| if rng.random::<bool>() { half } else { -half })
            .collect();
        if !distinct_possible || !codes.contains(&code) {
            codes.push(code);
        }
    }
    codes
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut means_rng = rng::stream(cfg.seed, 0);
    let interest_means = class_means(
        cfg.n_interest_classes,
        cfg.interest_dims.len(),
        cfg.class_separation,
        &mut means_rng,
    );
    let identity_means = class_means(
        cfg.n_identities,
        cfg.identity_dims.len(),
        cfg.class_separation,
        &mut means_rng,
    );
    let trait_means = class_means(
        cfg.n_sensitive_classes,
        cfg.sensitive_dims.len(),
        cfg.class_separation,
        &mut means_rng,
    );

    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::InvalidConfig {
        field: "noise_sigma".into(),
        reason: e.to_string(),
    })?;
    let mut noise_rng = rng::stream(cfg.seed, 1);
    let width = cfg.n_records.to_string().len();
    let records = (0..cfg.n_records)
        .map(|i| {
            let identity = i % cfg.n_identities;
            let interest = (i / cfg.n_identities) % cfg.n_interest_classes;
            let trait_class = identity % cfg.n_sensitive_classes;
            let mut features: Vec<f64> = (0..cfg.n_features)
                .map(|_| noise.sample(&mut noise_rng))
                .collect();
            for (block, mean) in [
                (cfg.interest_dims, &interest_means[interest]),
                (cfg.identity_dims, &identity_means[identity]),
                (cfg.sensitive_dims, &trait_means[trait_class]),
            ] {
                for (f, m) in features[block.start..block.end].iter_mut().zip(mean) {
                    *f += m;
                }
            }
            Record {
                id: format!("r{i:0width$}"),
                features,
                labels: [
                    (INTEREST.to_string(), format!("c{interest}")),
                    (IDENTITY.to_string(), format!("p{identity:02}")),
                    (TRAIT.to_string(), format!("s{trait_class}")),
                ]
                .into_iter()
                .collect(),
            }
        })
        .collect();
    Dataset::new(cfg.schema(), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_records: 1000,
            n_features: 12,
            n_identities: 50,
            n_interest_classes: 4,
            n_sensitive_classes: 2,
            interest_dims: DimRange::new(0, 4),
            identity_dims: DimRange::new(4, 10),
            sensitive_dims: DimRange::new(10, 11),
            class_separation: 4.0,
            noise_sigma: 1.0,
            seed: 5,
        }
    }

    #[test]
    fn round_robin_counts() {
        let ds = generate_synthetic(&small()).unwrap();
        let ids = ds.labels(IDENTITY).unwrap();
        assert_eq!(ids.n_classes(), 50);
        assert!(ids.class_counts().iter().all(|&c| c == 20));
        let interest = ds.labels(INTEREST).unwrap();
        assert!(interest.class_counts().iter().all(|&c| c == 250));
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate_synthetic(&small()).unwrap();
        let b = generate_synthetic(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SynthConfig { seed: 6, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let cases = [
            (
                SynthConfig {
                    identity_dims: DimRange::new(3, 8),
                    ..small()
                },
                "identity_dims",
            ),
            (
                SynthConfig {
                    sensitive_dims: DimRange::new(10, 13),
                    ..small()
                },
                "sensitive_dims",
            ),
            (
                SynthConfig {
                    n_records: 10,
                    ..small()
                },
                "n_records",
            ),
            (
                SynthConfig {
                    noise_sigma: 0.0,
                    ..small()
                },
                "noise_sigma",
            ),
        ];
        for (cfg, field) in cases {
            match generate_synthetic(&cfg) {
                Err(Error::InvalidConfig { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected InvalidConfig for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn class_means_are_sign_codes() {
        let mut r = rng::stream(1, 0);
        let m = class_means(2, 3, 4.0, &mut r);
        assert_eq!(m, vec![vec![-2.0; 3], vec![2.0; 3]]);
        let m = class_means(5, 8, 4.0, &mut r);
        for (i, v) in m.iter().enumerate() {
            assert!(v.iter().all(|x| x.abs() == 2.0));
            assert!(!m[..i].contains(v), "codes are distinct");
        }
        // Only four codes exist on two dims; all of them are used.
        let m = class_means(4, 2, 2.0, &mut r);
        for (i, v) in m.iter().enumerate() {
            assert!(!m[..i].contains(v));
        }
    }

    #[test]
    fn noise_dims_are_centered() {
        let ds = generate_synthetic(&small()).unwrap();
        let col = ds.column(11);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 0.15, "mean {mean}");
    }
}
