use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column roles of a dataset, with concrete feature names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(rename = "features")]
    pub feature_names: Vec<String>,
    pub attribute_of_interest: String,
    #[serde(default)]
    pub additional_attributes: Vec<String>,
    #[serde(default)]
    pub sensitive_attributes: Vec<String>,
    #[serde(default)]
    pub id_column: Option<String>,
}

impl Schema {
    pub fn validate(&self) -> Result<()> {
        if self.feature_names.is_empty() {
            return Err(Error::InvalidSchema("at least one feature is required".into()));
        }
        if self.attribute_of_interest.is_empty() {
            return Err(Error::InvalidSchema(
                "attribute_of_interest must be nonempty".into(),
            ));
        }
        let mut seen = HashSet::new();
        let all = self
            .feature_names
            .iter()
            .chain(std::iter::once(&self.attribute_of_interest))
            .chain(&self.additional_attributes)
            .chain(&self.sensitive_attributes)
            .chain(self.id_column.iter());
        for name in all {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "column `{name}` appears in more than one role"
                )));
            }
        }
        Ok(())
    }

    /// All label attributes: interest first, then additional, then sensitive.
    pub fn attributes(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.attribute_of_interest.as_str())
            .chain(self.additional_attributes.iter().map(String::as_str))
            .chain(self.sensitive_attributes.iter().map(String::as_str))
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.attributes().any(|a| a == name)
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// The sensitive attribute used for feature rejection and headline mixture.
    pub fn primary_sensitive(&self) -> Option<&str> {
        self.sensitive_attributes.first().map(String::as_str)
    }
}

/// How the schema file names its feature columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureSpec {
    Names(Vec<String>),
    /// `{"prefix": "f"}` matches every header column starting with the
    /// prefix, in header order; with `count` it expands to `f0..f{count-1}`.
    Prefix {
        prefix: String,
        #[serde(default)]
        count: Option<usize>,
    },
}

/// A schema as written in a JSON configuration file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaSpec {
    pub features: FeatureSpec,
    pub attribute_of_interest: String,
    #[serde(default)]
    pub additional_attributes: Vec<String>,
    #[serde(default)]
    pub sensitive_attributes: Vec<String>,
    #[serde(default)]
    pub id_column: Option<String>,
}

impl SchemaSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Resolve feature names, using `header` for open-ended prefixes.
    pub fn resolve(&self, header: Option<&[String]>) -> Result<Schema> {
        let feature_names = match &self.features {
            FeatureSpec::Names(names) => names.clone(),
            FeatureSpec::Prefix {
                prefix,
                count: Some(n),
            } => (0..*n).map(|i| format!("{prefix}{i}")).collect(),
            FeatureSpec::Prefix {
                prefix,
                count: None,
            } => {
                let header = header.ok_or_else(|| {
                    Error::InvalidSchema(format!(
                        "feature prefix `{prefix}` without count needs a header to resolve"
                    ))
                })?;
                let roles: HashSet<&str> = std::iter::once(self.attribute_of_interest.as_str())
                    .chain(self.additional_attributes.iter().map(String::as_str))
                    .chain(self.sensitive_attributes.iter().map(String::as_str))
                    .chain(self.id_column.as_deref())
                    .collect();
                header
                    .iter()
                    .filter(|h| h.starts_with(prefix.as_str()) && !roles.contains(h.as_str()))
                    .cloned()
                    .collect()
            }
        };
        let schema = Schema {
            feature_names,
            attribute_of_interest: self.attribute_of_interest.clone(),
            additional_attributes: self.additional_attributes.clone(),
            sensitive_attributes: self.sensitive_attributes.clone(),
            id_column: self.id_column.clone(),
        };
        schema.validate()?;
        Ok(schema)
    }
}

impl From<Schema> for SchemaSpec {
    fn from(s: Schema) -> Self {
        SchemaSpec {
            features: FeatureSpec::Names(s.feature_names),
            attribute_of_interest: s.attribute_of_interest,
            additional_attributes: s.additional_attributes,
            sensitive_attributes: s.sensitive_attributes,
            id_column: s.id_column,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(json: &str) -> SchemaSpec {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn prefix_resolves_against_header() {
        let s = spec(r#"{"features": {"prefix": "f"}, "attribute_of_interest": "emotion"}"#);
        let header: Vec<String> = ["id", "f0", "emotion", "f1", "g"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let schema = s.resolve(Some(&header)).unwrap();
        assert_eq!(schema.feature_names, vec!["f0", "f1"]);
    }

    #[test]
    fn prefix_with_count_expands() {
        let s = spec(r#"{"features": {"prefix": "x", "count": 3}, "attribute_of_interest": "a"}"#);
        assert_eq!(s.resolve(None).unwrap().feature_names, vec!["x0", "x1", "x2"]);
    }

    #[test]
    fn overlapping_roles_are_rejected() {
        let s = spec(
            r#"{"features": ["a", "b"], "attribute_of_interest": "p",
                "sensitive_attributes": ["p"]}"#,
        );
        assert!(matches!(s.resolve(None), Err(Error::InvalidSchema(_))));
        let s = spec(r#"{"features": ["a", "a"], "attribute_of_interest": "p"}"#);
        assert!(matches!(s.resolve(None), Err(Error::InvalidSchema(_))));
    }

    #[test]
    fn empty_features_or_interest_rejected() {
        let s = spec(r#"{"features": [], "attribute_of_interest": "p"}"#);
        assert!(s.resolve(None).is_err());
        let s = spec(r#"{"features": ["a"], "attribute_of_interest": ""}"#);
        assert!(s.resolve(None).is_err());
    }
}
