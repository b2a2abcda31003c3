use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{Ontology, DONTCARE};

/// Key every record carries besides its ontology slots.
pub const NAME: &str = "name";

pub type Record = IndexMap<String, String>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Database {
    pub domains: IndexMap<String, Vec<Record>>,
}

impl Database {
    pub fn from_json(text: &str, ontology: &Ontology) -> Result<Self> {
        let db: Database = serde_json::from_str(text)?;
        db.validate(ontology)?;
        Ok(db)
    }

    pub fn load(path: impl AsRef<Path>, ontology: &Ontology) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, ontology)
    }

    pub fn bundled() -> Self {
        Self::from_json(include_str!("../../data/db.json"), &Ontology::bundled())
            .expect("bundled database is valid")
    }

    pub fn validate(&self, ontology: &Ontology) -> Result<()> {
        for (d, records) in &self.domains {
            let schema = ontology.domain(d).ok_or_else(|| Error::UnknownDomain(d.clone()))?;
            for (i, r) in records.iter().enumerate() {
                if !r.contains_key(NAME) {
                    return Err(Error::schema(format!("{d}[{i}]"), "record has no name"));
                }
                for s in r.keys() {
                    let known = s == NAME || schema.informable.contains_key(s) || schema.requestable.contains(s);
                    if !known {
                        return Err(Error::schema(format!("{d}[{i}].{s}"), "slot not in ontology"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Records matching every constraint, in file order. `dontcare` matches
    /// anything.
    pub fn query(&self, domain: &str, constraints: &IndexMap<String, String>) -> Result<Vec<&Record>> {
        let records = self
            .domains
            .get(domain)
            .ok_or_else(|| Error::UnknownDomain(domain.to_string()))?;
        Ok(records
            .iter()
            .filter(|r| {
                constraints
                    .iter()
                    .all(|(s, v)| v == DONTCARE || r.get(s) == Some(v))
            })
            .collect())
    }

    pub fn find(&self, domain: &str, name: &str) -> Option<&Record> {
        self.domains
            .get(domain)?
            .iter()
            .find(|r| r.get(NAME).map(String::as_str) == Some(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_constraints_return_all() {
        let db = Database::bundled();
        let all = db.query("restaurant", &IndexMap::new()).unwrap();
        assert_eq!(all.len(), db.domains["restaurant"].len());
    }

    #[test]
    fn absent_value_matches_nothing() {
        let db = Database::bundled();
        let c: IndexMap<String, String> = [("area".to_string(), "atlantis".to_string())].into();
        assert!(db.query("restaurant", &c).unwrap().is_empty());
    }

    #[test]
    fn area_filter_matches_exactly_the_centre_records() {
        let db = Database::bundled();
        let c: IndexMap<String, String> = [("area".to_string(), "centre".to_string())].into();
        let got: Vec<&str> = db.query("restaurant", &c).unwrap().iter().map(|r| r[NAME].as_str()).collect();
        let want: Vec<&str> = db.domains["restaurant"]
            .iter()
            .filter(|r| r["area"] == "centre")
            .map(|r| r[NAME].as_str())
            .collect();
        assert!(!want.is_empty());
        assert_eq!(got, want);
    }

    #[test]
    fn dontcare_matches_anything() {
        let db = Database::bundled();
        let c: IndexMap<String, String> = [("area".to_string(), DONTCARE.to_string())].into();
        assert_eq!(db.query("hotel", &c).unwrap().len(), db.domains["hotel"].len());
    }

    #[test]
    fn unknown_domain_is_an_error() {
        assert!(matches!(
            Database::bundled().query("spa", &IndexMap::new()),
            Err(Error::UnknownDomain(_))
        ));
    }

    #[test]
    fn bundled_sizes_in_range() {
        for (d, r) in &Database::bundled().domains {
            assert!((30..=50).contains(&r.len()), "{d}: {}", r.len());
        }
    }
}
