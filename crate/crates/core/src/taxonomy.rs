//! Two-level group → species label tree.
//!
//! Species are addressed two ways: by a global index over all species and by a
//! `(group, local)` pair within one group's fine head. The global order is
//! group-major, so the species of group 0 come first, then group 1, and so on.
//! Fine head `j` in the two-level architecture (numbered from 2) serves group
//! `g = j - 2`.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// The six-group, 31-species structure used by the default experiment.
pub const DEFAULT_TAXONOMY_JSON: &str = include_str!("../assets/taxonomy_6x31.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDoc {
    pub name: String,
    pub species: Vec<String>,
}

/// On-disk shape of a taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyDoc {
    pub groups: Vec<GroupDoc>,
}

/// A validated, immutable taxonomy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    groups: Vec<String>,
    species: Vec<Vec<String>>,
    /// `offsets[g]` is the global index of group g's first species; `offsets[G] = S`.
    offsets: Vec<usize>,
    group_of: Vec<usize>,
}

impl Taxonomy {
    pub fn from_doc(doc: TaxonomyDoc) -> Result<Self> {
        if doc.groups.is_empty() || doc.groups.iter().any(|g| g.species.is_empty()) {
            return Err(Error::EmptyTaxonomy);
        }
        let mut group_names = HashSet::new();
        let mut species_names = HashSet::new();
        let mut offsets = Vec::with_capacity(doc.groups.len() + 1);
        let mut group_of = Vec::new();
        let mut groups = Vec::with_capacity(doc.groups.len());
        let mut species = Vec::with_capacity(doc.groups.len());
        offsets.push(0);
        for (g, group) in doc.groups.into_iter().enumerate() {
            if !group_names.insert(group.name.clone()) {
                return Err(Error::DuplicateName(group.name));
            }
            for name in &group.species {
                if !species_names.insert(name.clone()) {
                    return Err(Error::DuplicateName(name.clone()));
                }
                group_of.push(g);
            }
            offsets.push(group_of.len());
            groups.push(group.name);
            species.push(group.species);
        }
        Ok(Self {
            groups,
            species,
            offsets,
            group_of,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TaxonomyDoc = serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))?;
        Self::from_doc(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// The built-in 6-group / 31-species taxonomy.
    pub fn default_6x31() -> Self {
        Self::from_json(DEFAULT_TAXONOMY_JSON).expect("bundled taxonomy is valid")
    }

    pub fn to_doc(&self) -> TaxonomyDoc {
        TaxonomyDoc {
            groups: self
                .groups
                .iter()
                .zip(&self.species)
                .map(|(name, species)| GroupDoc {
                    name: name.clone(),
                    species: species.clone(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("taxonomy serializes")
    }

    /// Hex SHA-256 of the compact JSON form; identifies the label space of a checkpoint.
    pub fn fingerprint(&self) -> String {
        let compact = serde_json::to_string(&self.to_doc()).expect("taxonomy serializes");
        Sha256::digest(compact.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_species(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_name(&self, g: usize) -> &str {
        &self.groups[g]
    }

    pub fn group_names(&self) -> &[String] {
        &self.groups
    }

    pub fn group_size(&self, g: usize) -> usize {
        self.species[g].len()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.species.iter().map(Vec::len).collect()
    }

    /// Global index range of the species in group `g`.
    pub fn group_range(&self, g: usize) -> std::ops::Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    /// Group of a global species index. Panics when out of range.
    pub fn group_of(&self, s: usize) -> usize {
        self.group_of[s]
    }

    pub fn species_name(&self, s: usize) -> &str {
        let (g, i) = self.to_local(s).expect("species index in range");
        &self.species[g][i]
    }

    pub fn species_names(&self) -> impl Iterator<Item = &str> {
        self.species.iter().flatten().map(String::as_str)
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|g| g == name)
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species_names().position(|s| s == name)
    }

    pub fn to_global(&self, g: usize, i: usize) -> Result<usize> {
        if g >= self.num_groups() {
            return Err(Error::IndexOutOfRange {
                what: "group",
                index: g,
                limit: self.num_groups(),
            });
        }
        if i >= self.group_size(g) {
            return Err(Error::IndexOutOfRange {
                what: "local species",
                index: i,
                limit: self.group_size(g),
            });
        }
        Ok(self.offsets[g] + i)
    }

    pub fn to_local(&self, s: usize) -> Result<(usize, usize)> {
        let g = *self.group_of.get(s).ok_or(Error::IndexOutOfRange {
            what: "species",
            index: s,
            limit: self.num_species(),
        })?;
        Ok((g, s - self.offsets[g]))
    }
}
