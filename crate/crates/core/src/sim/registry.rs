use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagnostic fidelity class of an ICD-10 code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityClass {
    /// Definitive dementia diagnosis.
    High,
    /// Cognitive symptom or rule-out code.
    Low,
    NonDementia,
}

impl FidelityClass {
    pub fn is_dementia(self) -> bool {
        !matches!(self, FidelityClass::NonDementia)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FidelityClass::High => "high",
            FidelityClass::Low => "low",
            FidelityClass::NonDementia => "non_dementia",
        }
    }
}

const DEFAULT_HIGH: [&str; 13] = [
    "G30.0", "G30.1", "G30.8", "G30.9", "F01.50", "F01.51", "F02.80", "F02.81", "G31.01", "G31.09",
    "G31.83", "F01.518", "F02.811",
];

const DEFAULT_LOW: [&str; 13] = [
    "F03.90", "F03.91", "R41.0", "R41.1", "R41.2", "R41.3", "R41.81", "R41.82", "G31.84", "F05",
    "F06.7", "R54", "F06.8",
];

const DEFAULT_FILLER: [&str; 4] = ["I10", "E11.9", "M54.5", "J06.9"];

/// One row of the registry file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub code: String,
    pub class: FidelityClass,
}

/// Mapping from ICD-10 code to fidelity class, with per-class code lists kept
/// in insertion order so sampling is reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeRegistry {
    entries: Vec<RegistryEntry>,
    index: HashMap<String, FidelityClass>,
    high: Vec<String>,
    low: Vec<String>,
    filler: Vec<String>,
}

impl CodeRegistry {
    /// Build a registry. Codes must be unique and each of the three classes
    /// must contain at least one code.
    pub fn new(entries: Vec<RegistryEntry>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        let (mut high, mut low, mut filler) = (Vec::new(), Vec::new(), Vec::new());
        for e in &entries {
            let code = e.code.trim();
            if code.is_empty() {
                return Err(Error::Config(vec!["registry: empty code".into()]));
            }
            if index.insert(code.to_string(), e.class).is_some() {
                return Err(Error::Config(vec![format!(
                    "registry: duplicate code {code}"
                )]));
            }
            match e.class {
                FidelityClass::High => high.push(code.to_string()),
                FidelityClass::Low => low.push(code.to_string()),
                FidelityClass::NonDementia => filler.push(code.to_string()),
            }
        }
        let mut problems = Vec::new();
        if high.is_empty() {
            problems.push("registry: high-fidelity class is empty".to_string());
        }
        if low.is_empty() {
            problems.push("registry: low-fidelity class is empty".to_string());
        }
        if filler.is_empty() {
            problems.push("registry: non-dementia filler class is empty".to_string());
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        Ok(CodeRegistry {
            entries,
            index,
            high,
            low,
            filler,
        })
    }

    /// The built-in 26-code dementia registry plus four filler codes.
    pub fn default_dementia() -> Self {
        let entries = DEFAULT_HIGH
            .iter()
            .map(|c| (c, FidelityClass::High))
            .chain(DEFAULT_LOW.iter().map(|c| (c, FidelityClass::Low)))
            .chain(
                DEFAULT_FILLER
                    .iter()
                    .map(|c| (c, FidelityClass::NonDementia)),
            )
            .map(|(c, class)| RegistryEntry {
                code: (*c).to_string(),
                class,
            })
            .collect();
        Self::new(entries).expect("built-in registry is valid")
    }

    pub fn class_of(&self, code: &str) -> Option<FidelityClass> {
        self.index.get(code).copied()
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn high(&self) -> &[String] {
        &self.high
    }

    pub fn low(&self) -> &[String] {
        &self.low
    }

    pub fn filler(&self) -> &[String] {
        &self.filler
    }

    pub fn dementia_count(&self) -> usize {
        self.high.len() + self.low.len()
    }
}

impl Default for CodeRegistry {
    fn default() -> Self {
        Self::default_dementia()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_registry_has_26_dementia_codes() {
        let reg = CodeRegistry::default_dementia();
        assert_eq!(reg.dementia_count(), 26);
        assert!(!reg.high().is_empty() && !reg.low().is_empty());
        assert_eq!(reg.class_of("G30.9"), Some(FidelityClass::High));
        assert_eq!(reg.class_of("F03.90"), Some(FidelityClass::Low));
        assert_eq!(reg.class_of("I10"), Some(FidelityClass::NonDementia));
        assert_eq!(reg.class_of("Z00.0"), None);
    }

    #[test]
    fn rejects_empty_class_and_duplicates() {
        let only_high = vec![RegistryEntry {
            code: "G30.9".into(),
            class: FidelityClass::High,
        }];
        match CodeRegistry::new(only_high) {
            Err(Error::Config(v)) => assert_eq!(v.len(), 2),
            other => panic!("expected config error, got {other:?}"),
        }
        let dup = vec![
            RegistryEntry {
                code: "A".into(),
                class: FidelityClass::High,
            },
            RegistryEntry {
                code: "A".into(),
                class: FidelityClass::Low,
            },
        ];
        assert!(CodeRegistry::new(dup).is_err());
    }
}
