//! Observations, datasets, intervention specifications, and CSV ingestion.
//!
//! One row per participant: site `S`, covariates `W1`, `W2`, instrument `A`,
//! intermediate `Z`, mediator `M`, and outcome `Y`, which is observed only
//! in the source site (`S = 1`).

use crate::error::{DataError, Violation};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// A single participant record. All variables are binary; `y` is present
/// exactly when `s == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub s: u8,
    pub w1: u8,
    pub w2: u8,
    pub a: u8,
    pub z: u8,
    pub m: u8,
    pub y: Option<u8>,
}

impl Observation {
    fn check(&self, row: usize) -> Result<(), DataError> {
        for (name, v) in [
            ("S", self.s),
            ("W1", self.w1),
            ("W2", self.w2),
            ("A", self.a),
            ("Z", self.z),
            ("M", self.m),
        ] {
            if v > 1 {
                return Err(DataError::NonBinary {
                    row,
                    column: name.to_string(),
                    value: v.to_string(),
                });
            }
        }
        match (self.s, self.y) {
            (0, Some(_)) => Err(DataError::OutcomeAtTargetSite { row }),
            (1, None) => Err(DataError::MissingOutcome { row }),
            (_, Some(y)) if y > 1 => Err(DataError::NonBinary {
                row,
                column: "Y".to_string(),
                value: y.to_string(),
            }),
            _ => Ok(()),
        }
    }
}

/// Immutable collection of observations with optional frequency weights.
///
/// Weights default to 1 and exist so that an exact distribution (every
/// configuration weighted by its true probability) can be fed through the
/// same estimation path as sampled data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Observation>,
    weights: Vec<f64>,
}

impl Dataset {
    pub fn new(rows: Vec<Observation>) -> Result<Self, DataError> {
        let n = rows.len();
        Self::with_weights(rows, vec![1.0; n])
    }

    pub fn with_weights(rows: Vec<Observation>, weights: Vec<f64>) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        if rows.len() != weights.len() {
            return Err(DataError::WeightLength {
                rows: rows.len(),
                weights: weights.len(),
            });
        }
        for (i, obs) in rows.iter().enumerate() {
            obs.check(i + 1)?;
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(DataError::BadWeight);
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(DataError::BadWeight);
        }
        if !rows.iter().any(|o| o.s == 1) {
            return Err(DataError::NoSourceRows);
        }
        if !rows.iter().any(|o| o.s == 0) {
            return Err(DataError::NoTargetRows);
        }
        Ok(Dataset { rows, weights })
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Total frequency weight; equals `len()` for unit weights.
    pub fn weight_total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Row resample with replacement, used by the bootstrap.
    pub fn resample(&self, indices: &[usize]) -> Result<Dataset, DataError> {
        let rows: Vec<Observation> = indices.iter().map(|&i| self.rows[i]).collect();
        let weights: Vec<f64> = indices.iter().map(|&i| self.weights[i]).collect();
        Dataset::with_weights(rows, weights)
    }

    /// Read a dataset from a CSV file with header `S,W1,W2,A,Z,M,Y`.
    pub fn load_csv(path: &Path) -> Result<Dataset, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_csv(&text)
    }

    /// Parse CSV text. Y cells are empty for target-site rows.
    pub fn parse_csv(text: &str) -> Result<Dataset, DataError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(DataError::Empty)?;
        let expected = "S,W1,W2,A,Z,M,Y";
        if header.trim() != expected {
            return Err(DataError::Header {
                expected: expected.to_string(),
                found: header.trim().to_string(),
            });
        }
        let columns = ["S", "W1", "W2", "A", "Z", "M", "Y"];
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let row = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 7 {
                return Err(DataError::CellCount {
                    row,
                    expected: 7,
                    found: cells.len(),
                });
            }
            let mut vals = [0u8; 6];
            for i in 0..6 {
                vals[i] = parse_bit(cells[i], row, columns[i])?;
            }
            let y = match cells[6].trim() {
                "" => None,
                cell => Some(parse_bit(cell, row, "Y")?),
            };
            rows.push(Observation {
                s: vals[0],
                w1: vals[1],
                w2: vals[2],
                a: vals[3],
                z: vals[4],
                m: vals[5],
                y,
            });
        }
        Dataset::new(rows)
    }

    /// Write the dataset back out in the `load_csv` format.
    pub fn write_csv(&self) -> String {
        let mut out = String::from("S,W1,W2,A,Z,M,Y\n");
        for o in &self.rows {
            let y = o.y.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                o.s, o.w1, o.w2, o.a, o.z, o.m, y
            ));
        }
        out
    }

    /// Empirical positivity screen. Reports any conditioning cell with a
    /// single observed level of the variable whose support it must carry.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        // A within (s, w1, w2).
        for s in 0..2u8 {
            for w1 in 0..2u8 {
                for w2 in 0..2u8 {
                    let levels: Vec<u8> = self
                        .rows
                        .iter()
                        .filter(|o| o.s == s && o.w1 == w1 && o.w2 == w2)
                        .map(|o| o.a)
                        .collect();
                    if let Some(level) = single_level(&levels) {
                        out.push(Violation::DegenerateTreatment { s, w1, w2, level });
                    }
                }
            }
        }
        // Z within (s=1, w1, w2, a).
        for w1 in 0..2u8 {
            for w2 in 0..2u8 {
                for a in 0..2u8 {
                    let levels: Vec<u8> = self
                        .rows
                        .iter()
                        .filter(|o| o.s == 1 && o.w1 == w1 && o.w2 == w2 && o.a == a)
                        .map(|o| o.z)
                        .collect();
                    if let Some(level) = single_level(&levels) {
                        out.push(Violation::DegenerateIntermediate { w1, w2, a, level });
                    }
                }
            }
        }
        // M within (s=1, z, w1, w2).
        for z in 0..2u8 {
            for w1 in 0..2u8 {
                for w2 in 0..2u8 {
                    let levels: Vec<u8> = self
                        .rows
                        .iter()
                        .filter(|o| o.s == 1 && o.z == z && o.w1 == w1 && o.w2 == w2)
                        .map(|o| o.m)
                        .collect();
                    if let Some(level) = single_level(&levels) {
                        out.push(Violation::DegenerateMediator { z, w1, w2, level });
                    }
                }
            }
        }
        out
    }
}

/// Returns the single observed level of a nonempty cell, if degenerate.
fn single_level(levels: &[u8]) -> Option<u8> {
    match levels {
        [] => None,
        [first, rest @ ..] => rest.iter().all(|v| v == first).then_some(*first),
    }
}

fn parse_bit(cell: &str, row: usize, column: &str) -> Result<u8, DataError> {
    match cell.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => {
            if other.parse::<f64>().is_ok() || other.parse::<i64>().is_ok() {
                Err(DataError::NonBinary {
                    row,
                    column: column.to_string(),
                    value: other.to_string(),
                })
            } else {
                Err(DataError::Parse {
                    row,
                    column: column.to_string(),
                    value: other.to_string(),
                })
            }
        }
    }
}

/// The triple (a, a*, s_ref) selecting a counterfactual mean psi(a, a*).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionSpec {
    /// Static treatment level.
    pub a: u8,
    /// Level fixed inside the stochastic mediator distribution g*.
    pub a_star: u8,
    /// Site index used inside g*.
    pub s_ref: u8,
}

impl InterventionSpec {
    pub fn new(a: u8, a_star: u8, s_ref: u8) -> Self {
        debug_assert!(a <= 1 && a_star <= 1 && s_ref <= 1);
        InterventionSpec { a, a_star, s_ref }
    }

    /// The three component parameters needed for the SDE and SIE with a
    /// given reference site: (1,0), (0,0), (1,1).
    pub fn effect_triple(s_ref: u8) -> [InterventionSpec; 3] {
        [
            InterventionSpec::new(1, 0, s_ref),
            InterventionSpec::new(0, 0, s_ref),
            InterventionSpec::new(1, 1, s_ref),
        ]
    }
}

impl fmt::Display for InterventionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "psi(a={}, a*={}, s_ref={})", self.a, self.a_star, self.s_ref)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_source_and_target_rows() {
        let ds = Dataset::parse_csv("S,W1,W2,A,Z,M,Y\n1,0,1,1,0,1,1\n0,1,0,0,1,0,\n").unwrap();
        assert_eq!(
            ds.rows()[0],
            Observation { s: 1, w1: 0, w2: 1, a: 1, z: 0, m: 1, y: Some(1) }
        );
        assert_eq!(ds.rows()[1].y, None);
        assert_eq!(ds.rows()[1].s, 0);
    }

    #[test]
    fn rejects_outcome_at_target_site() {
        let err = Dataset::parse_csv("S,W1,W2,A,Z,M,Y\n0,0,0,0,0,0,1\n1,0,0,0,0,0,1\n")
            .unwrap_err();
        assert!(matches!(err, DataError::OutcomeAtTargetSite { row: 1 }));
    }

    #[test]
    fn rejects_all_source_rows() {
        let err =
            Dataset::parse_csv("S,W1,W2,A,Z,M,Y\n1,0,0,0,0,0,1\n1,0,0,1,0,0,0\n").unwrap_err();
        assert!(matches!(err, DataError::NoTargetRows));
    }

    #[test]
    fn rejects_non_binary_values() {
        let err = Dataset::parse_csv("S,W1,W2,A,Z,M,Y\n1,0,2,0,0,0,1\n").unwrap_err();
        assert!(matches!(err, DataError::NonBinary { row: 1, .. }));
        let err = Dataset::parse_csv("S,W1,W2,A,Z,M,Y\n1,0,x,0,0,0,1\n").unwrap_err();
        match err {
            DataError::Parse { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (1, "W2", "x"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let text = "S,W1,W2,A,Z,M,Y\n1,0,1,1,0,1,1\n0,1,0,0,1,0,\n1,1,1,0,1,0,0\n";
        let ds = Dataset::parse_csv(text).unwrap();
        assert_eq!(ds.write_csv(), text);
        assert_eq!(Dataset::parse_csv(&ds.write_csv()).unwrap(), ds);
    }

    #[test]
    fn screen_flags_constructed_violation() {
        // Every s=1, w2=1 row has A=1.
        let mut rows = vec![
            Observation { s: 1, w1: 0, w2: 1, a: 1, z: 0, m: 1, y: Some(1) },
            Observation { s: 1, w1: 0, w2: 1, a: 1, z: 1, m: 0, y: Some(0) },
            Observation { s: 0, w1: 0, w2: 0, a: 0, z: 0, m: 0, y: None },
            Observation { s: 0, w1: 0, w2: 0, a: 1, z: 1, m: 1, y: None },
        ];
        let ds = Dataset::new(rows.clone()).unwrap();
        let violations = ds.validate();
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::DegenerateTreatment { s: 1, w2: 1, .. })));

        // Adding the opposite arm clears that cell.
        rows.push(Observation { s: 1, w1: 0, w2: 1, a: 0, z: 0, m: 0, y: Some(0) });
        rows.push(Observation { s: 1, w1: 0, w2: 1, a: 0, z: 1, m: 1, y: Some(1) });
        let ds = Dataset::new(rows).unwrap();
        assert!(!ds
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::DegenerateTreatment { s: 1, w2: 1, .. })));
    }

    #[test]
    fn validate_is_pure() {
        let ds = Dataset::parse_csv("S,W1,W2,A,Z,M,Y\n1,0,1,1,0,1,1\n0,1,0,0,1,0,\n").unwrap();
        assert_eq!(ds.validate(), ds.validate());
    }
}
