//! Synthetic data-generating mechanisms and their exact conditional
//! probabilities.
//!
//! Three coefficient presets are shipped. The canonical ids follow the
//! appendix table; the main-text table swaps the labels of mechanisms 1
//! and 2, so an explicit [`Labeling`] selects which convention an id uses.

use crate::data::{Dataset, Observation};
use crate::error::DataError;
use crate::rng::CounterRng;
use crate::terms::{TermSpec, Var, Variant};
use serde::{Deserialize, Serialize};

#[inline]
fn expit(x: f64) -> f64 {
    crate::glm::expit(x)
}

/// Which table's numbering a DGM id refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Labeling {
    Main,
    Appendix,
}

/// Parent values for a structural equation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParentValues {
    pub w1: Option<u8>,
    pub w2: Option<u8>,
    pub s: Option<u8>,
    pub a: Option<u8>,
    pub z: Option<u8>,
    pub m: Option<u8>,
}

impl ParentValues {
    fn get(&self, v: Var) -> Option<u8> {
        match v {
            Var::W1 => self.w1,
            Var::W2 => self.w2,
            Var::S => self.s,
            Var::A => self.a,
            Var::Z => self.z,
            Var::M => self.m,
        }
    }
}

/// One structural equation: intercept plus coefficient-weighted products of
/// parent variables, passed through expit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    pub intercept: f64,
    pub terms: Vec<(f64, Vec<Var>)>,
}

impl LinearPredictor {
    fn eval(&self, parents: &ParentValues) -> Result<f64, IncompleteParents> {
        let mut lp = self.intercept;
        for (coef, vars) in &self.terms {
            let mut prod = *coef;
            for v in vars {
                let val = parents.get(*v).ok_or(IncompleteParents(v.name()))?;
                prod *= f64::from(val);
            }
            lp += prod;
        }
        Ok(lp)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("incomplete parent assignment: missing {0}")]
pub struct IncompleteParents(&'static str);

/// Variables a DGM equation can be queried for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgmVariable {
    W1,
    W2,
    S,
    A,
    Z,
    M,
    Y,
}

/// Coefficient tables for one data-generating mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgmSpec {
    /// Canonical (appendix-table) id.
    pub id: u8,
    pub w2: LinearPredictor,
    pub s: LinearPredictor,
    pub z: LinearPredictor,
    pub m: LinearPredictor,
    pub y: LinearPredictor,
}

fn lp(intercept: f64, terms: &[(f64, &[Var])]) -> LinearPredictor {
    LinearPredictor {
        intercept,
        terms: terms.iter().map(|(c, vs)| (*c, vs.to_vec())).collect(),
    }
}

use Var::{A, M, S, W1, W2, Z};

impl DgmSpec {
    /// Preset by canonical appendix id (1, 2, or 3).
    pub fn appendix(id: u8) -> Option<DgmSpec> {
        let w2 = lp(0.4, &[(0.2, &[W1])]);
        let s = lp(-1.0, &[(3.0, &[W2])]);
        match id {
            1 => Some(DgmSpec {
                id,
                w2,
                s,
                z: lp(
                    -0.2,
                    &[
                        (-3.0, &[A]),
                        (-0.2, &[S]),
                        (2.0, &[W2]),
                        (0.2, &[A, W2]),
                        (-0.2, &[A, S]),
                        (0.2, &[W2, S]),
                        (2.0, &[A, W2, S]),
                    ],
                ),
                m: lp(-2.0, &[(1.0, &[Z]), (6.0, &[W2, Z]), (-2.0, &[W2])]),
                y: lp(
                    1.2f64.ln(),
                    &[
                        (40f64.ln(), &[Z]),
                        (-(30f64.ln()), &[M]),
                        (-(1.2f64.ln()), &[W2]),
                        (-(40f64.ln()), &[W2, Z]),
                    ],
                ),
            }),
            2 => Some(DgmSpec {
                id,
                w2,
                s,
                z: lp(
                    -1.0,
                    &[
                        (-0.1, &[A]),
                        (-0.2, &[S]),
                        (0.2, &[W2]),
                        (5.0, &[A, W2]),
                        (0.14, &[A, S]),
                        (0.2, &[W2, S]),
                        (-0.2, &[A, W2, S]),
                    ],
                ),
                // The table lists 3ZW2 and 2W2Z separately; their sum is the
                // identifiable coefficient.
                m: lp(
                    -2.0,
                    &[
                        (1.0, &[Z]),
                        (5.0, &[Z, W2]),
                        (0.2, &[Z, S]),
                        (-0.2, &[W2, S]),
                        (0.2, &[S]),
                        (-0.2, &[Z, W2, S]),
                        (-1.0, &[W2]),
                    ],
                ),
                y: lp(
                    -0.2,
                    &[
                        (-6.0, &[Z]),
                        (0.2, &[Z, W2]),
                        (2.0, &[Z, M]),
                        (2.0, &[W2, M]),
                        (-2.0, &[W2]),
                        (4.0, &[M]),
                        (1.0, &[Z, W2, M]),
                    ],
                ),
            }),
            3 => Some(DgmSpec {
                id,
                w2,
                s,
                z: lp(
                    -0.2,
                    &[
                        (-3.0, &[A]),
                        (2.0, &[S]),
                        (2.0, &[W2]),
                        (0.2, &[A, W2]),
                        (-0.2, &[A, S]),
                        (0.2, &[W2, S]),
                        (2.0, &[A, W2, S]),
                    ],
                ),
                // 3Z - 0.2ZW2 + 2W2Z collapses to ZW2 coefficient 1.8.
                m: lp(
                    -2.0,
                    &[
                        (3.0, &[Z]),
                        (1.8, &[Z, W2]),
                        (0.2, &[Z, S]),
                        (-0.2, &[W2, S]),
                        (0.2, &[S]),
                        (-0.2, &[Z, W2, S]),
                        (-1.0, &[W2]),
                    ],
                ),
                y: lp(
                    -0.2,
                    &[
                        (-6.0, &[Z]),
                        (0.2, &[Z, W2]),
                        (2.0, &[Z, M]),
                        (2.0, &[W2, M]),
                        (-0.2, &[W2]),
                        (4.0, &[M]),
                        (1.0, &[Z, W2, M]),
                    ],
                ),
            }),
            _ => None,
        }
    }

    /// Preset by id under a chosen labeling. The main-text table swaps the
    /// labels of mechanisms 1 and 2; mechanism 3 appears only in the
    /// appendix.
    pub fn preset(id: u8, labeling: Labeling) -> Option<DgmSpec> {
        let canonical = match (labeling, id) {
            (Labeling::Appendix, id) => id,
            (Labeling::Main, 1) => 2,
            (Labeling::Main, 2) => 1,
            (Labeling::Main, id) => id,
        };
        DgmSpec::appendix(canonical)
    }

    /// Exact conditional probability P(variable = 1 | parents).
    pub fn conditional_prob(
        &self,
        variable: DgmVariable,
        parents: &ParentValues,
    ) -> Result<f64, IncompleteParents> {
        Ok(match variable {
            DgmVariable::W1 => 0.5,
            DgmVariable::A => 0.5,
            DgmVariable::W2 => expit(self.w2.eval(parents)?),
            DgmVariable::S => expit(self.s.eval(parents)?),
            DgmVariable::Z => expit(self.z.eval(parents)?),
            DgmVariable::M => expit(self.m.eval(parents)?),
            DgmVariable::Y => expit(self.y.eval(parents)?),
        })
    }

    /// Convenience accessors over fully specified parents.
    pub fn p_w2(&self, w1: u8) -> f64 {
        expit(self.w2.intercept + self.w2.terms[0].0 * f64::from(w1))
    }

    pub fn p_s1(&self, w2: u8) -> f64 {
        let parents = ParentValues { w2: Some(w2), ..Default::default() };
        self.conditional_prob(DgmVariable::S, &parents).unwrap()
    }

    pub fn p_z1(&self, a: u8, w2: u8, s: u8) -> f64 {
        let parents = ParentValues {
            a: Some(a),
            w2: Some(w2),
            s: Some(s),
            ..Default::default()
        };
        self.conditional_prob(DgmVariable::Z, &parents).unwrap()
    }

    pub fn p_m1(&self, z: u8, w2: u8, s: u8) -> f64 {
        let parents = ParentValues {
            z: Some(z),
            w2: Some(w2),
            s: Some(s),
            ..Default::default()
        };
        self.conditional_prob(DgmVariable::M, &parents).unwrap()
    }

    pub fn p_y1(&self, m: u8, z: u8, w2: u8) -> f64 {
        let parents = ParentValues {
            m: Some(m),
            z: Some(z),
            w2: Some(w2),
            ..Default::default()
        };
        self.conditional_prob(DgmVariable::Y, &parents).unwrap()
    }

    /// Draw n i.i.d. rows in the order W1, W2, S, A, Z, M, Y. Row i consumes
    /// counters [8i, 8i+8), so output is independent of chunking.
    pub fn sample(&self, n: usize, rng: CounterRng) -> Result<Dataset, DataError> {
        let rows: Vec<Observation> = (0..n)
            .map(|i| {
                let base = (i as u64) * 8;
                let w1 = rng.bernoulli(base, 0.5);
                let w2 = rng.bernoulli(base + 1, self.p_w2(w1));
                let s = rng.bernoulli(base + 2, self.p_s1(w2));
                let a = rng.bernoulli(base + 3, 0.5);
                let z = rng.bernoulli(base + 4, self.p_z1(a, w2, s));
                let m = rng.bernoulli(base + 5, self.p_m1(z, w2, s));
                let y = (s == 1).then(|| rng.bernoulli(base + 6, self.p_y1(m, z, w2)));
                Observation { s, w1, w2, a, z, m, y }
            })
            .collect();
        Dataset::new(rows)
    }

    /// Joint probability of a full configuration; for target-site rows the
    /// y argument is ignored (the outcome is structurally missing).
    pub fn joint_prob(&self, o: &Observation, y_split: f64) -> f64 {
        let p_bit = |p: f64, v: u8| if v == 1 { p } else { 1.0 - p };
        let mut p = 0.5
            * p_bit(self.p_w2(o.w1), o.w2)
            * p_bit(self.p_s1(o.w2), o.s)
            * 0.5
            * p_bit(self.p_z1(o.a, o.w2, o.s), o.z)
            * p_bit(self.p_m1(o.z, o.w2, o.s), o.m);
        match o.y {
            Some(y) => p *= p_bit(self.p_y1(o.m, o.z, o.w2), y),
            None => p *= y_split,
        }
        p
    }

    /// The exact-distribution dataset: all 128 binary configurations with
    /// frequency weights equal to their true probabilities. Target-site
    /// configurations appear twice (once per enumerated y bit, each with
    /// half the cell mass) with the outcome stored as absent.
    pub fn exact_dataset(&self) -> Dataset {
        let mut rows = Vec::with_capacity(128);
        let mut weights = Vec::with_capacity(128);
        for bits in 0..128u32 {
            let b = |k: u32| ((bits >> k) & 1) as u8;
            let (w1, w2, s, a, z, m, y) = (b(0), b(1), b(2), b(3), b(4), b(5), b(6));
            let obs = Observation {
                s,
                w1,
                w2,
                a,
                z,
                m,
                y: (s == 1).then_some(y),
            };
            rows.push(obs);
            weights.push(self.joint_prob(&obs, 0.5));
        }
        Dataset::with_weights(rows, weights).expect("exact distribution is well formed")
    }

    /// The generating term lists, i.e. the "correct specification" presets.
    /// The unrestricted variant adds a main effect of A to the M and Y
    /// models (its generating coefficient is zero).
    pub fn correct_terms(&self, variant: Variant) -> TermSpec {
        let mut m: Vec<Vec<Var>> = self.m.terms.iter().map(|(_, t)| t.clone()).collect();
        let mut y: Vec<Vec<Var>> = self.y.terms.iter().map(|(_, t)| t.clone()).collect();
        if variant == Variant::Unrestricted {
            m.push(vec![A]);
            y.push(vec![A]);
        }
        TermSpec {
            a: vec![],
            z: self.z.terms.iter().map(|(_, t)| t.clone()).collect(),
            m,
            s: self.s.terms.iter().map(|(_, t)| t.clone()).collect(),
            y,
        }
    }
}
