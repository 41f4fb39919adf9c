//! Model-term specifications for the nuisance regressions.
//!
//! A term is a product of observed variables; the intercept is always
//! included implicitly. Term lists are validated against the causal
//! ordering W -> S -> A -> Z -> M -> Y and, for the restricted variant,
//! against the exclusion restriction that A enters neither the M nor the
//! Y model.

use crate::data::Observation;
use crate::error::EstimationError;
use serde::{Deserialize, Serialize};

/// Observed variables usable as design terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    W1,
    W2,
    A,
    Z,
    M,
    S,
}

impl Var {
    pub fn name(&self) -> &'static str {
        match self {
            Var::W1 => "W1",
            Var::W2 => "W2",
            Var::A => "A",
            Var::Z => "Z",
            Var::M => "M",
            Var::S => "S",
        }
    }

    pub fn value(&self, o: &Observation) -> f64 {
        let v = match self {
            Var::W1 => o.w1,
            Var::W2 => o.w2,
            Var::A => o.a,
            Var::Z => o.z,
            Var::M => o.m,
            Var::S => o.s,
        };
        f64::from(v)
    }
}

/// A product of variables; the empty product would be the intercept, which
/// is represented separately.
pub type Term = Vec<Var>;

/// Restricted fits exclude A from the M and Y models; unrestricted fits
/// condition on A in both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Restricted,
    Unrestricted,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::Restricted => "restricted",
            Variant::Unrestricted => "unrestricted",
        }
    }
}

/// Per-model design terms for the five nuisance regressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    /// Terms for A | W, S.
    pub a: Vec<Term>,
    /// Terms for Z | A, W, S.
    pub z: Vec<Term>,
    /// Terms for M | Z, W, S (restricted) or M | Z, A, W, S (unrestricted).
    pub m: Vec<Term>,
    /// Terms for S | W.
    pub s: Vec<Term>,
    /// Terms for the outcome regression on source-site rows.
    pub y: Vec<Term>,
}

/// Variables allowed in each model's design, per the causal ordering.
fn allowed(model: &'static str, variant: Variant) -> &'static [Var] {
    match (model, variant) {
        ("A", _) => &[Var::W1, Var::W2, Var::S],
        ("Z", _) => &[Var::A, Var::W1, Var::W2, Var::S],
        ("M", Variant::Restricted) => &[Var::Z, Var::W1, Var::W2, Var::S],
        ("M", Variant::Unrestricted) => &[Var::Z, Var::A, Var::W1, Var::W2, Var::S],
        ("S", _) => &[Var::W1, Var::W2],
        ("Y", Variant::Restricted) => &[Var::M, Var::Z, Var::W1, Var::W2],
        ("Y", Variant::Unrestricted) => &[Var::M, Var::Z, Var::A, Var::W1, Var::W2],
        _ => unreachable!("unknown model"),
    }
}

impl TermSpec {
    /// Check every term against the causal ordering and the variant's
    /// exclusion restriction.
    pub fn validate(&self, variant: Variant) -> Result<(), EstimationError> {
        for (model, terms) in [
            ("A", &self.a),
            ("Z", &self.z),
            ("M", &self.m),
            ("S", &self.s),
            ("Y", &self.y),
        ] {
            let ok = allowed(model, variant);
            for term in terms {
                for var in term {
                    if !ok.contains(var) {
                        if variant == Variant::Restricted
                            && *var == Var::A
                            && (model == "M" || model == "Y")
                        {
                            return Err(EstimationError::RestrictedTermsContainA(
                                if model == "M" { "M" } else { "Y" },
                            ));
                        }
                        return Err(EstimationError::Glm(
                            crate::error::GlmError::UnknownVariable(format!(
                                "{} not allowed in the {model} model",
                                var.name()
                            )),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Labels for a term list, intercept first.
    pub fn labels(terms: &[Term]) -> Vec<String> {
        std::iter::once("1".to_string())
            .chain(terms.iter().map(|t| {
                t.iter()
                    .map(Var::name)
                    .collect::<Vec<_>>()
                    .join(":")
            }))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> TermSpec {
        TermSpec {
            a: vec![],
            z: vec![vec![Var::A], vec![Var::W2]],
            m: vec![vec![Var::Z]],
            s: vec![vec![Var::W2]],
            y: vec![vec![Var::M], vec![Var::Z]],
        }
    }

    #[test]
    fn restricted_rejects_a_in_m_terms() {
        let mut spec = base_spec();
        spec.m.push(vec![Var::A]);
        assert!(matches!(
            spec.validate(Variant::Restricted),
            Err(EstimationError::RestrictedTermsContainA("M"))
        ));
        assert!(spec.validate(Variant::Unrestricted).is_ok());
    }

    #[test]
    fn ordering_rejects_downstream_variables() {
        let mut spec = base_spec();
        spec.s.push(vec![Var::M]);
        assert!(spec.validate(Variant::Restricted).is_err());
    }
}
