//! Scenario files: what to run, on which function, over which box.

use std::path::Path;

use serde::{Deserialize, Serialize};
use smoother::approx::{ApproxOptions, Stratification, StratificationJson, DEFAULT_J_MAX};
use smoother::fields::{AxisBox, FieldJson, ScalarField};
use smoother::Error;

/// Largest dimension the approximation pipelines accept.
pub const MAX_APPROX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    GadgetCheck,
    BumpCheck,
    ApproxLip,
    ApproxC1,
    EmbedDemo,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::GadgetCheck => "gadget-check",
            Pipeline::BumpCheck => "bump-check",
            Pipeline::ApproxLip => "approx-lip",
            Pipeline::ApproxC1 => "approx-c1",
            Pipeline::EmbedDemo => "embed-demo",
        }
    }
}

/// Parameters of `bump-check`: one bump per stratum at radius `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpParams {
    pub delta: FieldJson,
    pub mu: f64,
    /// Lipschitz constant handed to the bumps; defaults to the largest cell constant, at least 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lip: Option<f64>,
}

/// Parameters of `embed-demo`: the open box to embed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedParams {
    pub omega: AxisBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub dimension: usize,
    pub pipeline: Pipeline,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<FieldJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratification: Option<StratificationJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<FieldJson>,
    #[serde(rename = "box")]
    pub region: AxisBox,
    pub grid_spacing: f64,
    #[serde(default = "default_j_max")]
    pub j_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump: Option<BumpParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed: Option<EmbedParams>,
}

fn default_j_max() -> u32 {
    DEFAULT_J_MAX
}

/// A scenario that parsed but cannot be run.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<Error> for Invalid {
    fn from(e: Error) -> Invalid {
        Invalid(e.to_string())
    }
}

/// Everything a run needs, built and checked.
pub struct Prepared {
    pub scenario: Scenario,
    pub target: Option<ScalarField>,
    pub strat: Option<Stratification>,
    pub eps: Option<ScalarField>,
    pub opts: ApproxOptions,
}

impl Scenario {
    /// Read and parse; parse errors carry serde's line and column.
    pub fn load(path: &Path) -> Result<Scenario, Invalid> {
        let text = std::fs::read_to_string(path).map_err(|e| Invalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())))
    }

    pub fn with_overrides(mut self, spacing: Option<f64>, j_max: Option<u32>) -> Scenario {
        if let Some(s) = spacing {
            self.grid_spacing = s;
        }
        if let Some(j) = j_max {
            self.j_max = j;
        }
        self
    }

    /// Build every field and cell, and check what can be checked before running.
    pub fn prepare(self) -> Result<Prepared, Invalid> {
        let n = self.dimension;
        if self.region.dim() != n {
            return Err(Invalid(format!("box has dimension {}, scenario says {n}", self.region.dim())));
        }
        if !(self.grid_spacing > 0.0 && self.grid_spacing.is_finite()) {
            return Err(Invalid(format!("grid_spacing {} must be positive", self.grid_spacing)));
        }
        if self.j_max == 0 {
            return Err(Invalid("j_max must be at least 1".into()));
        }
        let field = |j: &Option<FieldJson>, what: &str| -> Result<Option<ScalarField>, Invalid> {
            let Some(j) = j else { return Ok(None) };
            let f = j.build()?;
            if f.dim() != n {
                return Err(Invalid(format!("{what} has dimension {}, scenario says {n}", f.dim())));
            }
            Ok(Some(f))
        };
        let target = field(&self.target, "target")?;
        let eps = field(&self.epsilon, "epsilon")?;
        let opts = ApproxOptions::new(self.region.clone(), self.grid_spacing).with_j_max(self.j_max);
        let needs = |what: &str, present: bool| -> Result<(), Invalid> {
            if present {
                Ok(())
            } else {
                Err(Invalid(format!("pipeline {} needs {what}", self.pipeline.name())))
            }
        };
        let mut strat = None;
        match self.pipeline {
            Pipeline::GadgetCheck => {}
            Pipeline::ApproxLip | Pipeline::ApproxC1 => {
                if n == 0 || n > MAX_APPROX_DIM {
                    return Err(Invalid(format!("approximation runs in dimension 1 to {MAX_APPROX_DIM}, not {n}")));
                }
                needs("a target", target.is_some())?;
                needs("an epsilon", eps.is_some())?;
                let t = target.clone().expect("checked");
                let mut s = match &self.stratification {
                    Some(j) => j.build(t)?,
                    None if n == 1 => Stratification::auto_1d(&t, &self.region, self.grid_spacing)?,
                    None => return Err(Invalid("a stratification is required above dimension 1".into())),
                };
                s.validate(&opts.grid())?;
                if self.pipeline == Pipeline::ApproxLip {
                    s.target_lip()?;
                }
                check_positive(eps.as_ref().expect("checked"), &opts)?;
                strat = Some(s);
            }
            Pipeline::BumpCheck => {
                needs("bump parameters", self.bump.is_some())?;
                needs("a stratification", self.stratification.is_some())?;
                let b = self.bump.as_ref().expect("checked");
                let d = b.delta.build()?;
                if d.dim() != n {
                    return Err(Invalid(format!("bump delta has dimension {}, scenario says {n}", d.dim())));
                }
                // bumps need no target; the zero field stands in
                let t = target.clone().unwrap_or_else(|| ScalarField::constant(n, 0.0));
                strat = Some(self.stratification.as_ref().expect("checked").build(t)?);
            }
            Pipeline::EmbedDemo => {
                needs("embed parameters", self.embed.is_some())?;
                let omega = &self.embed.as_ref().expect("checked").omega;
                if omega.dim() != n {
                    return Err(Invalid(format!("omega has dimension {}, scenario says {n}", omega.dim())));
                }
                if omega.lo.iter().zip(&omega.hi).any(|(a, b)| !(a < b)) {
                    return Err(Invalid("omega needs lo < hi in every coordinate".into()));
                }
                if target.is_some() {
                    needs("an epsilon", eps.is_some())?;
                    check_positive(eps.as_ref().expect("checked"), &opts)?;
                }
            }
        }
        Ok(Prepared { scenario: self, target, strat, eps, opts })
    }
}

fn check_positive(eps: &ScalarField, opts: &ApproxOptions) -> Result<(), Invalid> {
    for p in opts.grid().points() {
        let e = eps.eval(&p)?;
        if !(e > 0.0) {
            return Err(Error::Degenerate(format!("epsilon is {e} at {p:?}; it must be positive")).into());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABS: &str = r#"{
        "name": "abs", "dimension": 1, "pipeline": "approx-lip",
        "target": {"dim": 1, "expr": "abs(x)", "lip_bound": 1},
        "epsilon": {"dim": 1, "expr": "0.1"},
        "box": {"lo": [-2], "hi": [2]}, "grid_spacing": 0.01
    }"#;

    #[test]
    fn round_trip() {
        let s: Scenario = serde_json::from_str(ABS).unwrap();
        let again: Scenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.j_max, DEFAULT_J_MAX);
    }

    #[test]
    fn one_variable_strata_are_found() {
        let p = serde_json::from_str::<Scenario>(ABS).unwrap().prepare().unwrap();
        assert_eq!(p.strat.unwrap().strata.len(), 3);
    }

    #[test]
    fn refusals() {
        let bad = |edit: &dyn Fn(&mut serde_json::Value)| {
            let mut v: serde_json::Value = serde_json::from_str(ABS).unwrap();
            edit(&mut v);
            serde_json::from_value::<Scenario>(v).map_err(|e| Invalid(e.to_string())).and_then(Scenario::prepare).err().unwrap().0
        };
        assert!(bad(&|v| v["epsilon"]["expr"] = "0".into()).contains("positive"));
        assert!(bad(&|v| v["target"]["lip_bound"] = serde_json::Value::Null).contains("Lipschitz"));
        assert!(bad(&|v| v["pipeline"] = "approx-c2".into()).contains("unknown variant"));
        assert!(bad(&|v| v["grid_spacing"] = (-1.0).into()).contains("positive"));
        assert!(bad(&|v| v["dimension"] = 4.into()).contains("dimension"));
        assert!(bad(&|v| v["extra"] = 1.into()).contains("unknown field"));
    }
}
