//! Scenario files: JSON descriptions of a single link or a network, with
//! optional solver overrides and experiment parameters.

use std::fs;
use std::path::Path;

use elastic_market_core::network::{self, NetworkInstance, Topology};
use elastic_market_core::{
    Error as CoreError, LinkInstance, PriceModel, SolverConfig, UtilityModel,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriceSpec {
    Linear {
        a: f64,
    },
    Monomial {
        a: f64,
        #[serde(rename = "B")]
        big_b: f64,
    },
    TwoPiece {
        a: f64,
        b: f64,
        #[serde(default = "one")]
        k: f64,
    },
    Mm1 {
        a: f64,
        s: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl PriceSpec {
    pub fn build(&self) -> elastic_market_core::Result<PriceModel> {
        match *self {
            PriceSpec::Linear { a } => PriceModel::linear(a),
            PriceSpec::Monomial { a, big_b } => PriceModel::monomial(a, big_b),
            PriceSpec::TwoPiece { a, b, k } => PriceModel::two_piece(a, b, k),
            PriceSpec::Mm1 { a, s } => PriceModel::mm1_queue(a, s),
        }
    }

    pub fn from_model(p: &PriceModel) -> Self {
        match *p {
            PriceModel::Linear { slope } => PriceSpec::Linear { a: slope },
            PriceModel::Monomial {
                coefficient,
                exponent,
            } => PriceSpec::Monomial {
                a: coefficient,
                big_b: exponent,
            },
            PriceModel::TwoPiece {
                slope,
                steep_slope,
                knee,
            } => PriceSpec::TwoPiece {
                a: slope,
                b: steep_slope,
                k: knee,
            },
            PriceModel::Mm1Queue {
                scale,
                service_rate,
            } => PriceSpec::Mm1 {
                a: scale,
                s: service_rate,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    Linear { alpha: f64 },
    Log1p { alpha: f64, kappa: f64 },
    ShiftedPower { alpha: f64, kappa: f64, gamma: f64 },
}

impl UtilitySpec {
    pub fn build(&self) -> elastic_market_core::Result<UtilityModel> {
        match *self {
            UtilitySpec::Linear { alpha } => UtilityModel::linear(alpha),
            UtilitySpec::Log1p { alpha, kappa } => UtilityModel::log_one_plus(alpha, kappa),
            UtilitySpec::ShiftedPower {
                alpha,
                kappa,
                gamma,
            } => UtilityModel::shifted_power(alpha, kappa, gamma),
        }
    }

    pub fn from_model(u: &UtilityModel) -> Self {
        match *u {
            UtilityModel::Linear { alpha } => UtilitySpec::Linear { alpha },
            UtilityModel::LogOnePlus { alpha, kappa } => UtilitySpec::Log1p { alpha, kappa },
            UtilityModel::ShiftedPower {
                alpha,
                kappa,
                gamma,
            } => UtilitySpec::ShiftedPower {
                alpha,
                kappa,
                gamma,
            },
        }
    }
}

/// Owner of a path: a user index, or a one-element list holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Owner {
    One(usize),
    Many(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub links: Vec<usize>,
    pub user: Owner,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub tol: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub damping: Option<f64>,
    pub seed: Option<u64>,
    pub deviation_samples: Option<usize>,
    pub verify_tol: Option<f64>,
}

impl SolverSpec {
    pub fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_sweeps {
            cfg.max_sweeps = v;
        }
        if let Some(v) = self.damping {
            cfg.damping = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.deviation_samples {
            cfg.deviation_samples = v;
        }
        if let Some(v) = self.verify_tol {
            cfg.verify_tol = v;
        }
    }
}

/// Parameters for commands that sweep or probe something beyond the
/// instance itself. Command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Bid vector for `clear` and `verify`.
    pub bids: Option<Vec<f64>>,
    #[serde(rename = "R")]
    pub users: Option<Vec<usize>>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    #[serde(rename = "B")]
    pub exponent: Option<f64>,
    #[serde(rename = "B_grid")]
    pub exponent_grid: Option<Vec<f64>>,
    pub a_grid: Option<Vec<f64>>,
    pub b_grid: Option<Vec<f64>>,
    /// Number of random instances for `bound-check`.
    pub random: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SingleLink,
    Network,
}

/// The file format as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<PriceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<Vec<PriceSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<PathSpec>>,
    pub users: Vec<UtilitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    SingleLink(LinkInstance),
    Network(NetworkInstance),
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: Model,
    pub solver: SolverConfig,
    pub experiment: ExperimentSpec,
}

impl Scenario {
    pub fn single_link(&self) -> Result<&LinkInstance, CliError> {
        match &self.model {
            Model::SingleLink(inst) => Ok(inst),
            Model::Network(_) => Err(CliError::Validation(
                "this command needs a single_link scenario".into(),
            )),
        }
    }

    pub fn network(&self) -> Result<&NetworkInstance, CliError> {
        match &self.model {
            Model::Network(inst) => Ok(inst),
            Model::SingleLink(_) => Err(CliError::Validation(
                "this command needs a network scenario".into(),
            )),
        }
    }
}

fn field_error(field: &str, err: CoreError) -> CliError {
    match err {
        CoreError::InvalidParameter {
            name,
            constraint,
            value,
        } => CliError::Validation(format!("{field}.{name} = {value}: requires {constraint}")),
        other => CliError::Validation(format!("{field}: {other}")),
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, CliError> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    validate(&file)
}

pub fn validate(file: &ScenarioFile) -> Result<Scenario, CliError> {
    let mut users = Vec::with_capacity(file.users.len());
    for (r, u) in file.users.iter().enumerate() {
        users.push(
            u.build()
                .map_err(|e| field_error(&format!("users[{r}]"), e))?,
        );
    }
    if users.is_empty() {
        return Err(CliError::Validation(
            "users: at least one user is required".into(),
        ));
    }
    let model = match file.kind {
        ScenarioKind::SingleLink => {
            if file.links.is_some() || file.paths.is_some() {
                return Err(CliError::Validation(
                    "links/paths: only network scenarios describe links and paths".into(),
                ));
            }
            let spec = file.price.ok_or_else(|| {
                CliError::Validation("price: a single_link scenario needs a price".into())
            })?;
            let price = spec.build().map_err(|e| field_error("price", e))?;
            Model::SingleLink(
                LinkInstance::new(price, users).map_err(|e| field_error("scenario", e))?,
            )
        }
        ScenarioKind::Network => {
            if file.price.is_some() {
                return Err(CliError::Validation(
                    "price: network scenarios give one price per entry of links".into(),
                ));
            }
            let link_specs = file.links.as_ref().ok_or_else(|| {
                CliError::Validation("links: a network scenario needs links".into())
            })?;
            let mut prices = Vec::with_capacity(link_specs.len());
            for (j, spec) in link_specs.iter().enumerate() {
                prices.push(
                    spec.build()
                        .map_err(|e| field_error(&format!("links[{j}]"), e))?,
                );
            }
            let path_specs = file.paths.as_ref().ok_or_else(|| {
                CliError::Validation("paths: a network scenario needs paths".into())
            })?;
            let mut paths = Vec::with_capacity(path_specs.len());
            for (q, spec) in path_specs.iter().enumerate() {
                let user = match &spec.user {
                    Owner::One(r) => *r,
                    Owner::Many(owners) if owners.len() == 1 => owners[0],
                    Owner::Many(owners) => {
                        return Err(CliError::Validation(format!(
                            "paths[{q}].user lists {} owners; H invariant: every path belongs to exactly one user",
                            owners.len()
                        )))
                    }
                };
                paths.push(network::Path {
                    links: spec.links.clone(),
                    user,
                });
            }
            let topology = Topology::new(prices.len(), users.len(), paths)
                .map_err(|e| field_error("paths", e))?;
            Model::Network(
                NetworkInstance::new(topology, prices, users)
                    .map_err(|e| field_error("scenario", e))?,
            )
        }
    };
    let mut solver = SolverConfig::default();
    if let Some(s) = &file.solver {
        s.apply(&mut solver);
    }
    solver.validate().map_err(|e| field_error("solver", e))?;
    Ok(Scenario {
        model,
        solver,
        experiment: file.experiment.clone().unwrap_or_default(),
    })
}
