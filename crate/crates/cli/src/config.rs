use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use posauc::auction::{
    BidProfile, ExpressiveBidProfile, MechanismSpec, PaymentRule, ScalingVector, SimplifiedBidProfile, SlotCurve,
    TieHint, ValueProfile,
};
use posauc::bayes::BayesSetting;
use posauc::complete_info::construct_equilibrium_bids;
use posauc::distributions::{Distribution, QuadratureConfig};
use serde::Deserialize;
use sha2::{Digest, Sha256};

/// One experiment, read from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mechanism: MechanismSection,
    pub curve: CurveSection,
    pub agents: AgentsSection,
    #[serde(default)]
    pub bids: BidsSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub grids: GridSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSection {
    #[serde(default = "default_rule")]
    pub payment_rule: String,
    #[serde(default = "default_space")]
    pub bid_space: String,
    /// Scaling vector for simplified bids; defaults to the slot curve.
    pub alphas: Option<Vec<f64>>,
}

fn default_rule() -> String {
    "first-price".into()
}

fn default_space() -> String {
    "expressive".into()
}

impl Default for MechanismSection {
    fn default() -> Self {
        Self { payment_rule: default_rule(), bid_space: default_space(), alphas: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSection {
    pub values: Option<Vec<f64>>,
    pub n: Option<usize>,
    /// Descriptor such as `uniform 1` or `power 1 2`.
    pub distribution: Option<String>,
    /// Two-column `value cdf` file, used instead of `distribution`.
    pub distribution_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidsSection {
    #[serde(default = "default_strategy")]
    pub strategy: String,
    /// Inline expressive rows.
    pub rows: Option<Vec<Vec<f64>>>,
    /// Inline simplified scalar bids.
    pub scalars: Option<Vec<f64>>,
    /// Optional `(position, agent)` tie-break pairs for inline bids.
    pub tie_hint: Option<Vec<(usize, usize)>>,
    /// A serialised bid table to simulate with instead of building one.
    pub table: Option<PathBuf>,
}

fn default_strategy() -> String {
    "equilibrium".into()
}

impl Default for BidsSection {
    fn default() -> Self {
        Self { strategy: default_strategy(), rows: None, scalars: None, tie_hint: None, table: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        let d = QuadratureConfig::default();
        Self { abs_tol: d.abs_tol, rel_tol: d.rel_tol, max_depth: d.max_depth }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Bid-table points.
    pub table: usize,
    /// Interior valuation points for the verification suites.
    pub values: usize,
    /// Interior report points for the cross-derivative suite.
    pub reports: usize,
    /// Finite-difference step as a fraction of the support.
    pub step: f64,
    /// Finite-difference step of the auxiliary suite, as a fraction of the support.
    pub aux_step: f64,
    /// Largest opponent count in the auxiliary suite.
    pub max_opponents: usize,
    /// Nash deviation price step; defaults to `1e-3` times the largest value.
    pub deviation_step: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { table: 512, values: 20, reports: 10, step: 1e-3, aux_step: 1e-5, max_opponents: 5, deviation_step: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSection {
    pub nash: f64,
    pub lemma1: f64,
    pub lemma2: f64,
    pub ode: f64,
    pub aux: f64,
    pub payment_identity: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self { nash: 1e-6, lemma1: 1e-4, lemma2: 1e-4, ode: 1e-6, aux: 1e-6, payment_identity: 1e-7 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Also write every simulated round.
    pub rounds: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), rounds: false }
    }
}

/// A parsed config plus the SHA-256 of its bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub digest: String,
    pub base: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let bytes = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = std::str::from_utf8(&bytes).context("config is not UTF-8")?;
    let config: ExperimentConfig = toml::from_str(text).with_context(|| format!("parsing {}", path.display()))?;
    config.check_agents()?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, digest, base })
}

impl ExperimentConfig {
    fn check_agents(&self) -> Result<()> {
        let a = &self.agents;
        let explicit = a.values.is_some();
        let bayes = a.n.is_some() || a.distribution.is_some() || a.distribution_file.is_some();
        if explicit == bayes {
            bail!("[agents] needs exactly one of `values` or `n` with a distribution");
        }
        if a.distribution.is_some() && a.distribution_file.is_some() {
            bail!("[agents] sets both `distribution` and `distribution_file`");
        }
        Ok(())
    }

    pub fn curve(&self) -> Result<SlotCurve> {
        Ok(SlotCurve::new(self.curve.betas.clone())?)
    }

    pub fn quadrature(&self) -> Result<QuadratureConfig> {
        let q = &self.quadrature;
        Ok(QuadratureConfig::new(q.abs_tol, q.rel_tol, q.max_depth)?)
    }

    pub fn mechanism(&self) -> Result<MechanismSpec> {
        let rule: PaymentRule = self.mechanism.payment_rule.parse()?;
        match self.mechanism.bid_space.as_str() {
            "expressive" => Ok(MechanismSpec::expressive(rule)),
            "simplified" => {
                let alphas = match &self.mechanism.alphas {
                    Some(a) => ScalingVector::new(a.clone())?,
                    None => ScalingVector::from(&self.curve()?),
                };
                Ok(MechanismSpec::simplified(rule, alphas))
            }
            other => bail!("unknown bid space `{other}` (expected expressive or simplified)"),
        }
    }

    pub fn values(&self) -> Result<ValueProfile> {
        let Some(v) = &self.agents.values else {
            bail!("this command needs explicit [agents] values");
        };
        Ok(ValueProfile::new(v.clone())?)
    }

    pub fn setting(&self, base: &Path) -> Result<BayesSetting> {
        let Some(n) = self.agents.n else {
            bail!("this command needs a distributional setting: [agents] n and distribution");
        };
        let dist = match (&self.agents.distribution, &self.agents.distribution_file) {
            (Some(d), None) => d.parse::<Distribution>()?,
            (None, Some(p)) => {
                let p = base.join(p);
                Distribution::Empirical(
                    posauc::distributions::Empirical::from_path(&p)
                        .with_context(|| format!("reading distribution file {}", p.display()))?,
                )
            }
            _ => bail!("[agents] needs a distribution"),
        };
        Ok(BayesSetting::new(n, self.curve()?, dist, self.quadrature()?)?)
    }

    /// Bids for complete-information commands, with the tie hint they rely on.
    pub fn bids(
        &self,
        values: &ValueProfile,
        curve: &SlotCurve,
        spec: &MechanismSpec,
    ) -> Result<(BidProfile, Option<TieHint>)> {
        let simplified = match &spec.bid_space {
            posauc::auction::BidSpace::Simplified(alphas) => Some(alphas.clone()),
            posauc::auction::BidSpace::Expressive => None,
        };
        let hint = self.bids.tie_hint.as_ref().map(|pairs| pairs.iter().copied().collect::<TieHint>());
        match self.bids.strategy.as_str() {
            "equilibrium" => {
                if simplified.is_some() {
                    bail!("equilibrium bids are expressive; use the expressive bid space");
                }
                let (bids, hint) = construct_equilibrium_bids(values, curve);
                Ok((bids.into(), Some(hint)))
            }
            "truthful" => match simplified {
                Some(alphas) => Ok((SimplifiedBidProfile::new(values.values().to_vec(), alphas)?.into(), hint)),
                None => Ok((ExpressiveBidProfile::truthful(values, curve)?.into(), hint)),
            },
            "inline" => match (simplified, &self.bids.rows, &self.bids.scalars) {
                (None, Some(rows), None) => Ok((ExpressiveBidProfile::new(rows.clone())?.into(), hint)),
                (Some(alphas), None, Some(scalars)) => {
                    Ok((SimplifiedBidProfile::new(scalars.clone(), alphas)?.into(), hint))
                }
                _ => bail!("inline bids need `rows` for expressive or `scalars` for simplified mechanisms"),
            },
            other => bail!("unknown bid strategy `{other}` (expected equilibrium, truthful or inline)"),
        }
    }
}
