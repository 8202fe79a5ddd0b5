//! Scenario files: a world configuration plus an ordered event script.
//!
//! All JSON keys are lowercase snake case; token amounts and USD values are
//! decimal strings; commitments are 64 lowercase hex chars; actors are
//! referenced by their declared names. Events must be sorted by block and
//! every actor must be declared in the world configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use safehouse_core::{
    governance::parse_param_value, Amount, AssetId, Basket, BasketEntry, Commitment, GovernanceAction,
    ParamName, StakingAction, StakingInstruction, UsdValue, World, WorldConfig,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown actor: {0}")]
    UnknownActor(String),
    #[error("instance too large for exhaustive search")]
    InstanceTooLarge,
    #[error("protocol error: {0}")]
    World(#[from] safehouse_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub world_config: WorldConfig,
    /// After the last event the clock advances to this height, letting
    /// deadline checks (window expiry) fire before the report is cut.
    #[serde(default)]
    pub end_block: Option<u64>,
    pub events: Vec<ScenarioEvent>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEvent {
    pub block: u64,
    pub actor: String,
    pub op: EventOp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventOp {
    Transfer { to: String, asset: String, amount: String },
    InvestorDeposit { amount: String },
    InvestorRedeem { fund_tokens: String },
    SweepToSafehouse {},
    ManagerWithdraw { basket: Vec<BasketEntryDef>, otntp_plaintext: String, next_commitment: String },
    CounterDeposit { basket: Vec<BasketEntryDef> },
    SeedCommitment { commitment: String },
    VerifyAndRotate { plaintext: String, next_commitment: String },
    Propose { action: ActionDef },
    Sign { proposal_id: u64 },
    Execute { proposal_id: u64 },
    RevokeManager { manager: String },
    FeedUpdate { feed_id: String, asset: String, price: String },
    Dispatch { action: StakingAction, instruction_id: u32, assets: Vec<String>, quantities: Vec<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasketEntryDef {
    pub asset: String,
    pub qty: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionDef {
    SetParameter {
        name: ParamName,
        value: String,
    },
    GrantManager {
        addr: String,
    },
    SetReferencePrice {
        asset: String,
        price: String,
        #[serde(default = "default_band")]
        band_bp: u32,
    },
    SetReturnAddress {
        addr: String,
    },
    ReopenSafeHouse {},
    RegisterStakingManager {
        asset: String,
        sm: String,
    },
    AddToWhitelist {
        addr: String,
    },
    ReleaseFlagged {
        id: u64,
    },
}

fn default_band() -> u32 {
    1000
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, SimError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Events sorted by block; every actor declared; payload fields parse.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut last_block = 0u64;
        for (index, event) in self.events.iter().enumerate() {
            if event.block < last_block {
                return Err(SimError::Schema(format!(
                    "event {index} at block {} precedes block {last_block}",
                    event.block
                )));
            }
            last_block = event.block;
        }
        let world = World::from_config(&self.world_config)?;
        for event in &self.events {
            if world.resolve_actor(&event.actor).is_none() {
                return Err(SimError::UnknownActor(event.actor.clone()));
            }
        }
        Ok(())
    }
}

pub(crate) fn parse_basket(entries: &[BasketEntryDef]) -> Result<Basket, SimError> {
    let mut basket = Basket::default();
    for entry in entries {
        basket
            .entries
            .push(BasketEntry { asset: AssetId::new(&entry.asset)?, qty: Amount::parse(&entry.qty)? });
    }
    Ok(basket)
}

pub(crate) fn parse_action(world: &World, action: &ActionDef) -> Result<GovernanceAction, SimError> {
    let resolve =
        |name: &str| world.resolve_actor(name).ok_or_else(|| SimError::UnknownActor(name.to_string()));
    Ok(match action {
        ActionDef::SetParameter { name, value } => {
            GovernanceAction::SetParameter(*name, parse_param_value(*name, value)?)
        }
        ActionDef::GrantManager { addr } => GovernanceAction::GrantManager(resolve(addr)?),
        ActionDef::SetReferencePrice { asset, price, band_bp } => GovernanceAction::SetReferencePrice {
            asset: AssetId::new(asset)?,
            price: UsdValue::parse(price)?,
            band_bp: *band_bp,
        },
        ActionDef::SetReturnAddress { addr } => GovernanceAction::SetReturnAddress(resolve(addr)?),
        ActionDef::ReopenSafeHouse {} => GovernanceAction::ReopenSafeHouse,
        ActionDef::RegisterStakingManager { asset, sm } => GovernanceAction::RegisterStakingManager {
            asset: AssetId::new(asset)?,
            // staking managers are contracts, not declared actors; their
            // addresses derive from the label
            sm: safehouse_core::Address::derive(sm),
        },
        ActionDef::AddToWhitelist { addr } => GovernanceAction::AddToWhitelist(resolve(addr)?),
        ActionDef::ReleaseFlagged { id } => GovernanceAction::ReleaseFlagged(*id),
    })
}

pub(crate) fn parse_commitment(text: &str) -> Result<Commitment, SimError> {
    Ok(Commitment::from_hex(text)?)
}

pub(crate) fn parse_instruction(
    instruction_id: u32,
    assets: &[String],
    quantities: &[String],
) -> Result<StakingInstruction, SimError> {
    if assets.len() != quantities.len() {
        return Err(SimError::Schema("assets and quantities differ in length".into()));
    }
    Ok(StakingInstruction {
        instruction_id,
        assets: assets.iter().map(|a| AssetId::new(a)).collect::<Result<_, _>>()?,
        quantities: quantities.iter().map(|q| Amount::parse(q)).collect::<Result<_, _>>()?,
    })
}
