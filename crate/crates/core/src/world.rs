//! The world: one value holding the entire simulated state.
//!
//! Every operation is a transition on this value; a failed transition leaves
//! the world unchanged except for the effects the protocol itself specifies
//! (failed password attempts count, and every call — failed or not — is
//! appended to the public log). Worlds constructed from the same
//! configuration and fed the same event sequence produce identical logs and
//! balances. There is no hidden state and no wall clock; block height is the
//! only notion of time.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
pub use crate::governance::Role;
use crate::governance::{OwnerSet, Proposal};
use crate::ledger::{export_log, Address, Amount, AssetId, BlockClock, CallOutcome, TxRecord};
use crate::otntp::AuthState;
use crate::safehouse::{
    AllowanceState, CounterDepositWindow, FlaggedWithdrawal, FundShareState, SafeHouseParams,
    SafeHouseStatus,
};
use crate::staking::{MockPool, SmRegistry, StakePosition};
use crate::valuation::{PriceQuote, ReferencePrice, UsdValue};

/// Which counter-deposit criterion governs the run. Fixed at construction;
/// the two criteria are alternatives, not modes to switch between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionMode {
    One,
    Two,
}

/// Sentinel for a disabled X flag rule: no realistic trailing outflow
/// reaches it.
pub const FLAG_X_DISABLED: UsdValue = UsdValue(u128::MAX / 4);

#[derive(Debug, Clone)]
pub struct World {
    pub clock: BlockClock,
    pub mainsc_address: Address,
    pub safehouse_address: Address,
    pub stable_asset: AssetId,
    pub fund_token: AssetId,
    pub reward_token: AssetId,

    // named actors, for harness lookups and report rendering
    pub actors: BTreeMap<String, Address>,

    // ledger
    pub balances: BTreeMap<(Address, AssetId), Amount>,
    pub log: Vec<TxRecord>,

    // governance
    pub owner_set: OwnerSet,
    pub managers: BTreeSet<Address>,
    pub proposals: Vec<Proposal>,

    // otntp
    pub auth: BTreeMap<Address, AuthState>,
    /// House-level wrong-attempt counter; the vault locks for everyone when
    /// it reaches `max_failed_auth`.
    pub auth_failure_count: u32,

    // safe-house machine
    pub params: SafeHouseParams,
    pub criterion_mode: CriterionMode,
    pub status: SafeHouseStatus,
    pub window: Option<CounterDepositWindow>,
    pub allowance: AllowanceState,
    pub last_withdraw_block: Option<u64>,
    pub whitelist: BTreeMap<Address, u64>,
    pub fund_shares: FundShareState,
    pub deposited_usd: BTreeMap<Address, UsdValue>,
    pub redeemed_usd: BTreeMap<Address, UsdValue>,
    pub redemption_outflows: Vec<(Address, u64, UsdValue)>,
    pub flag_queue: Vec<FlaggedWithdrawal>,

    // valuation
    pub approved_assets: BTreeSet<AssetId>,
    pub frozen_assets: BTreeSet<AssetId>,
    pub feeds: Vec<String>,
    pub quotes: Vec<PriceQuote>,
    pub aggregate_history: Vec<(AssetId, u64, UsdValue)>,
    pub reference_prices: BTreeMap<AssetId, ReferencePrice>,

    // staking
    pub pools: BTreeMap<String, MockPool>,
    pub stake_positions: BTreeMap<String, StakePosition>,
    pub sm_registry: SmRegistry,

    // run totals for reporting
    pub extracted_total: UsdValue,
    pub counter_deposit_total: UsdValue,
    pub flags_raised: u64,
    pub locks_count: u64,
    pub freezes_raised: u64,
}

/// World construction parameters, the `world_config` block of a scenario
/// file. All keys lowercase snake case; amounts and USD values as decimal
/// strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    #[serde(default = "default_seconds_per_block")]
    pub seconds_per_block: u64,
    pub stable_asset: String,
    pub fund_token: String,
    pub owners: Vec<String>,
    pub threshold: usize,
    #[serde(default)]
    pub managers: Vec<String>,
    /// Investors, attackers, feed operators — every event actor must be
    /// declared somewhere in the config.
    #[serde(default)]
    pub extra_actors: Vec<String>,
    #[serde(default)]
    pub assets: Vec<AssetConfig>,
    #[serde(default)]
    pub balances: Vec<BalanceConfig>,
    pub params: ParamsConfig,
    #[serde(default)]
    pub pools: Vec<PoolConfig>,
    #[serde(default)]
    pub feeds: Vec<String>,
    #[serde(default)]
    pub reference_prices: Vec<ReferenceConfig>,
}

fn default_seconds_per_block() -> u64 {
    15
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetConfig {
    pub symbol: String,
    #[serde(default)]
    pub approved: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceConfig {
    pub actor: String,
    pub asset: String,
    pub amount: String,
}

/// Time-valued parameters may be given in natural units; they are converted
/// to block counts at construction by ceiling division against the world's
/// seconds-per-block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub max_out: String,
    pub tolerance_bp: u32,
    #[serde(default)]
    pub cd_time_blocks: Option<u64>,
    #[serde(default)]
    pub cd_time_seconds: Option<u64>,
    #[serde(default)]
    pub min_blocks_between_withdrawals: u64,
    pub criterion_mode: CriterionMode,
    #[serde(default = "default_max_failed_auth")]
    pub max_failed_auth: u32,
    #[serde(default)]
    pub flag_x: Option<String>,
    #[serde(default)]
    pub flag_y_blocks: Option<u64>,
    #[serde(default)]
    pub flag_y_minutes: Option<u64>,
    #[serde(default)]
    pub flag_z: Option<String>,
    #[serde(default)]
    pub whitelist_lock_blocks: u64,
}

fn default_max_failed_auth() -> u32 {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    pub pool_id: String,
    pub asset_a: String,
    pub asset_b: String,
    pub lp_token: String,
    pub reward_rate_8dp: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub asset: String,
    pub price: String,
    #[serde(default = "default_band_bp")]
    pub band_bp: u32,
}

fn default_band_bp() -> u32 {
    1000
}

impl World {
    pub fn from_config(config: &WorldConfig) -> Result<World> {
        let clock = BlockClock::new(config.seconds_per_block);
        let stable_asset = AssetId::new(&config.stable_asset)?;
        let fund_token = AssetId::new(&config.fund_token)?;
        let reward_token = AssetId::new("RWD")?;
        if stable_asset == fund_token {
            return Err(Error::Malformed);
        }

        let mut actors = BTreeMap::new();
        for name in config.owners.iter().chain(&config.managers).chain(&config.extra_actors) {
            if name.is_empty() || name == "mainsc" || name == "safehouse" {
                return Err(Error::Malformed);
            }
            actors.insert(name.clone(), Address::derive(name));
        }

        let owners: BTreeSet<Address> = config.owners.iter().map(|n| Address::derive(n)).collect();
        if owners.len() != config.owners.len() {
            return Err(Error::Malformed);
        }
        let owner_set = OwnerSet::new(owners, config.threshold)?;
        let managers: BTreeSet<Address> = config.managers.iter().map(|n| Address::derive(n)).collect();
        if managers.iter().any(|m| owner_set.owners.contains(m)) {
            return Err(Error::Malformed);
        }

        let mut approved_assets = BTreeSet::new();
        approved_assets.insert(stable_asset.clone());
        for asset in &config.assets {
            let id = AssetId::new(&asset.symbol)?;
            if asset.approved {
                approved_assets.insert(id);
            }
        }

        let params = SafeHouseParams {
            max_out: UsdValue::parse(&config.params.max_out)?,
            tolerance_bp: config.params.tolerance_bp.min(10_000),
            cd_time_blocks: match (config.params.cd_time_blocks, config.params.cd_time_seconds) {
                (Some(blocks), _) => blocks,
                (None, Some(seconds)) => clock.seconds_to_blocks(seconds),
                (None, None) => 0,
            },
            min_blocks_between_withdrawals: config.params.min_blocks_between_withdrawals,
            max_failed_auth: config.params.max_failed_auth,
            flag_x: match &config.params.flag_x {
                Some(text) => UsdValue::parse(text)?,
                None => FLAG_X_DISABLED,
            },
            flag_y_blocks: match (config.params.flag_y_blocks, config.params.flag_y_minutes) {
                (Some(blocks), _) => blocks,
                (None, Some(minutes)) => clock.minutes_to_blocks(minutes),
                (None, None) => 0,
            },
            flag_z: match &config.params.flag_z {
                Some(text) => UsdValue::parse(text)?,
                None => UsdValue::ZERO,
            },
            whitelist_lock_blocks: config.params.whitelist_lock_blocks,
        };

        let safehouse_address = Address::derive("safehouse");
        let mut pools = BTreeMap::new();
        let mut instructions = BTreeMap::new();
        let mut sm_by_asset = BTreeMap::new();
        for (index, pool_config) in config.pools.iter().enumerate() {
            let lp_token = AssetId::new(&pool_config.lp_token)?;
            let rate_8dp = UsdValue::parse(&pool_config.reward_rate_8dp)?;
            let pool = MockPool {
                pool_id: pool_config.pool_id.clone(),
                asset_a: AssetId::new(&pool_config.asset_a)?,
                asset_b: AssetId::new(&pool_config.asset_b)?,
                reserve_a: Amount::ZERO,
                reserve_b: Amount::ZERO,
                lp_supply: Amount::ZERO,
                lp_token: lp_token.clone(),
                reward_rate: Amount(rate_8dp.0.checked_mul(10_000_000_000).ok_or(Error::Overflow)?),
                account: Address::derive(&format!("pool:{}", pool_config.pool_id)),
                staking_account: Address::derive(&format!("staking:{}", pool_config.pool_id)),
            };
            // Instruction IDs are dense small integers assigned in pool
            // declaration order; governance can re-point the serving SM.
            instructions.insert(index as u32, pool_config.pool_id.clone());
            sm_by_asset.insert(lp_token, Address::derive(&format!("sm:{}", pool_config.pool_id)));
            if pools.insert(pool_config.pool_id.clone(), pool).is_some() {
                return Err(Error::Malformed);
            }
        }

        let mut reference_prices = BTreeMap::new();
        for reference in &config.reference_prices {
            let asset = AssetId::new(&reference.asset)?;
            reference_prices.insert(
                asset.clone(),
                ReferencePrice {
                    asset,
                    price: UsdValue::parse(&reference.price)?,
                    band_bp: reference.band_bp,
                },
            );
        }

        let mut world = World {
            clock,
            mainsc_address: Address::derive("mainsc"),
            safehouse_address,
            stable_asset,
            fund_token,
            reward_token,
            actors,
            balances: BTreeMap::new(),
            log: Vec::new(),
            owner_set,
            managers,
            proposals: Vec::new(),
            auth: BTreeMap::new(),
            auth_failure_count: 0,
            params,
            criterion_mode: config.params.criterion_mode,
            status: SafeHouseStatus::Open,
            window: None,
            allowance: AllowanceState::default(),
            last_withdraw_block: None,
            whitelist: BTreeMap::new(),
            fund_shares: FundShareState::default(),
            deposited_usd: BTreeMap::new(),
            redeemed_usd: BTreeMap::new(),
            redemption_outflows: Vec::new(),
            flag_queue: Vec::new(),
            approved_assets,
            frozen_assets: BTreeSet::new(),
            feeds: config.feeds.clone(),
            quotes: Vec::new(),
            aggregate_history: Vec::new(),
            reference_prices,
            pools,
            stake_positions: BTreeMap::new(),
            sm_registry: SmRegistry { sm_by_asset, instructions, return_address: safehouse_address },
            extracted_total: UsdValue::ZERO,
            counter_deposit_total: UsdValue::ZERO,
            flags_raised: 0,
            locks_count: 0,
            freezes_raised: 0,
        };

        for balance in &config.balances {
            let address = world.resolve_actor(&balance.actor).ok_or(Error::Malformed)?;
            let asset = AssetId::new(&balance.asset)?;
            let amount = Amount::parse(&balance.amount)?;
            world.mint_for_setup(address, &asset, amount)?;
        }
        Ok(world)
    }

    /// Look up an actor address by name. The special names `mainsc` and
    /// `safehouse` resolve to the two contract addresses.
    pub fn resolve_actor(&self, name: &str) -> Option<Address> {
        match name {
            "mainsc" => Some(self.mainsc_address),
            "safehouse" => Some(self.safehouse_address),
            _ => self.actors.get(name).copied(),
        }
    }

    pub fn role_of(&self, address: Address) -> Role {
        if self.owner_set.owners.contains(&address) {
            Role::Owner
        } else if self.managers.contains(&address) {
            Role::Manager
        } else {
            Role::None
        }
    }

    pub fn balance(&self, address: Address, asset: &AssetId) -> Amount {
        self.balances.get(&(address, asset.clone())).copied().unwrap_or(Amount::ZERO)
    }

    /// Advance the clock by `n` blocks, evaluating deadline checks once per
    /// crossed block in order.
    pub fn advance_blocks(&mut self, n: u64) {
        for _ in 0..n {
            self.clock.height += 1;
            self.on_block_tick();
        }
    }

    /// Public transfer entry point; records the call.
    pub fn transfer(
        &mut self,
        from: Address,
        to: Address,
        asset: &AssetId,
        amount: Amount,
    ) -> Result<()> {
        let payload = format!("{} {} -> {}", amount.render(), asset, to).into_bytes();
        let result = self.transfer_internal(from, to, asset, amount);
        let outcome = match &result {
            Ok(()) => CallOutcome::success("transferred"),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(from, to, "transfer", payload, outcome);
        result
    }

    /// Balance move without logging; used inside larger transitions.
    /// Per-asset totals are conserved: the same amount leaves and arrives.
    pub(crate) fn transfer_internal(
        &mut self,
        from: Address,
        to: Address,
        asset: &AssetId,
        amount: Amount,
    ) -> Result<()> {
        let from_balance = self.balance(from, asset);
        if from_balance < amount {
            return Err(Error::InsufficientBalance);
        }
        if from == to {
            return Ok(());
        }
        let to_balance = self.balance(to, asset);
        let new_to = to_balance.checked_add(amount)?;
        self.balances.insert((from, asset.clone()), from_balance.checked_sub(amount)?);
        self.balances.insert((to, asset.clone()), new_to);
        Ok(())
    }

    /// Test-setup minting. Never reachable from scenario events; initial
    /// balances come through here at construction so that conservation stays
    /// checkable over any run.
    pub fn mint_for_setup(&mut self, to: Address, asset: &AssetId, amount: Amount) -> Result<()> {
        self.mint_internal(to, asset, amount)
    }

    pub(crate) fn mint_internal(&mut self, to: Address, asset: &AssetId, amount: Amount) -> Result<()> {
        let balance = self.balance(to, asset).checked_add(amount)?;
        self.balances.insert((to, asset.clone()), balance);
        Ok(())
    }

    pub(crate) fn burn_internal(
        &mut self,
        from: Address,
        asset: &AssetId,
        amount: Amount,
    ) -> Result<()> {
        let balance = self.balance(from, asset).checked_sub(amount)?;
        self.balances.insert((from, asset.clone()), balance);
        Ok(())
    }

    /// Append a call record to the public log. Anything in the payload —
    /// password plaintexts included — is public from this point on.
    pub fn record_call(
        &mut self,
        caller: Address,
        target: Address,
        call_name: &str,
        input_payload: Vec<u8>,
        outcome: CallOutcome,
    ) -> TxRecord {
        let record = TxRecord {
            index: self.log.len() as u64,
            block: self.clock.height,
            caller,
            target,
            call_name: call_name.to_string(),
            input_payload,
            outcome,
        };
        self.log.push(record.clone());
        record
    }

    pub fn public_log(&self) -> &[TxRecord] {
        &self.log
    }

    /// JSON-lines export of the public log.
    pub fn export_log(&self) -> String {
        export_log(&self.log)
    }

    /// Mark-to-market hook for the fund's net asset value. Test and
    /// calibration use only, like setup minting.
    pub fn mark_nav(&mut self, nav: UsdValue) {
        self.fund_shares.nav = nav;
    }

    /// Sum of every balance of one asset, pool and staking accounts included.
    pub fn total_supply(&self, asset: &AssetId) -> u128 {
        self.balances.iter().filter(|((_, a), _)| a == asset).map(|(_, amount)| amount.0).sum()
    }
}
