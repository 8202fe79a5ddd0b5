//! Staking-manager dispatch to mock external yield platforms.
//!
//! Five vault functions — add/remove liquidity, stake, unstake, claim — are
//! routed by instruction ID through a replaceable staking-manager layer, so
//! external platform churn never forces a vault redeploy. Inputs always leave
//! from the safe-house balance and every output token (LP receipts, unstaked
//! assets, rewards) is credited to the registry's return address, which is
//! the safe-house unless the owners re-point it by multi-sig. These flows
//! bypass withdraw/counter-deposit aggregation entirely.
//!
//! Pools are fee-less constant-product mocks that accept only proportional
//! liquidity, which keeps LP tokens valuable exactly as their share of
//! reserves.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ledger::{Address, Amount, AssetId, CallOutcome, AMOUNT_UNIT};
use crate::math::{isqrt_mul, mul_wide, muldiv};
use crate::valuation::UsdValue;
use crate::world::{Role, World};

/// A fee-less constant-product pool. With only proportional adds and removes
/// the reserve product scales exactly with the square of the LP supply ratio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockPool {
    pub pool_id: String,
    pub asset_a: AssetId,
    pub asset_b: AssetId,
    pub reserve_a: Amount,
    pub reserve_b: Amount,
    pub lp_supply: Amount,
    pub lp_token: AssetId,
    /// Reward tokens minted per block per whole staked LP token, 18-decimal.
    pub reward_rate: Amount,
    /// Ledger account that holds the pool's reserves.
    pub account: Address,
    /// Ledger account that holds staked LP tokens.
    pub staking_account: Address,
}

/// Safe-house staking position in one pool.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StakePosition {
    pub staked: Amount,
    pub pending_rewards: Amount,
    pub checkpoint_block: u64,
}

/// Routing state: which staking manager serves each asset, which pool each
/// instruction ID drives, and where outputs are returned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmRegistry {
    pub sm_by_asset: BTreeMap<AssetId, Address>,
    pub instructions: BTreeMap<u32, String>,
    pub return_address: Address,
}

/// A routed call: instruction ID plus parallel asset/quantity lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakingInstruction {
    pub instruction_id: u32,
    pub assets: Vec<AssetId>,
    #[serde(with = "amount_vec_string")]
    pub quantities: Vec<Amount>,
}

mod amount_vec_string {
    use super::Amount;
    use serde::{self, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Amount], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|a| a.render()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Amount>, D::Error> {
        let texts = Vec::<String>::deserialize(d)?;
        texts.into_iter().map(|t| Amount::parse(&t).map_err(serde::de::Error::custom)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StakingAction {
    AddLiquidity,
    RemoveLiquidity,
    Stake,
    UnStake,
    ClaimRewards,
}

impl MockPool {
    /// Mint LP for a liquidity deposit. The first provision mints
    /// floor(isqrt(dx × dy)); later deposits must match the reserve ratio
    /// exactly (dx × reserve_b == dy × reserve_a) and mint
    /// floor(lp_supply × dx / reserve_a).
    pub fn add_liquidity(&mut self, dx: Amount, dy: Amount) -> Result<Amount> {
        let minted = if self.lp_supply.is_zero() {
            if dx.is_zero() || dy.is_zero() {
                return Err(Error::ZeroAmount);
            }
            Amount(isqrt_mul(dx.0, dy.0))
        } else {
            if mul_wide(dx.0, self.reserve_b.0) != mul_wide(dy.0, self.reserve_a.0) {
                return Err(Error::NonProportional);
            }
            Amount(muldiv(self.lp_supply.0, dx.0, self.reserve_a.0)?)
        };
        self.reserve_a = self.reserve_a.checked_add(dx)?;
        self.reserve_b = self.reserve_b.checked_add(dy)?;
        self.lp_supply = self.lp_supply.checked_add(minted)?;
        Ok(minted)
    }

    /// Burn LP and return the proportional share of both reserves, floored.
    pub fn remove_liquidity(&mut self, lp: Amount) -> Result<(Amount, Amount)> {
        if lp > self.lp_supply {
            return Err(Error::InsufficientLp);
        }
        if lp.is_zero() {
            return Ok((Amount::ZERO, Amount::ZERO));
        }
        let out_a = Amount(muldiv(self.reserve_a.0, lp.0, self.lp_supply.0)?);
        let out_b = Amount(muldiv(self.reserve_b.0, lp.0, self.lp_supply.0)?);
        self.reserve_a = self.reserve_a.checked_sub(out_a)?;
        self.reserve_b = self.reserve_b.checked_sub(out_b)?;
        self.lp_supply = self.lp_supply.checked_sub(lp)?;
        Ok((out_a, out_b))
    }
}

/// Linear reward accrual: rate × staked × blocks / 10^18.
fn accrued(rate: Amount, staked: Amount, blocks: u64) -> Result<Amount> {
    let scaled_rate = rate.0.checked_mul(u128::from(blocks)).ok_or(Error::Overflow)?;
    Ok(Amount(muldiv(scaled_rate, staked.0, AMOUNT_UNIT)?))
}

#[derive(Serialize)]
struct DispatchPayload<'a> {
    action: StakingAction,
    instruction: &'a StakingInstruction,
}

impl World {
    /// Route a staking call through the registry. The instruction ID selects
    /// the pool; the pool's LP token selects the serving staking manager.
    /// Outputs land at the registry's return address.
    pub fn dispatch(
        &mut self,
        caller: Address,
        action: StakingAction,
        instruction: &StakingInstruction,
    ) -> Result<()> {
        let payload = serde_json::to_vec(&DispatchPayload { action, instruction }).unwrap();
        let result = self.dispatch_inner(caller, action, instruction);
        let outcome = match &result {
            Ok(message) => CallOutcome::success(message.clone()),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(caller, self.safehouse_address, "dispatch", payload, outcome);
        result.map(|_| ())
    }

    fn dispatch_inner(
        &mut self,
        caller: Address,
        action: StakingAction,
        instruction: &StakingInstruction,
    ) -> Result<String> {
        if self.role_of(caller) != Role::Manager {
            return Err(Error::NotAManager);
        }
        if instruction.assets.len() != instruction.quantities.len() {
            return Err(Error::Malformed);
        }
        let pool_id = self
            .sm_registry
            .instructions
            .get(&instruction.instruction_id)
            .cloned()
            .ok_or(Error::UnknownInstruction)?;
        let lp_token = self.pools.get(&pool_id).ok_or(Error::UnknownInstruction)?.lp_token.clone();
        let sm = *self.sm_registry.sm_by_asset.get(&lp_token).ok_or(Error::UnknownInstruction)?;
        let return_address = self.sm_registry.return_address;
        match action {
            StakingAction::AddLiquidity => {
                let pool = self.pools.get(&pool_id).unwrap();
                let (asset_a, asset_b, account) =
                    (pool.asset_a.clone(), pool.asset_b.clone(), pool.account);
                if instruction.assets != [asset_a.clone(), asset_b.clone()] {
                    return Err(Error::UnknownInstruction);
                }
                let (dx, dy) = (instruction.quantities[0], instruction.quantities[1]);
                for (asset, qty) in [(&asset_a, dx), (&asset_b, dy)] {
                    if self.frozen_assets.contains(asset) {
                        return Err(Error::FrozenAsset);
                    }
                    if self.balance(self.safehouse_address, asset) < qty {
                        return Err(Error::InsufficientHoldings);
                    }
                }
                // Validate the mint before moving anything.
                let minted = {
                    let mut probe = self.pools.get(&pool_id).unwrap().clone();
                    probe.add_liquidity(dx, dy)?
                };
                self.transfer_internal(self.safehouse_address, account, &asset_a, dx)?;
                self.transfer_internal(self.safehouse_address, account, &asset_b, dy)?;
                let pool = self.pools.get_mut(&pool_id).unwrap();
                let minted_check = pool.add_liquidity(dx, dy)?;
                debug_assert_eq!(minted, minted_check);
                let lp = pool.lp_token.clone();
                self.mint_internal(return_address, &lp, minted)?;
                Ok(format!("sm {sm} pool {pool_id}: minted {} lp", minted.render()))
            }
            StakingAction::RemoveLiquidity => {
                if instruction.assets != [lp_token.clone()] {
                    return Err(Error::UnknownInstruction);
                }
                let lp = instruction.quantities[0];
                if self.frozen_assets.contains(&lp_token) {
                    return Err(Error::FrozenAsset);
                }
                if self.balance(self.safehouse_address, &lp_token) < lp {
                    return Err(Error::InsufficientHoldings);
                }
                let pool = self.pools.get_mut(&pool_id).unwrap();
                let account = pool.account;
                let (asset_a, asset_b) = (pool.asset_a.clone(), pool.asset_b.clone());
                let (out_a, out_b) = pool.remove_liquidity(lp)?;
                self.burn_internal(self.safehouse_address, &lp_token, lp)?;
                self.transfer_internal(account, return_address, &asset_a, out_a)?;
                self.transfer_internal(account, return_address, &asset_b, out_b)?;
                Ok(format!("sm {sm} pool {pool_id}: returned {} / {}", out_a.render(), out_b.render()))
            }
            StakingAction::Stake => {
                if instruction.assets != [lp_token.clone()] {
                    return Err(Error::UnknownInstruction);
                }
                let amt = instruction.quantities[0];
                if self.frozen_assets.contains(&lp_token) {
                    return Err(Error::FrozenAsset);
                }
                if self.balance(self.safehouse_address, &lp_token) < amt {
                    return Err(Error::InsufficientHoldings);
                }
                self.accrue_rewards(&pool_id)?;
                let staking_account = self.pools.get(&pool_id).unwrap().staking_account;
                self.transfer_internal(self.safehouse_address, staking_account, &lp_token, amt)?;
                let position = self.stake_positions.entry(pool_id.clone()).or_default();
                position.staked = position.staked.checked_add(amt)?;
                Ok(format!("sm {sm} pool {pool_id}: staked {}", amt.render()))
            }
            StakingAction::UnStake => {
                if instruction.assets != [lp_token.clone()] {
                    return Err(Error::UnknownInstruction);
                }
                let amt = instruction.quantities[0];
                let staked = self.stake_positions.get(&pool_id).map(|p| p.staked).unwrap_or_default();
                if staked < amt {
                    return Err(Error::InsufficientStake);
                }
                self.accrue_rewards(&pool_id)?;
                let staking_account = self.pools.get(&pool_id).unwrap().staking_account;
                self.transfer_internal(staking_account, return_address, &lp_token, amt)?;
                let position = self.stake_positions.get_mut(&pool_id).unwrap();
                position.staked = position.staked.checked_sub(amt)?;
                Ok(format!("sm {sm} pool {pool_id}: unstaked {}", amt.render()))
            }
            StakingAction::ClaimRewards => {
                if !self.stake_positions.contains_key(&pool_id) {
                    return Err(Error::NoPosition);
                }
                self.accrue_rewards(&pool_id)?;
                let position = self.stake_positions.get_mut(&pool_id).unwrap();
                let reward = position.pending_rewards;
                position.pending_rewards = Amount::ZERO;
                let reward_token = self.reward_token.clone();
                self.mint_internal(return_address, &reward_token, reward)?;
                Ok(format!("sm {sm} pool {pool_id}: claimed {}", reward.render()))
            }
        }
    }

    /// Fold elapsed blocks into the position's pending rewards and move the
    /// checkpoint to the current block.
    fn accrue_rewards(&mut self, pool_id: &str) -> Result<()> {
        let rate = self.pools.get(pool_id).ok_or(Error::UnknownInstruction)?.reward_rate;
        let height = self.clock.height;
        let position = self.stake_positions.entry(pool_id.to_string()).or_default();
        let elapsed = height - position.checkpoint_block;
        if elapsed > 0 && !position.staked.is_zero() {
            let earned = accrued(rate, position.staked, elapsed)?;
            position.pending_rewards = position.pending_rewards.checked_add(earned)?;
        }
        position.checkpoint_block = height;
        Ok(())
    }

    pub(crate) fn pool_by_lp_token(&self, asset: &AssetId) -> Option<String> {
        self.pools.values().find(|p| &p.lp_token == asset).map(|p| p.pool_id.clone())
    }

    /// Price one whole LP token as its holder share of reserves at aggregated
    /// per-asset prices: floor(pool value × 10^18 / lp_supply).
    pub(crate) fn lp_token_price(&self, pool_id: &str, at_block: u64) -> Result<UsdValue> {
        let pool = self.pools.get(pool_id).ok_or(Error::NoQuotes)?;
        if pool.lp_supply.is_zero() {
            return Err(Error::NoQuotes);
        }
        let price_a = self.aggregate_price(&pool.asset_a, at_block)?;
        let price_b = self.aggregate_price(&pool.asset_b, at_block)?;
        let value_a = crate::valuation::entry_value(price_a, pool.reserve_a)?;
        let value_b = crate::valuation::entry_value(price_b, pool.reserve_b)?;
        let total = value_a.checked_add(value_b)?;
        Ok(UsdValue(muldiv(total.0, AMOUNT_UNIT, pool.lp_supply.0)?))
    }
}
