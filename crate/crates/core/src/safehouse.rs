//! The custody state machine: investor flows through the main contract,
//! manager withdrawals under password authentication and value limits,
//! counter-deposit accounting, block-time withdrawal windows, the whitelist
//! time lock and the X/Y/Z flagging rules.
//!
//! Two alternative counter-deposit criteria exist; the mode is fixed when the
//! world is constructed.
//!
//! Criterion one: every withdrawal closes the house behind it and opens a
//! counter-deposit window. The house reopens once accumulated counter
//! deposits reach withdrawn × (1 − tolerance), inclusive at the boundary; if
//! the window's deadline passes first the house locks and only a governance
//! reopen restores it.
//!
//! Criterion two: the house stays open while the running net extraction
//! satisfies, strictly,
//!
//! ```text
//! Σ(|W| − min(max_out, |D|))  <  max_out + floor(tolerance_bp × Σ|W| / 10000)
//! ```
//!
//! summed over manager/owner flows since the house last opened. A withdrawal
//! whose post-state would break the inequality is rejected — funds do not
//! move — and the house locks pending owner intervention. While the house is
//! open the inequality therefore holds at every prefix of every run, which is
//! the bounded-loss guarantee the harness searches for counterexamples to.
//!
//! Main-contract flows (investor deposits, redemptions, sweeps) never count
//! toward counter-deposit accounting in either mode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{Address, Amount, CallOutcome};
use crate::math::muldiv;
use crate::otntp::Commitment;
use crate::valuation::{Basket, UsdValue};
use crate::world::{CriterionMode, Role, World};

/// Governing parameters; mutable only through governance execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafeHouseParams {
    /// Cap on any single withdrawal's valuation — the maximum one-time loss.
    pub max_out: UsdValue,
    /// Permitted counter-deposit shortfall, as basis points of the withdrawal.
    pub tolerance_bp: u32,
    /// Length of the counter-deposit window, in blocks.
    pub cd_time_blocks: u64,
    /// Minimum gap between successful manager withdrawals, in blocks.
    pub min_blocks_between_withdrawals: u64,
    /// Wrong password attempts (house-wide) before the vault locks.
    pub max_failed_auth: u32,
    /// X of the flag rules: trailing outflow above this is flagged.
    pub flag_x: UsdValue,
    /// Y of the flag rules: the trailing window, in blocks.
    pub flag_y_blocks: u64,
    /// Z of the flag rules: minimum net deposits before redemptions clear.
    pub flag_z: UsdValue,
    /// Blocks between whitelist addition and first permitted redemption.
    pub whitelist_lock_blocks: u64,
}

/// Why the house is locked. Every locked state refuses manager withdrawals
/// and exits only through a governance reopen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockReason {
    /// A counter-deposit window expired short of its threshold.
    WindowExpired,
    /// Too many wrong password attempts; locked for everyone.
    AuthFailures,
    /// The criterion-two allowance was exhausted; owners must intervene.
    GovernanceHold,
}

impl LockReason {
    pub fn render(self) -> &'static str {
        match self {
            LockReason::WindowExpired => "window_expired",
            LockReason::AuthFailures => "auth_failures",
            LockReason::GovernanceHold => "governance_hold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafeHouseStatus {
    Open,
    AwaitingCounterDeposit,
    Locked(LockReason),
}

impl SafeHouseStatus {
    pub fn is_locked(self) -> bool {
        matches!(self, SafeHouseStatus::Locked(_))
    }

    pub fn is_open(self) -> bool {
        self == SafeHouseStatus::Open
    }

    pub fn render(self) -> String {
        match self {
            SafeHouseStatus::Open => "open".to_string(),
            SafeHouseStatus::AwaitingCounterDeposit => "awaiting_counter_deposit".to_string(),
            SafeHouseStatus::Locked(reason) => format!("locked:{}", reason.render()),
        }
    }
}

/// Criterion-one bookkeeping for the single open window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterDepositWindow {
    pub withdrawer: Address,
    pub opened_block: u64,
    pub deadline_block: u64,
    pub withdrawn_value: UsdValue,
    /// Counter deposits from manager/owner addresses only; main-contract
    /// flows never accumulate here.
    pub accumulated_value: UsdValue,
}

/// Criterion-two bookkeeping since the house last opened.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AllowanceState {
    pub start_block: u64,
    pub cum_withdrawn: UsdValue,
    pub cum_deposit_credit: UsdValue,
}

/// Fund share issuance. Share price is nav / total_shares once shares exist,
/// 1.00 USD at bootstrap.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FundShareState {
    pub total_shares: Amount,
    pub nav: UsdValue,
}

/// A redemption held for multi-signature review.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlaggedWithdrawal {
    pub id: u64,
    pub investor: Address,
    pub fund_tokens: Amount,
    pub flagged_block: u64,
    pub released: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagOutcome {
    Clear,
    Flagged,
}

/// One manager/owner flow for the criterion evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowEvent {
    Withdraw(UsdValue),
    Deposit(UsdValue),
}

/// Reopen test for a counter-deposit window: accumulated counter deposits
/// must reach withdrawn × (10000 − tolerance_bp) / 10000, floor division,
/// inclusive at the boundary (tolerance 0 demands full repayment, not
/// strict over-payment).
pub fn evaluate_criterion_one(withdrawn: UsdValue, accumulated: UsdValue, tolerance_bp: u32) -> bool {
    let threshold = withdrawn.0 * u128::from(10_000 - tolerance_bp.min(10_000)) / 10_000;
    accumulated.0 >= threshold
}

/// Scan a flow sequence under the criterion-two inequality and return the
/// first index at which the house closes, or `None` if it never does.
/// After each event the check is, strictly and with floor arithmetic,
/// Σ|W| < max_out + floor(tolerance_bp × Σ|W| / 10000) + Σ min(max_out, |D|).
pub fn evaluate_criterion_two(
    events: &[FlowEvent],
    max_out: UsdValue,
    tolerance_bp: u32,
) -> Option<usize> {
    let mut cum_w: u128 = 0;
    let mut cum_credit: u128 = 0;
    for (index, event) in events.iter().enumerate() {
        match event {
            FlowEvent::Withdraw(v) => cum_w += v.0,
            FlowEvent::Deposit(v) => cum_credit += v.0.min(max_out.0),
        }
        let bound = max_out.0 + u128::from(tolerance_bp) * cum_w / 10_000 + cum_credit;
        if cum_w >= bound {
            return Some(index);
        }
    }
    None
}

#[derive(Serialize)]
struct DepositPayload<'a> {
    amount: &'a str,
}

#[derive(Serialize)]
struct RedeemPayload<'a> {
    fund_tokens: &'a str,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct WithdrawPayload {
    pub basket: Basket,
    pub otntp_plaintext: String,
    pub next_commitment: String,
}

#[derive(Serialize)]
struct CounterDepositPayload<'a> {
    basket: &'a Basket,
}

impl World {
    /// Accept stable tokens from an investor through the main contract and
    /// mint fund shares at the current share price. First-time depositors are
    /// whitelisted automatically at the current block; the redemption time
    /// lock runs from there.
    pub fn investor_deposit(&mut self, investor: Address, stable_amt: Amount) -> Result<Amount> {
        let payload = serde_json::to_vec(&DepositPayload { amount: &stable_amt.render() }).unwrap();
        let result = self.investor_deposit_inner(investor, stable_amt);
        let outcome = match &result {
            Ok(minted) => CallOutcome::success(format!("minted {}", minted.render())),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(investor, self.mainsc_address, "investor_deposit", payload, outcome);
        result
    }

    fn investor_deposit_inner(&mut self, investor: Address, stable_amt: Amount) -> Result<Amount> {
        if stable_amt.is_zero() {
            return Err(Error::ZeroAmount);
        }
        if self.balance(investor, &self.stable_asset) < stable_amt {
            return Err(Error::InsufficientBalance);
        }
        // The fund accounts for the stable token at par.
        let value = UsdValue(stable_amt.0 / 10_000_000_000);
        let minted = if self.fund_shares.total_shares.is_zero() {
            Amount(value.0.checked_mul(10_000_000_000).ok_or(Error::Overflow)?)
        } else {
            Amount(muldiv(value.0, self.fund_shares.total_shares.0, self.fund_shares.nav.0.max(1))?)
        };
        let stable = self.stable_asset.clone();
        let fund = self.fund_token.clone();
        self.transfer_internal(investor, self.mainsc_address, &stable, stable_amt)?;
        self.mint_internal(investor, &fund, minted)?;
        self.fund_shares.total_shares = self.fund_shares.total_shares.checked_add(minted)?;
        self.fund_shares.nav = self.fund_shares.nav.checked_add(value)?;
        let deposited = self.deposited_usd.entry(investor).or_default();
        *deposited = deposited.checked_add(value)?;
        self.whitelist.entry(investor).or_insert(self.clock.height);
        Ok(minted)
    }

    /// Redeem fund shares for stable tokens at the current share price.
    /// Redemptions are main-contract flows: the main contract is topped up
    /// from the safe-house as needed and nothing here touches counter-deposit
    /// accounting. The flag rules gate the payout; a flagged redemption is
    /// queued for governance release instead of paid.
    pub fn investor_redeem(&mut self, investor: Address, fund_tokens: Amount) -> Result<Amount> {
        let payload = serde_json::to_vec(&RedeemPayload { fund_tokens: &fund_tokens.render() }).unwrap();
        let result = self.investor_redeem_inner(investor, fund_tokens);
        let outcome = match &result {
            Ok(paid) => CallOutcome::success(format!("paid {}", paid.render())),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(investor, self.mainsc_address, "investor_redeem", payload, outcome);
        result
    }

    fn investor_redeem_inner(&mut self, investor: Address, fund_tokens: Amount) -> Result<Amount> {
        if fund_tokens.is_zero() {
            return Err(Error::ZeroAmount);
        }
        let unlock =
            self.whitelist.get(&investor).map(|added| added + self.params.whitelist_lock_blocks);
        match unlock {
            Some(unlock) if self.clock.height >= unlock => {}
            _ => return Err(Error::WhitelistLocked),
        }
        if self.balance(investor, &self.fund_token) < fund_tokens {
            return Err(Error::InsufficientShares);
        }
        let payout = self.share_payout(fund_tokens)?;
        if self.flag_check(investor, payout) == FlagOutcome::Flagged {
            let id = self.flag_queue.len() as u64;
            self.flag_queue.push(FlaggedWithdrawal {
                id,
                investor,
                fund_tokens,
                flagged_block: self.clock.height,
                released: false,
            });
            self.flags_raised += 1;
            return Err(Error::Flagged);
        }
        self.pay_redemption(investor, fund_tokens)
    }

    fn share_payout(&self, fund_tokens: Amount) -> Result<UsdValue> {
        if self.fund_shares.total_shares.is_zero() {
            return Err(Error::InsufficientShares);
        }
        Ok(UsdValue(muldiv(fund_tokens.0, self.fund_shares.nav.0, self.fund_shares.total_shares.0)?))
    }

    /// Burn shares and pay stable at the current share price, topping up the
    /// main contract from the safe-house when it runs short.
    pub(crate) fn pay_redemption(&mut self, investor: Address, fund_tokens: Amount) -> Result<Amount> {
        if self.balance(investor, &self.fund_token) < fund_tokens {
            return Err(Error::InsufficientShares);
        }
        let payout = self.share_payout(fund_tokens)?;
        let stable_owed = Amount(payout.0.checked_mul(10_000_000_000).ok_or(Error::Overflow)?);
        let stable = self.stable_asset.clone();
        let fund = self.fund_token.clone();
        let mainsc_held = self.balance(self.mainsc_address, &stable);
        if mainsc_held < stable_owed {
            let shortfall = stable_owed.checked_sub(mainsc_held)?;
            self.transfer_internal(self.safehouse_address, self.mainsc_address, &stable, shortfall)?;
        }
        self.transfer_internal(self.mainsc_address, investor, &stable, stable_owed)?;
        self.burn_internal(investor, &fund, fund_tokens)?;
        self.fund_shares.total_shares = self.fund_shares.total_shares.checked_sub(fund_tokens)?;
        self.fund_shares.nav = self.fund_shares.nav.saturating_sub(payout);
        let redeemed = self.redeemed_usd.entry(investor).or_default();
        *redeemed = redeemed.checked_add(payout)?;
        self.redemption_outflows.push((investor, self.clock.height, payout));
        Ok(stable_owed)
    }

    pub(crate) fn release_flagged(&mut self, id: u64) -> Result<Amount> {
        let entry =
            self.flag_queue.iter().position(|f| f.id == id && !f.released).ok_or(Error::UnknownFlag)?;
        let (investor, fund_tokens) = {
            let f = &self.flag_queue[entry];
            (f.investor, f.fund_tokens)
        };
        let paid = self.pay_redemption(investor, fund_tokens)?;
        self.flag_queue[entry].released = true;
        Ok(paid)
    }

    /// Move the entire main-contract stable balance into the safe-house.
    /// Never counted as a counter deposit.
    pub fn sweep_to_safehouse(&mut self, caller: Address) -> Result<Amount> {
        let result = self.sweep_inner(caller);
        let outcome = match &result {
            Ok(moved) => CallOutcome::success(format!("swept {}", moved.render())),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(caller, self.safehouse_address, "sweep_to_safehouse", Vec::new(), outcome);
        result
    }

    fn sweep_inner(&mut self, caller: Address) -> Result<Amount> {
        if self.role_of(caller) != Role::Manager {
            return Err(Error::NotAManager);
        }
        let stable = self.stable_asset.clone();
        let held = self.balance(self.mainsc_address, &stable);
        if !held.is_zero() {
            self.transfer_internal(self.mainsc_address, self.safehouse_address, &stable, held)?;
        }
        Ok(held)
    }

    /// Withdraw a basket from the safe-house under full protocol checks, in
    /// order: role, status, block gap, password (which rotates whether or not
    /// the later checks pass), valuation with the reference guard, the
    /// per-withdrawal cap, the counter-deposit criterion, holdings.
    pub fn manager_withdraw(
        &mut self,
        manager: Address,
        basket: &Basket,
        otntp_plaintext: &str,
        next_commitment: Commitment,
    ) -> Result<UsdValue> {
        let payload = serde_json::to_vec(&WithdrawPayload {
            basket: basket.clone(),
            otntp_plaintext: otntp_plaintext.to_string(),
            next_commitment: next_commitment.to_hex(),
        })
        .unwrap();
        let result = self.manager_withdraw_inner(manager, basket, otntp_plaintext, next_commitment);
        let outcome = match &result {
            Ok(value) => CallOutcome::success(format!("withdrew {}", value.render())),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(manager, self.safehouse_address, "manager_withdraw", payload, outcome);
        result
    }

    fn manager_withdraw_inner(
        &mut self,
        manager: Address,
        basket: &Basket,
        otntp_plaintext: &str,
        next_commitment: Commitment,
    ) -> Result<UsdValue> {
        if self.role_of(manager) != Role::Manager {
            return Err(Error::NotAManager);
        }
        if self.status != SafeHouseStatus::Open {
            return Err(Error::VaultNotOpen);
        }
        if let Some(last) = self.last_withdraw_block {
            if self.clock.height < last + self.params.min_blocks_between_withdrawals {
                return Err(Error::TooSoon);
            }
        }
        // The password gates the house: it is checked (and rotated) before
        // any value check, and a wrong password counts toward the lockout.
        self.auth_check(manager, otntp_plaintext, next_commitment)?;
        let value = self.value_basket_guarded(basket, self.clock.height)?;
        if value > self.params.max_out {
            return Err(Error::LimitExceeded);
        }
        if self.criterion_mode == CriterionMode::Two && !self.criterion_two_admits(value)? {
            // The allowance is spent. The withdrawal does not move funds and
            // the house closes pending owner intervention.
            self.lock(LockReason::GovernanceHold);
            return Err(Error::LimitExceeded);
        }
        for entry in &basket.entries {
            if self.balance(self.safehouse_address, &entry.asset) < entry.qty {
                return Err(Error::InsufficientHoldings);
            }
        }
        for entry in &basket.entries {
            self.transfer_internal(self.safehouse_address, manager, &entry.asset, entry.qty)?;
        }
        self.last_withdraw_block = Some(self.clock.height);
        self.extracted_total = self.extracted_total.checked_add(value)?;
        match self.criterion_mode {
            CriterionMode::One => {
                let window = CounterDepositWindow {
                    withdrawer: manager,
                    opened_block: self.clock.height,
                    deadline_block: self.clock.height + self.params.cd_time_blocks,
                    withdrawn_value: value,
                    accumulated_value: UsdValue::ZERO,
                };
                if evaluate_criterion_one(
                    window.withdrawn_value,
                    window.accumulated_value,
                    self.params.tolerance_bp,
                ) {
                    // Nothing owed (zero-value withdrawal or full tolerance).
                    self.status = SafeHouseStatus::Open;
                } else {
                    self.status = SafeHouseStatus::AwaitingCounterDeposit;
                    self.window = Some(window);
                }
            }
            CriterionMode::Two => {
                self.allowance.cum_withdrawn = self.allowance.cum_withdrawn.checked_add(value)?;
            }
        }
        Ok(value)
    }

    fn criterion_two_admits(&self, value: UsdValue) -> Result<bool> {
        let cum_w = self.allowance.cum_withdrawn.checked_add(value)?.0;
        let bound = self
            .params
            .max_out
            .0
            .checked_add(u128::from(self.params.tolerance_bp) * cum_w / 10_000)
            .and_then(|b| b.checked_add(self.allowance.cum_deposit_credit.0))
            .ok_or(Error::Overflow)?;
        Ok(cum_w < bound)
    }

    /// Return value to the safe-house after a withdrawal. Only manager or
    /// owner addresses count; deposits routed through the main contract are
    /// excluded by construction. Assets must be on the approved list — the
    /// house cannot be stuffed with junk assets to satisfy the criteria.
    pub fn counter_deposit(&mut self, depositor: Address, basket: &Basket) -> Result<UsdValue> {
        let payload = serde_json::to_vec(&CounterDepositPayload { basket }).unwrap();
        let result = self.counter_deposit_inner(depositor, basket);
        let outcome = match &result {
            Ok(value) => CallOutcome::success(format!("deposited {}", value.render())),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(depositor, self.safehouse_address, "counter_deposit", payload, outcome);
        result
    }

    fn counter_deposit_inner(&mut self, depositor: Address, basket: &Basket) -> Result<UsdValue> {
        if self.role_of(depositor) == Role::None {
            return Err(Error::NotAuthorized);
        }
        let value = self.value_basket_guarded(basket, self.clock.height)?;
        for entry in &basket.entries {
            if self.balance(depositor, &entry.asset) < entry.qty {
                return Err(Error::InsufficientBalance);
            }
        }
        for entry in &basket.entries {
            self.transfer_internal(depositor, self.safehouse_address, &entry.asset, entry.qty)?;
        }
        self.counter_deposit_total = self.counter_deposit_total.checked_add(value)?;
        match self.criterion_mode {
            CriterionMode::One => {
                if self.status == SafeHouseStatus::AwaitingCounterDeposit {
                    if let Some(window) = self.window.as_mut() {
                        window.accumulated_value = window.accumulated_value.checked_add(value)?;
                        if evaluate_criterion_one(
                            window.withdrawn_value,
                            window.accumulated_value,
                            self.params.tolerance_bp,
                        ) {
                            self.status = SafeHouseStatus::Open;
                            self.window = None;
                        }
                    }
                }
            }
            CriterionMode::Two => {
                if self.status == SafeHouseStatus::Open {
                    let credit = UsdValue(value.0.min(self.params.max_out.0));
                    self.allowance.cum_deposit_credit =
                        self.allowance.cum_deposit_credit.checked_add(credit)?;
                }
            }
        }
        Ok(value)
    }

    /// Per-block deadline evaluation, invoked once per crossed block by
    /// `advance_blocks`. A window whose deadline has passed short of its
    /// threshold locks the house.
    pub(crate) fn on_block_tick(&mut self) {
        if self.status == SafeHouseStatus::AwaitingCounterDeposit {
            if let Some(window) = &self.window {
                if self.clock.height > window.deadline_block
                    && !evaluate_criterion_one(
                        window.withdrawn_value,
                        window.accumulated_value,
                        self.params.tolerance_bp,
                    )
                {
                    self.window = None;
                    self.lock(LockReason::WindowExpired);
                }
            }
        }
    }

    /// X/Y/Z flagging rules for a prospective outflow of `value` to `target`:
    /// flagged when the target's net lifetime deposits are below Z, or when
    /// the trailing Y-block outflow to the target plus this value strictly
    /// exceeds X.
    pub fn flag_check(&self, target: Address, value: UsdValue) -> FlagOutcome {
        let deposited = self.deposited_usd.get(&target).copied().unwrap_or_default();
        let redeemed = self.redeemed_usd.get(&target).copied().unwrap_or_default();
        let net_deposits = deposited.saturating_sub(redeemed);
        if net_deposits < self.params.flag_z {
            return FlagOutcome::Flagged;
        }
        let trailing: u128 = self
            .redemption_outflows
            .iter()
            .filter(|(addr, block, _)| {
                *addr == target && self.clock.height - block < self.params.flag_y_blocks
            })
            .map(|(_, _, v)| v.0)
            .sum();
        if trailing + value.0 > self.params.flag_x.0 {
            return FlagOutcome::Flagged;
        }
        FlagOutcome::Clear
    }

    pub(crate) fn lock(&mut self, reason: LockReason) {
        self.status = SafeHouseStatus::Locked(reason);
        self.locks_count += 1;
    }

    pub(crate) fn lock_for_auth_failures(&mut self) {
        self.window = None;
        self.lock(LockReason::AuthFailures);
    }

    /// Governance restore path: reopen, reset failure counters, reset the
    /// criterion-two allowance, and allow seeded managers one re-seed.
    pub(crate) fn reopen_after_lock(&mut self) {
        self.status = SafeHouseStatus::Open;
        self.window = None;
        self.auth_failure_count = 0;
        self.allowance = AllowanceState {
            start_block: self.clock.height,
            cum_withdrawn: UsdValue::ZERO,
            cum_deposit_credit: UsdValue::ZERO,
        };
        for auth in self.auth.values_mut() {
            auth.failure_count = 0;
            if auth.seeded() {
                auth.reseed_allowed = true;
            }
        }
    }
}
