//! Owners, managers and threshold-signature execution of governance actions.
//!
//! The owner set and its threshold are fixed at world construction. Any owner
//! can propose; a proposal executes once it carries at least `threshold`
//! distinct owner signatures, and at most once. Revoking a manager is the one
//! deliberate exception: a single owner does it immediately, so intervention
//! is never blocked on co-signers.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::ledger::{Address, Amount, AssetId, CallOutcome};
use crate::otntp::Commitment;
use crate::valuation::UsdValue;
use crate::world::World;

/// Role held by an address. An address holds at most one role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Owner,
    Manager,
    None,
}

/// The fixed owner set and the signature threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OwnerSet {
    pub owners: BTreeSet<Address>,
    pub threshold: usize,
}

impl OwnerSet {
    pub fn new(owners: BTreeSet<Address>, threshold: usize) -> Result<OwnerSet> {
        if threshold == 0 || threshold > owners.len() {
            return Err(Error::Malformed);
        }
        Ok(OwnerSet { owners, threshold })
    }
}

/// Parameter names accepted by `SetParameter`; these are exactly the mutable
/// numeric fields of the safe-house parameter block, lowercase snake case in
/// scenario files. The criterion mode is a construction-time choice and is
/// deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    MaxOut,
    ToleranceBp,
    CdTimeBlocks,
    MinBlocksBetweenWithdrawals,
    MaxFailedAuth,
    FlagX,
    FlagYBlocks,
    FlagZ,
    WhitelistLockBlocks,
}

/// A governance action; applied atomically when its proposal executes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GovernanceAction {
    SetParameter(ParamName, u128),
    GrantManager(Address),
    SetReferencePrice { asset: AssetId, price: UsdValue, band_bp: u32 },
    SetReturnAddress(Address),
    ReopenSafeHouse,
    RegisterStakingManager { asset: AssetId, sm: Address },
    AddToWhitelist(Address),
    ReleaseFlagged(u64),
}

impl GovernanceAction {
    /// Stable short description used in log outcomes.
    pub fn describe(&self) -> String {
        match self {
            GovernanceAction::SetParameter(name, value) => {
                format!("set_parameter {:?}={value}", name)
            }
            GovernanceAction::GrantManager(addr) => format!("grant_manager {addr}"),
            GovernanceAction::SetReferencePrice { asset, price, band_bp } => {
                format!("set_reference_price {asset} {} band {band_bp}bp", price.render())
            }
            GovernanceAction::SetReturnAddress(addr) => format!("set_return_address {addr}"),
            GovernanceAction::ReopenSafeHouse => "reopen_safe_house".to_string(),
            GovernanceAction::RegisterStakingManager { asset, sm } => {
                format!("register_staking_manager {asset} -> {sm}")
            }
            GovernanceAction::AddToWhitelist(addr) => format!("add_to_whitelist {addr}"),
            GovernanceAction::ReleaseFlagged(id) => format!("release_flagged {id}"),
        }
    }
}

/// A pending or executed governance action with its collected signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub id: u64,
    pub action: GovernanceAction,
    pub signatures: BTreeSet<Address>,
    pub executed: bool,
    pub created_block: u64,
}

impl World {
    /// Create a proposal; the proposer's signature is attached on creation.
    pub fn propose(&mut self, owner: Address, action: GovernanceAction) -> Result<u64> {
        let payload = action.describe().into_bytes();
        let result = self.propose_inner(owner, action);
        let outcome = match &result {
            Ok(id) => CallOutcome::success(format!("proposal {id}")),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(owner, self.safehouse_address, "propose", payload, outcome);
        result
    }

    fn propose_inner(&mut self, owner: Address, action: GovernanceAction) -> Result<u64> {
        if !self.owner_set.owners.contains(&owner) {
            return Err(Error::NotAnOwner);
        }
        let id = self.proposals.len() as u64;
        let mut signatures = BTreeSet::new();
        signatures.insert(owner);
        self.proposals.push(Proposal {
            id,
            action,
            signatures,
            executed: false,
            created_block: self.clock.height,
        });
        Ok(id)
    }

    /// Add an owner's signature. Signing twice is idempotent.
    pub fn sign(&mut self, owner: Address, proposal_id: u64) -> Result<usize> {
        let payload = format!("proposal {proposal_id}").into_bytes();
        let result = self.sign_inner(owner, proposal_id);
        let outcome = match &result {
            Ok(count) => CallOutcome::success(format!("{count} signatures")),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(owner, self.safehouse_address, "sign", payload, outcome);
        result
    }

    fn sign_inner(&mut self, owner: Address, proposal_id: u64) -> Result<usize> {
        if !self.owner_set.owners.contains(&owner) {
            return Err(Error::NotAnOwner);
        }
        let proposal = self.proposals.get_mut(proposal_id as usize).ok_or(Error::UnknownProposal)?;
        if proposal.executed {
            return Err(Error::AlreadyExecuted);
        }
        proposal.signatures.insert(owner);
        Ok(proposal.signatures.len())
    }

    /// Execute a proposal whose signature count has reached the threshold.
    /// Execution itself is permissionless; authority lives in the signatures.
    pub fn execute(&mut self, caller: Address, proposal_id: u64) -> Result<()> {
        let payload = format!("proposal {proposal_id}").into_bytes();
        let result = self.execute_inner(proposal_id);
        let outcome = match &result {
            Ok(desc) => CallOutcome::success(desc.clone()),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(caller, self.safehouse_address, "execute", payload, outcome);
        result.map(|_| ())
    }

    fn execute_inner(&mut self, proposal_id: u64) -> Result<String> {
        let proposal = self.proposals.get(proposal_id as usize).ok_or(Error::UnknownProposal)?;
        if proposal.executed {
            return Err(Error::AlreadyExecuted);
        }
        let signer_count = proposal.signatures.intersection(&self.owner_set.owners).count();
        if signer_count < self.owner_set.threshold {
            return Err(Error::ThresholdNotMet);
        }
        let action = proposal.action.clone();
        let description = self.apply_action(&action)?;
        self.proposals[proposal_id as usize].executed = true;
        Ok(description)
    }

    fn apply_action(&mut self, action: &GovernanceAction) -> Result<String> {
        match action {
            GovernanceAction::SetParameter(name, value) => {
                match name {
                    ParamName::MaxOut => self.params.max_out = UsdValue(*value),
                    ParamName::ToleranceBp => self.params.tolerance_bp = (*value).min(10_000) as u32,
                    ParamName::CdTimeBlocks => self.params.cd_time_blocks = *value as u64,
                    ParamName::MinBlocksBetweenWithdrawals => {
                        self.params.min_blocks_between_withdrawals = *value as u64
                    }
                    ParamName::MaxFailedAuth => self.params.max_failed_auth = *value as u32,
                    ParamName::FlagX => self.params.flag_x = UsdValue(*value),
                    ParamName::FlagYBlocks => self.params.flag_y_blocks = *value as u64,
                    ParamName::FlagZ => self.params.flag_z = UsdValue(*value),
                    ParamName::WhitelistLockBlocks => self.params.whitelist_lock_blocks = *value as u64,
                }
                Ok(action.describe())
            }
            GovernanceAction::GrantManager(addr) => {
                // A freshly granted manager must seed an OTNTP commitment
                // before any withdrawal; granting does not seed.
                if self.owner_set.owners.contains(addr) {
                    return Ok(format!("grant_manager {addr}: already an owner, no change"));
                }
                self.managers.insert(*addr);
                Ok(action.describe())
            }
            GovernanceAction::SetReferencePrice { asset, price, band_bp } => {
                self.reference_prices.insert(
                    asset.clone(),
                    crate::valuation::ReferencePrice {
                        asset: asset.clone(),
                        price: *price,
                        band_bp: *band_bp,
                    },
                );
                // Updating the reference is the one path that unfreezes.
                self.frozen_assets.remove(asset);
                Ok(action.describe())
            }
            GovernanceAction::SetReturnAddress(addr) => {
                self.sm_registry.return_address = *addr;
                Ok(action.describe())
            }
            GovernanceAction::ReopenSafeHouse => {
                if !self.status.is_locked() {
                    return Ok("reopen_safe_house: not locked, no change".to_string());
                }
                self.reopen_after_lock();
                Ok(action.describe())
            }
            GovernanceAction::RegisterStakingManager { asset, sm } => {
                self.sm_registry.sm_by_asset.insert(asset.clone(), *sm);
                Ok(action.describe())
            }
            GovernanceAction::AddToWhitelist(addr) => {
                self.whitelist.insert(*addr, self.clock.height);
                Ok(action.describe())
            }
            GovernanceAction::ReleaseFlagged(id) => {
                let paid = self.release_flagged(*id)?;
                Ok(format!("release_flagged {id}: paid {}", paid.render()))
            }
        }
    }

    /// Remove the manager role immediately — no proposal needed — and delete
    /// the manager's authentication state. An open counter-deposit window
    /// stays open: funds owed are still owed.
    pub fn revoke_manager(&mut self, owner: Address, manager: Address) -> Result<()> {
        let payload = format!("revoke {manager}").into_bytes();
        let result = self.revoke_manager_inner(owner, manager);
        let outcome = match &result {
            Ok(()) => CallOutcome::success("revoked"),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(owner, self.safehouse_address, "revoke_manager", payload, outcome);
        result
    }

    fn revoke_manager_inner(&mut self, owner: Address, manager: Address) -> Result<()> {
        if !self.owner_set.owners.contains(&owner) {
            return Err(Error::NotAnOwner);
        }
        if !self.managers.contains(&manager) {
            return Err(Error::NotAManager);
        }
        self.managers.remove(&manager);
        self.auth.remove(&manager);
        Ok(())
    }

    /// Convenience for tests and scenarios: seed a manager directly from a
    /// password plaintext.
    pub fn seed_from_password(&mut self, manager: Address, password: &str) -> Result<()> {
        self.seed_commitment(manager, Commitment::of(password))
    }
}

/// Helper used by scenario parsing: decode a `SetParameter` value that may be
/// a USD string (for the value-typed parameters) or a bare integer.
pub fn parse_param_value(name: ParamName, text: &str) -> Result<u128> {
    match name {
        ParamName::MaxOut | ParamName::FlagX | ParamName::FlagZ => Ok(UsdValue::parse(text)?.0),
        _ => text.parse::<u128>().map_err(|_| Error::Malformed),
    }
}

/// Helper used by scenario parsing for token quantities.
pub fn parse_amount(text: &str) -> Result<Amount> {
    Amount::parse(text)
}
