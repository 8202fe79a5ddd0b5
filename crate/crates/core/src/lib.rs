//! Deterministic library implementing the Safe-House custody protocol for
//! decentralized fund management: a simulated ledger with a public call log,
//! threshold-signature governance, one-time-next-time-password (OTNTP)
//! authentication, oracle-guarded basket valuation, the counter-deposit
//! state machine with withdrawal caps, and a staking-manager dispatch layer.
//!
//! The world is a single value and every operation is a pure transition on
//! it, so runs replay bit-exactly. The adversarial harness and CLI live in
//! the companion `safehouse-sim` crate.

pub mod error;
pub mod governance;
pub mod ledger;
pub(crate) mod math;
pub mod otntp;
pub mod rng;
pub mod safehouse;
pub mod staking;
pub mod valuation;
pub mod world;

pub use error::{Error, Result};
pub use governance::{GovernanceAction, OwnerSet, ParamName, Proposal, Role};
pub use ledger::{Address, Amount, AssetId, BlockClock, CallOutcome, TxRecord, AMOUNT_UNIT};
pub use otntp::{
    generate_password, open_protected_file, seal_protected_file, AuthState, Commitment, ProtectedFile,
};
pub use rng::SplitMix64;
pub use safehouse::{
    evaluate_criterion_one, evaluate_criterion_two, AllowanceState, CounterDepositWindow, FlagOutcome,
    FlowEvent, FundShareState, LockReason, SafeHouseParams, SafeHouseStatus,
};
pub use staking::{MockPool, SmRegistry, StakePosition, StakingAction, StakingInstruction};
pub use valuation::{
    entry_value, Basket, BasketEntry, GuardOutcome, PriceQuote, ReferencePrice, UsdValue, USD_UNIT,
};
pub use world::{
    AssetConfig, BalanceConfig, CriterionMode, ParamsConfig, PoolConfig, ReferenceConfig, World,
    WorldConfig,
};
