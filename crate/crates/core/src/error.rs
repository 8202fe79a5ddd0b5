//! Error type shared by every protocol transition.
//!
//! Display strings are part of the deterministic surface: they appear in
//! transaction-log outcomes and in scenario reports, so they must stay stable.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    // ledger
    #[error("insufficient balance")]
    InsufficientBalance,
    #[error("zero amount")]
    ZeroAmount,
    #[error("arithmetic overflow")]
    Overflow,

    // governance
    #[error("caller is not an owner")]
    NotAnOwner,
    #[error("caller is not a manager")]
    NotAManager,
    #[error("unknown proposal")]
    UnknownProposal,
    #[error("proposal already executed")]
    AlreadyExecuted,
    #[error("signature threshold not met")]
    ThresholdNotMet,

    // otntp
    #[error("manager has no seeded commitment")]
    NotSeeded,
    #[error("commitment already seeded")]
    AlreadySeeded,
    #[error("vault is locked")]
    VaultLocked,
    #[error("password length too short")]
    LengthTooShort,
    #[error("plaintext is empty")]
    EmptyPlaintext,
    #[error("mac mismatch")]
    MacMismatch,
    #[error("malformed protected file")]
    Malformed,

    // valuation
    #[error("no quotes for asset")]
    NoQuotes,
    #[error("no reference price for asset")]
    NoReference,
    #[error("no price history for asset")]
    NoHistory,
    #[error("asset not on the approved list")]
    UnapprovedAsset,
    #[error("asset is frozen")]
    FrozenAsset,

    // safe-house
    #[error("vault is not open")]
    VaultNotOpen,
    #[error("authentication rejected")]
    AuthRejected,
    #[error("withdrawal limit exceeded")]
    LimitExceeded,
    #[error("too soon since last withdrawal")]
    TooSoon,
    #[error("safe-house does not hold the requested basket")]
    InsufficientHoldings,
    #[error("address is whitelist-locked")]
    WhitelistLocked,
    #[error("withdrawal flagged for review")]
    Flagged,
    #[error("insufficient fund shares")]
    InsufficientShares,
    #[error("caller is not authorized")]
    NotAuthorized,
    #[error("unknown flagged withdrawal")]
    UnknownFlag,

    // staking
    #[error("unknown staking instruction")]
    UnknownInstruction,
    #[error("liquidity amounts not proportional to reserves")]
    NonProportional,
    #[error("insufficient lp tokens")]
    InsufficientLp,
    #[error("insufficient staked amount")]
    InsufficientStake,
    #[error("no staking position")]
    NoPosition,
}

pub type Result<T> = std::result::Result<T, Error>;
