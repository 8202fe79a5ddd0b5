//! Simulated chain primitives: addresses, assets, fixed-point token amounts,
//! the block clock and the append-only public call log.
//!
//! Invariants maintained here:
//! - token arithmetic is overflow-checked; an overflow aborts the transition
//! - the log is append-only with dense indices from 0
//! - every recorded input payload is readable by any party (public)

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

use crate::error::{Error, Result};

/// Opaque 20-byte account identifier, rendered as 40 lowercase hex chars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub [u8; 20]);

impl Address {
    /// Deterministically derive an address from a human-readable label.
    /// Scenario files declare actors by name; this keeps the mapping stable.
    pub fn derive(label: &str) -> Address {
        let digest = Sha256::digest(format!("addr:{label}").as_bytes());
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest[..20]);
        Address(out)
    }

    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Short token identifier, unique per world. At most 16 chars.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AssetId(String);

impl AssetId {
    pub fn new(symbol: &str) -> Result<AssetId> {
        if symbol.is_empty() || symbol.len() > 16 {
            return Err(Error::Malformed);
        }
        Ok(AssetId(symbol.to_string()))
    }

    pub fn symbol(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One whole token in base units (18-decimal fixed point).
pub const AMOUNT_UNIT: u128 = 1_000_000_000_000_000_000;

/// Token quantity: unsigned 128-bit, 18-decimal fixed point. Never negative;
/// all arithmetic is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct Amount(pub u128);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub fn from_whole(tokens: u128) -> Amount {
        Amount(tokens * AMOUNT_UNIT)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, other: Amount) -> Result<Amount> {
        self.0.checked_add(other.0).map(Amount).ok_or(Error::Overflow)
    }

    pub fn checked_sub(self, other: Amount) -> Result<Amount> {
        self.0.checked_sub(other.0).map(Amount).ok_or(Error::InsufficientBalance)
    }

    /// Canonical decimal rendering with the full 18 fractional digits.
    pub fn render(self) -> String {
        render_fixed(self.0, 18)
    }

    /// Parse a decimal string (up to 18 fractional digits).
    pub fn parse(text: &str) -> Result<Amount> {
        parse_fixed(text, 18).map(Amount)
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub(crate) fn render_fixed(value: u128, decimals: u32) -> String {
    let unit = 10u128.pow(decimals);
    format!("{}.{:0width$}", value / unit, value % unit, width = decimals as usize)
}

pub(crate) fn parse_fixed(text: &str, decimals: u32) -> Result<u128> {
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::Malformed);
    }
    if frac_part.len() > decimals as usize {
        return Err(Error::Malformed);
    }
    let int: u128 =
        if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| Error::Malformed)? };
    let mut frac: u128 = 0;
    if !frac_part.is_empty() {
        frac = frac_part.parse().map_err(|_| Error::Malformed)?;
        frac *= 10u128.pow(decimals - frac_part.len() as u32);
    }
    int.checked_mul(10u128.pow(decimals)).and_then(|v| v.checked_add(frac)).ok_or(Error::Overflow)
}

/// Discrete clock: block height plus the fixed seconds-per-block of the world.
/// Height only moves forward; seconds-per-block never changes after construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockClock {
    pub height: u64,
    pub seconds_per_block: u64,
}

impl BlockClock {
    pub fn new(seconds_per_block: u64) -> BlockClock {
        assert!(seconds_per_block > 0, "seconds_per_block must be positive");
        BlockClock { height: 0, seconds_per_block }
    }

    /// Convert a duration in seconds to blocks, rounding up.
    pub fn seconds_to_blocks(&self, seconds: u64) -> u64 {
        seconds.div_ceil(self.seconds_per_block)
    }

    /// Convert a duration in minutes to blocks, rounding up.
    pub fn minutes_to_blocks(&self, minutes: u64) -> u64 {
        self.seconds_to_blocks(minutes * 60)
    }
}

/// Success flag plus a stable message, stored with every logged call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallOutcome {
    pub ok: bool,
    pub message: String,
}

impl CallOutcome {
    pub fn success(message: impl Into<String>) -> CallOutcome {
        CallOutcome { ok: true, message: message.into() }
    }

    pub fn failure(err: &Error) -> CallOutcome {
        CallOutcome { ok: false, message: err.to_string() }
    }
}

/// One entry of the public append-only call log. The input payload of every
/// call is visible to any party; OTNTP plaintexts sent with withdrawals
/// therefore become public the moment the call is recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxRecord {
    pub index: u64,
    pub block: u64,
    pub caller: Address,
    pub target: Address,
    pub call_name: String,
    pub input_payload: Vec<u8>,
    pub outcome: CallOutcome,
}

/// JSON-lines projection of a [`TxRecord`]; field order is part of the
/// export format.
#[derive(Serialize)]
struct TxRecordLine<'a> {
    index: u64,
    block: u64,
    caller: String,
    target: String,
    call_name: &'a str,
    input_payload_hex: String,
    outcome: &'a CallOutcome,
}

impl TxRecord {
    pub fn to_json_line(&self) -> String {
        let line = TxRecordLine {
            index: self.index,
            block: self.block,
            caller: self.caller.to_hex(),
            target: self.target.to_hex(),
            call_name: &self.call_name,
            input_payload_hex: hex::encode(&self.input_payload),
            outcome: &self.outcome,
        };
        serde_json::to_string(&line).expect("log line serialization cannot fail")
    }
}

/// Export a full log as JSON lines, one record per line.
pub fn export_log(records: &[TxRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&record.to_json_line());
        out.push('\n');
    }
    out
}
