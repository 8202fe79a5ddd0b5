//! Scenarios shipped with the simulator, one per threat case: rogue
//! insiders, stolen credentials with and without the rotating password,
//! off-hours access, log replay, brute-force guessing, oracle manipulation,
//! whale redemptions, and junk-asset counter deposits.

use crate::scenario::{Scenario, SimError};

pub const BUNDLED: &[(&str, &str)] = &[
    ("rogue_manager", include_str!("../scenarios/rogue_manager.json")),
    ("stolen_key_no_otntp", include_str!("../scenarios/stolen_key_no_otntp.json")),
    ("stolen_key_and_otntp", include_str!("../scenarios/stolen_key_and_otntp.json")),
    ("off_hours_withdraw", include_str!("../scenarios/off_hours_withdraw.json")),
    ("replay_from_log", include_str!("../scenarios/replay_from_log.json")),
    ("bruteforce_guess", include_str!("../scenarios/bruteforce_guess.json")),
    ("oracle_spike", include_str!("../scenarios/oracle_spike.json")),
    ("whale_redemption", include_str!("../scenarios/whale_redemption.json")),
    ("junk_asset_counter_deposit", include_str!("../scenarios/junk_asset_counter_deposit.json")),
];

pub fn names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(name, _)| *name).collect()
}

pub fn load(name: &str) -> Result<Scenario, SimError> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| SimError::Schema(format!("no bundled scenario named {name}")))?;
    Scenario::from_json(text)
}
