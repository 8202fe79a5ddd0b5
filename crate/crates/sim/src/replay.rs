//! The replay attacker: mine every password plaintext from the public call
//! log and resubmit each one as a withdrawal credential.
//!
//! Transaction inputs are public by design, so this is exactly the attack
//! surface the rotating-password scheme must survive: every accepted
//! password rotated the stored commitment, so no historical plaintext can
//! verify again. Replays run against a clone of the final world; failed
//! attempts count toward the lockout like any other wrong password.

use serde::Serialize;

use safehouse_core::{Address, Basket, Commitment, World};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub attempted: usize,
    pub successes: usize,
    pub final_status: String,
}

/// Every (caller, plaintext) pair visible in the log's input payloads.
pub fn mine_plaintexts(world: &World) -> Vec<(Address, String)> {
    world
        .public_log()
        .iter()
        .filter_map(|record| {
            let value: serde_json::Value = serde_json::from_slice(&record.input_payload).ok()?;
            let plaintext = value.get("otntp_plaintext")?.as_str()?;
            Some((record.caller, plaintext.to_string()))
        })
        .collect()
}

/// Resubmit every mined plaintext as a zero-value withdrawal by its original
/// sender and count how many are accepted.
pub fn replay_attacker(world: &World) -> ReplayReport {
    let mined = mine_plaintexts(world);
    let mut attack_world = world.clone();
    let mut successes = 0;
    for (manager, plaintext) in &mined {
        let result = attack_world.manager_withdraw(
            *manager,
            &Basket::default(),
            plaintext,
            Commitment::of("replayed-next"),
        );
        if result.is_ok() {
            successes += 1;
        }
    }
    ReplayReport { attempted: mined.len(), successes, final_status: attack_world.status.render() }
}
