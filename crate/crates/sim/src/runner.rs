//! Deterministic scenario replay and the run report.
//!
//! The report is byte-identical across runs of the same scenario: every
//! field derives from the world value, the log digest covers the full
//! JSON-lines export of the public call log, and nothing reads a wall clock.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use safehouse_core::World;

use crate::scenario::{
    parse_action, parse_basket, parse_commitment, parse_instruction, EventOp, Scenario, SimError,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub final_status: String,
    pub final_block: u64,
    pub event_outcomes: Vec<EventOutcome>,
    pub totals: Totals,
    pub log_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub index: usize,
    pub block: u64,
    pub actor: String,
    pub call: String,
    pub ok: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub extracted_value: String,
    pub counter_deposits: String,
    pub flags_raised: u64,
    pub locks: u64,
    pub freezes: u64,
}

impl Report {
    /// Canonical byte form: pretty JSON plus a trailing newline.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serialization cannot fail");
        bytes.push(b'\n');
        bytes
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

/// Replay a scenario from scratch and cut the report. The returned world is
/// the final state, for follow-up analysis such as the replay attacker.
pub fn run_scenario(scenario: &Scenario) -> Result<(Report, World), SimError> {
    scenario.validate()?;
    let mut world = World::from_config(&scenario.world_config)?;
    let mut outcomes = Vec::with_capacity(scenario.events.len());

    for (index, event) in scenario.events.iter().enumerate() {
        if event.block > world.clock.height {
            world.advance_blocks(event.block - world.clock.height);
        }
        let actor = world
            .resolve_actor(&event.actor)
            .ok_or_else(|| SimError::UnknownActor(event.actor.clone()))?;
        apply(&mut world, actor, &event.op)?;
        // every operation appends exactly one record; mirror it
        let record = world.public_log().last().expect("operation must log");
        outcomes.push(EventOutcome {
            index,
            block: record.block,
            actor: event.actor.clone(),
            call: record.call_name.clone(),
            ok: record.outcome.ok,
            message: record.outcome.message.clone(),
        });
    }
    if let Some(end_block) = scenario.end_block {
        if end_block > world.clock.height {
            world.advance_blocks(end_block - world.clock.height);
        }
    }

    let report = Report {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        final_status: world.status.render(),
        final_block: world.clock.height,
        event_outcomes: outcomes,
        totals: Totals {
            extracted_value: world.extracted_total.render(),
            counter_deposits: world.counter_deposit_total.render(),
            flags_raised: world.flags_raised,
            locks: world.locks_count,
            freezes: world.freezes_raised,
        },
        log_digest: hex::encode(Sha256::digest(world.export_log().as_bytes())),
    };
    Ok((report, world))
}

/// Apply one event. Protocol-level rejections land in the log and the event
/// outcome; only schema-level problems abort the run.
fn apply(world: &mut World, actor: safehouse_core::Address, op: &EventOp) -> Result<(), SimError> {
    match op {
        EventOp::Transfer { to, asset, amount } => {
            let to = world.resolve_actor(to).ok_or_else(|| SimError::UnknownActor(to.clone()))?;
            let asset = safehouse_core::AssetId::new(asset)?;
            let amount = safehouse_core::Amount::parse(amount)?;
            let _ = world.transfer(actor, to, &asset, amount);
        }
        EventOp::InvestorDeposit { amount } => {
            let amount = safehouse_core::Amount::parse(amount)?;
            let _ = world.investor_deposit(actor, amount);
        }
        EventOp::InvestorRedeem { fund_tokens } => {
            let fund_tokens = safehouse_core::Amount::parse(fund_tokens)?;
            let _ = world.investor_redeem(actor, fund_tokens);
        }
        EventOp::SweepToSafehouse {} => {
            let _ = world.sweep_to_safehouse(actor);
        }
        EventOp::ManagerWithdraw { basket, otntp_plaintext, next_commitment } => {
            let basket = parse_basket(basket)?;
            let next = parse_commitment(next_commitment)?;
            let _ = world.manager_withdraw(actor, &basket, otntp_plaintext, next);
        }
        EventOp::CounterDeposit { basket } => {
            let basket = parse_basket(basket)?;
            let _ = world.counter_deposit(actor, &basket);
        }
        EventOp::SeedCommitment { commitment } => {
            let commitment = parse_commitment(commitment)?;
            let _ = world.seed_commitment(actor, commitment);
        }
        EventOp::VerifyAndRotate { plaintext, next_commitment } => {
            let next = parse_commitment(next_commitment)?;
            let _ = world.verify_and_rotate(actor, plaintext, next);
        }
        EventOp::Propose { action } => {
            let action = parse_action(world, action)?;
            let _ = world.propose(actor, action);
        }
        EventOp::Sign { proposal_id } => {
            let _ = world.sign(actor, *proposal_id);
        }
        EventOp::Execute { proposal_id } => {
            let _ = world.execute(actor, *proposal_id);
        }
        EventOp::RevokeManager { manager } => {
            let manager =
                world.resolve_actor(manager).ok_or_else(|| SimError::UnknownActor(manager.clone()))?;
            let _ = world.revoke_manager(actor, manager);
        }
        EventOp::FeedUpdate { feed_id, asset, price } => {
            let asset = safehouse_core::AssetId::new(asset)?;
            let price = safehouse_core::UsdValue::parse(price)?;
            let _ = world.feed_update(actor, feed_id, asset, price);
        }
        EventOp::Dispatch { action, instruction_id, assets, quantities } => {
            let instruction = parse_instruction(*instruction_id, assets, quantities)?;
            let _ = world.dispatch(actor, *action, &instruction);
        }
    }
    Ok(())
}
