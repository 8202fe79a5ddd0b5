//! Acceptance suite: one test per criterion, each printing a PASS line.
//! Run with `cargo test -p safehouse-sim --test acceptance -- --nocapture`.
//!
//! Thresholds, case counts and time budgets are pinned in the asserts; the
//! expected oracle values were frozen from the first exhaustive runs.

use std::time::Instant;

use num_bigint::BigUint;
use safehouse_core::*;
use safehouse_sim::{adversary_loss_oracle, bundled, replay_attacker, run_scenario};

fn pass(n: u32, what: &str) {
    println!("ACCEPTANCE {n:02} PASS: {what}");
}

fn adversary_config() -> WorldConfig {
    serde_json::from_value(serde_json::json!({
        "stable_asset": "USDC",
        "fund_token": "FUND",
        "owners": ["o1", "o2", "o3"],
        "threshold": 2,
        "managers": ["m"],
        "extra_actors": ["oracle"],
        "balances": [
            {"actor": "safehouse", "asset": "USDC", "amount": "1000000000"},
            {"actor": "m", "asset": "USDC", "amount": "1000000000"}
        ],
        "params": {
            "max_out": "10.00",
            "tolerance_bp": 0,
            "cd_time_blocks": 0,
            "min_blocks_between_withdrawals": 0,
            "criterion_mode": "two",
            "max_failed_auth": 3
        },
        "feeds": ["f1"]
    }))
    .unwrap()
}

/// Criterion 1 — bounded loss: over 1,000 seeded random adversary schedules
/// (up to 50 events, full manager credentials), every run prefix satisfies
/// the criterion-two inequality or the house is not open. Zero violations,
/// under 10 seconds.
#[test]
fn acceptance_01_bounded_loss() {
    let started = Instant::now();
    let base = adversary_config();
    let usdc = AssetId::new("USDC").unwrap();

    for run in 0..1000u64 {
        let mut rng = SplitMix64::new(0xACCE_5500 + run);
        let mut config = base.clone();
        config.params.tolerance_bp = rng.range(0, 2000) as u32;
        let mut world = World::from_config(&config).unwrap();
        let oracle = world.resolve_actor("oracle").unwrap();
        let manager = world.resolve_actor("m").unwrap();
        world.feed_update(oracle, "f1", usdc.clone(), UsdValue::from_whole(1)).unwrap();
        world.seed_from_password(manager, "pw0").unwrap();

        let mut password_index = 0u64;
        let events = rng.range(1, 50);
        for _ in 0..events {
            if rng.below(2) == 0 {
                let qty = rng.range(1, 15) as u128; // may exceed max_out
                let current = format!("pw{password_index}");
                let next = format!("pw{}", password_index + 1);
                let result = world.manager_withdraw(
                    manager,
                    &Basket::single(usdc.clone(), Amount::from_whole(qty)),
                    &current,
                    Commitment::of(&next),
                );
                // the password rotates whenever the attempt got past the
                // status gate, accepted or not
                if result != Err(Error::VaultNotOpen) {
                    password_index += 1;
                }
            } else {
                let qty = rng.range(1, 12) as u128;
                world
                    .counter_deposit(manager, &Basket::single(usdc.clone(), Amount::from_whole(qty)))
                    .unwrap();
            }
            if world.status.is_open() {
                let cum_w = world.allowance.cum_withdrawn.0;
                let credit = world.allowance.cum_deposit_credit.0;
                let bound = world.params.max_out.0
                    + u128::from(world.params.tolerance_bp) * cum_w / 10_000
                    + credit;
                assert!(
                    cum_w < bound,
                    "run {run}: open house violates the loss bound: {cum_w} >= {bound}"
                );
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "bounded-loss sweep took {elapsed:?}");
    pass(1, &format!("1000 adversary schedules, zero bound violations ({elapsed:?})"));
}

fn naive_criterion_one_biguint(withdrawn: u128, accumulated: u128, tolerance_bp: u32) -> bool {
    let needed = BigUint::from(withdrawn) * BigUint::from(10_000u32 - tolerance_bp.min(10_000))
        / BigUint::from(10_000u32);
    BigUint::from(accumulated) >= needed
}

fn naive_criterion_two_biguint(events: &[FlowEvent], max_out: u128, tolerance_bp: u32) -> Option<usize> {
    for end in 0..events.len() {
        // recompute both sums from scratch for every prefix
        let mut cum_w = BigUint::from(0u32);
        let mut credit = BigUint::from(0u32);
        for event in &events[..=end] {
            match event {
                FlowEvent::Withdraw(v) => cum_w += BigUint::from(v.0),
                FlowEvent::Deposit(v) => credit += BigUint::from(v.0.min(max_out)),
            }
        }
        let bound = BigUint::from(max_out)
            + BigUint::from(tolerance_bp) * &cum_w / BigUint::from(10_000u32)
            + credit;
        if cum_w >= bound {
            return Some(end);
        }
    }
    None
}

/// Criterion 2 — oracle equivalence: both criterion evaluators agree exactly
/// with naive event-replay brute force on 10,000 random sequences of length
/// up to 20, in under 5 seconds.
#[test]
fn acceptance_02_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = SplitMix64::new(0xACCE_5502);
    for _ in 0..10_000 {
        // criterion one on random triples
        let withdrawn = u128::from(rng.range(0, 2_000_000_000));
        let accumulated = u128::from(rng.range(0, 2_000_000_000));
        let tolerance_bp = rng.range(0, 10_000) as u32;
        assert_eq!(
            evaluate_criterion_one(UsdValue(withdrawn), UsdValue(accumulated), tolerance_bp),
            naive_criterion_one_biguint(withdrawn, accumulated, tolerance_bp),
            "criterion one diverges at ({withdrawn}, {accumulated}, {tolerance_bp})"
        );

        // criterion two on random sequences
        let length = rng.range(0, 20) as usize;
        let max_out = u128::from(rng.range(1, 1_000_000_000));
        let events: Vec<FlowEvent> = (0..length)
            .map(|_| {
                let value = UsdValue(u128::from(rng.range(0, 1_500_000_000)));
                if rng.below(2) == 0 {
                    FlowEvent::Withdraw(value)
                } else {
                    FlowEvent::Deposit(value)
                }
            })
            .collect();
        assert_eq!(
            evaluate_criterion_two(&events, UsdValue(max_out), tolerance_bp),
            naive_criterion_two_biguint(&events, max_out, tolerance_bp),
            "criterion two diverges on {events:?} max_out {max_out} tol {tolerance_bp}"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "oracle equivalence took {elapsed:?}");
    pass(2, &format!("10000 sequences, exact agreement with brute force ({elapsed:?})"));
}

/// Criterion 3 — exhaustive adversary search: max_out 10.00, tolerance
/// 1000 bp, depth 5, grid 1.00..10.00 extracts exactly 12.00 and the
/// analytic bound 13.00 holds, in under 60 seconds.
#[test]
fn acceptance_03_exhaustive_adversary_search() {
    let started = Instant::now();
    let grid: Vec<UsdValue> = (1..=10).map(UsdValue::from_whole).collect();
    let result = adversary_loss_oracle(UsdValue::from_whole(10), 1000, 5, &grid).unwrap();
    assert_eq!(result.max_extracted, UsdValue::parse("12.00").unwrap());
    assert_eq!(result.bound, UsdValue::parse("13.00").unwrap());
    assert!(result.max_extracted.0 <= result.bound.0);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "adversary search took {elapsed:?}");
    pass(
        3,
        &format!(
            "exhaustive search: extracted {} within bound {} via [{}] ({elapsed:?})",
            result.max_extracted.render(),
            result.bound.render(),
            result.path.join(", ")
        ),
    );
}

/// Criterion 4 — replay resistance: across all bundled scenarios, the replay
/// attacker resubmits every historical plaintext from the public log and
/// succeeds zero times.
#[test]
fn acceptance_04_replay_resistance() {
    let mut total_attempted = 0;
    for name in bundled::names() {
        let scenario = bundled::load(name).unwrap();
        let (_, world) = run_scenario(&scenario).unwrap();
        let replay = replay_attacker(&world);
        assert_eq!(replay.successes, 0, "{name}: replayed plaintext accepted");
        total_attempted += replay.attempted;
    }
    assert!(total_attempted > 0, "the scenario corpus must expose plaintexts to replay");
    pass(4, &format!("{total_attempted} replayed plaintexts, 0 accepted"));
}

/// Criterion 5 — lockout: the brute-force scenario locks the house after
/// exactly 3 wrong attempts; no withdrawal (even with the correct password)
/// succeeds before a 3-of-5 governance reopen.
#[test]
fn acceptance_05_lockout() {
    // exactness: two wrong attempts leave the house open, the third locks it
    let scenario = bundled::load("bruteforce_guess").unwrap();
    let mut world = World::from_config(&scenario.world_config).unwrap();
    let manager = world.resolve_actor("mallory").unwrap();
    world.seed_from_password(manager, "p0").unwrap();
    for attempt in 1..=3 {
        assert!(!world.verify_and_rotate(manager, "wrong", Commitment::of("x")).unwrap());
        if attempt < 3 {
            assert!(world.status.is_open(), "locked after only {attempt} attempts");
        }
    }
    assert_eq!(world.status, SafeHouseStatus::Locked(LockReason::AuthFailures));

    // the full scenario: correct password refused while locked, withdrawal
    // succeeds only after the 3-of-5 reopen and re-seed
    let (report, _) = run_scenario(&scenario).unwrap();
    let outcome = |index: usize| &report.event_outcomes[index];
    assert_eq!(outcome(2).message, "rejected");
    assert_eq!(outcome(3).message, "rejected");
    assert_eq!(outcome(4).message, "rejected");
    assert_eq!(outcome(5).message, "vault is locked"); // correct plaintext, still refused
    assert_eq!(outcome(6).message, "vault is not open"); // withdrawal refused
    assert!(outcome(10).ok && outcome(10).message.contains("reopen_safe_house"));
    assert!(outcome(12).ok && outcome(12).message.contains("withdrew"));
    assert_eq!(report.totals.locks, 1);
    pass(5, "locked after exactly 3 wrong attempts; recovery only via 3-of-5 reopen");
}

fn combinations(items: &[usize], choose: usize) -> Vec<Vec<usize>> {
    if choose == 0 {
        return vec![Vec::new()];
    }
    if items.len() < choose {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in combinations(&items[i + 1..], choose - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Criterion 6 — governance soundness: on a 5-owner, threshold-3 set, all 10
/// two-subsets fail and all 10 three-subsets succeed; a single owner revokes
/// a manager with immediate effect.
#[test]
fn acceptance_06_governance_soundness() {
    let scenario = bundled::load("rogue_manager").unwrap();
    let owner_names = ["alice", "bob", "carol", "dave", "erin"];
    let indices: Vec<usize> = (0..5).collect();

    let two_subsets = combinations(&indices, 2);
    assert_eq!(two_subsets.len(), 10);
    for subset in &two_subsets {
        let mut world = World::from_config(&scenario.world_config).unwrap();
        let owners: Vec<Address> =
            subset.iter().map(|&i| world.resolve_actor(owner_names[i]).unwrap()).collect();
        let id =
            world.propose(owners[0], GovernanceAction::SetParameter(ParamName::MaxOut, 777)).unwrap();
        world.sign(owners[1], id).unwrap();
        assert_eq!(world.execute(owners[0], id), Err(Error::ThresholdNotMet));
        assert_eq!(world.params.max_out, UsdValue::parse("100.00").unwrap(), "sub-threshold effect");
    }

    let three_subsets = combinations(&indices, 3);
    assert_eq!(three_subsets.len(), 10);
    for subset in &three_subsets {
        let mut world = World::from_config(&scenario.world_config).unwrap();
        let owners: Vec<Address> =
            subset.iter().map(|&i| world.resolve_actor(owner_names[i]).unwrap()).collect();
        let id =
            world.propose(owners[0], GovernanceAction::SetParameter(ParamName::MaxOut, 777)).unwrap();
        world.sign(owners[1], id).unwrap();
        world.sign(owners[2], id).unwrap();
        world.execute(owners[0], id).unwrap();
        assert_eq!(world.params.max_out, UsdValue(777));
    }

    // single-owner revocation takes effect immediately
    let mut world = World::from_config(&scenario.world_config).unwrap();
    let erin = world.resolve_actor("erin").unwrap();
    let mallory = world.resolve_actor("mallory").unwrap();
    world.seed_from_password(mallory, "p0").unwrap();
    world.revoke_manager(erin, mallory).unwrap();
    assert_eq!(
        world.manager_withdraw(
            mallory,
            &Basket::single(AssetId::new("USDC").unwrap(), Amount::from_whole(1)),
            "p0",
            Commitment::of("p1")
        ),
        Err(Error::NotAManager)
    );
    pass(6, "all 10 two-subsets fail, all 10 three-subsets succeed, revocation immediate");
}

/// Criterion 7 — valuation: basket valuation matches an independent
/// term-by-term summation oracle on 1,000 random baskets (linearity and zero
/// laws exact), and the median tolerates the corrupted feed in the three-feed
/// spike scenario.
#[test]
fn acceptance_07_valuation() {
    let symbols = ["AS0", "AS1", "AS2", "AS3"];
    let mut config = adversary_config();
    for s in symbols {
        config.assets.push(AssetConfig { symbol: s.into(), approved: true });
    }
    let mut rng = SplitMix64::new(0xACCE_5507);

    for _ in 0..1000 {
        let mut world = World::from_config(&config).unwrap();
        let oracle = world.resolve_actor("oracle").unwrap();
        let mut prices = Vec::new();
        for s in symbols {
            let price = u128::from(rng.range(1, 5_000_000_000_000));
            prices.push(price);
            world.feed_update(oracle, "f1", AssetId::new(s).unwrap(), UsdValue(price)).unwrap();
        }
        // random basket, with a zero-quantity entry thrown in
        let quantities: Vec<u128> =
            (0..4).map(|i| if i == 3 { 0 } else { u128::from(rng.next_u64()) }).collect();
        let entries: Vec<BasketEntry> = symbols
            .iter()
            .zip(&quantities)
            .map(|(s, &q)| BasketEntry { asset: AssetId::new(s).unwrap(), qty: Amount(q) })
            .collect();

        // independent term-by-term oracle in big integers
        let expected: BigUint = entries
            .iter()
            .zip(&prices)
            .map(|(e, &p)| BigUint::from(p) * BigUint::from(e.qty.0) / BigUint::from(AMOUNT_UNIT))
            .sum();
        let full = Basket { entries: entries.clone() };
        let value = world.value_basket(&full, 0).unwrap();
        assert_eq!(BigUint::from(value.0), expected, "term-by-term oracle mismatch");

        // linearity over a random split into disjoint sub-baskets
        let split = rng.below(3) as usize + 1;
        let left = Basket { entries: entries[..split].to_vec() };
        let right = Basket { entries: entries[split..].to_vec() };
        let sum = world
            .value_basket(&left, 0)
            .unwrap()
            .checked_add(world.value_basket(&right, 0).unwrap())
            .unwrap();
        assert_eq!(value, sum, "linearity violated");

        // zero law: the zero-quantity entry contributes exactly nothing
        let without_zero = Basket { entries: entries[..3].to_vec() };
        assert_eq!(world.value_basket(&without_zero, 0).unwrap(), value);
    }

    // median robustness in the bundled spike scenario: the withdrawal
    // valuation is unchanged after one of three feeds spikes x10, while the
    // single-feed asset freezes
    let (report, world) = run_scenario(&bundled::load("oracle_spike").unwrap()).unwrap();
    let withdrawals: Vec<&safehouse_sim::EventOutcome> =
        report.event_outcomes.iter().filter(|e| e.call == "manager_withdraw").collect();
    assert_eq!(withdrawals[0].message, "withdrew 20.00000000"); // before the spike
    assert_eq!(withdrawals[1].message, "withdrew 20.00000000"); // after the spike
    assert!(!withdrawals[2].ok && withdrawals[2].message == "asset is frozen");
    assert!(world.frozen_assets.contains(&AssetId::new("ILLIQ").unwrap()));
    assert_eq!(report.totals.freezes, 1);
    pass(7, "1000 baskets match the summation oracle; median immune to the spiked feed");
}

/// Criterion 8 — staking: LP round-trip exactness and the return-address law
/// hold over 1,000 random proportional add/remove/stake sequences; no staking
/// output ever lands at a manager address.
#[test]
fn acceptance_08_staking() {
    let mut config = adversary_config();
    config.assets.push(AssetConfig { symbol: "ETH".into(), approved: true });
    config.pools.push(PoolConfig {
        pool_id: "p0".into(),
        asset_a: "ETH".into(),
        asset_b: "USDC".into(),
        lp_token: "LP0".into(),
        reward_rate_8dp: "0.01".into(),
    });
    config.balances.push(BalanceConfig {
        actor: "safehouse".into(),
        asset: "ETH".into(),
        amount: "1000000000".into(),
    });
    let eth = AssetId::new("ETH").unwrap();
    let usdc = AssetId::new("USDC").unwrap();
    let lp = AssetId::new("LP0").unwrap();
    let rwd = AssetId::new("RWD").unwrap();

    let mut rng = SplitMix64::new(0xACCE_5508);
    let gcd = |mut a: u128, mut b: u128| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a.max(1)
    };

    for run in 0..1000 {
        let mut world = World::from_config(&config).unwrap();
        let manager = world.resolve_actor("m").unwrap();
        let oracle = world.resolve_actor("oracle").unwrap();
        world.feed_update(oracle, "f1", usdc.clone(), UsdValue::from_whole(1)).unwrap();

        // genesis provision
        let a0 = Amount::from_whole(u128::from(rng.range(1, 1000)));
        let b0 = Amount::from_whole(u128::from(rng.range(1, 1000)));
        world
            .dispatch(
                manager,
                StakingAction::AddLiquidity,
                &StakingInstruction {
                    instruction_id: 0,
                    assets: vec![eth.clone(), usdc.clone()],
                    quantities: vec![a0, b0],
                },
            )
            .unwrap();

        for _ in 0..5 {
            let pool = world.pools.get("p0").unwrap().clone();
            let g = gcd(gcd(pool.reserve_a.0, pool.reserve_b.0), pool.lp_supply.0);
            let divisor = [1u128, 2, 4, 5][rng.below(4) as usize];
            match rng.below(3) {
                0 if g % divisor == 0 => {
                    // proportional add then immediate remove: exact round trip
                    let n = u128::from(rng.range(1, 3));
                    let dx = Amount(pool.reserve_a.0 / divisor * n);
                    let dy = Amount(pool.reserve_b.0 / divisor * n);
                    let held_a = world.balance(world.safehouse_address, &eth);
                    let held_b = world.balance(world.safehouse_address, &usdc);
                    let lp_before = world.balance(world.safehouse_address, &lp);
                    world
                        .dispatch(
                            manager,
                            StakingAction::AddLiquidity,
                            &StakingInstruction {
                                instruction_id: 0,
                                assets: vec![eth.clone(), usdc.clone()],
                                quantities: vec![dx, dy],
                            },
                        )
                        .unwrap();
                    let minted =
                        world.balance(world.safehouse_address, &lp).checked_sub(lp_before).unwrap();
                    world
                        .dispatch(
                            manager,
                            StakingAction::RemoveLiquidity,
                            &StakingInstruction {
                                instruction_id: 0,
                                assets: vec![lp.clone()],
                                quantities: vec![minted],
                            },
                        )
                        .unwrap();
                    assert_eq!(
                        world.balance(world.safehouse_address, &eth),
                        held_a,
                        "run {run}: round trip lost asset a"
                    );
                    assert_eq!(
                        world.balance(world.safehouse_address, &usdc),
                        held_b,
                        "run {run}: round trip lost asset b"
                    );
                }
                1 => {
                    let held = world.balance(world.safehouse_address, &lp);
                    if !held.is_zero() {
                        let qty = Amount(held.0 / u128::from(rng.range(1, 4)));
                        world
                            .dispatch(
                                manager,
                                StakingAction::Stake,
                                &StakingInstruction {
                                    instruction_id: 0,
                                    assets: vec![lp.clone()],
                                    quantities: vec![qty],
                                },
                            )
                            .unwrap();
                        world.advance_blocks(rng.range(0, 20));
                        world
                            .dispatch(
                                manager,
                                StakingAction::ClaimRewards,
                                &StakingInstruction {
                                    instruction_id: 0,
                                    assets: vec![lp.clone()],
                                    quantities: vec![Amount::ZERO],
                                },
                            )
                            .unwrap();
                    }
                }
                _ => {}
            }
            // the return-address law, checked after every step
            for output in [&lp, &rwd, &eth, &usdc] {
                if output == &usdc {
                    continue; // the manager's own stable funding is not a staking output
                }
                assert!(
                    world.balance(manager, output).is_zero(),
                    "run {run}: staking output {output} landed at the manager"
                );
            }
        }
    }
    pass(8, "1000 sequences: LP round trips exact, no output at any manager address");
}

/// Criterion 9 — determinism: every bundled scenario produces a byte-identical
/// report across two consecutive runs and matches its pinned golden file.
#[test]
fn acceptance_09_determinism() {
    for name in bundled::names() {
        let scenario = bundled::load(name).unwrap();
        let (first, _) = run_scenario(&scenario).unwrap();
        let (second, _) = run_scenario(&scenario).unwrap();
        assert_eq!(first.to_bytes(), second.to_bytes(), "{name}: consecutive runs differ");

        let golden_path = format!("{}/scenarios/golden/{name}.json", env!("CARGO_MANIFEST_DIR"));
        let golden = std::fs::read(&golden_path)
            .unwrap_or_else(|e| panic!("{name}: missing golden report ({e})"));
        assert_eq!(
            first.to_bytes(),
            golden,
            "{name}: report diverged from its pinned golden (digest {})",
            first.digest()
        );
    }
    pass(9, "9 scenarios byte-identical across runs and equal to pinned goldens");
}

/// Criterion 10 — block-gap rule: in every bundled scenario's log, successful
/// withdrawals are at least the configured gap apart.
#[test]
fn acceptance_10_block_gap_rule() {
    let mut audited = 0;
    for name in bundled::names() {
        let scenario = bundled::load(name).unwrap();
        let (_, world) = run_scenario(&scenario).unwrap();
        let gap = world.params.min_blocks_between_withdrawals;
        let blocks: Vec<u64> = world
            .public_log()
            .iter()
            .filter(|r| r.call_name == "manager_withdraw" && r.outcome.ok)
            .map(|r| r.block)
            .collect();
        for pair in blocks.windows(2) {
            assert!(
                pair[1] >= pair[0] + gap,
                "{name}: withdrawals at blocks {} and {} violate the {gap}-block gap",
                pair[0],
                pair[1]
            );
            audited += 1;
        }
    }
    assert!(audited > 0, "the corpus must contain consecutive withdrawals to audit");
    pass(10, &format!("log audit: {audited} consecutive withdrawal pairs respect the gap"));
}
