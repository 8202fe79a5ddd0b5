//! Shared world builders for the integration tests.
#![allow(dead_code)] // each test target uses a different subset

use safehouse_core::*;

/// A standard five-owner world: threshold 3, one manager, one investor, three
/// price feeds, USDC (stable, approved) and ETH (approved), one ETH/USDC pool.
pub fn standard_config() -> WorldConfig {
    serde_json::from_value(serde_json::json!({
        "stable_asset": "USDC",
        "fund_token": "FUND",
        "owners": ["alice", "bob", "carol", "dave", "erin"],
        "threshold": 3,
        "managers": ["mallory"],
        "extra_actors": ["ivan", "oracle"],
        "assets": [
            {"symbol": "ETH", "approved": true}
        ],
        "balances": [
            {"actor": "ivan", "asset": "USDC", "amount": "10000"},
            {"actor": "safehouse", "asset": "USDC", "amount": "1000"},
            {"actor": "safehouse", "asset": "ETH", "amount": "100"},
            {"actor": "mallory", "asset": "USDC", "amount": "500"}
        ],
        "params": {
            "max_out": "100.00",
            "tolerance_bp": 500,
            "cd_time_blocks": 20,
            "min_blocks_between_withdrawals": 0,
            "criterion_mode": "one",
            "max_failed_auth": 3
        },
        "pools": [
            {"pool_id": "eth-usdc", "asset_a": "ETH", "asset_b": "USDC",
             "lp_token": "LP-EU", "reward_rate_8dp": "0.01"}
        ],
        "feeds": ["f1", "f2", "f3"]
    }))
    .unwrap()
}

/// Build the standard world and quote USDC at 1.00 and ETH at 2000.00 on one
/// feed so baskets are valuable from block zero.
pub fn standard_world() -> World {
    let mut world = World::from_config(&standard_config()).unwrap();
    let oracle = world.resolve_actor("oracle").unwrap();
    let usdc = AssetId::new("USDC").unwrap();
    let eth = AssetId::new("ETH").unwrap();
    world.feed_update(oracle, "f1", usdc, UsdValue::parse("1.00").unwrap()).unwrap();
    world.feed_update(oracle, "f1", eth, UsdValue::parse("2000.00").unwrap()).unwrap();
    world
}

pub fn addr(world: &World, name: &str) -> Address {
    world.resolve_actor(name).unwrap()
}

pub fn asset(symbol: &str) -> AssetId {
    AssetId::new(symbol).unwrap()
}

pub fn usd(text: &str) -> UsdValue {
    UsdValue::parse(text).unwrap()
}

pub fn amt(text: &str) -> Amount {
    Amount::parse(text).unwrap()
}

/// Basket holding a single USDC position of the given whole-token quantity.
pub fn usdc_basket(tokens: u128) -> Basket {
    Basket::single(asset("USDC"), Amount::from_whole(tokens))
}

/// Seed the standard manager with password "p0" and return the address.
pub fn seeded_manager(world: &mut World) -> Address {
    let mallory = addr(world, "mallory");
    world.seed_from_password(mallory, "p0").unwrap();
    mallory
}

/// Run a full governance round: one owner proposes, two more sign, execute.
pub fn govern(world: &mut World, action: GovernanceAction) {
    let alice = addr(world, "alice");
    let bob = addr(world, "bob");
    let carol = addr(world, "carol");
    let id = world.propose(alice, action).unwrap();
    world.sign(bob, id).unwrap();
    world.sign(carol, id).unwrap();
    world.execute(alice, id).unwrap();
}
