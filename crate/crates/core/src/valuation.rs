//! Oracle price aggregation, the reference-price guard, the approved-asset
//! list and basket valuation.
//!
//! Prices and USD values use 8-decimal fixed point. Basket entry values are
//! floor(price × qty / 10^18); floors everywhere keep both counter-deposit
//! criteria evaluable bit-exactly by independent implementations.
//!
//! Aggregation is the median of the latest quote per feed, so a single
//! manipulated feed cannot move a three-feed valuation beyond the span of the
//! two honest quotes. Assets whose aggregate strays outside the governance-set
//! reference band freeze until the owners update the reference.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::ledger::{parse_fixed, render_fixed, Amount, AssetId, CallOutcome, AMOUNT_UNIT};
use crate::math::muldiv;
use crate::world::World;

/// One whole USD in 8-decimal fixed point.
pub const USD_UNIT: u128 = 100_000_000;

/// USD value (or price): unsigned 128-bit, 8-decimal fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct UsdValue(pub u128);

impl UsdValue {
    pub const ZERO: UsdValue = UsdValue(0);

    pub fn from_whole(dollars: u128) -> UsdValue {
        UsdValue(dollars * USD_UNIT)
    }

    pub fn checked_add(self, other: UsdValue) -> Result<UsdValue> {
        self.0.checked_add(other.0).map(UsdValue).ok_or(Error::Overflow)
    }

    pub fn saturating_sub(self, other: UsdValue) -> UsdValue {
        UsdValue(self.0.saturating_sub(other.0))
    }

    pub fn render(self) -> String {
        render_fixed(self.0, 8)
    }

    pub fn parse(text: &str) -> Result<UsdValue> {
        parse_fixed(text, 8).map(UsdValue)
    }
}

impl fmt::Display for UsdValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// floor(price × qty / 10^18): the USD value of `qty` tokens at `price`.
pub fn entry_value(price: UsdValue, qty: Amount) -> Result<UsdValue> {
    Ok(UsdValue(muldiv(price.0, qty.0, AMOUNT_UNIT)?))
}

/// A feed's latest word on an asset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceQuote {
    pub asset: AssetId,
    pub price: UsdValue,
    pub source: String,
    pub block: u64,
}

/// Governance-set anchor with a deviation band in basis points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferencePrice {
    pub asset: AssetId,
    pub price: UsdValue,
    pub band_bp: u32,
}

/// Asset-quantity list. Assets must be distinct within a basket.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Basket {
    pub entries: Vec<BasketEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasketEntry {
    pub asset: AssetId,
    #[serde(with = "amount_string")]
    pub qty: Amount,
}

mod amount_string {
    use super::Amount;
    use serde::{self, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(amount: &Amount, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&amount.render())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Amount, D::Error> {
        let text = String::deserialize(d)?;
        Amount::parse(&text).map_err(serde::de::Error::custom)
    }
}

impl Basket {
    pub fn single(asset: AssetId, qty: Amount) -> Basket {
        Basket { entries: vec![BasketEntry { asset, qty }] }
    }

    pub fn has_distinct_assets(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        self.entries.iter().all(|e| seen.insert(&e.asset))
    }
}

/// Outcome of the reference-price guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardOutcome {
    Pass,
    Freeze,
}

impl World {
    /// Median of the latest quote per feed for `asset`, considering quotes at
    /// or before `at_block`. An even count takes the floor of the mean of the
    /// two middle values. LP tokens of a known pool are priced from the pool's
    /// own reserves instead (the holder's proportional claim).
    pub fn aggregate_price(&self, asset: &AssetId, at_block: u64) -> Result<UsdValue> {
        if let Some(pool_id) = self.pool_by_lp_token(asset) {
            return self.lp_token_price(&pool_id, at_block);
        }
        let mut latest: Vec<UsdValue> = Vec::new();
        for feed in &self.feeds {
            let quote = self
                .quotes
                .iter()
                .filter(|q| &q.asset == asset && &q.source == feed && q.block <= at_block)
                .max_by_key(|q| q.block);
            if let Some(q) = quote {
                latest.push(q.price);
            }
        }
        if latest.is_empty() {
            return Err(Error::NoQuotes);
        }
        latest.sort();
        let n = latest.len();
        if n % 2 == 1 {
            Ok(latest[n / 2])
        } else {
            Ok(UsdValue((latest[n / 2 - 1].0 + latest[n / 2].0) / 2))
        }
    }

    /// Pass unless the price deviates from the reference by strictly more
    /// than the band: freeze iff |price − ref| × 10000 > ref × band_bp.
    pub fn reference_guard(&self, asset: &AssetId, price: UsdValue) -> Result<GuardOutcome> {
        let reference = self.reference_prices.get(asset).ok_or(Error::NoReference)?;
        let deviation = price.0.abs_diff(reference.price.0);
        let lhs = deviation.checked_mul(10_000).ok_or(Error::Overflow)?;
        let rhs = reference.price.0.checked_mul(reference.band_bp as u128).ok_or(Error::Overflow)?;
        if lhs > rhs {
            Ok(GuardOutcome::Freeze)
        } else {
            Ok(GuardOutcome::Pass)
        }
    }

    /// Sum of floor(price × qty / 10^18) over basket entries, using the
    /// median-aggregated price of each asset.
    ///
    /// Every asset must be on the approved list and must not be frozen.
    /// This is a read: the mutating wrapper used by transitions also trips
    /// the reference guard persistently.
    pub fn value_basket(&self, basket: &Basket, at_block: u64) -> Result<UsdValue> {
        if !basket.has_distinct_assets() {
            return Err(Error::Malformed);
        }
        let mut total = UsdValue::ZERO;
        for entry in &basket.entries {
            if !self.approved_assets.contains(&entry.asset) {
                return Err(Error::UnapprovedAsset);
            }
            if self.frozen_assets.contains(&entry.asset) {
                return Err(Error::FrozenAsset);
            }
            let price = self.aggregate_price(&entry.asset, at_block)?;
            if self.reference_prices.contains_key(&entry.asset)
                && self.reference_guard(&entry.asset, price)? == GuardOutcome::Freeze
            {
                return Err(Error::FrozenAsset);
            }
            total = total.checked_add(entry_value(price, entry.qty)?)?;
        }
        Ok(total)
    }

    /// Like [`value_basket`](Self::value_basket), but an out-of-band price
    /// marks the asset frozen in the world; it stays immobile until the
    /// owners update the reference.
    pub(crate) fn value_basket_guarded(&mut self, basket: &Basket, at_block: u64) -> Result<UsdValue> {
        for entry in &basket.entries {
            if self.approved_assets.contains(&entry.asset) && !self.frozen_assets.contains(&entry.asset)
            {
                if let Ok(price) = self.aggregate_price(&entry.asset, at_block) {
                    if self.reference_prices.contains_key(&entry.asset)
                        && self.reference_guard(&entry.asset, price)? == GuardOutcome::Freeze
                    {
                        self.frozen_assets.insert(entry.asset.clone());
                        self.freezes_raised += 1;
                    }
                }
            }
        }
        self.value_basket(basket, at_block)
    }

    /// Floor of the arithmetic mean of all aggregated prices recorded within
    /// the trailing `window` blocks. Serves as the default price for assets
    /// without a live feed.
    pub fn moving_average_default(&self, asset: &AssetId, window: u64) -> Result<UsdValue> {
        let height = self.clock.height;
        let prices: Vec<u128> = self
            .aggregate_history
            .iter()
            .filter(|(a, block, _)| a == asset && height - block < window)
            .map(|(_, _, price)| price.0)
            .collect();
        if prices.is_empty() {
            return Err(Error::NoHistory);
        }
        let sum: u128 =
            prices.iter().try_fold(0u128, |acc, p| acc.checked_add(*p)).ok_or(Error::Overflow)?;
        Ok(UsdValue(sum / prices.len() as u128))
    }

    /// Record a feed's quote for an asset at the current block. The resulting
    /// aggregate is appended to the price history used by the moving-average
    /// default.
    pub fn feed_update(
        &mut self,
        caller: crate::ledger::Address,
        feed_id: &str,
        asset: AssetId,
        price: UsdValue,
    ) -> Result<()> {
        let payload = serde_json::to_vec(&FeedUpdatePayload {
            feed_id,
            asset: asset.symbol(),
            price: &price.render(),
        })
        .unwrap();
        let result = self.feed_update_inner(feed_id, asset, price);
        let outcome = match &result {
            Ok(()) => CallOutcome::success("quoted"),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(caller, self.safehouse_address, "feed_update", payload, outcome);
        result
    }

    fn feed_update_inner(&mut self, feed_id: &str, asset: AssetId, price: UsdValue) -> Result<()> {
        if !self.feeds.contains(&feed_id.to_string()) {
            return Err(Error::NoQuotes);
        }
        if price.0 == 0 {
            return Err(Error::ZeroAmount);
        }
        self.quotes.push(PriceQuote {
            asset: asset.clone(),
            price,
            source: feed_id.to_string(),
            block: self.clock.height,
        });
        let aggregate = self.aggregate_price(&asset, self.clock.height)?;
        self.aggregate_history.push((asset, self.clock.height, aggregate));
        Ok(())
    }
}

#[derive(Serialize)]
struct FeedUpdatePayload<'a> {
    feed_id: &'a str,
    asset: &'a str,
    price: &'a str,
}
