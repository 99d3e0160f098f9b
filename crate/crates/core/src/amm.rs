//! Constant-product pool in exact rational arithmetic.
//!
//! Reserves are `E` (energy tokens) and `M` (money tokens) with `E * M = C`.
//! Prices are quoted in M per E.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AmmError {
    #[error("reserves must be positive (E = {e}, M = {m})")]
    NonPositiveReserve { e: Box<Rational>, m: Box<Rational> },
    #[error("trade quantity must be positive, got {0}")]
    Range(Rational),
    #[error("liquidity error: requested {requested} E-tokens but the pool holds {available}")]
    Liquidity {
        requested: Box<Rational>,
        available: Box<Rational>,
    },
    #[error("limit violated: effective price {effective} vs limit {limit}")]
    LimitViolated {
        effective: Box<Rational>,
        limit: Box<Rational>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Order {
    pub side: Side,
    pub quantity_e: Rational,
    /// Maximum rate for a buy, minimum rate for a sell.
    pub limit_rate: Rational,
    pub trader_id: String,
}

/// Result of pricing a trade. For buys `amount_in` is money and
/// `amount_out` energy; for sells the other way around.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quote {
    pub side: Side,
    pub amount_in: Rational,
    pub amount_out: Rational,
    pub effective_price: Rational,
    pub price_impact: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolState {
    e: Rational,
    m: Rational,
    c: Rational,
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Creates a pool with `C = E0 * M0`.
pub fn pool_init(e0: Rational, m0: Rational) -> Result<PoolState, AmmError> {
    if !e0.is_positive() || !m0.is_positive() {
        return Err(AmmError::NonPositiveReserve {
            e: e0.into(),
            m: m0.into(),
        });
    }
    let c = &e0 * &m0;
    Ok(PoolState { e: e0, m: m0, c })
}

impl PoolState {
    pub fn e(&self) -> &Rational {
        &self.e
    }

    pub fn m(&self) -> &Rational {
        &self.m
    }

    pub fn c(&self) -> &Rational {
        &self.c
    }

    pub fn invariant_holds(&self) -> bool {
        &self.e * &self.m == self.c
    }

    /// `M / E`, checked against `C / E^2` and `M^2 / C`.
    pub fn spot_price(&self) -> Result<Rational, AmmError> {
        if !self.e.is_positive() || !self.m.is_positive() {
            return Err(AmmError::NonPositiveReserve {
                e: self.e.clone().into(),
                m: self.m.clone().into(),
            });
        }
        let p = &self.m / &self.e;
        debug_assert_eq!(p, &self.c / (&self.e * &self.e));
        debug_assert_eq!(p, (&self.m * &self.m) / &self.c);
        Ok(p)
    }

    fn check_quantity(&self, e: &Rational) -> Result<(), AmmError> {
        if !e.is_positive() {
            return Err(AmmError::Range(e.clone()));
        }
        if !self.e.is_positive() || !self.m.is_positive() {
            return Err(AmmError::NonPositiveReserve {
                e: self.e.clone().into(),
                m: self.m.clone().into(),
            });
        }
        Ok(())
    }

    /// Buying `e` energy: pays `C e / (E (E - e))`.
    pub fn quote_buy(&self, e: &Rational) -> Result<Quote, AmmError> {
        self.check_quantity(e)?;
        if e >= &self.e {
            return Err(AmmError::Liquidity {
                requested: e.clone().into(),
                available: self.e.clone().into(),
            });
        }
        let remaining = &self.e - e;
        let effective_price = &self.c / (&self.e * &remaining);
        Ok(Quote {
            side: Side::Buy,
            amount_in: &effective_price * e,
            amount_out: e.clone(),
            effective_price,
            price_impact: e / &remaining,
        })
    }

    /// Selling `e` energy: receives `C e / (E (E + e))`.
    pub fn quote_sell(&self, e: &Rational) -> Result<Quote, AmmError> {
        self.check_quantity(e)?;
        let grown = &self.e + e;
        let effective_price = &self.c / (&self.e * &grown);
        Ok(Quote {
            side: Side::Sell,
            amount_in: e.clone(),
            amount_out: &effective_price * e,
            effective_price,
            price_impact: e / &grown,
        })
    }

    pub fn quote(&self, side: Side, e: &Rational) -> Result<Quote, AmmError> {
        match side {
            Side::Buy => self.quote_buy(e),
            Side::Sell => self.quote_sell(e),
        }
    }

    /// `e / (E - e)` for a buy.
    pub fn price_impact(&self, e: &Rational) -> Result<Rational, AmmError> {
        self.quote_buy(e).map(|q| q.price_impact)
    }

    /// Executes a trade without a limit check. The reserve change is exact:
    /// `E' = E -/+ e` and `M' = C / E'`.
    pub fn swap(&self, side: Side, e: &Rational) -> Result<(PoolState, Quote), AmmError> {
        let quote = self.quote(side, e)?;
        let e_new = match side {
            Side::Buy => &self.e - e,
            Side::Sell => &self.e + e,
        };
        let m_new = &self.c / &e_new;
        let next = PoolState {
            e: e_new,
            m: m_new,
            c: self.c.clone(),
        };
        debug_assert!(next.invariant_holds());
        Ok((next, quote))
    }

    /// Executes `order` if its limit is respected; otherwise returns an error
    /// and the caller keeps the old state.
    pub fn apply_trade(&self, order: &Order) -> Result<(PoolState, Quote), AmmError> {
        let quote = self.quote(order.side, &order.quantity_e)?;
        let ok = match order.side {
            Side::Buy => quote.effective_price <= order.limit_rate,
            Side::Sell => quote.effective_price >= order.limit_rate,
        };
        if !ok {
            return Err(AmmError::LimitViolated {
                effective: quote.effective_price.into(),
                limit: order.limit_rate.clone().into(),
            });
        }
        self.swap(order.side, &order.quantity_e)
    }

    /// Replaces both reserves with new values sharing a fresh invariant.
    /// Used when liquidity is added, split or merged.
    pub fn reset(e: Rational, m: Rational) -> Result<PoolState, AmmError> {
        pool_init(e, m)
    }
}

/// Renders a rational as `num/den`, or just `num` when integral.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Decimal rendering rounded toward zero.
pub fn format_decimal(r: &Rational, places: u32) -> String {
    let scale = BigInt::from(10u32).pow(places);
    let scaled = (r * Rational::from_integer(scale.clone())).trunc().to_integer();
    let neg = scaled.is_negative() || (scaled.is_zero() && r.is_negative());
    let mag = scaled.abs();
    let whole = &mag / &scale;
    let frac = &mag % &scale;
    let sign = if neg { "-" } else { "" };
    if places == 0 {
        format!("{sign}{whole}")
    } else {
        format!("{sign}{whole}.{frac:0>width$}", width = places as usize)
    }
}

#[derive(Serialize, Deserialize)]
struct RationalJson {
    num: String,
    den: String,
}

impl From<&Rational> for RationalJson {
    fn from(r: &Rational) -> Self {
        RationalJson {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }
}

impl RationalJson {
    fn parse<E: serde::de::Error>(&self) -> Result<Rational, E> {
        let num: BigInt = self.num.parse().map_err(|_| E::custom("num is not an integer"))?;
        let den: BigInt = self.den.parse().map_err(|_| E::custom("den is not an integer"))?;
        if den.is_zero() {
            return Err(E::custom("den is zero"));
        }
        Ok(Rational::new(num, den))
    }
}

#[derive(Serialize, Deserialize)]
struct PoolJson {
    e: RationalJson,
    m: RationalJson,
    c: RationalJson,
}

impl Serialize for PoolState {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoolJson {
            e: (&self.e).into(),
            m: (&self.m).into(),
            c: (&self.c).into(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PoolState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = PoolJson::deserialize(d)?;
        let pool = PoolState {
            e: raw.e.parse()?,
            m: raw.m.parse()?,
            c: raw.c.parse()?,
        };
        if !pool.invariant_holds() {
            return Err(serde::de::Error::custom("E * M != C"));
        }
        Ok(pool)
    }
}
