//! MEV strategies against a plaintext or a committed mempool.
//!
//! In plaintext mode the attacker sees the victim's side and size and trades
//! around it. In committed mode it only knows that an order is pending and
//! the configured size range, so it guesses side and size and the sequencer
//! places its trades at a random position relative to the victim.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::amm::{format_rational, AmmError, Order, PoolState, Rational, Side};
use crate::keccak::keccak256_concat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Frontrun,
    Sandwich,
    Arbitrage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plaintext,
    Committed,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Frontrun => "frontrun",
            Strategy::Sandwich => "sandwich",
            Strategy::Arbitrage => "arbitrage",
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Plaintext => "plaintext",
            Mode::Committed => "committed",
        })
    }
}

/// What a committed-mode attacker knows about pending orders: sizes are
/// drawn uniformly from `[min, max]` on a grid of `1/resolution`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeRange {
    pub min: Rational,
    pub max: Rational,
    pub resolution: u64,
}

impl SizeRange {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Rational {
        let res = BigInt::from(self.resolution);
        let lo = (&self.min * Rational::from(res.clone())).ceil().to_integer();
        let hi = (&self.max * Rational::from(res.clone())).floor().to_integer();
        let span = (&hi - &lo).to_u64().unwrap_or(0);
        let k = lo + BigInt::from(rng.gen_range(0..=span));
        Rational::new(k, res)
    }
}

/// Monte-Carlo settings for committed mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trials {
    pub count: u64,
    pub seed: u64,
    /// Range of victim sizes; the attacker guesses from the same range.
    pub range: SizeRange,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackReport {
    pub strategy: Strategy,
    pub mode: Mode,
    pub trials: u64,
    pub mean_profit: Rational,
    pub profit_samples: Vec<Rational>,
}

/// Committed-mode samples are quantized to this many decimals before
/// averaging.
pub const SAMPLE_DECIMALS: u32 = 18;

impl AttackReport {
    fn from_samples(strategy: Strategy, mode: Mode, samples: Vec<Rational>) -> Self {
        let n = samples.len() as u64;
        let mean = if samples.is_empty() {
            Rational::zero()
        } else {
            samples.iter().sum::<Rational>() / Rational::from(BigInt::from(n))
        };
        AttackReport {
            strategy,
            mode,
            trials: n,
            mean_profit: mean,
            profit_samples: samples,
        }
    }

    /// Sample standard deviation of the mean, `sqrt(s^2 / n)`, as a decimal
    /// truncated to `places`.
    pub fn std_err(&self, places: u32) -> String {
        let n = self.profit_samples.len();
        if n < 2 {
            return crate::amm::format_decimal(&Rational::zero(), places);
        }
        let mean = &self.mean_profit;
        let ss: Rational = self.profit_samples.iter().map(|x| (x - mean) * (x - mean)).sum();
        let var_mean = ss / Rational::from(BigInt::from((n - 1) * n));
        crate::amm::format_decimal(&sqrt_floor(&var_mean, places), places)
    }

    /// `mean / std_err` as a float, for significance tests.
    pub fn t_statistic(&self) -> f64 {
        let se: f64 = self.std_err(SAMPLE_DECIMALS).parse().unwrap_or(0.0);
        let mean = self.mean_profit.to_f64().unwrap_or(0.0);
        if se == 0.0 {
            0.0
        } else {
            mean / se
        }
    }

    /// `strategy,mode,trials,mean_profit,std_err`.
    pub fn csv_row(&self) -> [String; 5] {
        [
            self.strategy.to_string(),
            self.mode.to_string(),
            self.trials.to_string(),
            format_rational(&self.mean_profit),
            self.std_err(12),
        ]
    }
}

/// `floor(sqrt(r) * 10^places) / 10^places` for `r >= 0`.
pub fn sqrt_floor(r: &Rational, places: u32) -> Rational {
    let scale = BigInt::from(10u32).pow(places);
    let scaled = (r * Rational::from(&scale * &scale)).floor().to_integer();
    Rational::new(scaled.sqrt(), scale)
}

/// Exact square root when numerator and denominator are perfect squares.
fn sqrt_exact(r: &Rational) -> Option<Rational> {
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| Rational::new(n, d))
}

fn quantize(r: Rational) -> Rational {
    let scale = BigInt::from(10u32).pow(SAMPLE_DECIMALS);
    Rational::new((r * Rational::from(scale.clone())).floor().to_integer(), scale)
}

/// Attacker's net money after trading `size` in `side` and later closing
/// the position; `victim` (if any) executes at `victim_slot`: 0 before the
/// attacker opens, 1 between open and close, 2 after the close.
pub fn sandwich_profit(
    pool: &PoolState,
    victim: Option<&Order>,
    side: Side,
    size: &Rational,
    victim_slot: u8,
) -> Result<Rational, AmmError> {
    let mut state = pool.clone();
    let mut money = Rational::zero();
    let run_victim = |s: &mut PoolState| {
        if let Some(v) = victim {
            // a victim whose limit is crossed simply does not execute
            if let Ok((next, _)) = s.apply_trade(v) {
                *s = next;
            }
        }
    };
    for slot in 0..3u8 {
        if slot == victim_slot {
            run_victim(&mut state);
        }
        let leg = match slot {
            0 => Some(side),
            1 => Some(side.opposite()),
            _ => None,
        };
        if let Some(leg) = leg {
            let (next, q) = state.swap(leg, size)?;
            match leg {
                Side::Buy => money -= q.amount_in,
                Side::Sell => money += q.amount_out,
            }
            state = next;
        }
    }
    Ok(money)
}

/// Net money of a single `side` trade of `size`, marked at the spot price
/// right after the victim executes. `victim_first` puts the victim ahead of
/// the attacker.
pub fn frontrun_profit(
    pool: &PoolState,
    victim: &Order,
    side: Side,
    size: &Rational,
    victim_first: bool,
) -> Result<Rational, AmmError> {
    let exec_victim = |s: &PoolState| s.apply_trade(victim).map(|(n, _)| n).unwrap_or_else(|_| s.clone());
    let mut state = pool.clone();
    if victim_first {
        state = exec_victim(&state);
    }
    let mark_before = state.spot_price()?;
    let (after, q) = state.swap(side, size)?;
    state = after;
    let mark = if victim_first {
        mark_before
    } else {
        exec_victim(&state).spot_price()?
    };
    Ok(match side {
        Side::Buy => size * mark - q.amount_in,
        Side::Sell => q.amount_out - size * mark,
    })
}

fn trial_rng(seed: u64, strategy: Strategy, trial: u64) -> ChaCha20Rng {
    let digest = keccak256_concat([
        &b"gridswap/mev"[..],
        &seed.to_be_bytes(),
        strategy.to_string().as_bytes(),
        &trial.to_be_bytes(),
    ]);
    ChaCha20Rng::from_seed(digest)
}

fn check_size(pool: &PoolState, size: &Rational) -> Result<(), AmmError> {
    if size >= pool.e() {
        return Err(AmmError::Liquidity {
            requested: size.clone().into(),
            available: pool.e().clone().into(),
        });
    }
    if !size.is_positive() {
        return Err(AmmError::Range(size.clone()));
    }
    Ok(())
}

fn random_victim<R: Rng + ?Sized>(range: &SizeRange, rng: &mut R) -> Order {
    let side = if rng.gen_bool(0.5) { Side::Buy } else { Side::Sell };
    let quantity_e = range.sample(rng);
    let limit_rate = match side {
        Side::Buy => Rational::from(BigInt::from(u64::MAX)),
        Side::Sell => Rational::zero(),
    };
    Order {
        side,
        quantity_e,
        limit_rate,
        trader_id: "victim".into(),
    }
}

fn committed<F>(pool: &PoolState, strategy: Strategy, trials: &Trials, mut one: F) -> Result<AttackReport, AmmError>
where
    F: FnMut(&Order, Side, &Rational, &mut ChaCha20Rng) -> Result<Rational, AmmError>,
{
    check_size(pool, &trials.range.max)?;
    let mut samples = Vec::with_capacity(trials.count as usize);
    for t in 0..trials.count {
        let mut rng = trial_rng(trials.seed, strategy, t);
        let victim = random_victim(&trials.range, &mut rng);
        let side = if rng.gen_bool(0.5) { Side::Buy } else { Side::Sell };
        let size = trials.range.sample(&mut rng);
        samples.push(quantize(one(&victim, side, &size, &mut rng)?));
    }
    Ok(AttackReport::from_samples(strategy, Mode::Committed, samples))
}

/// Sandwich attack. Plaintext: one trade of `attacker_size` in the victim's
/// direction before it and the reverse after. Committed: `trials` blind
/// attempts against random victims from `trials.range`.
pub fn run_sandwich(
    pool: &PoolState,
    victim: Option<&Order>,
    attacker_size: &Rational,
    mode: Mode,
    trials: &Trials,
) -> Result<AttackReport, AmmError> {
    check_size(pool, attacker_size)?;
    let Some(v) = victim else {
        return Ok(AttackReport::from_samples(Strategy::Sandwich, mode, vec![Rational::zero()]));
    };
    match mode {
        Mode::Plaintext => {
            let p = sandwich_profit(pool, Some(v), v.side, attacker_size, 1)?;
            Ok(AttackReport::from_samples(Strategy::Sandwich, mode, vec![p]))
        }
        Mode::Committed => committed(pool, Strategy::Sandwich, trials, |victim, side, size, rng| {
            sandwich_profit(pool, Some(victim), side, size, rng.gen_range(0..3))
        }),
    }
}

/// Front-running: a single trade ahead of the victim, marked at the
/// post-victim spot price.
pub fn run_frontrun(
    pool: &PoolState,
    victim: Option<&Order>,
    attacker_size: &Rational,
    mode: Mode,
    trials: &Trials,
) -> Result<AttackReport, AmmError> {
    check_size(pool, attacker_size)?;
    let Some(v) = victim else {
        return Ok(AttackReport::from_samples(Strategy::Frontrun, mode, vec![Rational::zero()]));
    };
    match mode {
        Mode::Plaintext => {
            let p = frontrun_profit(pool, v, v.side, attacker_size, false)?;
            Ok(AttackReport::from_samples(Strategy::Frontrun, mode, vec![p]))
        }
        Mode::Committed => committed(pool, Strategy::Frontrun, trials, |victim, side, size, rng| {
            frontrun_profit(pool, victim, side, size, rng.gen_bool(0.5))
        }),
    }
}

/// Size that equalizes marginal prices when buying from `cheap` and selling
/// into `dear`: `(sqrt(Cd) Ec - sqrt(Cc) Ed) / (sqrt(Cc) + sqrt(Cd))`. Exact
/// when both products are rational squares, otherwise truncated to
/// `SAMPLE_DECIMALS` places.
pub fn arbitrage_size(cheap: &PoolState, dear: &PoolState) -> Rational {
    let root = |r: &Rational| sqrt_exact(r).unwrap_or_else(|| sqrt_floor(r, SAMPLE_DECIMALS));
    let (sc, sd) = (root(cheap.c()), root(dear.c()));
    let x = (&sd * cheap.e() - &sc * dear.e()) / (&sc + &sd);
    if x.is_positive() {
        x
    } else {
        Rational::zero()
    }
}

/// Net money from buying `x` in `cheap` and selling it into `dear`.
pub fn arbitrage_profit(cheap: &PoolState, dear: &PoolState, x: &Rational) -> Result<Rational, AmmError> {
    if x.is_zero() {
        return Ok(Rational::zero());
    }
    let cost = cheap.quote_buy(x)?.amount_in;
    let proceeds = dear.quote_sell(x)?.amount_out;
    Ok(proceeds - cost)
}

/// Cross-pool arbitrage. Pool spot prices are public in both modes, so the
/// result does not depend on `mode`.
pub fn run_arbitrage(pool_a: &PoolState, pool_b: &PoolState, mode: Mode) -> Result<AttackReport, AmmError> {
    let (pa, pb) = (pool_a.spot_price()?, pool_b.spot_price()?);
    let profit = match pa.cmp(&pb) {
        std::cmp::Ordering::Equal => Rational::zero(),
        std::cmp::Ordering::Less => arbitrage_profit(pool_a, pool_b, &arbitrage_size(pool_a, pool_b))?,
        std::cmp::Ordering::Greater => arbitrage_profit(pool_b, pool_a, &arbitrage_size(pool_b, pool_a))?,
    };
    Ok(AttackReport::from_samples(Strategy::Arbitrage, mode, vec![profit]))
}

/// Writes `strategy,mode,trials,mean_profit,std_err` rows.
pub fn write_reports<W: std::io::Write>(reports: &[AttackReport], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["strategy", "mode", "trials", "mean_profit", "std_err"])?;
    for r in reports {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amm::{int, pool_init, ratio};

    fn buy(q: i64) -> Order {
        Order {
            side: Side::Buy,
            quantity_e: int(q),
            limit_rate: int(1_000_000),
            trader_id: "v".into(),
        }
    }

    fn trials(count: u64) -> Trials {
        Trials {
            count,
            seed: 9,
            range: SizeRange {
                min: int(1),
                max: int(100),
                resolution: 1_000,
            },
        }
    }

    #[test]
    fn plaintext_sandwich_example() {
        let pool = pool_init(int(1000), int(1000)).unwrap();
        let r = run_sandwich(&pool, Some(&buy(100)), &int(50), Mode::Plaintext, &trials(0)).unwrap();
        let expected = ratio(1_000_000, 850) - ratio(1_000_000, 900) - ratio(1_000_000 * 50, 1000 * 950);
        assert_eq!(r.mean_profit, expected);
        assert_eq!(crate::amm::format_decimal(&expected, 4), "12.7278");
    }

    #[test]
    fn no_victim_no_profit() {
        let pool = pool_init(int(1000), int(1000)).unwrap();
        for mode in [Mode::Plaintext, Mode::Committed] {
            assert!(run_sandwich(&pool, None, &int(50), mode, &trials(10)).unwrap().mean_profit.is_zero());
            assert!(run_frontrun(&pool, None, &int(50), mode, &trials(10)).unwrap().mean_profit.is_zero());
        }
        // round trip with the victim outside the window is free
        for slot in [0, 2] {
            assert!(sandwich_profit(&pool, Some(&buy(100)), Side::Buy, &int(50), slot).unwrap().is_zero());
        }
    }

    #[test]
    fn oversize_attacker_is_a_liquidity_error() {
        let pool = pool_init(int(1000), int(1000)).unwrap();
        let err = run_sandwich(&pool, Some(&buy(1)), &int(1000), Mode::Plaintext, &trials(0)).unwrap_err();
        assert!(err.to_string().starts_with("liquidity error"));
    }

    #[test]
    fn frontrun_direction_matters() {
        let pool = pool_init(int(1000), int(1000)).unwrap();
        let up = run_frontrun(&pool, Some(&buy(100)), &int(50), Mode::Plaintext, &trials(0)).unwrap();
        assert!(up.mean_profit.is_positive());
        let sell = Order {
            side: Side::Sell,
            quantity_e: int(100),
            limit_rate: int(0),
            trader_id: "v".into(),
        };
        assert!(frontrun_profit(&pool, &sell, Side::Buy, &int(50), false).unwrap().is_negative());
    }

    #[test]
    fn arbitrage_example() {
        let a = pool_init(int(100), int(100)).unwrap();
        let b = pool_init(int(100), int(400)).unwrap();
        assert_eq!(arbitrage_size(&a, &b), ratio(100, 3));
        let r = run_arbitrage(&a, &b, Mode::Committed).unwrap();
        assert_eq!(r.mean_profit, int(50));
        assert_eq!(run_arbitrage(&b, &a, Mode::Plaintext).unwrap().mean_profit, int(50));
        assert!(run_arbitrage(&a, &a, Mode::Plaintext).unwrap().mean_profit.is_zero());
    }

    #[test]
    fn std_err_of_known_samples() {
        let r = AttackReport::from_samples(Strategy::Sandwich, Mode::Committed, vec![int(1), int(3)]);
        // s^2 = 2, s^2 / n = 1
        assert_eq!(r.std_err(3), "1.000");
        assert_eq!(r.mean_profit, int(2));
        assert_eq!(r.csv_row(), ["sandwich", "committed", "2", "2", "1.000000000000"].map(String::from));
    }
}
