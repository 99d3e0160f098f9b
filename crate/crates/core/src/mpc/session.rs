use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::exec::{broadcast_round, Executor, LatencyModel};
use super::{
    check_parties, deal_triple, ordered, AdditiveShare, BeaverTriple, MaskBroadcast, MpcError,
    RoundLog, ShareTag,
};
use crate::field_group::{FieldElement, PrimeField};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub parties: usize,
    pub modulus: u128,
    #[serde(default)]
    pub executor: Executor,
    #[serde(default)]
    pub latency: LatencyModel,
    /// Seeds the latency sampler only; shares and triples use caller RNGs.
    #[serde(default)]
    pub seed: u64,
}

impl SessionConfig {
    pub fn new(parties: usize, field: PrimeField) -> Self {
        SessionConfig {
            parties,
            modulus: field.modulus(),
            executor: Executor::Sequential,
            latency: LatencyModel::default(),
            seed: 0,
        }
    }

    pub fn with_executor(mut self, executor: Executor) -> Self {
        self.executor = executor;
        self
    }

    pub fn with_latency(mut self, latency: LatencyModel, seed: u64) -> Self {
        self.latency = latency;
        self.seed = seed;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMessage {
    pub from: usize,
    pub values: Vec<String>,
    pub latency_micros: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRound {
    pub index: usize,
    /// `compute` for protocol rounds, `open` for output openings.
    pub kind: String,
    pub label: String,
    pub messages: Vec<TranscriptMessage>,
    pub revealed: BTreeMap<String, String>,
}

/// Public record of a session. Holds only what was broadcast.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub parties: usize,
    pub modulus: String,
    pub rounds: Vec<TranscriptRound>,
    pub log: RoundLog,
}

/// A committee of `n` parties sharing one field.
pub struct Session {
    config: SessionConfig,
    field: PrimeField,
    n_inv: FieldElement,
    log: RoundLog,
    consumed: BTreeSet<u64>,
    next_triple: u64,
    latency_rng: ChaCha20Rng,
    transcript: Transcript,
}

struct MulInput {
    m: FieldElement,
    e: FieldElement,
    a: FieldElement,
    b: FieldElement,
    c: FieldElement,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, MpcError> {
        check_parties(config.parties)?;
        let field = PrimeField::new(config.modulus)
            .map_err(|e| MpcError::Config(e.to_string()))?;
        let n_inv = field
            .element(config.parties as u128)
            .inverse()
            .ok_or_else(|| MpcError::Config("party count is not invertible in the field".into()))?;
        let transcript = Transcript {
            parties: config.parties,
            modulus: config.modulus.to_string(),
            ..Transcript::default()
        };
        Ok(Session {
            latency_rng: ChaCha20Rng::seed_from_u64(config.seed),
            field,
            n_inv,
            log: RoundLog::default(),
            consumed: BTreeSet::new(),
            next_triple: 0,
            transcript,
            config,
        })
    }

    pub fn parties(&self) -> usize {
        self.config.parties
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn log(&self) -> RoundLog {
        self.log
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    /// Offline phase: the dealer shares a fresh triple to every party.
    pub fn dealer_gen_triple<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<BeaverTriple, MpcError> {
        let id = self.next_triple;
        self.next_triple += 1;
        let triple = deal_triple(self.field, self.config.parties, id, rng)?;
        self.log.offline_rounds += 1;
        self.log.offline_messages += self.config.parties as u64;
        Ok(triple)
    }

    fn check_vector<'a>(
        &self,
        shares: &'a [AdditiveShare],
        what: &str,
    ) -> Result<Vec<&'a AdditiveShare>, MpcError> {
        let n = self.config.parties;
        if shares.len() != n {
            return Err(MpcError::Protocol(format!(
                "party-count mismatch: {what} has {} shares for {n} parties",
                shares.len()
            )));
        }
        if shares.iter().any(|s| s.value.modulus() != self.field.modulus()) {
            return Err(MpcError::Protocol(format!("{what} is over a different field")));
        }
        ordered(shares, n).map_err(|e| MpcError::Protocol(format!("{what}: {e}")))
    }

    fn check_public(&self, v: &FieldElement, what: &str) -> Result<(), MpcError> {
        if v.modulus() != self.field.modulus() {
            return Err(MpcError::Protocol(format!("{what} is over a different field")));
        }
        Ok(())
    }

    fn record_round(
        &mut self,
        kind: &str,
        label: &str,
        payloads: Vec<Vec<String>>,
        revealed: BTreeMap<String, String>,
    ) {
        let mut slowest = 0;
        let messages: Vec<TranscriptMessage> = payloads
            .into_iter()
            .enumerate()
            .map(|(i, values)| {
                let latency_micros = self.config.latency.sample(&mut self.latency_rng);
                slowest = slowest.max(latency_micros);
                TranscriptMessage {
                    from: i + 1,
                    values,
                    latency_micros,
                }
            })
            .collect();
        let n = messages.len() as u64;
        match kind {
            "compute" => {
                self.log.online_rounds += 1;
                self.log.messages += n;
            }
            _ => self.log.openings += 1,
        }
        self.log.elapsed_micros += slowest;
        self.transcript.rounds.push(TranscriptRound {
            index: self.transcript.rounds.len(),
            kind: kind.into(),
            label: label.into(),
            messages,
            revealed,
        });
        self.transcript.log = self.log;
    }

    /// Runs the mask broadcast and share assembly. With `public = Some((M, E))`
    /// the output is a sharing of `(M + m)(E + e)`; otherwise of `m * e`.
    fn multiply(
        &mut self,
        m_shares: &[AdditiveShare],
        e_shares: &[AdditiveShare],
        triple: &BeaverTriple,
        public: Option<(FieldElement, FieldElement)>,
        label: &str,
    ) -> Result<Vec<AdditiveShare>, MpcError> {
        let m = self.check_vector(m_shares, "m")?;
        let e = self.check_vector(e_shares, "e")?;
        let a = self.check_vector(&triple.a_shares, "triple a")?;
        let b = self.check_vector(&triple.b_shares, "triple b")?;
        let c = self.check_vector(&triple.c_shares, "triple c")?;
        if let Some((mp, ep)) = &public {
            self.check_public(mp, "M")?;
            self.check_public(ep, "E")?;
        }
        if self.consumed.contains(&triple.id) {
            return Err(MpcError::Protocol(format!("triple {} was already used", triple.id)));
        }
        self.consumed.insert(triple.id);

        let inputs: Vec<MulInput> = (0..self.config.parties)
            .map(|i| MulInput {
                m: m[i].value,
                e: e[i].value,
                a: a[i].value,
                b: b[i].value,
                c: c[i].value,
            })
            .collect();
        let n_inv = self.n_inv;
        let (broadcasts, outputs) = broadcast_round(
            self.config.executor,
            inputs,
            |i, x| MaskBroadcast {
                party_id: i + 1,
                d_i: x.m - x.a,
                e_i: x.e - x.b,
            },
            |i, x, all: &[MaskBroadcast]| {
                let d: FieldElement = all.iter().map(|w| w.d_i).sum();
                let ep: FieldElement = all.iter().map(|w| w.e_i).sum();
                let z = x.c + d * x.b + ep * x.a + d * ep * n_inv;
                match public {
                    None => z,
                    Some((mp, epub)) => {
                        let linear = z + mp * x.e + epub * x.m;
                        if i == 0 {
                            linear + mp * epub
                        } else {
                            linear
                        }
                    }
                }
            },
        );

        let d: FieldElement = broadcasts.iter().map(|w| w.d_i).sum();
        let ep: FieldElement = broadcasts.iter().map(|w| w.e_i).sum();
        let mut revealed = BTreeMap::new();
        revealed.insert("d".to_string(), d.value().to_string());
        revealed.insert("e_prime".to_string(), ep.value().to_string());
        let payloads = broadcasts
            .iter()
            .map(|w| vec![w.d_i.value().to_string(), w.e_i.value().to_string()])
            .collect();
        self.record_round("compute", label, payloads, revealed);

        let op = if public.is_some() { "settle" } else { "mul" };
        let tag = ShareTag::derive(op, &[&m[0].tag, &e[0].tag]);
        Ok(outputs
            .into_iter()
            .enumerate()
            .map(|(i, value)| AdditiveShare {
                party_id: i + 1,
                value,
                tag: tag.clone(),
            })
            .collect())
    }

    /// Shares of `m * e` after one broadcast round.
    pub fn beaver_mul(
        &mut self,
        m_shares: &[AdditiveShare],
        e_shares: &[AdditiveShare],
        triple: &BeaverTriple,
    ) -> Result<Vec<AdditiveShare>, MpcError> {
        self.multiply(m_shares, e_shares, triple, None, "beaver_mul")
    }

    /// Shares of `(M + m)(E + e)` for public reserves `M`, `E` and secret
    /// deltas `m`, `e`. The linear terms are local scalings, so the session
    /// still uses a single broadcast round.
    pub fn settle_product(
        &mut self,
        m_shares: &[AdditiveShare],
        e_shares: &[AdditiveShare],
        m_pub: FieldElement,
        e_pub: FieldElement,
        triple: &BeaverTriple,
    ) -> Result<Vec<AdditiveShare>, MpcError> {
        self.multiply(m_shares, e_shares, triple, Some((m_pub, e_pub)), "settle_product")
    }

    /// Reveals `X = sum_i x_i` for a matrix of per-LP share vectors. Each
    /// party broadcasts only the sum of its own column.
    pub fn secure_sum(&mut self, share_matrix: &[Vec<AdditiveShare>]) -> Result<FieldElement, MpcError> {
        let n = self.config.parties;
        let mut columns = vec![self.field.zero(); n];
        for (lp, shares) in share_matrix.iter().enumerate() {
            let ordered = self
                .check_vector(shares, &format!("liquidity provider {lp}"))
                .map_err(|e| MpcError::Protocol(format!("inconsistent party sets: {e}")))?;
            for (col, s) in columns.iter_mut().zip(ordered) {
                *col += s.value;
            }
        }
        let (broadcasts, outputs) = broadcast_round(
            self.config.executor,
            columns,
            |_, col| *col,
            |_, _, all: &[FieldElement]| all.iter().copied().sum::<FieldElement>(),
        );
        let total = outputs[0];
        debug_assert!(outputs.iter().all(|x| *x == total));
        let mut revealed = BTreeMap::new();
        revealed.insert("X".to_string(), total.value().to_string());
        let payloads = broadcasts.iter().map(|v| vec![v.value().to_string()]).collect();
        self.record_round("compute", "secure_sum", payloads, revealed);
        Ok(total)
    }

    /// Opens a shared output: every party broadcasts its share.
    pub fn open(&mut self, shares: &[AdditiveShare], label: &str) -> Result<FieldElement, MpcError> {
        let ordered = self.check_vector(shares, label)?;
        let value: FieldElement = ordered.iter().map(|s| s.value).sum();
        let payloads = ordered.iter().map(|s| vec![s.value.value().to_string()]).collect();
        let mut revealed = BTreeMap::new();
        revealed.insert(label.to_string(), value.value().to_string());
        self.record_round("open", label, payloads, revealed);
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{deal_triple_from, reconstruct, share_secret};
    use super::*;

    fn f101() -> PrimeField {
        PrimeField::new(101).unwrap()
    }

    fn fixed(values: &[i128], tag: &str) -> Vec<AdditiveShare> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| AdditiveShare {
                party_id: i + 1,
                value: f101().from_i128(*v),
                tag: ShareTag::new(tag),
            })
            .collect()
    }

    fn pinned_triple(n: usize, rng: &mut ChaCha20Rng) -> BeaverTriple {
        let f = f101();
        deal_triple_from(f.element(5), f.element(7), n, 1_000, rng).unwrap()
    }

    #[test]
    fn beaver_example() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let f = f101();
        let mut s = Session::new(SessionConfig::new(3, f)).unwrap();
        let m = share_secret(f.element(3), 3, ShareTag::new("m"), &mut rng).unwrap();
        let e = share_secret(f.element(4), 3, ShareTag::new("e"), &mut rng).unwrap();
        let t = pinned_triple(3, &mut rng);
        let z = s.beaver_mul(&m, &e, &t).unwrap();
        assert_eq!(reconstruct(&z).unwrap().value(), 12);
        let round = &s.transcript().rounds[0];
        assert_eq!(round.revealed["d"], "99");
        assert_eq!(round.revealed["e_prime"], "98");
        assert_eq!(s.log().online_rounds, 1);
        assert_eq!(s.log().messages, 3);
    }

    #[test]
    fn triple_reuse_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let f = f101();
        let mut s = Session::new(SessionConfig::new(2, f)).unwrap();
        let t = s.dealer_gen_triple(&mut rng).unwrap();
        let m = fixed(&[1, 2], "m");
        let e = fixed(&[3, 4], "e");
        s.beaver_mul(&m, &e, &t).unwrap();
        assert!(matches!(s.beaver_mul(&m, &e, &t), Err(MpcError::Protocol(_))));
        assert_eq!(s.log().offline_rounds, 1);
    }

    #[test]
    fn party_count_mismatch() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut s = Session::new(SessionConfig::new(3, f101())).unwrap();
        let t = s.dealer_gen_triple(&mut rng).unwrap();
        let m = fixed(&[1, 2], "m");
        let e = fixed(&[3, 4], "e");
        assert!(matches!(s.beaver_mul(&m, &e, &t), Err(MpcError::Protocol(_))));
    }

    #[test]
    fn settle_example() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let f = f101();
        let mut s = Session::new(SessionConfig::new(2, f)).unwrap();
        let m = fixed(&[3, 1], "m");
        let e = fixed(&[-1, -1], "e");
        let t = pinned_triple(2, &mut rng);
        let c = s.settle_product(&m, &e, f.element(4), f.element(4), &t).unwrap();
        assert_eq!(reconstruct(&c).unwrap().value(), 16);
        assert_eq!(s.log().online_rounds, 1);

        let t = s.dealer_gen_triple(&mut rng).unwrap();
        let zero_m = fixed(&[0, 0], "m0");
        let zero_e = fixed(&[7, -7], "e0");
        let c = s
            .settle_product(&zero_m, &zero_e, f.element(4), f.element(9), &t)
            .unwrap();
        assert_eq!(reconstruct(&c).unwrap().value(), 36);
    }

    #[test]
    fn secure_sum_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let f = f101();
        let mut s = Session::new(SessionConfig::new(3, f)).unwrap();
        let lp = |x, tag: &str, rng: &mut ChaCha20Rng| {
            share_secret(f.element(x), 3, ShareTag::new(tag), rng).unwrap()
        };
        let matrix = vec![lp(10, "a", &mut rng), lp(20, "b", &mut rng)];
        assert_eq!(s.secure_sum(&matrix).unwrap().value(), 30);
        assert_eq!(s.secure_sum(&[lp(7, "c", &mut rng)]).unwrap().value(), 7);
        assert_eq!(s.secure_sum(&[]).unwrap().value(), 0);
        assert_eq!(s.log().online_rounds, 3);

        let bad = vec![lp(1, "a", &mut rng), fixed(&[1, 2], "b")];
        assert!(s.secure_sum(&bad).is_err());
    }

    #[test]
    fn latency_is_logged_deterministically() {
        let run = |executor| {
            let mut rng = ChaCha20Rng::seed_from_u64(8);
            let cfg = SessionConfig::new(4, f101())
                .with_executor(executor)
                .with_latency(
                    LatencyModel::Uniform {
                        min_micros: 100,
                        max_micros: 900,
                    },
                    99,
                );
            let mut s = Session::new(cfg).unwrap();
            let t = s.dealer_gen_triple(&mut rng).unwrap();
            let m = share_secret(f101().element(9), 4, ShareTag::new("m"), &mut rng).unwrap();
            let e = share_secret(f101().element(8), 4, ShareTag::new("e"), &mut rng).unwrap();
            let z = s.beaver_mul(&m, &e, &t).unwrap();
            (z, s.into_transcript())
        };
        let (z1, t1) = run(Executor::Sequential);
        let (z2, t2) = run(Executor::Threaded);
        assert_eq!(z1, z2);
        assert_eq!(t1, t2);
        assert!(t1.log.elapsed_micros >= 100 && t1.log.elapsed_micros <= 900);
    }

    #[test]
    fn openings_are_not_compute_rounds() {
        let mut s = Session::new(SessionConfig::new(2, f101())).unwrap();
        let v = s.open(&fixed(&[40, 2], "x"), "x").unwrap();
        assert_eq!(v.value(), 42);
        assert_eq!(s.log().online_rounds, 0);
        assert_eq!(s.log().openings, 1);
    }
}
