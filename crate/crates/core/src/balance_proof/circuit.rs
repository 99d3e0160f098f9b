use std::collections::BTreeMap;
use std::fmt;

use super::{decode_balance, leaf_hash_limbs, limb_ge, PrivateWitness, PublicInputs};
use crate::keccak::{keccak256, Keccak256};

pub const LEAF_INTEGRITY: &str = "leaf integrity";
pub const LEAF_FORMAT: &str = "leaf format";
pub const THRESHOLD: &str = "balance meets threshold";

#[derive(Clone, Debug, PartialEq, Eq)]
enum Wire {
    Bytes(Vec<u8>),
    Limbs([u64; 4]),
    Word(u128),
    Bit(bool),
}

/// One gate. Wires are referred to by name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Constraint {
    /// `out = keccak256(input)` as four big-endian 64-bit limbs. Evaluated
    /// natively rather than arithmetized.
    Keccak { input: String, out: String },
    /// `a == b`; failure reports `label`.
    AssertEq { a: String, b: String, label: String },
    /// Reads the 32-byte balance item whose RLP prefix sits at `offset`.
    DecodeBalance {
        input: String,
        offset: usize,
        hi: String,
        lo: String,
        label: String,
    },
    /// `out = (a_hi > b_hi) or (a_hi == b_hi and a_lo >= b_lo)`.
    LimbGe {
        a_hi: String,
        a_lo: String,
        b_hi: String,
        b_lo: String,
        out: String,
    },
    AssertTrue { wire: String, label: String },
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Keccak { input, out } => write!(f, "keccak256({input}) -> {out}"),
            Constraint::AssertEq { a, b, label } => write!(f, "assert {a} == {b} [{label}]"),
            Constraint::DecodeBalance {
                input,
                offset,
                hi,
                lo,
                label,
            } => write!(f, "decode_balance({input}, {offset}) -> {hi}, {lo} [{label}]"),
            Constraint::LimbGe {
                a_hi,
                a_lo,
                b_hi,
                b_lo,
                out,
            } => write!(f, "ge(({a_hi}, {a_lo}), ({b_hi}, {b_lo})) -> {out}"),
            Constraint::AssertTrue { wire, label } => write!(f, "assert {wire} [{label}]"),
        }
    }
}

/// Ordered gate list over named wires.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSystem {
    pub constraints: Vec<Constraint>,
}

/// The balance-at-least circuit: the leaf must hash to the public
/// `leaf_hash`, and its balance must be at least the public threshold `k`.
pub fn circuit_build() -> ConstraintSystem {
    let s = |x: &str| x.to_string();
    ConstraintSystem {
        constraints: vec![
            Constraint::Keccak {
                input: s("leaf_rlp"),
                out: s("h_check"),
            },
            Constraint::AssertEq {
                a: s("h_check"),
                b: s("leaf_hash"),
                label: s(LEAF_INTEGRITY),
            },
            Constraint::DecodeBalance {
                input: s("leaf_rlp"),
                offset: crate::state_trie::BALANCE_ITEM_OFFSET,
                hi: s("bal_hi"),
                lo: s("bal_lo"),
                label: s(LEAF_FORMAT),
            },
            Constraint::LimbGe {
                a_hi: s("bal_hi"),
                a_lo: s("bal_lo"),
                b_hi: s("k_hi"),
                b_lo: s("k_lo"),
                out: s("sufficient"),
            },
            Constraint::AssertTrue {
                wire: s("sufficient"),
                label: s(THRESHOLD),
            },
        ],
    }
}

impl ConstraintSystem {
    /// Keccak digest of the canonical text form, one gate per line.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Keccak256::new();
        h.update(b"gridswap/circuit/v1\n");
        for c in &self.constraints {
            h.update(c.to_string().as_bytes());
            h.update(b"\n");
        }
        h.finalize()
    }

    /// Evaluates all gates in order; the error names the first failing one.
    pub fn check(&self, witness: &PrivateWitness, publics: &PublicInputs) -> Result<(), String> {
        let mut wires: BTreeMap<&str, Wire> = BTreeMap::new();
        wires.insert("leaf_rlp", Wire::Bytes(witness.leaf_rlp.to_vec()));
        wires.insert("leaf_hash", Wire::Limbs(publics.leaf_hash));
        wires.insert("k_hi", Wire::Word(publics.k_hi));
        wires.insert("k_lo", Wire::Word(publics.k_lo));

        fn get<'a>(wires: &'a BTreeMap<&str, Wire>, name: &str, at: &Constraint) -> Result<&'a Wire, String> {
            wires.get(name).ok_or_else(|| format!("unassigned wire {name} in `{at}`"))
        }
        fn word(w: &Wire, at: &Constraint) -> Result<u128, String> {
            match w {
                Wire::Word(v) => Ok(*v),
                _ => Err(format!("type error in `{at}`")),
            }
        }

        for c in &self.constraints {
            match c {
                Constraint::Keccak { input, out } => {
                    let Wire::Bytes(b) = get(&wires, input, c)? else {
                        return Err(format!("type error in `{c}`"));
                    };
                    let limbs = leaf_hash_limbs(&keccak256(b));
                    wires.insert(out.as_str(), Wire::Limbs(limbs));
                }
                Constraint::AssertEq { a, b, label } => {
                    if get(&wires, a, c)? != get(&wires, b, c)? {
                        return Err(label.clone());
                    }
                }
                Constraint::DecodeBalance {
                    input,
                    offset,
                    hi,
                    lo,
                    label,
                } => {
                    let Wire::Bytes(b) = get(&wires, input, c)? else {
                        return Err(format!("type error in `{c}`"));
                    };
                    if *offset != crate::state_trie::BALANCE_ITEM_OFFSET {
                        return Err(label.clone());
                    }
                    let (h, l) = decode_balance(b).map_err(|_| label.clone())?;
                    wires.insert(hi.as_str(), Wire::Word(h));
                    wires.insert(lo.as_str(), Wire::Word(l));
                }
                Constraint::LimbGe {
                    a_hi,
                    a_lo,
                    b_hi,
                    b_lo,
                    out,
                } => {
                    let bit = limb_ge(
                        word(get(&wires, a_hi, c)?, c)?,
                        word(get(&wires, a_lo, c)?, c)?,
                        word(get(&wires, b_hi, c)?, c)?,
                        word(get(&wires, b_lo, c)?, c)?,
                    );
                    wires.insert(out.as_str(), Wire::Bit(bit));
                }
                Constraint::AssertTrue { wire, label } => match get(&wires, wire, c)? {
                    Wire::Bit(true) => {}
                    Wire::Bit(false) => return Err(label.clone()),
                    _ => return Err(format!("type error in `{c}`")),
                },
            }
        }
        Ok(())
    }

    pub fn satisfied(&self, witness: &PrivateWitness, publics: &PublicInputs) -> bool {
        self.check(witness, publics).is_ok()
    }
}
