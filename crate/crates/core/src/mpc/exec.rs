use std::sync::mpsc;
use std::thread;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// How parties are scheduled within a round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Executor {
    /// All parties run on the calling thread, in party order.
    #[default]
    Sequential,
    /// One OS thread per party; broadcasts travel over channels.
    Threaded,
}

/// Per-message delivery delay on the simulated bus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyModel {
    Fixed { micros: u64 },
    Uniform { min_micros: u64, max_micros: u64 },
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::Fixed { micros: 1_000 }
    }
}

impl LatencyModel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            LatencyModel::Fixed { micros } => micros,
            LatencyModel::Uniform {
                min_micros,
                max_micros,
            } => rng.gen_range(min_micros..=max_micros.max(min_micros)),
        }
    }
}

/// One broadcast round. Each party computes a message from its private
/// input, every party receives all `n` messages, then each party computes
/// its output. Returns the messages in party order and the outputs.
pub(crate) fn broadcast_round<T, B, O, L, F>(
    executor: Executor,
    inputs: Vec<T>,
    local: L,
    finish: F,
) -> (Vec<B>, Vec<O>)
where
    T: Send,
    B: Clone + Send,
    O: Send,
    L: Fn(usize, &T) -> B + Sync,
    F: Fn(usize, T, &[B]) -> O + Sync,
{
    match executor {
        Executor::Sequential => {
            let msgs: Vec<B> = inputs.iter().enumerate().map(|(i, t)| local(i, t)).collect();
            let outs = inputs
                .into_iter()
                .enumerate()
                .map(|(i, t)| finish(i, t, &msgs))
                .collect();
            (msgs, outs)
        }
        Executor::Threaded => threaded_round(inputs, &local, &finish),
    }
}

fn threaded_round<T, B, O, L, F>(inputs: Vec<T>, local: &L, finish: &F) -> (Vec<B>, Vec<O>)
where
    T: Send,
    B: Clone + Send,
    O: Send,
    L: Fn(usize, &T) -> B + Sync,
    F: Fn(usize, T, &[B]) -> O + Sync,
{
    let n = inputs.len();
    let (senders, receivers): (Vec<_>, Vec<_>) =
        (0..n).map(|_| mpsc::channel::<(usize, B)>()).unzip();
    thread::scope(|scope| {
        let handles: Vec<_> = inputs
            .into_iter()
            .zip(receivers)
            .enumerate()
            .map(|(i, (input, inbox))| {
                let peers = senders.clone();
                scope.spawn(move || {
                    let msg = local(i, &input);
                    for peer in &peers {
                        peer.send((i, msg.clone())).expect("peer inbox open");
                    }
                    drop(peers);
                    let mut slots: Vec<Option<B>> = (0..n).map(|_| None).collect();
                    for _ in 0..n {
                        let (from, m) = inbox.recv().expect("broadcast delivered");
                        slots[from] = Some(m);
                    }
                    let received: Vec<B> =
                        slots.into_iter().map(|m| m.expect("one message per party")).collect();
                    (msg, finish(i, input, &received))
                })
            })
            .collect();
        drop(senders);
        handles
            .into_iter()
            .map(|h| h.join().expect("party thread panicked"))
            .unzip()
    })
}
