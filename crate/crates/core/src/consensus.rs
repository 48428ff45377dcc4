//! Committee lifecycle and consensus accounting: stake/trust pool
//! filtering, seeded verifiable member selection, PBFT-style voting at the
//! message-count level, and the closed-form attack success rate.
//!
//! Voting is simulated by honesty thresholds only — no view changes and no
//! network faults; the protocol enters the model purely through its 2f+1
//! threshold and its message complexity.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("committee size {n} exceeds pool size {pool}")]
    CommitteeTooLarge { n: usize, pool: usize },
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),
    #[error("voter {0} is not a committee member")]
    UnknownVoter(u64),
}

/// A prospective committee member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: u64,
    pub stake: f64,
    pub trust_score: f64,
    /// Ground truth for the simulation; invisible to the protocol itself.
    pub malicious: bool,
}

/// An elected committee with its fault tolerance and selection seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Committee {
    pub members: Vec<u64>,
    pub f: usize,
    pub selection_seed: Vec<u8>,
}

impl Committee {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Re-derives the selection from the pool and compares; anyone holding
    /// the seed can audit the draw.
    pub fn verify_selection(&self, pool: &[Candidate]) -> bool {
        select_committee(pool, self.members.len(), &self.selection_seed)
            .map(|c| c.members == self.members)
            .unwrap_or(false)
    }
}

/// Keeps the candidates meeting both the stake and the trust threshold,
/// in their original order.
pub fn form_pool(candidates: &[Candidate], min_stake: f64, min_trust: f64) -> Vec<Candidate> {
    candidates
        .iter()
        .filter(|c| c.stake >= min_stake && c.trust_score >= min_trust)
        .cloned()
        .collect()
}

/// Counter-mode SHA-256 stream used for the verifiable shuffle.
struct HashStream {
    seed: Vec<u8>,
    counter: u64,
    buf: Vec<u64>,
}

impl HashStream {
    fn new(seed: &[u8]) -> Self {
        Self {
            seed: seed.to_vec(),
            counter: 0,
            buf: Vec::new(),
        }
    }

    fn next_u64(&mut self) -> u64 {
        if self.buf.is_empty() {
            let mut hasher = Sha256::new();
            hasher.update(&self.seed);
            hasher.update(self.counter.to_le_bytes());
            self.counter += 1;
            let digest = hasher.finalize();
            self.buf = digest
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
        }
        self.buf.pop().expect("refilled above")
    }

    /// Uniform draw in [0, bound) by rejection sampling.
    fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let limit = u64::MAX - u64::MAX % bound;
        loop {
            let v = self.next_u64();
            if v < limit {
                return v % bound;
            }
        }
    }
}

/// Draws `n` members without replacement through a seeded hash-chain
/// shuffle. The same (pool, n, seed) always yields the same committee, and
/// the draw can be re-derived by anyone as a verifiability stand-in.
pub fn select_committee(
    pool: &[Candidate],
    n: usize,
    seed: &[u8],
) -> Result<Committee, ConsensusError> {
    if n > pool.len() {
        return Err(ConsensusError::CommitteeTooLarge { n, pool: pool.len() });
    }
    let mut stream = HashStream::new(seed);
    let mut remaining: Vec<u64> = pool.iter().map(|c| c.id).collect();
    let mut members = Vec::with_capacity(n);
    for _ in 0..n {
        let j = stream.next_below(remaining.len() as u64) as usize;
        members.push(remaining.swap_remove(j));
    }
    let f = if n == 0 { 0 } else { (n - 1) / 3 };
    Ok(Committee {
        members,
        f,
        selection_seed: seed.to_vec(),
    })
}

/// One PBFT round at the message-count level.
///
/// The digest is what members vote on; the simulation models each vote purely
/// by the member's honesty, so the digest itself does not influence the
/// outcome. Messages count pre-prepare (N) plus prepare and commit
/// (N(N-1) each).
pub fn run_round(
    committee: &Committee,
    _proposal_digest: &[u8],
    attacking: &BTreeSet<u64>,
) -> Result<(bool, u64), ConsensusError> {
    for voter in attacking {
        if !committee.members.contains(voter) {
            return Err(ConsensusError::UnknownVoter(*voter));
        }
    }
    let n = committee.members.len() as u64;
    let honest = committee.members.len() - attacking.len();
    #[allow(clippy::int_plus_one)] // 2f+1 is the protocol's quorum constant
    let decision = honest >= 2 * committee.f + 1;
    let messages = n + 2 * n * n.saturating_sub(1);
    Ok((decision, messages))
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut result = BigUint::one();
    for i in 0..k {
        result = result * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    result
}

/// Probability that a seeded draw elects more than `f` malicious members who
/// then simultaneously attack.
///
/// The outer term is the hypergeometric probability of electing exactly `k`
/// of the `m` malicious candidates from a pool of `p`; the inner sum is the
/// binomial probability that more than `f` of those `k` actually attack,
/// each independently with probability `rho`. Hypergeometric terms are
/// evaluated with exact big-integer binomials before conversion.
pub fn attack_rate(
    p: u64,
    m: u64,
    n: u64,
    rho: f64,
    f: u64,
) -> Result<f64, ConsensusError> {
    if m > p || n > p {
        return Err(ConsensusError::InvalidArguments(format!(
            "need m <= p and n <= p, got p={p}, m={m}, n={n}"
        )));
    }
    if f > n {
        return Err(ConsensusError::InvalidArguments(format!(
            "fault tolerance f={f} exceeds committee size n={n}"
        )));
    }
    // the inner binomial coefficients are converted to f64; C(1030, 515)
    // already exceeds f64::MAX, so larger committees need a different
    // evaluation strategy
    if n > 1029 {
        return Err(ConsensusError::InvalidArguments(format!(
            "committee size n={n} beyond the supported range (max 1029)"
        )));
    }
    if !(0.0..=1.0).contains(&rho) || !rho.is_finite() {
        return Err(ConsensusError::InvalidArguments(format!(
            "rho must lie in [0, 1], got {rho}"
        )));
    }
    let denom = binomial(p, n);
    let mut total = 0.0;
    for k in (f + 1)..=m.min(n) {
        let ways = binomial(m, k) * binomial(p - m, n - k);
        if ways.is_zero() {
            continue;
        }
        let hyper = BigRational::new(BigInt::from(ways), BigInt::from(denom.clone()))
            .to_f64()
            .expect("ratio of positive binomials is finite");
        let mut inner = 0.0;
        for i in (f + 1)..=k {
            let coeff = binomial(k, i).to_f64().expect("binomial fits f64 for k <= 1029");
            inner += coeff * rho.powi(i as i32) * (1.0 - rho).powi((k - i) as i32);
        }
        total += hyper * inner;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn candidates(count: u64) -> Vec<Candidate> {
        (0..count)
            .map(|id| Candidate {
                id,
                stake: 10.0 + id as f64,
                trust_score: 0.5 + (id % 5) as f64 / 10.0,
                malicious: id % 3 == 0,
            })
            .collect()
    }

    #[test]
    fn pool_formation_filters_on_both_thresholds() {
        let all = candidates(30);
        assert!(form_pool(&all, 1e9, 0.0).is_empty());
        assert_eq!(form_pool(&all, 0.0, 0.0), all);
        let filtered = form_pool(&all, 20.0, 0.6);
        let oracle: Vec<Candidate> = all
            .iter()
            .filter(|c| c.stake >= 20.0 && c.trust_score >= 0.6)
            .cloned()
            .collect();
        assert_eq!(filtered, oracle);
    }

    #[test]
    fn full_draw_is_a_permutation_of_the_pool() {
        let pool = candidates(12);
        let committee = select_committee(&pool, 12, b"seed").unwrap();
        let mut sorted = committee.members.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..12).collect::<Vec<u64>>());
        assert_eq!(committee.f, 3);
    }

    #[test]
    fn selection_is_deterministic_and_rederivable() {
        let pool = candidates(30);
        let a = select_committee(&pool, 21, b"round-7").unwrap();
        let b = select_committee(&pool, 21, b"round-7").unwrap();
        assert_eq!(a, b);
        assert!(a.verify_selection(&pool));
        let c = select_committee(&pool, 21, b"round-8").unwrap();
        assert_ne!(a.members, c.members);
        assert!(select_committee(&pool, 31, b"x").is_err());
    }

    #[test]
    fn selection_frequencies_are_uniform() {
        let pool = candidates(30);
        let mut counts = vec![0u64; 30];
        let draws = 10_000u64;
        for round in 0..draws {
            let committee =
                select_committee(&pool, 21, &round.to_le_bytes()).unwrap();
            for member in committee.members {
                counts[member as usize] += 1;
            }
        }
        // Each candidate is in the committee with probability 21/30.
        let p = 21.0 / 30.0;
        let expected = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (id, count) in counts.iter().enumerate() {
            assert!(
                (*count as f64 - expected).abs() <= 3.0 * sigma,
                "candidate {id}: {count} outside 3 sigma of {expected}"
            );
        }
    }

    #[test]
    fn round_counts_messages_and_applies_the_threshold() {
        let pool = candidates(4);
        let committee = select_committee(&pool, 4, b"s").unwrap();
        assert_eq!(committee.f, 1);
        let (ok, messages) = run_round(&committee, b"digest", &BTreeSet::new()).unwrap();
        assert!(ok);
        assert_eq!(messages, 28); // 4 + 12 + 12

        let attacking: BTreeSet<u64> = committee.members[..2].iter().copied().collect();
        let (ok, _) = run_round(&committee, b"digest", &attacking).unwrap();
        assert!(!ok); // honest 2 < 2f+1 = 3

        let err = run_round(&committee, b"digest", &BTreeSet::from([999])).unwrap_err();
        assert_eq!(err, ConsensusError::UnknownVoter(999));
    }

    #[test]
    fn twenty_one_members_tolerate_six_attackers() {
        let pool = candidates(30);
        let committee = select_committee(&pool, 21, b"s").unwrap();
        assert_eq!(committee.f, 6);
        let attacking: BTreeSet<u64> = committee.members[..6].iter().copied().collect();
        let (ok, _) = run_round(&committee, b"digest", &attacking).unwrap();
        assert!(ok); // 15 >= 13
    }

    #[test]
    fn attack_rate_reproduces_the_reference_value() {
        let a = attack_rate(30, 10, 21, 0.2, 6).unwrap();
        assert!((a - 0.0000625).abs() < 1e-6, "got {a}");
    }

    #[test]
    fn attack_rate_degenerate_cases() {
        // too few malicious candidates to exceed f
        assert_eq!(attack_rate(30, 6, 21, 0.2, 6).unwrap(), 0.0);
        // nobody ever attacks
        assert_eq!(attack_rate(30, 10, 21, 0.0, 6).unwrap(), 0.0);
        assert!(attack_rate(30, 31, 21, 0.2, 6).is_err());
        assert!(attack_rate(30, 10, 31, 0.2, 6).is_err());
        assert!(attack_rate(30, 10, 21, 1.5, 6).is_err());
        assert!(attack_rate(30, 10, 21, 0.2, 22).is_err());
        assert!(attack_rate(5000, 100, 2000, 0.2, 666).is_err());
    }

    #[test]
    fn attack_rate_stays_finite_at_the_size_bound() {
        // pool far larger than the committee exercises the exact
        // hypergeometric path at full supported committee size
        let a = attack_rate(4000, 400, 1029, 0.3, 342).unwrap();
        assert!(a.is_finite());
        assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn attack_rate_is_monotone_in_rho_and_m() {
        let mut prev = 0.0;
        for rho in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let a = attack_rate(30, 10, 21, rho, 6).unwrap();
            assert!(a >= prev, "rho {rho}");
            prev = a;
        }
        let mut prev = 0.0;
        for m in [7, 9, 11, 15, 20] {
            let a = attack_rate(30, m, 21, 0.2, 6).unwrap();
            assert!(a >= prev, "m {m}");
            prev = a;
        }
    }

    #[test]
    fn attack_rate_matches_monte_carlo() {
        let (p, m, n, rho, f) = (30u64, 10u64, 21u64, 0.2f64, 6u64);
        let analytic = attack_rate(p, m, n, rho, f).unwrap();
        let trials = 100_000u64;
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let mut successes = 0u64;
        for _ in 0..trials {
            // hypergeometric committee draw: ids < m are malicious
            let mut ids: Vec<u64> = (0..p).collect();
            let mut selected_malicious = 0u64;
            for _ in 0..n {
                let j = rng.gen_range(0..ids.len());
                if ids.swap_remove(j) < m {
                    selected_malicious += 1;
                }
            }
            let attackers = (0..selected_malicious)
                .filter(|_| rng.gen_bool(rho))
                .count() as u64;
            if attackers > f {
                successes += 1;
            }
        }
        let estimate = successes as f64 / trials as f64;
        let sigma = (analytic * (1.0 - analytic) / trials as f64).sqrt();
        assert!(
            (estimate - analytic).abs() <= 3.0 * sigma + 1e-12,
            "estimate {estimate} vs analytic {analytic}"
        );
    }

    #[test]
    fn exact_binomials() {
        assert_eq!(binomial(30, 21), BigUint::from(14307150u64));
        assert_eq!(binomial(5, 9), BigUint::zero());
        assert_eq!(binomial(0, 0), BigUint::one());
    }
}
