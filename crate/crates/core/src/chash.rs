//! Trapdoor (chameleon) hash over a prime-order subgroup of Z_p*.
//!
//! A digest has the discrete-log trapdoor-commitment form
//! `h = g^H(m) * y^r mod p` with `y = g^x`. Whoever holds the trapdoor `x`
//! can, given `(m, r)` and any replacement payload `m'`, compute an `r'` such
//! that the digest is unchanged; everyone else sees an ordinary
//! collision-resistant hash. The default parameters are sized for fast tests
//! and are not claimed production-secure; larger groups can be supplied
//! through the scenario configuration.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChashError {
    #[error("modulus p is not prime")]
    CompositeModulus,
    #[error("subgroup order q is not prime")]
    CompositeOrder,
    #[error("q does not divide p - 1")]
    OrderDoesNotDivide,
    #[error("generator is not an order-q element of Z_p*")]
    BadGenerator,
    #[error("randomness is outside [0, q)")]
    RandomnessOutOfRange,
    #[error("trapdoor scalar is zero or not invertible mod q")]
    BadTrapdoor,
    #[error("trapdoor does not match the public key")]
    TrapdoorMismatch,
}

/// Multiplicative group parameters: prime modulus `p`, prime order `q` of the
/// working subgroup (`q | p - 1`), and a generator `g` of that subgroup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupParams {
    p: BigUint,
    q: BigUint,
    g: BigUint,
}

/// 256-bit safe prime used by the fast test preset (p = 2q + 1).
const P_256: &str =
    "109461130175510827682235449447961862470257290547142374141637191755689131345687";
const Q_256: &str =
    "54730565087755413841117724723980931235128645273571187070818595877844565672843";

/// 512-bit safe prime preset for runs that want more margin.
const P_512: &str = "12865238009833630282242798545705433768278674402968952957343908883522382854326600834002824991010811552423263935443793468525324905583839707051708976836012847";
const Q_512: &str = "6432619004916815141121399272852716884139337201484476478671954441761191427163300417001412495505405776211631967721896734262662452791919853525854488418006423";

impl GroupParams {
    /// Validates and constructs group parameters.
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<Self, ChashError> {
        if !is_probable_prime(&q) {
            return Err(ChashError::CompositeOrder);
        }
        if !is_probable_prime(&p) {
            return Err(ChashError::CompositeModulus);
        }
        if (&p - 1u32) % &q != BigUint::zero() {
            return Err(ChashError::OrderDoesNotDivide);
        }
        if g <= BigUint::one() || g >= p || g.modpow(&q, &p) != BigUint::one() {
            return Err(ChashError::BadGenerator);
        }
        Ok(Self { p, q, g })
    }

    /// Parses decimal-encoded parameters, as found in scenario files.
    pub fn from_decimal_strings(p: &str, q: &str, g: &str) -> Result<Self, ChashError> {
        let parse = |s: &str| {
            s.parse::<BigUint>()
                .map_err(|_| ChashError::OrderDoesNotDivide)
        };
        let p = parse(p).map_err(|_| ChashError::CompositeModulus)?;
        let q = parse(q).map_err(|_| ChashError::CompositeOrder)?;
        let g = parse(g).map_err(|_| ChashError::BadGenerator)?;
        Self::new(p, q, g)
    }

    /// 256-bit safe-prime preset; the default for tests and scenarios.
    pub fn test_default() -> Self {
        // g = 4 is a square, hence an order-q element of a safe-prime group.
        Self {
            p: P_256.parse().expect("hardcoded prime parses"),
            q: Q_256.parse().expect("hardcoded prime parses"),
            g: BigUint::from(4u32),
        }
    }

    /// 512-bit safe-prime preset.
    pub fn preset_512() -> Self {
        Self {
            p: P_512.parse().expect("hardcoded prime parses"),
            q: Q_512.parse().expect("hardcoded prime parses"),
            g: BigUint::from(4u32),
        }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.p
    }

    pub fn order(&self) -> &BigUint {
        &self.q
    }

    pub fn generator(&self) -> &BigUint {
        &self.g
    }

    /// Maps arbitrary payload bytes to a scalar in Z_q via SHA-256.
    pub fn payload_to_scalar(&self, payload: &[u8]) -> BigUint {
        let digest = Sha256::digest(payload);
        BigUint::from_bytes_be(&digest) % &self.q
    }

    /// Draws a uniform scalar in [0, q) from the given RNG.
    pub fn random_scalar(&self, rng: &mut impl Rng) -> BigUint {
        rng.gen_biguint_below(&self.q)
    }
}

/// Hash-side key: group parameters plus `y = g^x mod p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    params: GroupParams,
    y: BigUint,
}

/// Trapdoor side: the secret exponent `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrapdoorKey {
    params: GroupParams,
    x: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChameleonKeyPair {
    pub pk: PublicKey,
    pub sk: TrapdoorKey,
}

impl PublicKey {
    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn element(&self) -> &BigUint {
        &self.y
    }
}

impl TrapdoorKey {
    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn scalar(&self) -> &BigUint {
        &self.x
    }

    /// True iff this trapdoor opens commitments under `pk`.
    pub fn matches(&self, pk: &PublicKey) -> bool {
        self.params == pk.params
            && self.params.g.modpow(&self.x, &self.params.p) == pk.y
    }
}

/// Deterministically derives a key pair from a 32-byte seed.
///
/// The trapdoor is uniform in [1, q - 1]; the same seed always yields the
/// same pair, which keeps whole-simulation runs reproducible.
pub fn keygen(params: &GroupParams, seed: [u8; 32]) -> ChameleonKeyPair {
    let mut rng = ChaCha20Rng::from_seed(seed);
    let x = rng.gen_biguint_below(&(params.order() - 1u32)) + 1u32;
    let y = params.generator().modpow(&x, params.modulus());
    ChameleonKeyPair {
        pk: PublicKey {
            params: params.clone(),
            y,
        },
        sk: TrapdoorKey {
            params: params.clone(),
            x,
        },
    }
}

/// Computes `g^H(payload) * y^r mod p`.
pub fn hash(pk: &PublicKey, payload: &[u8], r: &BigUint) -> Result<BigUint, ChashError> {
    let params = &pk.params;
    if r >= params.order() {
        return Err(ChashError::RandomnessOutOfRange);
    }
    let m = params.payload_to_scalar(payload);
    let gm = params.generator().modpow(&m, params.modulus());
    let yr = pk.y.modpow(r, params.modulus());
    Ok((gm * yr) % params.modulus())
}

/// True iff `digest` equals the chameleon hash of `(payload, r)` under `pk`.
/// Malformed inputs (out-of-range randomness) return false rather than error.
pub fn verify(pk: &PublicKey, payload: &[u8], r: &BigUint, digest: &BigUint) -> bool {
    match hash(pk, payload, r) {
        Ok(h) => h == *digest,
        Err(_) => false,
    }
}

/// Finds `r'` such that `hash(pk, new_payload, r') == hash(pk, payload, r)`.
///
/// The collision is `r' = r + (H(payload) - H(new_payload)) * x^-1 mod q`.
pub fn forge(
    sk: &TrapdoorKey,
    payload: &[u8],
    r: &BigUint,
    new_payload: &[u8],
) -> Result<BigUint, ChashError> {
    let params = &sk.params;
    let q = params.order();
    if r >= q {
        return Err(ChashError::RandomnessOutOfRange);
    }
    let x = &sk.x % q;
    if x.is_zero() {
        return Err(ChashError::BadTrapdoor);
    }
    // q is prime, so the inverse is x^(q-2) mod q.
    let x_inv = x.modpow(&(q - 2u32), q);
    if (&x * &x_inv) % q != BigUint::one() {
        return Err(ChashError::BadTrapdoor);
    }
    let m_old = params.payload_to_scalar(payload);
    let m_new = params.payload_to_scalar(new_payload);
    let diff = (m_old + q - m_new) % q;
    Ok((r + diff * x_inv) % q)
}

/// Miller-Rabin with a fixed deterministic witness schedule.
///
/// 40 pseudo-random bases (seeded from the candidate itself) push the error
/// probability below 2^-80, which is ample for validating scenario inputs.
fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for small in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let small = BigUint::from(small);
        if *n == small {
            return true;
        }
        if (n % &small).is_zero() {
            return false;
        }
    }
    // n - 1 = d * 2^s with d odd
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;

    let mut seed = [0u8; 32];
    seed.copy_from_slice(&Sha256::digest(n.to_bytes_be()));
    let mut rng = ChaCha20Rng::from_seed(seed);

    'witness: for _ in 0..40 {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 0..s.saturating_sub(1) {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
