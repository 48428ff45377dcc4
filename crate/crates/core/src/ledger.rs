//! Dual-chain ledger: an append-only archive chain of historical model
//! records next to a live chain whose transactions can be rewritten through
//! chameleon-hash forgery without touching any header hash, Merkle root, or
//! parent link.
//!
//! Live-chain immutability boundary: a transaction's `ch_digest` and a
//! header's `ch_curr` never change. Redaction rewrites `{model_uri,
//! randomness}` in the transaction and `{version, r_curr}` in the header,
//! forging new randomness so both digests stay fixed. The archive chain uses
//! conventional hashing and is never rewritten.

use crate::chash::{self, ChashError, PublicKey, TrapdoorKey};
use crate::dag::NodeId;
use crate::encoding;
use crate::store::ContentUri;
use num_bigint::BigUint;
use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("block body may not be empty")]
    EmptyBlock,
    #[error("transaction {0} failed chameleon verification")]
    InvalidTx(usize),
    #[error("block parent hash does not match the chain tip")]
    ParentMismatch,
    #[error("block failed verification")]
    BlockVerification,
    #[error("live block index {0} out of range")]
    BlockOutOfRange(usize),
    #[error("transaction index {tx} out of range in block {block}")]
    TxOutOfRange { block: usize, tx: usize },
    #[error("duplicate redaction target at block {block}, tx {tx}")]
    DuplicateTarget { block: usize, tx: usize },
    #[error(transparent)]
    Chash(#[from] ChashError),
}

fn ser_uint<S: serde::Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:x}"))
}

fn ser_hex<S: serde::Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.iter().map(|b| format!("{b:02x}")).collect::<String>())
}

fn ser_hex32<S: serde::Serializer>(v: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
    ser_hex(v, s)
}

/// A live-chain transaction recording one model. The chameleon digest is the
/// Merkle leaf and never changes; the URI and randomness are rewritable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedactableTx {
    #[serde(serialize_with = "ser_uint")]
    pub ch_digest: BigUint,
    pub model_uri: ContentUri,
    #[serde(serialize_with = "ser_uint")]
    pub randomness: BigUint,
    /// Transactions whose models this model inherited; one transaction per
    /// model node, so these are node ids.
    pub references: Vec<NodeId>,
}

impl RedactableTx {
    /// Canonical chameleon payload: the URI and the reference list.
    pub fn payload_bytes(uri: &ContentUri, references: &[NodeId]) -> Vec<u8> {
        let mut buf = Vec::new();
        encoding::put_str(&mut buf, uri.as_str());
        encoding::put_u64_list(&mut buf, references.iter().map(|r| r.0));
        buf
    }

    /// Builds a transaction with fresh randomness from `rng`.
    pub fn create(
        pk: &PublicKey,
        model_uri: ContentUri,
        references: Vec<NodeId>,
        rng: &mut impl Rng,
    ) -> Result<Self, LedgerError> {
        let randomness = pk.params().random_scalar(rng);
        let payload = Self::payload_bytes(&model_uri, &references);
        let ch_digest = chash::hash(pk, &payload, &randomness)?;
        Ok(Self {
            ch_digest,
            model_uri,
            randomness,
            references,
        })
    }

    pub fn verify(&self, pk: &PublicKey) -> bool {
        let payload = Self::payload_bytes(&self.model_uri, &self.references);
        chash::verify(pk, &payload, &self.randomness, &self.ch_digest)
    }

    fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        encoding::put_uint(&mut buf, &self.ch_digest);
        encoding::put_str(&mut buf, self.model_uri.as_str());
        encoding::put_uint(&mut buf, &self.randomness);
        encoding::put_u64_list(&mut buf, self.references.iter().map(|r| r.0));
        buf
    }
}

/// Binary Merkle tree over the transaction digests; odd levels duplicate the
/// last node. A single leaf is its own root.
pub fn merkle_root(leaves: &[Vec<u8>]) -> Vec<u8> {
    assert!(!leaves.is_empty(), "merkle tree needs at least one leaf");
    let mut level: Vec<Vec<u8>> = leaves.to_vec();
    while level.len() > 1 {
        if level.len() % 2 == 1 {
            level.push(level.last().expect("non-empty").clone());
        }
        level = level
            .chunks(2)
            .map(|pair| {
                let mut hasher = Sha256::new();
                hasher.update(&pair[0]);
                hasher.update(&pair[1]);
                hasher.finalize().to_vec()
            })
            .collect();
    }
    level.pop().expect("non-empty")
}

/// Live block header. `ch_curr` is the block's identity and survives
/// redaction; `version`/`r_curr` are rewritten on each redaction batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiveBlockHeader {
    #[serde(serialize_with = "ser_hex32")]
    pub parent_hash: [u8; 32],
    #[serde(serialize_with = "ser_uint")]
    pub ch_curr: BigUint,
    #[serde(serialize_with = "ser_uint")]
    pub r_curr: BigUint,
    pub version: u64,
    #[serde(serialize_with = "ser_hex")]
    pub merkle_root: Vec<u8>,
    pub timestamp: u64,
}

impl LiveBlockHeader {
    /// Canonical chameleon payload for the header digest.
    pub fn ch_payload(
        parent_hash: &[u8; 32],
        merkle_root: &[u8],
        version: u64,
        timestamp: u64,
    ) -> Vec<u8> {
        let mut buf = Vec::new();
        encoding::put_bytes(&mut buf, parent_hash);
        encoding::put_bytes(&mut buf, merkle_root);
        encoding::put_u64(&mut buf, version);
        encoding::put_u64(&mut buf, timestamp);
        buf
    }

    pub fn verify(&self, pk: &PublicKey) -> bool {
        let payload =
            Self::ch_payload(&self.parent_hash, &self.merkle_root, self.version, self.timestamp);
        chash::verify(pk, &payload, &self.r_curr, &self.ch_curr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiveBlock {
    pub header: LiveBlockHeader,
    pub txs: Vec<RedactableTx>,
}

impl LiveBlock {
    fn leaf_bytes(&self) -> Vec<Vec<u8>> {
        self.txs.iter().map(|tx| tx.ch_digest.to_bytes_be()).collect()
    }

    /// Hash that the next block's `parent_hash` binds: a digest of the
    /// redaction-invariant `ch_curr`.
    pub fn link_hash(&self) -> [u8; 32] {
        let mut buf = Vec::new();
        encoding::put_uint(&mut buf, &self.header.ch_curr);
        Sha256::digest(&buf).into()
    }

    pub fn verify(&self, pk: &PublicKey, expected_parent: &[u8; 32]) -> bool {
        if self.txs.is_empty() || self.header.parent_hash != *expected_parent {
            return false;
        }
        if self.header.merkle_root != merkle_root(&self.leaf_bytes()) {
            return false;
        }
        self.txs.iter().all(|tx| tx.verify(pk)) && self.header.verify(pk)
    }

    fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        encoding::put_bytes(&mut buf, &self.header.parent_hash);
        encoding::put_uint(&mut buf, &self.header.ch_curr);
        encoding::put_uint(&mut buf, &self.header.r_curr);
        encoding::put_u64(&mut buf, self.header.version);
        encoding::put_bytes(&mut buf, &self.header.merkle_root);
        encoding::put_u64(&mut buf, self.header.timestamp);
        encoding::put_u64(&mut buf, self.txs.len() as u64);
        for tx in &self.txs {
            encoding::put_bytes(&mut buf, &tx.canonical_bytes());
        }
        buf
    }
}

/// Builds and chameleon-seals a live block over the given transactions.
pub fn build_block(
    pk: &PublicKey,
    txs: Vec<RedactableTx>,
    parent_hash: [u8; 32],
    timestamp: u64,
    rng: &mut impl Rng,
) -> Result<LiveBlock, LedgerError> {
    if txs.is_empty() {
        return Err(LedgerError::EmptyBlock);
    }
    for (i, tx) in txs.iter().enumerate() {
        if !tx.verify(pk) {
            return Err(LedgerError::InvalidTx(i));
        }
    }
    let root = merkle_root(&txs.iter().map(|tx| tx.ch_digest.to_bytes_be()).collect::<Vec<_>>());
    let r_curr = pk.params().random_scalar(rng);
    let payload = LiveBlockHeader::ch_payload(&parent_hash, &root, 0, timestamp);
    let ch_curr = chash::hash(pk, &payload, &r_curr)?;
    Ok(LiveBlock {
        header: LiveBlockHeader {
            parent_hash,
            ch_curr,
            r_curr,
            version: 0,
            merkle_root: root,
            timestamp,
        },
        txs,
    })
}

/// Why a model landed on the archive chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordReason {
    Publish,
    UnlearnReplace,
}

/// Append-only history entry. For replacements, `model_uri` is the new
/// version and `predecessor_uri` links back to the version it superseded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchiveRecord {
    pub model_uri: ContentUri,
    pub predecessor_uri: Option<ContentUri>,
    pub reason: RecordReason,
    pub timestamp: u64,
}

impl ArchiveRecord {
    fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        encoding::put_str(&mut buf, self.model_uri.as_str());
        match &self.predecessor_uri {
            Some(uri) => {
                encoding::put_u64(&mut buf, 1);
                encoding::put_str(&mut buf, uri.as_str());
            }
            None => encoding::put_u64(&mut buf, 0),
        }
        encoding::put_u64(
            &mut buf,
            match self.reason {
                RecordReason::Publish => 0,
                RecordReason::UnlearnReplace => 1,
            },
        );
        encoding::put_u64(&mut buf, self.timestamp);
        buf
    }
}

/// Minimal archive block: parent hash, records, timestamp.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchiveBlock {
    #[serde(serialize_with = "ser_hex32")]
    pub parent_hash: [u8; 32],
    pub records: Vec<ArchiveRecord>,
    pub timestamp: u64,
}

impl ArchiveBlock {
    fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        encoding::put_bytes(&mut buf, &self.parent_hash);
        encoding::put_u64(&mut buf, self.records.len() as u64);
        for record in &self.records {
            encoding::put_bytes(&mut buf, &record.canonical_bytes());
        }
        encoding::put_u64(&mut buf, self.timestamp);
        buf
    }

    fn link_hash(&self) -> [u8; 32] {
        Sha256::digest(self.canonical_bytes()).into()
    }
}

/// A single redaction: rewrite one transaction's model URI.
#[derive(Debug, Clone, PartialEq)]
pub struct RedactionTarget {
    pub block: usize,
    pub tx: usize,
    pub new_uri: ContentUri,
}

/// Chameleon forgeries performed by one committed redaction batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RedactionReceipt {
    pub tx_forges: u64,
    pub block_forges: u64,
    pub archived_records: u64,
}

const GENESIS_PARENT: [u8; 32] = [0u8; 32];

/// The dual chain plus its logical clock and task version counter.
#[derive(Debug, Clone)]
pub struct DualChain {
    live: Vec<LiveBlock>,
    archive: Vec<ArchiveBlock>,
    version_counter: u64,
    clock: u64,
    pk: PublicKey,
}

impl DualChain {
    pub fn new(pk: PublicKey) -> Self {
        Self {
            live: Vec::new(),
            archive: Vec::new(),
            version_counter: 0,
            clock: 0,
            pk,
        }
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    pub fn live(&self) -> &[LiveBlock] {
        &self.live
    }

    pub fn archive(&self) -> &[ArchiveBlock] {
        &self.archive
    }

    pub fn archive_records(&self) -> impl Iterator<Item = &ArchiveRecord> {
        self.archive.iter().flat_map(|b| b.records.iter())
    }

    pub fn version_counter(&self) -> u64 {
        self.version_counter
    }

    /// Advances the logical clock; used to timestamp blocks and records.
    pub fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    pub fn live_tip_hash(&self) -> [u8; 32] {
        self.live.last().map(LiveBlock::link_hash).unwrap_or(GENESIS_PARENT)
    }

    fn archive_tip_hash(&self) -> [u8; 32] {
        self.archive.last().map(ArchiveBlock::link_hash).unwrap_or(GENESIS_PARENT)
    }

    /// Appends a pre-built block after checking its parent link and every
    /// chameleon digest.
    pub fn append(&mut self, block: LiveBlock) -> Result<(), LedgerError> {
        if block.header.parent_hash != self.live_tip_hash() {
            return Err(LedgerError::ParentMismatch);
        }
        if !block.verify(&self.pk, &self.live_tip_hash()) {
            return Err(LedgerError::BlockVerification);
        }
        self.live.push(block);
        Ok(())
    }

    /// Builds a block from `txs` at the current tip and appends it.
    pub fn build_and_append(
        &mut self,
        txs: Vec<RedactableTx>,
        rng: &mut impl Rng,
    ) -> Result<usize, LedgerError> {
        let timestamp = self.tick();
        let block = build_block(&self.pk, txs, self.live_tip_hash(), timestamp, rng)?;
        self.append(block)?;
        Ok(self.live.len() - 1)
    }

    /// Seals one archive block holding the given records.
    pub fn archive_append_batch(&mut self, records: Vec<ArchiveRecord>) {
        let timestamp = self.tick();
        let block = ArchiveBlock {
            parent_hash: self.archive_tip_hash(),
            records,
            timestamp,
        };
        self.archive.push(block);
    }

    pub fn archive_append(&mut self, record: ArchiveRecord) {
        self.archive_append_batch(vec![record]);
    }

    /// Atomically rewrites a batch of transactions under committee authority.
    ///
    /// Every forgery is staged first; nothing is written unless the whole
    /// batch is valid. One archive record per rewritten transaction is
    /// appended (old URI preserved as the predecessor), then each touched
    /// block has its version bumped exactly once and its header re-forged.
    pub fn redact_batch(
        &mut self,
        targets: &[RedactionTarget],
        sk: &TrapdoorKey,
    ) -> Result<RedactionReceipt, LedgerError> {
        if !sk.matches(&self.pk) {
            return Err(LedgerError::Chash(ChashError::TrapdoorMismatch));
        }
        // Stage transaction rewrites.
        let mut staged_tx: Vec<(usize, usize, ContentUri, BigUint)> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for target in targets {
            let block = self
                .live
                .get(target.block)
                .ok_or(LedgerError::BlockOutOfRange(target.block))?;
            let tx = block.txs.get(target.tx).ok_or(LedgerError::TxOutOfRange {
                block: target.block,
                tx: target.tx,
            })?;
            if !seen.insert((target.block, target.tx)) {
                return Err(LedgerError::DuplicateTarget {
                    block: target.block,
                    tx: target.tx,
                });
            }
            let old_payload = RedactableTx::payload_bytes(&tx.model_uri, &tx.references);
            let new_payload = RedactableTx::payload_bytes(&target.new_uri, &tx.references);
            let forged = chash::forge(sk, &old_payload, &tx.randomness, &new_payload)?;
            staged_tx.push((target.block, target.tx, target.new_uri.clone(), forged));
        }
        // Stage one header re-forge per touched block.
        let mut touched: BTreeMap<usize, BigUint> = BTreeMap::new();
        for (block_idx, _, _, _) in &staged_tx {
            if touched.contains_key(block_idx) {
                continue;
            }
            let header = &self.live[*block_idx].header;
            let old = LiveBlockHeader::ch_payload(
                &header.parent_hash,
                &header.merkle_root,
                header.version,
                header.timestamp,
            );
            let new = LiveBlockHeader::ch_payload(
                &header.parent_hash,
                &header.merkle_root,
                header.version + 1,
                header.timestamp,
            );
            let forged = chash::forge(sk, &old, &header.r_curr, &new)?;
            touched.insert(*block_idx, forged);
        }
        // Commit: archive first, then rewrite.
        let timestamp = self.tick();
        let records: Vec<ArchiveRecord> = staged_tx
            .iter()
            .map(|(block, tx, new_uri, _)| ArchiveRecord {
                model_uri: new_uri.clone(),
                predecessor_uri: Some(self.live[*block].txs[*tx].model_uri.clone()),
                reason: RecordReason::UnlearnReplace,
                timestamp,
            })
            .collect();
        let archived_records = records.len() as u64;
        self.archive_append_batch(records);

        let tx_forges = staged_tx.len() as u64;
        for (block, tx, new_uri, randomness) in staged_tx {
            let slot = &mut self.live[block].txs[tx];
            slot.model_uri = new_uri;
            slot.randomness = randomness;
        }
        let block_forges = touched.len() as u64;
        for (block, r_curr) in touched {
            let header = &mut self.live[block].header;
            header.version += 1;
            header.r_curr = r_curr;
        }
        self.version_counter += 1;
        Ok(RedactionReceipt {
            tx_forges,
            block_forges,
            archived_records,
        })
    }

    /// Single-transaction convenience wrapper around [`DualChain::redact_batch`].
    pub fn redact_tx(
        &mut self,
        block: usize,
        tx: usize,
        new_uri: ContentUri,
        sk: &TrapdoorKey,
    ) -> Result<RedactionReceipt, LedgerError> {
        self.redact_batch(
            &[RedactionTarget {
                block,
                tx,
                new_uri,
            }],
            sk,
        )
    }

    /// Full verification: every transaction digest, every header digest,
    /// every Merkle root, every parent link on both chains.
    pub fn verify(&self) -> bool {
        let mut parent = GENESIS_PARENT;
        for block in &self.live {
            if !block.verify(&self.pk, &parent) {
                return false;
            }
            parent = block.link_hash();
        }
        let mut parent = GENESIS_PARENT;
        for block in &self.archive {
            if block.parent_hash != parent {
                return false;
            }
            parent = block.link_hash();
        }
        true
    }

    /// Byte-exact snapshot of both chains, for atomicity and invisibility
    /// diffs.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        encoding::put_u64(&mut buf, self.live.len() as u64);
        for block in &self.live {
            encoding::put_bytes(&mut buf, &block.canonical_bytes());
        }
        encoding::put_u64(&mut buf, self.archive.len() as u64);
        for block in &self.archive {
            encoding::put_bytes(&mut buf, &block.canonical_bytes());
        }
        encoding::put_u64(&mut buf, self.version_counter);
        buf
    }

    /// The redaction-invariant portion of the live chain: parent links,
    /// header digests, Merkle roots, timestamps, transaction digests and
    /// reference lists. Byte-identical across any sequence of redactions.
    pub fn stable_fingerprint(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        for block in &self.live {
            encoding::put_bytes(&mut buf, &block.header.parent_hash);
            encoding::put_uint(&mut buf, &block.header.ch_curr);
            encoding::put_bytes(&mut buf, &block.header.merkle_root);
            encoding::put_u64(&mut buf, block.header.timestamp);
            for tx in &block.txs {
                encoding::put_uint(&mut buf, &tx.ch_digest);
                encoding::put_u64_list(&mut buf, tx.references.iter().map(|r| r.0));
            }
        }
        buf
    }

    /// Newline-delimited JSON export: one line per block, live chain first.
    pub fn export_ndjson(&self) -> String {
        #[derive(Serialize)]
        struct LiveLine<'a> {
            chain: &'static str,
            height: usize,
            #[serde(flatten)]
            block: &'a LiveBlock,
        }
        #[derive(Serialize)]
        struct ArchiveLine<'a> {
            chain: &'static str,
            height: usize,
            #[serde(flatten)]
            block: &'a ArchiveBlock,
        }
        let mut out = String::new();
        for (height, block) in self.live.iter().enumerate() {
            let line = LiveLine {
                chain: "live",
                height,
                block,
            };
            out.push_str(&serde_json::to_string(&line).expect("block serializes"));
            out.push('\n');
        }
        for (height, block) in self.archive.iter().enumerate() {
            let line = ArchiveLine {
                chain: "archive",
                height,
                block,
            };
            out.push_str(&serde_json::to_string(&line).expect("block serializes"));
            out.push('\n');
        }
        out
    }

    #[cfg(test)]
    fn live_mut(&mut self) -> &mut Vec<LiveBlock> {
        &mut self.live
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chash::{keygen, GroupParams};
    use crate::store::{ModelStore, Namespace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn keys() -> crate::chash::ChameleonKeyPair {
        keygen(&GroupParams::test_default(), [7; 32])
    }

    fn uri(store: &ModelStore, tag: &[u8]) -> ContentUri {
        store.put(Namespace::Live, tag)
    }

    fn tx(pk: &PublicKey, store: &ModelStore, tag: &[u8], refs: &[u64], rng: &mut impl Rng) -> RedactableTx {
        RedactableTx::create(
            pk,
            uri(store, tag),
            refs.iter().map(|r| NodeId(*r)).collect(),
            rng,
        )
        .unwrap()
    }

    fn chain_with_blocks(tx_tags: &[&[&[u8]]]) -> (DualChain, ModelStore) {
        let kp = keys();
        let store = ModelStore::new();
        let mut chain = DualChain::new(kp.pk.clone());
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut id = 0u64;
        for block_tags in tx_tags {
            let txs: Vec<RedactableTx> = block_tags
                .iter()
                .map(|tag| {
                    id += 1;
                    tx(&kp.pk, &store, tag, &[id.saturating_sub(1)], &mut rng)
                })
                .collect();
            chain.build_and_append(txs, &mut rng).unwrap();
        }
        (chain, store)
    }

    #[test]
    fn single_tx_merkle_root_is_the_tx_digest() {
        let (chain, _) = chain_with_blocks(&[&[b"one"]]);
        let block = &chain.live()[0];
        assert_eq!(block.header.merkle_root, block.txs[0].ch_digest.to_bytes_be());
    }

    #[test]
    fn three_tx_root_matches_reference_construction() {
        let (chain, _) = chain_with_blocks(&[&[b"a", b"b", b"c"]]);
        let block = &chain.live()[0];
        let leaves: Vec<Vec<u8>> = block.txs.iter().map(|t| t.ch_digest.to_bytes_be()).collect();
        // duplicate-last padding, then two sha256 levels
        let h = |l: &[u8], r: &[u8]| -> Vec<u8> {
            let mut hasher = Sha256::new();
            hasher.update(l);
            hasher.update(r);
            hasher.finalize().to_vec()
        };
        let left = h(&leaves[0], &leaves[1]);
        let right = h(&leaves[2], &leaves[2]);
        assert_eq!(block.header.merkle_root, h(&left, &right));
    }

    #[test]
    fn block_building_is_deterministic_for_a_fixed_rng_seed() {
        let kp = keys();
        let store = ModelStore::new();
        let build = || {
            let mut rng = ChaCha20Rng::seed_from_u64(5);
            let txs = vec![
                tx(&kp.pk, &store, b"m1", &[0], &mut rng),
                tx(&kp.pk, &store, b"m2", &[1], &mut rng),
            ];
            build_block(&kp.pk, txs, [9; 32], 42, &mut rng).unwrap()
        };
        assert_eq!(build().canonical_bytes(), build().canonical_bytes());
    }

    #[test]
    fn append_rejects_wrong_parent_and_empty_blocks() {
        let kp = keys();
        let store = ModelStore::new();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut chain = DualChain::new(kp.pk.clone());
        let t = tx(&kp.pk, &store, b"m", &[0], &mut rng);
        let block = build_block(&kp.pk, vec![t], [1; 32], 1, &mut rng).unwrap();
        assert_eq!(chain.append(block), Err(LedgerError::ParentMismatch));
        assert_eq!(
            build_block(&kp.pk, vec![], [0; 32], 1, &mut rng).unwrap_err(),
            LedgerError::EmptyBlock
        );
    }

    #[test]
    fn ten_sequential_appends_verify() {
        let tags: Vec<Vec<&[u8]>> = (0..10).map(|_| vec![b"x" as &[u8], b"y"]).collect();
        let tag_refs: Vec<&[&[u8]]> = tags.iter().map(Vec::as_slice).collect();
        let (chain, _) = chain_with_blocks(&tag_refs);
        assert_eq!(chain.live().len(), 10);
        assert!(chain.verify());
    }

    #[test]
    fn redaction_preserves_headers_and_verifies() {
        let (mut chain, store) = chain_with_blocks(&[&[b"a", b"b"], &[b"c"]]);
        let kp = keys();
        let before = chain.stable_fingerprint();
        let new_uri = store.put(Namespace::Live, b"a-v2");
        chain.redact_tx(0, 0, new_uri.clone(), &kp.sk).unwrap();
        assert!(chain.verify());
        assert_eq!(chain.stable_fingerprint(), before);
        assert_eq!(chain.live()[0].txs[0].model_uri, new_uri);
        assert_eq!(chain.live()[0].header.version, 1);
        assert_eq!(chain.live()[1].header.version, 0);
        // archive got the replacement record, old uri as predecessor
        let record = chain.archive_records().last().unwrap();
        assert_eq!(record.reason, RecordReason::UnlearnReplace);
        assert_eq!(record.model_uri, new_uri);
        assert_eq!(
            record.predecessor_uri.as_ref().unwrap().digest_hex(),
            ModelStore::new().put(Namespace::Live, b"a").digest_hex()
        );
    }

    #[test]
    fn redaction_with_wrong_trapdoor_changes_nothing() {
        let (mut chain, store) = chain_with_blocks(&[&[b"a"]]);
        let wrong = keygen(&GroupParams::test_default(), [8; 32]);
        let before = chain.canonical_bytes();
        let err = chain
            .redact_tx(0, 0, store.put(Namespace::Live, b"new"), &wrong.sk)
            .unwrap_err();
        assert_eq!(err, LedgerError::Chash(ChashError::TrapdoorMismatch));
        assert_eq!(chain.canonical_bytes(), before);
    }

    #[test]
    fn batch_redaction_bumps_each_touched_block_once() {
        let (mut chain, store) =
            chain_with_blocks(&[&[b"a", b"b"], &[b"c", b"d"], &[b"e", b"f"]]);
        let kp = keys();
        let before = chain.stable_fingerprint();
        let roots: Vec<Vec<u8>> = chain.live().iter().map(|b| b.header.merkle_root.clone()).collect();
        let targets: Vec<RedactionTarget> = [
            (0usize, 0usize, b"a2" as &[u8]),
            (0, 1, b"b2"),
            (1, 0, b"c2"),
            (1, 1, b"d2"),
            (2, 1, b"f2"),
        ]
        .iter()
        .map(|(block, tx, tag)| RedactionTarget {
            block: *block,
            tx: *tx,
            new_uri: store.put(Namespace::Live, tag),
        })
        .collect();
        let receipt = chain.redact_batch(&targets, &kp.sk).unwrap();
        assert_eq!(receipt.tx_forges, 5);
        assert_eq!(receipt.block_forges, 3);
        assert!(chain.verify());
        assert_eq!(chain.stable_fingerprint(), before);
        for (i, block) in chain.live().iter().enumerate() {
            assert_eq!(block.header.version, 1, "block {i}");
            assert_eq!(block.header.merkle_root, roots[i]);
        }
    }

    #[test]
    fn duplicate_targets_are_rejected_before_any_write() {
        let (mut chain, store) = chain_with_blocks(&[&[b"a"]]);
        let kp = keys();
        let before = chain.canonical_bytes();
        let t = RedactionTarget {
            block: 0,
            tx: 0,
            new_uri: store.put(Namespace::Live, b"n"),
        };
        let err = chain.redact_batch(&[t.clone(), t], &kp.sk).unwrap_err();
        assert!(matches!(err, LedgerError::DuplicateTarget { .. }));
        assert_eq!(chain.canonical_bytes(), before);
    }

    #[test]
    fn unforged_mutation_is_tamper_evident() {
        let (mut chain, store) = chain_with_blocks(&[&[b"a", b"b"]]);
        assert!(chain.verify());
        chain.live_mut()[0].txs[0].model_uri = store.put(Namespace::Live, b"evil");
        assert!(!chain.verify());
    }

    #[test]
    fn archive_is_append_only_and_preserves_order() {
        let (mut chain, store) = chain_with_blocks(&[&[b"a"]]);
        for i in 0..5u8 {
            chain.archive_append(ArchiveRecord {
                model_uri: store.put(Namespace::Archive, &[i]),
                predecessor_uri: None,
                reason: RecordReason::Publish,
                timestamp: i as u64,
            });
        }
        assert_eq!(chain.archive_records().count(), 5);
        let uris: Vec<&str> = chain.archive_records().map(|r| r.model_uri.as_str()).collect();
        let again: Vec<&str> = chain.archive_records().map(|r| r.model_uri.as_str()).collect();
        assert_eq!(uris, again);
        assert!(chain.verify());
    }

    #[test]
    fn interleaved_records_reconstruct_version_lineage() {
        let (mut chain, store) = chain_with_blocks(&[&[b"v0"]]);
        let kp = keys();
        let v0 = store.put(Namespace::Live, b"v0");
        chain.archive_append(ArchiveRecord {
            model_uri: v0.clone(),
            predecessor_uri: None,
            reason: RecordReason::Publish,
            timestamp: 0,
        });
        let v1 = store.put(Namespace::Live, b"v1");
        chain.redact_tx(0, 0, v1.clone(), &kp.sk).unwrap();
        let v2 = store.put(Namespace::Live, b"v2");
        chain.redact_tx(0, 0, v2.clone(), &kp.sk).unwrap();

        // walk the predecessor links from the live tip back to the publish
        let mut lineage = vec![chain.live()[0].txs[0].model_uri.clone()];
        while let Some(record) = chain
            .archive_records()
            .find(|r| r.model_uri == *lineage.last().unwrap())
        {
            match &record.predecessor_uri {
                Some(prev) => lineage.push(prev.clone()),
                None => break,
            }
        }
        assert_eq!(lineage, vec![v2, v1, v0]);
        assert_eq!(chain.live()[0].header.version, 2);
    }

    #[test]
    fn ndjson_export_has_one_line_per_block() {
        let (chain, _) = chain_with_blocks(&[&[b"a"], &[b"b"]]);
        let out = chain.export_ndjson();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 2);
        for line in lines {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["chain"], "live");
            assert!(v["header"]["ch_curr"].is_string());
        }
    }
}
