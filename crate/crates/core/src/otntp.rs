//! One-Time-Next-Time-Password lifecycle.
//!
//! Every vault access submits the current password in plaintext together with
//! a commitment to the next one. Transaction inputs are public, so the
//! plaintext is burned the moment it is used; the stored commitment rotates
//! atomically to the next one on acceptance. Wrong attempts are counted at
//! the house level and lock the vault for everyone once the configured limit
//! is reached; only a governance reopen restores operation.
//!
//! "Encrypted" storage is realized as a SHA-256 preimage commitment: the
//! vault can check a password it cannot read.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ledger::{Address, CallOutcome};
use crate::rng::SplitMix64;
use crate::world::{Role, World};

/// 32-byte SHA-256 digest of a password plaintext's UTF-8 bytes.
/// Rendered as 64 lowercase hex chars in logs and scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Commitment(pub [u8; 32]);

impl Commitment {
    pub fn of(plaintext: &str) -> Commitment {
        let digest = Sha256::digest(plaintext.as_bytes());
        Commitment(digest.into())
    }

    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(text: &str) -> Result<Commitment> {
        let bytes = hex::decode(text).map_err(|_| Error::Malformed)?;
        let arr: [u8; 32] = bytes.try_into().map_err(|_| Error::Malformed)?;
        Ok(Commitment(arr))
    }
}

/// Per-manager authentication record. The failure count that locks the house
/// lives on the world (the house closes "for everyone"); the per-manager
/// counter here tracks how many failures were attributed to this manager.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthState {
    pub manager: Address,
    pub commitment: Option<Commitment>,
    pub failure_count: u32,
    /// Set by a governance reopen: the manager may seed a fresh commitment
    /// once even though one is already stored.
    pub reseed_allowed: bool,
}

impl AuthState {
    pub fn new(manager: Address) -> AuthState {
        AuthState { manager, commitment: None, failure_count: 0, reseed_allowed: false }
    }

    pub fn seeded(&self) -> bool {
        self.commitment.is_some()
    }
}

#[derive(Serialize)]
struct SeedPayload<'a> {
    commitment: &'a str,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct VerifyPayload {
    pub otntp_plaintext: String,
    pub next_commitment: String,
}

impl World {
    /// Store the first (or restored) commitment for a manager.
    ///
    /// Allowed when the manager has never seeded, or once after a governance
    /// reopen restored a locked house. Seeding resets the manager's failure
    /// attribution.
    pub fn seed_commitment(&mut self, manager: Address, commitment: Commitment) -> Result<()> {
        let payload = serde_json::to_vec(&SeedPayload { commitment: &commitment.to_hex() }).unwrap();
        let result = self.seed_commitment_inner(manager, commitment);
        let outcome = match &result {
            Ok(()) => CallOutcome::success("seeded"),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(manager, self.safehouse_address, "seed_commitment", payload, outcome);
        result
    }

    fn seed_commitment_inner(&mut self, manager: Address, commitment: Commitment) -> Result<()> {
        if self.role_of(manager) != Role::Manager {
            return Err(Error::NotAManager);
        }
        let auth = self.auth.entry(manager).or_insert_with(|| AuthState::new(manager));
        if auth.seeded() && !auth.reseed_allowed {
            return Err(Error::AlreadySeeded);
        }
        auth.commitment = Some(commitment);
        auth.failure_count = 0;
        auth.reseed_allowed = false;
        Ok(())
    }

    /// Check a plaintext against the stored commitment and rotate to the next
    /// one on acceptance. One atomic transition: there is no observable state
    /// between the check and the rotation.
    ///
    /// The plaintext and the next commitment are written to the public log in
    /// all cases — rejections included — which is exactly why the scheme
    /// rotates. A rejected attempt discards the submitted next commitment and
    /// counts one failure against the house; reaching `max_failed_auth`
    /// failures locks the vault for everyone.
    pub fn verify_and_rotate(
        &mut self,
        manager: Address,
        plaintext: &str,
        next_commitment: Commitment,
    ) -> Result<bool> {
        let payload = serde_json::to_vec(&VerifyPayload {
            otntp_plaintext: plaintext.to_string(),
            next_commitment: next_commitment.to_hex(),
        })
        .unwrap();
        let result = self.verify_and_rotate_inner(manager, plaintext, next_commitment);
        let outcome = match &result {
            Ok(true) => CallOutcome::success("accepted"),
            Ok(false) => CallOutcome::success("rejected"),
            Err(e) => CallOutcome::failure(e),
        };
        self.record_call(manager, self.safehouse_address, "verify_and_rotate", payload, outcome);
        result
    }

    fn verify_and_rotate_inner(
        &mut self,
        manager: Address,
        plaintext: &str,
        next_commitment: Commitment,
    ) -> Result<bool> {
        if self.status.is_locked() {
            return Err(Error::VaultLocked);
        }
        let auth = self.auth.get_mut(&manager).ok_or(Error::NotSeeded)?;
        let stored = auth.commitment.ok_or(Error::NotSeeded)?;
        if Commitment::of(plaintext) == stored {
            auth.commitment = Some(next_commitment);
            auth.failure_count = 0;
            self.auth_failure_count = 0;
            Ok(true)
        } else {
            auth.failure_count += 1;
            self.auth_failure_count += 1;
            if self.auth_failure_count >= self.params.max_failed_auth {
                self.lock_for_auth_failures();
            }
            Ok(false)
        }
    }

    pub(crate) fn auth_check(
        &mut self,
        manager: Address,
        plaintext: &str,
        next: Commitment,
    ) -> Result<()> {
        match self.verify_and_rotate_inner(manager, plaintext, next)? {
            true => Ok(()),
            false => Err(Error::AuthRejected),
        }
    }
}

/// 62 alphanumerics plus 8 symbols; index order is fixed for reproducibility.
const PASSWORD_ALPHABET: &[u8; 70] =
    b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789!@#$%^&*";

/// Generate a password of exactly `length` chars drawn uniformly from the
/// 70-char alphabet. At least one character is non-numeric; a draw that comes
/// out all digits is discarded and resampled from the continuing stream.
pub fn generate_password(seed: u64, length: usize) -> Result<String> {
    if length < 16 {
        return Err(Error::LengthTooShort);
    }
    let mut rng = SplitMix64::new(seed);
    loop {
        let password: String =
            (0..length).map(|_| PASSWORD_ALPHABET[rng.below(70) as usize] as char).collect();
        if password.chars().any(|c| !c.is_ascii_digit()) {
            return Ok(password);
        }
    }
}

/// Sealed container for a password kept on the manager's own device.
/// Binary layout: salt(16) ‖ mac(32) ‖ ciphertext(n).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectedFile {
    pub salt: [u8; 16],
    pub mac: [u8; 32],
    pub ciphertext: Vec<u8>,
}

const KDF_ITERATIONS: u32 = 10_000;

fn derive_key(admin_password: &str, salt: &[u8; 16]) -> [u8; 32] {
    let mut key: [u8; 32] = {
        let mut hasher = Sha256::new();
        hasher.update(admin_password.as_bytes());
        hasher.update(salt);
        hasher.finalize().into()
    };
    for _ in 1..KDF_ITERATIONS {
        key = Sha256::digest(key).into();
    }
    key
}

fn keystream_block(key: &[u8; 32], index: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(key);
    hasher.update(index.to_be_bytes());
    hasher.finalize().into()
}

fn compute_mac(key: &[u8; 32], ciphertext: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(key);
    hasher.update(ciphertext);
    hasher.finalize().into()
}

/// Seal a plaintext under an admin password. The key is a 10,000-fold
/// iterated SHA-256 over (password ‖ salt); the keystream block `i` is
/// SHA-256(key ‖ i as 64-bit big-endian); the mac is SHA-256(key ‖ ciphertext).
pub fn seal_protected_file(
    plaintext: &[u8],
    admin_password: &str,
    salt: [u8; 16],
) -> Result<ProtectedFile> {
    if plaintext.is_empty() {
        return Err(Error::EmptyPlaintext);
    }
    let key = derive_key(admin_password, &salt);
    let mut ciphertext = Vec::with_capacity(plaintext.len());
    for (i, chunk) in plaintext.chunks(32).enumerate() {
        let stream = keystream_block(&key, i as u64);
        ciphertext.extend(chunk.iter().zip(stream.iter()).map(|(p, s)| p ^ s));
    }
    let mac = compute_mac(&key, &ciphertext);
    Ok(ProtectedFile { salt, mac, ciphertext })
}

/// Open a sealed file; returns the plaintext iff the recomputed mac matches.
pub fn open_protected_file(file: &ProtectedFile, admin_password: &str) -> Result<Vec<u8>> {
    let key = derive_key(admin_password, &file.salt);
    if compute_mac(&key, &file.ciphertext) != file.mac {
        return Err(Error::MacMismatch);
    }
    let mut plaintext = Vec::with_capacity(file.ciphertext.len());
    for (i, chunk) in file.ciphertext.chunks(32).enumerate() {
        let stream = keystream_block(&key, i as u64);
        plaintext.extend(chunk.iter().zip(stream.iter()).map(|(c, s)| c ^ s));
    }
    Ok(plaintext)
}

impl ProtectedFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + self.ciphertext.len());
        out.extend_from_slice(&self.salt);
        out.extend_from_slice(&self.mac);
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ProtectedFile> {
        if bytes.len() < 48 {
            return Err(Error::Malformed);
        }
        let mut salt = [0u8; 16];
        salt.copy_from_slice(&bytes[..16]);
        let mut mac = [0u8; 32];
        mac.copy_from_slice(&bytes[16..48]);
        Ok(ProtectedFile { salt, mac, ciphertext: bytes[48..].to_vec() })
    }
}
