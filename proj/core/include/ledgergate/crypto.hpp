#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

struct evp_pkey_st;
struct evp_md_ctx_st;

namespace ledgergate {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view data);

std::string to_hex(std::span<const std::uint8_t> data);
/// Throws Error(Malformed) on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);
std::optional<Digest> digest_from_hex(std::string_view hex);

/// Number of leading zero bits in a digest (0..256).
unsigned leading_zero_bits(const Digest& digest) noexcept;

/// Incremental SHA-256. Copyable so a shared prefix can be hashed once and
/// forked per candidate suffix.
class Sha256 {
 public:
  Sha256();
  Sha256(const Sha256& other);
  Sha256& operator=(const Sha256& other);
  Sha256(Sha256&&) noexcept = default;
  Sha256& operator=(Sha256&&) noexcept = default;
  ~Sha256();

  Sha256& update(std::span<const std::uint8_t> data);
  Sha256& update(std::string_view data);
  Digest finish();

 private:
  evp_md_ctx_st* ctx_;
};

// Signatures are deterministic and always computed over SHA-256 of the
// message. RSA uses PKCS#1 v1.5 with SHA-256; Ed25519 signs the 32-byte
// SHA-256 digest of the message.
enum class SignatureScheme { RsaSha256, Ed25519Sha256 };

std::string_view to_string(SignatureScheme scheme) noexcept;
std::optional<SignatureScheme> parse_signature_scheme(std::string_view name) noexcept;

class PublicKey {
 public:
  static PublicKey from_pem(std::string_view pem);

  SignatureScheme scheme() const noexcept { return scheme_; }
  const std::string& pem() const noexcept { return pem_; }
  bool verify(std::span<const std::uint8_t> message, std::span<const std::uint8_t> signature) const;
  bool verify(std::string_view message, std::span<const std::uint8_t> signature) const;

  friend bool operator==(const PublicKey& a, const PublicKey& b) noexcept { return a.pem_ == b.pem_; }

 private:
  PublicKey(std::shared_ptr<evp_pkey_st> key, SignatureScheme scheme, std::string pem);
  friend class PrivateKey;

  std::shared_ptr<evp_pkey_st> key_;
  SignatureScheme scheme_;
  std::string pem_;
};

class PrivateKey {
 public:
  static PrivateKey generate(SignatureScheme scheme, unsigned rsa_bits = 2048);
  /// Deterministic Ed25519 key from a 32-byte seed.
  static PrivateKey from_seed(std::span<const std::uint8_t, 32> seed);
  /// Deterministic Ed25519 key derived from SHA-256 of a label.
  static PrivateKey derive(std::string_view label);
  static PrivateKey from_pem(std::string_view pem);

  SignatureScheme scheme() const noexcept { return scheme_; }
  std::string pem() const;
  const PublicKey& public_key() const noexcept { return public_; }

  Bytes sign(std::span<const std::uint8_t> message) const;
  Bytes sign(std::string_view message) const;

 private:
  PrivateKey(std::shared_ptr<evp_pkey_st> key, SignatureScheme scheme);

  std::shared_ptr<evp_pkey_st> key_;
  SignatureScheme scheme_;
  PublicKey public_;
};

/// Entity identifier convention used by keygen: hex SHA-256 of the public
/// key PEM text, truncated to 32 hex characters.
std::string entity_id_for(const PublicKey& key);

}  // namespace ledgergate
