#include "ledgergate/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rsa.h>

#include <bit>

#include "ledgergate/error.hpp"

namespace ledgergate {

namespace {

struct PkeyDeleter {
  void operator()(EVP_PKEY* key) const noexcept { EVP_PKEY_free(key); }
};
struct CtxDeleter {
  void operator()(EVP_PKEY_CTX* ctx) const noexcept { EVP_PKEY_CTX_free(ctx); }
};
struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const noexcept { EVP_MD_CTX_free(ctx); }
};
struct BioDeleter {
  void operator()(BIO* bio) const noexcept { BIO_free(bio); }
};

using BioPtr = std::unique_ptr<BIO, BioDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

std::shared_ptr<EVP_PKEY> own(EVP_PKEY* key) { return {key, PkeyDeleter{}}; }

SignatureScheme scheme_of(EVP_PKEY* key) {
  switch (EVP_PKEY_get_base_id(key)) {
    case EVP_PKEY_RSA: return SignatureScheme::RsaSha256;
    case EVP_PKEY_ED25519: return SignatureScheme::Ed25519Sha256;
    default: throw Error(ErrorCode::BadKey, "unsupported key type");
  }
}

std::string public_pem(EVP_PKEY* key) {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (!bio || PEM_write_bio_PUBKEY(bio.get(), key) != 1) {
    throw Error(ErrorCode::BadKey, "cannot serialize public key");
  }
  char* data = nullptr;
  const long len = BIO_get_mem_data(bio.get(), &data);
  return std::string(data, static_cast<std::size_t>(len));
}

}  // namespace

Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("EVP_Digest failed");
  }
  return out;
}

Digest sha256(std::string_view data) {
  return sha256(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw Error(ErrorCode::Malformed, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = nibble(hex[2 * i]);
    const int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(ErrorCode::Malformed, "invalid hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

std::optional<Digest> digest_from_hex(std::string_view hex) {
  if (hex.size() != 64) return std::nullopt;
  try {
    const Bytes raw = from_hex(hex);
    Digest d{};
    std::copy(raw.begin(), raw.end(), d.begin());
    return d;
  } catch (const Error&) {
    return std::nullopt;
  }
}

unsigned leading_zero_bits(const Digest& digest) noexcept {
  unsigned bits = 0;
  for (auto b : digest) {
    if (b == 0) {
      bits += 8;
      continue;
    }
    bits += static_cast<unsigned>(std::countl_zero(b));
    break;
  }
  return bits;
}

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx_);
    throw std::runtime_error("SHA-256 init failed");
  }
}

Sha256::Sha256(const Sha256& other) : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr || EVP_MD_CTX_copy_ex(ctx_, other.ctx_) != 1) {
    EVP_MD_CTX_free(ctx_);
    throw std::runtime_error("SHA-256 copy failed");
  }
}

Sha256& Sha256::operator=(const Sha256& other) {
  if (this != &other && EVP_MD_CTX_copy_ex(ctx_, other.ctx_) != 1) {
    throw std::runtime_error("SHA-256 copy failed");
  }
  return *this;
}

Sha256::~Sha256() { EVP_MD_CTX_free(ctx_); }

Sha256& Sha256::update(std::span<const std::uint8_t> data) {
  EVP_DigestUpdate(ctx_, data.data(), data.size());
  return *this;
}

Sha256& Sha256::update(std::string_view data) {
  EVP_DigestUpdate(ctx_, data.data(), data.size());
  return *this;
}

Digest Sha256::finish() {
  Digest out{};
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx_, out.data(), &len);
  return out;
}

std::string_view to_string(SignatureScheme scheme) noexcept {
  switch (scheme) {
    case SignatureScheme::RsaSha256: return "RSA_SHA256";
    case SignatureScheme::Ed25519Sha256: return "ED25519_SHA256";
  }
  return "UNKNOWN";
}

std::optional<SignatureScheme> parse_signature_scheme(std::string_view name) noexcept {
  if (name == "RSA_SHA256") return SignatureScheme::RsaSha256;
  if (name == "ED25519_SHA256") return SignatureScheme::Ed25519Sha256;
  return std::nullopt;
}

PublicKey::PublicKey(std::shared_ptr<evp_pkey_st> key, SignatureScheme scheme, std::string pem)
    : key_(std::move(key)), scheme_(scheme), pem_(std::move(pem)) {}

PublicKey PublicKey::from_pem(std::string_view pem) {
  BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  EVP_PKEY* raw = bio ? PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr) : nullptr;
  if (raw == nullptr) throw Error(ErrorCode::BadKey, "public key does not parse as PEM");
  auto key = own(raw);
  const auto scheme = scheme_of(raw);
  return PublicKey(key, scheme, public_pem(raw));
}

bool PublicKey::verify(std::span<const std::uint8_t> message,
                       std::span<const std::uint8_t> signature) const {
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!ctx) return false;
  if (scheme_ == SignatureScheme::RsaSha256) {
    if (EVP_DigestVerifyInit(ctx.get(), nullptr, EVP_sha256(), nullptr, key_.get()) != 1) return false;
    return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(),
                            message.size()) == 1;
  }
  const Digest digest = sha256(message);
  if (EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key_.get()) != 1) return false;
  return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), digest.data(),
                          digest.size()) == 1;
}

bool PublicKey::verify(std::string_view message, std::span<const std::uint8_t> signature) const {
  return verify(std::span(reinterpret_cast<const std::uint8_t*>(message.data()), message.size()),
                signature);
}

PrivateKey::PrivateKey(std::shared_ptr<evp_pkey_st> key, SignatureScheme scheme)
    : key_(std::move(key)),
      scheme_(scheme),
      public_(PublicKey::from_pem(public_pem(key_.get()))) {}

PrivateKey PrivateKey::generate(SignatureScheme scheme, unsigned rsa_bits) {
  EVP_PKEY* raw = nullptr;
  if (scheme == SignatureScheme::RsaSha256) {
    raw = EVP_RSA_gen(rsa_bits);
  } else {
    std::unique_ptr<EVP_PKEY_CTX, CtxDeleter> ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_ED25519, nullptr));
    if (ctx && EVP_PKEY_keygen_init(ctx.get()) == 1) EVP_PKEY_keygen(ctx.get(), &raw);
  }
  if (raw == nullptr) throw Error(ErrorCode::BadKey, "key generation failed");
  return PrivateKey(own(raw), scheme);
}

PrivateKey PrivateKey::from_seed(std::span<const std::uint8_t, 32> seed) {
  EVP_PKEY* raw =
      EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed.data(), seed.size());
  if (raw == nullptr) throw Error(ErrorCode::BadKey, "cannot derive Ed25519 key from seed");
  return PrivateKey(own(raw), SignatureScheme::Ed25519Sha256);
}

PrivateKey PrivateKey::derive(std::string_view label) {
  const Digest seed = sha256(label);
  return from_seed(std::span<const std::uint8_t, 32>(seed));
}

PrivateKey PrivateKey::from_pem(std::string_view pem) {
  BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  EVP_PKEY* raw = bio ? PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr) : nullptr;
  if (raw == nullptr) throw Error(ErrorCode::BadKey, "private key does not parse as PEM");
  auto key = own(raw);
  return PrivateKey(key, scheme_of(raw));
}

std::string PrivateKey::pem() const {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (!bio ||
      PEM_write_bio_PrivateKey(bio.get(), key_.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1) {
    throw Error(ErrorCode::BadKey, "cannot serialize private key");
  }
  char* data = nullptr;
  const long len = BIO_get_mem_data(bio.get(), &data);
  return std::string(data, static_cast<std::size_t>(len));
}

Bytes PrivateKey::sign(std::span<const std::uint8_t> message) const {
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
  std::size_t len = 0;
  Bytes sig;
  if (scheme_ == SignatureScheme::RsaSha256) {
    if (EVP_DigestSignInit(ctx.get(), nullptr, EVP_sha256(), nullptr, key_.get()) != 1 ||
        EVP_DigestSign(ctx.get(), nullptr, &len, message.data(), message.size()) != 1) {
      throw Error(ErrorCode::BadKey, "RSA signing failed");
    }
    sig.resize(len);
    if (EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()) != 1) {
      throw Error(ErrorCode::BadKey, "RSA signing failed");
    }
  } else {
    const Digest digest = sha256(message);
    if (EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key_.get()) != 1 ||
        EVP_DigestSign(ctx.get(), nullptr, &len, digest.data(), digest.size()) != 1) {
      throw Error(ErrorCode::BadKey, "Ed25519 signing failed");
    }
    sig.resize(len);
    if (EVP_DigestSign(ctx.get(), sig.data(), &len, digest.data(), digest.size()) != 1) {
      throw Error(ErrorCode::BadKey, "Ed25519 signing failed");
    }
  }
  sig.resize(len);
  return sig;
}

Bytes PrivateKey::sign(std::string_view message) const {
  return sign(std::span(reinterpret_cast<const std::uint8_t*>(message.data()), message.size()));
}

std::string entity_id_for(const PublicKey& key) {
  const Digest d = sha256(key.pem());
  return to_hex(d).substr(0, 32);
}

}  // namespace ledgergate
