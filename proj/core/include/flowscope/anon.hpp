#ifndef FLOWSCOPE_ANON_HPP
#define FLOWSCOPE_ANON_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

#include "flowscope/packet.hpp"

namespace flowscope {

class BadKeyLength : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct AnonKey {
    std::array<uint8_t, 16> bytes{};

    // Accepts exactly 32 hex characters.
    static AnonKey from_hex(const std::string& hex);
};

// Prefix-preserving IPv4 anonymizer. Output bit i equals input bit i XOR
// prf(input bits 1..i-1), so two addresses sharing a k-bit prefix map to
// addresses sharing exactly a k-bit prefix, and the map is a bijection.
//
// The PRF is AES-128 keyed by the 16-byte secret: the padded prefix block is
// encrypted and the top bit of the ciphertext taken. Golden vectors in the
// test suite pin this construction.
class Anonymizer {
  public:
    // prefix holds the first `len` address bits left-aligned; len in 0..31.
    using PrefixPrf = std::function<bool(uint32_t prefix, int len)>;

    explicit Anonymizer(const AnonKey& key);

    // Test hook: substitute an arbitrary PRF (e.g. the constant-zero PRF,
    // under which the transform is the identity).
    static Anonymizer with_prf(PrefixPrf prf);

    uint32_t anonymize(uint32_t addr) const;

  private:
    Anonymizer() = default;

    struct AesState;
    std::shared_ptr<const AesState> aes_;  // null when a custom PRF is set
    PrefixPrf prf_;
};

// Rewrite a whole trace: addresses anonymized, IPv4 and TCP/UDP checksums
// recomputed, everything else byte-identical. Returns ingest-style counters
// for the packets touched.
IngestStats anonymize_trace(const std::string& in_path, const std::string& out_path,
                            const Anonymizer& anon);

}  // namespace flowscope

#endif
