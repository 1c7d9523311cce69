#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace malmem {

/// Incremental FNV-1a 64-bit hash. Used for dataset fingerprints, report
/// hashes and experiment-cache keys; not cryptographic.
class Fnv1a {
public:
    Fnv1a& bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= b[i];
            h_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    Fnv1a& str(std::string_view s) { return bytes(s.data(), s.size()); }

    Fnv1a& u64(std::uint64_t v) { return bytes(&v, sizeof v); }

    Fnv1a& f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        return u64(bits);
    }

    Fnv1a& f64s(const std::vector<double>& v) {
        for (double x : v) f64(x);
        return *this;
    }

    std::uint64_t value() const { return h_; }

    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        std::uint64_t v = h_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] = digits[v & 0xf];
            v >>= 4;
        }
        return out;
    }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string hash_hex(std::string_view s) { return Fnv1a().str(s).hex(); }

}  // namespace malmem
