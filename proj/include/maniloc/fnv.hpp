#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace maniloc {

/// 64-bit FNV-1a. Stable across platforms, used for provenance digests and
/// per-image seed derivation (not a cryptographic hash).
class Fnv64 {
public:
    Fnv64& update(const void* bytes, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(bytes);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ull;
        }
        return *this;
    }

    Fnv64& update(std::string_view s) { return update(s.data(), s.size()); }

    template <typename T>
    Fnv64& update_value(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        return update(&v, sizeof(T));
    }

    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

inline std::uint64_t fnv64(std::string_view s) { return Fnv64().update(s).digest(); }

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

/// Digest of a whole file; throws maniloc::RuntimeFailure on I/O problems.
std::uint64_t fnv64_file(const std::string& path);

}  // namespace maniloc
