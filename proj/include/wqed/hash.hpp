#ifndef WQED_HASH_HPP
#define WQED_HASH_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <string_view>

namespace wqed {

// FNV-1a, 64 bit. Stable across platforms for identical byte input.
class Fnv1a {
public:
    Fnv1a& bytes(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t k = 0; k < n; ++k) {
            h_ ^= p[k];
            h_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Fnv1a& text(std::string_view s) { return bytes(s.data(), s.size()); }
    Fnv1a& number(double v)
    {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        return bytes(&bits, sizeof bits);
    }
    Fnv1a& integer(std::uint64_t v) { return bytes(&v, sizeof v); }

    std::uint64_t value() const { return h_; }
    std::string hex() const
    {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
        return buf;
    }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

} // namespace wqed

#endif
