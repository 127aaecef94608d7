#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace elmfit {

// Single exception type; the kind maps to CLI exit codes (usage/io -> 2,
// numeric -> 3).
class Error : public std::runtime_error {
public:
    enum class Kind { usage, io, numeric };

    Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) { throw Error(Error::Kind::usage, msg); }
[[noreturn]] inline void fail_io(const std::string& msg) { throw Error(Error::Kind::io, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(Error::Kind::numeric, msg); }

// Inclusive axis-aligned box over grid indices. d axes, spatial first.
struct Box {
    int rank = 0;
    std::array<std::int64_t, 3> lo{{0, 0, 0}};
    std::array<std::int64_t, 3> hi{{0, 0, 0}};

    std::int64_t extent(int axis) const { return hi[axis] - lo[axis] + 1; }
    std::int64_t volume() const {
        std::int64_t v = 1;
        for (int a = 0; a < rank; ++a) v *= extent(a);
        return v;
    }
    bool contains(const std::array<std::int64_t, 3>& p) const {
        for (int a = 0; a < rank; ++a)
            if (p[a] < lo[a] || p[a] > hi[a]) return false;
        return true;
    }
    void expand_to(const Box& other) {
        for (int a = 0; a < rank; ++a) {
            lo[a] = std::min(lo[a], other.lo[a]);
            hi[a] = std::max(hi[a], other.hi[a]);
        }
    }
    bool operator==(const Box&) const = default;
};

}  // namespace elmfit
