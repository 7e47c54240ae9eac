#pragma once

// Counter-based random number generation (Philox4x32-10, Salmon et al. 2011).
// Every draw is a pure function of (key, counter), so ensemble members and
// restarted runs reproduce bit-identical noise regardless of thread schedule.

#include <array>
#include <cmath>
#include <cstdint>

namespace rbc {

struct Philox4x32 {
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;
    static constexpr std::uint32_t kMultA = 0xD2511F53u;
    static constexpr std::uint32_t kMultB = 0xCD9E8D57u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMultA) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMultB) * ctr[2];
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kWeylA;
            key[1] += kWeylB;
        }
        return ctr;
    }
};

// splitmix64 finalizer; used to spread (seed, trajectory) into a Philox key.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Stateless Wiener stream: gaussian(step, channel, slot) is a pure function of
// the coordinates, the base seed, and the trajectory id.  "Position" in a
// checkpoint is therefore just the step index.
class WienerStream {
  public:
    WienerStream() : WienerStream(0, 0) {}
    WienerStream(std::uint64_t base_seed, std::uint64_t trajectory_id)
        : base_seed_(base_seed), trajectory_id_(trajectory_id) {
        const std::uint64_t k = splitmix64(base_seed ^ splitmix64(trajectory_id));
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    }

    std::uint64_t base_seed() const { return base_seed_; }
    std::uint64_t trajectory_id() const { return trajectory_id_; }

    // Standard normal via Box-Muller on one Philox block (no rejection, so the
    // draw count per coordinate is fixed).
    double gaussian(std::uint64_t step, std::uint32_t channel, std::uint32_t slot) const {
        const std::array<std::uint32_t, 4> r = Philox4x32::block(
            {static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), slot,
             channel},
            key_);
        const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
        const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
        // u1 in (0,1]: never 0, so log(u1) is finite.
        const double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;
        const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    void gaussians(std::uint64_t step, std::uint32_t channel, std::uint32_t first_slot, int count,
                   double* out) const {
        for (int i = 0; i < count; ++i)
            out[i] = gaussian(step, channel, first_slot + static_cast<std::uint32_t>(i));
    }

  private:
    std::uint64_t base_seed_;
    std::uint64_t trajectory_id_;
    std::array<std::uint32_t, 2> key_;
};

// Noise channels, kept distinct so temperature and velocity forcing never
// share Philox coordinates.
enum : std::uint32_t {
    kChannelTemperature = 0,
    kChannelVelocity = 1,
    kChannelInitialCondition = 2,
    kChannelTest = 7,
};

} // namespace rbc
