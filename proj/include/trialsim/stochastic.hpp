#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace trialsim {

/// Philox4x32-10 counter-based generator. The key is the base seed and the upper half of the
/// 128-bit counter is the stream id, so every (base_seed, stream_id) pair addresses its own
/// 2^64-block sequence without any shared state.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t base_seed, std::uint64_t stream_id) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (next_ == kBuffered) refill();
        return buffer_[next_++];
    }

    /// Uniform double in the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t base_seed() const noexcept { return key_; }
    std::uint64_t stream_id() const noexcept { return stream_; }

    /// Raw Philox4x32-10 block function, exposed for known-answer tests.
    static std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                                      std::array<std::uint32_t, 2> key) noexcept;

private:
    static constexpr int kBlocks = 16;  // Philox blocks computed per refill
    static constexpr int kBuffered = 2 * kBlocks;

    void refill() noexcept;

    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, kBuffered> buffer_{};
    int next_ = kBuffered;
};

RngStream derive_stream(std::uint64_t base_seed, std::uint64_t stream_id) noexcept;

/// Reserved stream-id ranges. Simulation i of a batch uses stream id i.
namespace streams {
inline constexpr std::uint64_t kBootstrap = std::uint64_t{1} << 62;
inline constexpr std::uint64_t kCalibration = std::uint64_t{2} << 62;
inline constexpr std::uint64_t kOracle = std::uint64_t{3} << 62;
}  // namespace streams

int sample_binomial(RngStream& rng, int n, double p);
double sample_gamma(RngStream& rng, double shape);
double sample_beta(RngStream& rng, double alpha, double beta);
double sample_normal(RngStream& rng, double mean, double sd);
double sample_standard_normal(RngStream& rng);
std::size_t sample_categorical(RngStream& rng, std::span<const double> probs);

}  // namespace trialsim
