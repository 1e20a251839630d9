#include "trialsim/stochastic.hpp"

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace trialsim {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

}  // namespace

std::array<std::uint32_t, 4> RngStream::philox4x32_10(std::array<std::uint32_t, 4> c,
                                                      std::array<std::uint32_t, 2> k) noexcept {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
    return c;
}

RngStream::RngStream(std::uint64_t base_seed, std::uint64_t stream_id) noexcept
    : key_(base_seed), stream_(stream_id) {}

void RngStream::refill() noexcept {
    // Same rounds as philox4x32_10, laid out lane-wise over consecutive blocks so the
    // compiler can vectorise them.
    std::uint32_t c0[kBlocks], c1[kBlocks], c2[kBlocks], c3[kBlocks];
    for (int b = 0; b < kBlocks; ++b) {
        const std::uint64_t block = block_ + static_cast<std::uint64_t>(b);
        c0[b] = static_cast<std::uint32_t>(block);
        c1[b] = static_cast<std::uint32_t>(block >> 32);
        c2[b] = static_cast<std::uint32_t>(stream_);
        c3[b] = static_cast<std::uint32_t>(stream_ >> 32);
    }
    std::uint32_t k0 = static_cast<std::uint32_t>(key_);
    std::uint32_t k1 = static_cast<std::uint32_t>(key_ >> 32);
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        for (int b = 0; b < kBlocks; ++b) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c0[b];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c2[b];
            const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1[b] ^ k0;
            const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3[b] ^ k1;
            c1[b] = static_cast<std::uint32_t>(p1);
            c3[b] = static_cast<std::uint32_t>(p0);
            c0[b] = n0;
            c2[b] = n2;
        }
    }
    for (int b = 0; b < kBlocks; ++b) {
        buffer_[2 * b] = (static_cast<std::uint64_t>(c1[b]) << 32) | c0[b];
        buffer_[2 * b + 1] = (static_cast<std::uint64_t>(c3[b]) << 32) | c2[b];
    }
    block_ += kBlocks;
    next_ = 0;
}

RngStream derive_stream(std::uint64_t base_seed, std::uint64_t stream_id) noexcept {
    return RngStream(base_seed, stream_id);
}

int sample_binomial(RngStream& rng, int n, double p) {
    if (n < 0 || !(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("sample_binomial: need n >= 0 and p in [0, 1]");
    }
    if (n == 0 || p == 0.0) return 0;
    if (p == 1.0) return n;
    boost::random::binomial_distribution<int, double> dist(n, p);
    return dist(rng);
}

double sample_standard_normal(RngStream& rng) {
    // Ziggurat; stateless between calls so the stream alone determines the sequence.
    boost::random::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

double sample_normal(RngStream& rng, double mean, double sd) {
    if (!(sd >= 0.0) || !std::isfinite(mean) || !std::isfinite(sd)) {
        throw std::invalid_argument("sample_normal: need finite mean and sd >= 0");
    }
    if (sd == 0.0) return mean;
    return mean + sd * sample_standard_normal(rng);
}

// Marsaglia & Tsang (2000); shapes below 1 use the Gamma(a + 1) * U^(1/a) boost.
double sample_gamma(RngStream& rng, double shape) {
    if (!(shape > 0.0) || !std::isfinite(shape)) {
        throw std::invalid_argument("sample_gamma: shape must be positive and finite");
    }
    if (shape < 1.0) {
        const double u = rng.uniform();
        return sample_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = sample_standard_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double sample_beta(RngStream& rng, double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0)) {
        throw std::invalid_argument("sample_beta: shapes must be positive, got " +
                                    std::to_string(alpha) + ", " + std::to_string(beta));
    }
    const double x = sample_gamma(rng, alpha);
    const double y = sample_gamma(rng, beta);
    const double total = x + y;
    if (total <= 0.0) {
        // Both gammas underflowed (tiny shapes); fall back to the Bernoulli limit.
        return rng.uniform() < alpha / (alpha + beta) ? 1.0 - 1e-300 : 1e-300;
    }
    return x / total;
}

std::size_t sample_categorical(RngStream& rng, std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("sample_categorical: empty probability vector");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw std::invalid_argument("sample_categorical: negative probability");
        total += p;
    }
    if (!(total > 0.0)) throw std::invalid_argument("sample_categorical: probabilities sum to 0");
    const double u = rng.uniform() * total;
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        cumulative += probs[i];
        last_positive = i;
        if (u < cumulative) return i;
    }
    return last_positive;
}

}  // namespace trialsim
