#include "gbi/rng.hpp"

#include <cmath>
#include <limits>

namespace gbi {

namespace {

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

// Ziggurat tables, 128 layers. x[0] is the pseudo-width of the base strip
// (area V divided by f(R)), x[1] = R, x[128] = 0.
struct ZigguratTables {
    static constexpr int kLayers = 128;
    static constexpr double kR = 3.442619855899;
    static constexpr double kV = 9.91256303526217e-3;

    double x[kLayers + 1];
    double ratio[kLayers];

    ZigguratTables() {
        double f = std::exp(-0.5 * kR * kR);
        x[0] = kV / f;
        x[1] = kR;
        x[kLayers] = 0.0;
        for (int i = 2; i < kLayers; ++i) {
            x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] + f));
            f = std::exp(-0.5 * x[i] * x[i]);
        }
        for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
    }
};

const ZigguratTables kZig;

// Xoshiro state held in locals so the hot loops keep it in registers.
struct LocalXoshiro {
    std::array<std::uint64_t, 4> s;

    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t operator()() {
        const std::uint64_t result = rotl(s[0] + s[3], 23) + s[0];
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }
    double uniform() { return static_cast<double>((*this)() >> 11) * kTwoPow53Inv; }
    double uniform_open() { return (static_cast<double>((*this)() >> 11) + 0.5) * kTwoPow53Inv; }
};

[[gnu::noinline]] double normal_slow_path(LocalXoshiro& gen, unsigned layer, double u) {
    const auto& t = kZig;
    if (layer == 0) {
        double x;
        double y;
        do {
            x = std::log(gen.uniform_open()) / ZigguratTables::kR;
            y = std::log(gen.uniform_open());
        } while (-2.0 * y < x * x);
        return u < 0 ? x - ZigguratTables::kR : ZigguratTables::kR - x;
    }
    const double x = u * t.x[layer];
    const double f0 = std::exp(-0.5 * (t.x[layer] * t.x[layer] - x * x));
    const double f1 = std::exp(-0.5 * (t.x[layer + 1] * t.x[layer + 1] - x * x));
    if (f1 + gen.uniform() * (f0 - f1) < 1.0) return x;
    return std::numeric_limits<double>::quiet_NaN();  // rejected; caller redraws
}

inline double ziggurat(LocalXoshiro& gen) {
    const auto& t = kZig;
    for (;;) {
        const std::uint64_t bits = gen();
        // Layer index from the low 7 bits, the signed uniform from the top 53.
        const unsigned layer = static_cast<unsigned>(bits & 0x7F);
        const double u = 2.0 * (static_cast<double>(bits >> 11) * kTwoPow53Inv) - 1.0;
        if (std::fabs(u) < t.ratio[layer]) [[likely]]
            return u * t.x[layer];
        const double x = normal_slow_path(gen, layer, u);
        if (!std::isnan(x)) return x;
    }
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
    std::uint64_t z = mix64(seed) ^ mix64(stream_id ^ 0xD1B54A32D192ED03ULL);
    for (auto& word : state_) {
        z += 0x9E3779B97F4A7C15ULL;
        word = mix64(z);
    }
    // xoshiro must not start from the all-zero state.
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
}

RngStream RngStream::from_state(const std::array<std::uint64_t, 4>& state) {
    if ((state[0] | state[1] | state[2] | state[3]) == 0)
        throw InvalidParameter("xoshiro256++ state must not be all zero");
    RngStream r(0, 0);
    r.state_ = state;
    return r;
}

RngStream RngStream::split(std::uint64_t index) const {
    return RngStream(seed_, mix64(stream_id_ ^ mix64(index + 0x632BE59BD9B4E019ULL)));
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * kTwoPow53Inv; }

double RngStream::uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * kTwoPow53Inv;
}

double RngStream::standard_normal() {
    LocalXoshiro gen{state_};
    const double z = ziggurat(gen);
    state_ = gen.s;
    return z;
}

double RngStream::normal(double mu, double sigma) {
    if (!(sigma > 0.0)) throw InvalidParameter("normal: sigma must be positive");
    return mu + sigma * standard_normal();
}

void RngStream::fill_standard_normal(std::span<double> out) {
    LocalXoshiro gen{state_};
    for (double& v : out) v = ziggurat(gen);
    state_ = gen.s;
}

double sample_normal(RngStream& rng, double mu, double sigma) { return rng.normal(mu, sigma); }

}  // namespace gbi
