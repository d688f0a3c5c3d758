#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "strata/rng.hpp"

namespace strata {

// Per-frame posterior moments of a latent sequence, flat row-major
// [frame][token][channel].
struct LatentMomentSequence {
    int frames = 0;
    int tokens = 0;
    int channels = 0;
    std::vector<double> mu;
    std::vector<double> logvar;

    std::size_t frame_size() const { return static_cast<std::size_t>(tokens) * channels; }

    void validate() const {
        if (frames < 1 || tokens < 1 || channels < 1) {
            throw std::invalid_argument("LatentMomentSequence: counts must be positive");
        }
        const std::size_t expect = static_cast<std::size_t>(frames) * frame_size();
        if (mu.size() != expect || logvar.size() != expect) {
            throw std::invalid_argument("LatentMomentSequence: mu/logvar shape mismatch");
        }
    }
};

inline std::vector<double> sample_standard_normal(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> eps(n);
    for (auto& e : eps) e = rng.normal();
    return eps;
}

// z_t = mu_t + sigma_t * eps with ONE eps broadcast across frames; the
// latent dynamics are then driven purely by the moments.
inline std::vector<double> shared_noise_reparameterize(const LatentMomentSequence& m,
                                                       std::span<const double> eps) {
    m.validate();
    if (eps.size() != m.frame_size()) {
        throw std::invalid_argument("shared_noise_reparameterize: eps shape mismatch");
    }
    std::vector<double> z(m.mu.size());
    const std::size_t fs = m.frame_size();
    for (int t = 0; t < m.frames; ++t) {
        const std::size_t base = static_cast<std::size_t>(t) * fs;
        for (std::size_t i = 0; i < fs; ++i) {
            const double sigma = std::exp(0.5 * m.logvar[base + i]);
            z[base + i] = m.mu[base + i] + sigma * eps[i];
        }
    }
    return z;
}

inline std::vector<double> shared_noise_reparameterize(const LatentMomentSequence& m,
                                                       std::uint64_t seed) {
    m.validate();
    const auto eps = sample_standard_normal(m.frame_size(), seed);
    return shared_noise_reparameterize(m, eps);
}

// The baseline being fixed: fresh noise per frame, which re-randomizes every
// frame even under constant moments.
inline std::vector<double> independent_noise_reparameterize(const LatentMomentSequence& m,
                                                            std::uint64_t seed) {
    m.validate();
    Rng rng(seed);
    std::vector<double> z(m.mu.size());
    const std::size_t fs = m.frame_size();
    for (int t = 0; t < m.frames; ++t) {
        const std::size_t base = static_cast<std::size_t>(t) * fs;
        for (std::size_t i = 0; i < fs; ++i) {
            const double sigma = std::exp(0.5 * m.logvar[base + i]);
            z[base + i] = m.mu[base + i] + sigma * rng.normal();
        }
    }
    return z;
}

} // namespace strata
