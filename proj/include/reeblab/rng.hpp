#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace reeblab {

// Deterministic splitmix64 stream.  Reports must be byte-identical across
// platforms for a fixed seed, so we avoid std:: distributions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    Eigen::VectorXd box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
        Eigen::VectorXd p(lo.size());
        for (Eigen::Index i = 0; i < lo.size(); ++i) p[i] = uniform(lo[i], hi[i]);
        return p;
    }

    // Independent substream, e.g. one per sample index so parallel sweeps
    // stay reproducible.
    Rng fork(std::uint64_t stream) const {
        Rng r(state_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
        r.next();
        return r;
    }

  private:
    std::uint64_t state_;
};

} // namespace reeblab
