#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace maniloc {

/// Deterministic, stdlib-independent gaussian sampler (Box-Muller over raw
/// mt19937_64 draws) so that seeded weight initialization produces the same
/// bytes on every platform.
class GaussianRng {
public:
    explicit GaussianRng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {
        // 53-bit mantissa uniform in [0, 1)
        return double(engine_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0;
        do {
            u1 = uniform();
        } while (u1 <= 0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(theta);
        has_spare_ = true;
        return radius * std::cos(theta);
    }

    std::uint64_t raw() { return engine_(); }

    template <typename Derived>
    void fill_normal(Eigen::MatrixBase<Derived>& m, double stddev) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                m(r, c) = typename Derived::Scalar(normal() * stddev);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0;
};

}  // namespace maniloc
