#pragma once

#include "gacbo/common.hpp"

#include <cmath>

namespace gacbo {

/// Squared-exponential kernel with per-dimension lengthscales and unit
/// signal variance, so k(s,s) = 1 and k(s,s') <= 1 everywhere.
struct Kernel {
    Vec lengthscales;

    explicit Kernel(Vec ls = Vec()) : lengthscales(std::move(ls)) {}

    static Kernel isotropic(int dim, double ls) {
        return Kernel(Vec::Constant(dim, ls));
    }

    int dim() const { return static_cast<int>(lengthscales.size()); }

    double operator()(const Vec& s, const Vec& s2) const {
        if (s.size() != lengthscales.size() || s2.size() != lengthscales.size())
            throw DimensionError("kernel input dimension mismatch");
        double q = 0.0;
        for (Eigen::Index d = 0; d < s.size(); ++d) {
            const double r = (s[d] - s2[d]) / lengthscales[d];
            q += r * r;
        }
        return std::exp(-0.5 * q);
    }
};

}  // namespace gacbo
