#pragma once

#include "gacbo/common.hpp"
#include "gacbo/kernel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace gacbo {

/// Regression dataset for one graph component: parent values concatenated
/// with action values (canonical order) -> observed node value.
struct ComponentData {
    std::vector<Vec> inputs;
    std::vector<double> outputs;
    double noise_scale = 0.1;

    std::size_t size() const { return inputs.size(); }
    bool empty() const { return inputs.empty(); }

    int dim() const { return inputs.empty() ? 0 : static_cast<int>(inputs.front().size()); }

    void add(Vec x, double y) {
        if (!inputs.empty() && x.size() != inputs.front().size())
            throw DimensionError("component input dimension mismatch");
        inputs.push_back(std::move(x));
        outputs.push_back(y);
    }
};

namespace detail {

inline Mat gram_matrix(const Kernel& k, const std::vector<Vec>& xs) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    Mat K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j)
            K(i, j) = K(j, i) = k(xs[i], xs[j]);
    return K;
}

/// Cholesky of K + diag, escalating jitter from 1e-10 to 1e-4 before giving up.
inline Eigen::LLT<Mat> chol_with_jitter(const Mat& K, double diag) {
    const auto n = K.rows();
    Eigen::LLT<Mat> llt(K + diag * Mat::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt;
    for (double jitter = 1e-10; jitter <= 1e-4; jitter *= 10.0) {
        llt.compute(K + (diag + jitter) * Mat::Identity(n, n));
        if (llt.info() == Eigen::Success) return llt;
    }
    throw FactorizationError("covariance matrix not positive definite after jitter escalation");
}

}  // namespace detail

/// GP posterior for one component. Immutable after construction; adding
/// data means constructing a new posterior.
class GpPosterior {
public:
    GpPosterior(Kernel kernel, ComponentData data)
        : kernel_(std::move(kernel)), data_(std::move(data)) {
        if (!data_.empty()) {
            if (kernel_.dim() != data_.dim())
                throw DimensionError("kernel/data dimension mismatch");
            const Mat K = detail::gram_matrix(kernel_, data_.inputs);
            llt_ = detail::chol_with_jitter(K, data_.noise_scale * data_.noise_scale);
            Vec y = Eigen::Map<const Vec>(data_.outputs.data(),
                                          static_cast<Eigen::Index>(data_.outputs.size()));
            alpha_ = llt_.solve(y);
        }
    }

    const Kernel& kernel() const { return kernel_; }
    const ComponentData& data() const { return data_; }

    /// Posterior (mean, variance) at a query point. With empty data this is
    /// the prior: mean 0, variance k(s,s) = 1.
    std::pair<double, double> posterior_at(const Vec& s) const {
        if (data_.empty()) return {0.0, 1.0};
        const auto n = static_cast<Eigen::Index>(data_.size());
        Vec ks(n);
        for (Eigen::Index i = 0; i < n; ++i) ks[i] = kernel_(data_.inputs[i], s);
        const double mean = ks.dot(alpha_);
        const Vec w = llt_.matrixL().solve(ks);
        double var = kernel_(s, s) - w.squaredNorm();
        return {mean, std::max(var, 0.0)};
    }

    double mean_at(const Vec& s) const {
        if (data_.empty()) return 0.0;
        const auto n = static_cast<Eigen::Index>(data_.size());
        double mean = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) mean += kernel_(data_.inputs[i], s) * alpha_[i];
        return mean;
    }

private:
    Kernel kernel_;
    ComponentData data_;
    Eigen::LLT<Mat> llt_;
    Vec alpha_;
};

/// log N(v; 0, K + rho^2 I) with K the kernel Gram matrix of the data.
inline double log_marginal_likelihood(const ComponentData& data, const Kernel& kernel) {
    if (data.empty())
        throw std::invalid_argument("log_marginal_likelihood requires non-empty data");
    const auto n = static_cast<Eigen::Index>(data.size());
    const Mat K = detail::gram_matrix(kernel, data.inputs);
    const auto llt = detail::chol_with_jitter(K, data.noise_scale * data.noise_scale);
    Vec y = Eigen::Map<const Vec>(data.outputs.data(), n);
    const Vec alpha = llt.solve(y);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
    constexpr double log2pi = 1.8378770664093454836;
    return -0.5 * static_cast<double>(n) * log2pi - logdet - 0.5 * y.dot(alpha);
}

/// Finite grid of candidate lengthscale vectors with prior weights.
struct HyperPrior {
    std::vector<Vec> lengthscales;
    std::vector<double> weights;

    /// Log-spaced grid over [lo, hi], `points` per dimension, uniform weights.
    /// Full tensor grids explode with dimension, so above `max_candidates`
    /// the grid falls back to isotropic lengthscale vectors.
    static HyperPrior log_grid(int dim, int points = 5, double lo = 0.1, double hi = 10.0,
                               int max_candidates = 25) {
        HyperPrior p;
        if (dim == 0) {
            p.lengthscales.push_back(Vec());
            p.weights.push_back(1.0);
            return p;
        }
        std::vector<double> marks(points);
        for (int i = 0; i < points; ++i)
            marks[i] = points == 1 ? lo
                                   : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i /
                                                                 (points - 1));
        double total = 1.0;
        for (int d = 0; d < dim; ++d) {
            total *= points;
            if (total > max_candidates) break;
        }
        if (total <= max_candidates) {
            std::vector<int> idx(dim, 0);
            while (true) {
                Vec ls(dim);
                for (int d = 0; d < dim; ++d) ls[d] = marks[idx[d]];
                p.lengthscales.push_back(ls);
                int d = 0;
                while (d < dim && ++idx[d] == points) idx[d++] = 0;
                if (d == dim) break;
            }
        } else {
            for (double m : marks) p.lengthscales.push_back(Vec::Constant(dim, m));
        }
        p.weights.assign(p.lengthscales.size(), 1.0 / p.lengthscales.size());
        return p;
    }

    std::size_t size() const { return lengthscales.size(); }
};

/// log sum_theta pi(theta) p(v | theta): quadrature over the lengthscale grid,
/// computed with log-sum-exp. If every grid term underflows the max log term
/// is returned.
inline double component_score(const ComponentData& data, const HyperPrior& prior) {
    if (data.empty())
        throw std::invalid_argument("component_score requires non-empty data");
    if (prior.size() == 0)
        throw std::invalid_argument("component_score requires a non-empty prior");
    std::vector<double> terms(prior.size());
    double max_term = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < prior.size(); ++i) {
        terms[i] = std::log(prior.weights[i]) +
                   log_marginal_likelihood(data, Kernel(prior.lengthscales[i]));
        max_term = std::max(max_term, terms[i]);
    }
    if (!std::isfinite(max_term)) return max_term;
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - max_term);
    return max_term + std::log(acc);
}

/// The grid point with the highest weighted marginal likelihood; used to pick
/// the kernel backing a component's surrogate GP. With empty data every grid
/// point is equally likely, so the middle one is taken.
inline Kernel map_kernel(const ComponentData& data, const HyperPrior& prior) {
    if (prior.size() == 0) throw std::invalid_argument("empty hyper prior");
    if (data.empty()) return Kernel(prior.lengthscales[prior.size() / 2]);
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < prior.size(); ++i) {
        const double v = std::log(prior.weights[i]) +
                         log_marginal_likelihood(data, Kernel(prior.lengthscales[i]));
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    return Kernel(prior.lengthscales[best]);
}

/// Hyperposterior-weighted mixture of GP posteriors over the lengthscale
/// grid. Predictive moments are the mixture mean and total variance, so the
/// variance stays honest where the data leave the lengthscale ambiguous.
/// Grid points with negligible posterior weight are dropped.
class MixtureGp {
public:
    MixtureGp(const HyperPrior& prior, const ComponentData& data) {
        if (prior.size() == 0) throw std::invalid_argument("empty hyper prior");
        std::vector<double> lw(prior.size());
        double max_lw = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < prior.size(); ++i) {
            lw[i] = std::log(prior.weights[i]) +
                    (data.empty() ? 0.0
                                  : log_marginal_likelihood(data, Kernel(prior.lengthscales[i])));
            max_lw = std::max(max_lw, lw[i]);
        }
        double z = 0.0;
        for (std::size_t i = 0; i < prior.size(); ++i) {
            const double w = std::exp(lw[i] - max_lw);
            if (w < 1e-3) continue;  // negligible grid points
            experts_.emplace_back(Kernel(prior.lengthscales[i]), data);
            weights_.push_back(w);
            z += w;
        }
        for (double& w : weights_) w /= z;
    }

    const ComponentData& data() const { return experts_.front().data(); }

    /// Mixture (mean, variance): total variance includes the spread of the
    /// per-lengthscale means.
    std::pair<double, double> posterior_at(const Vec& s) const {
        double mean = 0.0, second = 0.0;
        for (std::size_t i = 0; i < experts_.size(); ++i) {
            auto [mu, var] = experts_[i].posterior_at(s);
            mean += weights_[i] * mu;
            second += weights_[i] * (var + mu * mu);
        }
        return {mean, std::max(second - mean * mean, 0.0)};
    }

    double mean_at(const Vec& s) const {
        double mean = 0.0;
        for (std::size_t i = 0; i < experts_.size(); ++i)
            mean += weights_[i] * experts_[i].mean_at(s);
        return mean;
    }

private:
    std::vector<GpPosterior> experts_;
    std::vector<double> weights_;
};

}  // namespace gacbo
