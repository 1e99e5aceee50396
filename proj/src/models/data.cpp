#include "aggc/models/data.hpp"

#include <random>

#include "aggc/error.hpp"

namespace aggc {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t lane, std::uint64_t step) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (lane + 1) + 0xbf58476d1ce4e5b9ULL * (step + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

RegressionSampler::RegressionSampler(Eigen::Index input_dim, Eigen::Index output_dim,
                                     std::uint64_t seed)
    : seed_(seed) {
    if (input_dim <= 0 || output_dim <= 0)
        throw ConfigError("regression sampler: dims must be positive");
    std::mt19937_64 rng(mix(seed, 0, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    teacher_.resize(output_dim, input_dim);
    for (Eigen::Index c = 0; c < input_dim; ++c)
        for (Eigen::Index r = 0; r < output_dim; ++r) teacher_(r, c) = normal(rng);
    teacher_ /= std::sqrt(static_cast<double>(input_dim));
}

void RegressionSampler::sample(std::uint64_t step, Eigen::Index batch, Eigen::MatrixXd& x,
                               Eigen::MatrixXd& y) const {
    std::mt19937_64 rng(mix(seed_, 1, step));
    std::normal_distribution<double> normal(0.0, 1.0);
    x.resize(batch, input_dim());
    for (Eigen::Index r = 0; r < batch; ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = normal(rng);
    y = (x * teacher_.transpose()).array().tanh();
}

TokenSampler::TokenSampler(Eigen::Index vocab, std::uint64_t seed) : seed_(seed) {
    if (vocab < 2) throw ConfigError("token sampler: vocab must be >= 2");
    std::mt19937_64 rng(mix(seed, 2, 0));
    std::uniform_int_distribution<Eigen::Index> pick(0, vocab - 1);

    // Each token prefers a handful of successors; a small uniform floor keeps
    // every transition possible.
    transitions_ = Eigen::MatrixXd::Constant(vocab, vocab, 0.05 / static_cast<double>(vocab));
    const int favored = 4;
    for (Eigen::Index from = 0; from < vocab; ++from) {
        for (int i = 0; i < favored; ++i) transitions_(from, pick(rng)) += 0.95 / favored;
        transitions_.row(from) /= transitions_.row(from).sum();
    }
}

Eigen::MatrixXi TokenSampler::sample(std::uint64_t step, Eigen::Index batch,
                                     Eigen::Index seq_len) const {
    if (batch <= 0 || seq_len < 1) throw ConfigError("token sampler: bad batch shape");
    Eigen::MatrixXi tokens(batch, seq_len + 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index b = 0; b < batch; ++b) {
        std::mt19937_64 rng(mix(seed_, 3 + static_cast<std::uint64_t>(b), step));
        std::uniform_int_distribution<int> start(0, static_cast<int>(vocab()) - 1);
        tokens(b, 0) = start(rng);
        for (Eigen::Index t = 1; t <= seq_len; ++t) {
            const double u = unit(rng);
            double cumulative = 0.0;
            int next = static_cast<int>(vocab()) - 1;
            for (Eigen::Index v = 0; v < vocab(); ++v) {
                cumulative += transitions_(tokens(b, t - 1), v);
                if (u <= cumulative) {
                    next = static_cast<int>(v);
                    break;
                }
            }
            tokens(b, t) = next;
        }
    }
    return tokens;
}

}  // namespace aggc
