#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace aggc {

// Deterministic regression task: inputs are standard normal, targets come
// from a fixed random tanh teacher. Batches depend only on (seed, step).
class RegressionSampler {
public:
    RegressionSampler(Eigen::Index input_dim, Eigen::Index output_dim, std::uint64_t seed);

    Eigen::Index input_dim() const { return teacher_.cols(); }
    Eigen::Index output_dim() const { return teacher_.rows(); }

    void sample(std::uint64_t step, Eigen::Index batch, Eigen::MatrixXd& x,
                Eigen::MatrixXd& y) const;

private:
    Eigen::MatrixXd teacher_;
    std::uint64_t seed_;
};

// Synthetic character stream with first-order structure: sequences are drawn
// from a fixed random bigram transition table, so a next-token model has
// something real to learn. Batches depend only on (seed, step).
class TokenSampler {
public:
    TokenSampler(Eigen::Index vocab, std::uint64_t seed);

    Eigen::Index vocab() const { return transitions_.rows(); }

    // Returns batch x (seq_len + 1) token ids; column t+1 is the target of t.
    Eigen::MatrixXi sample(std::uint64_t step, Eigen::Index batch, Eigen::Index seq_len) const;

private:
    Eigen::MatrixXd transitions_;  // row-stochastic
    std::uint64_t seed_;
};

}  // namespace aggc
