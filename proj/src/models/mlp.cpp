#include "aggc/models/mlp.hpp"

#include <cmath>
#include <random>

#include "aggc/error.hpp"

namespace aggc {

namespace {

void he_uniform_init(Eigen::Map<Eigen::MatrixXd> weight, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(weight.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < weight.cols(); ++c)
        for (Eigen::Index r = 0; r < weight.rows(); ++r) weight(r, c) = dist(rng);
}

}  // namespace

MlpModel::MlpModel(MlpConfig config, ParamRegistry& registry)
    : config_(std::move(config)), registry_(&registry) {
    if (config_.layer_sizes.size() < 2)
        throw ConfigError("mlp: need at least an input and an output layer");
    std::mt19937_64 rng(config_.seed);
    for (std::size_t l = 0; l + 1 < config_.layer_sizes.size(); ++l) {
        const Eigen::Index in = config_.layer_sizes[l];
        const Eigen::Index out = config_.layer_sizes[l + 1];
        const std::string prefix = "layers." + std::to_string(l) + ".";
        auto& weight = registry.add(prefix + "weight", {out, in});
        he_uniform_init(weight.values_as_matrix(), rng);
        registry.add(prefix + "bias", {out});
        weight_names_.push_back(prefix + "weight");
        bias_names_.push_back(prefix + "bias");
    }
    registry.ensure_grads();
}

double MlpModel::forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    if (x.cols() != input_dim())
        throw ShapeMismatchError("mlp forward: input has wrong feature count");
    if (y.cols() != output_dim())
        throw ShapeMismatchError("mlp forward: target has wrong feature count");
    if (x.rows() != y.rows()) throw ShapeMismatchError("mlp forward: batch sizes differ");

    activations_.clear();
    activations_.push_back(x);
    for (std::size_t l = 0; l < weight_names_.size(); ++l) {
        const auto weight = registry_->at(weight_names_[l]).values_as_matrix();
        const auto bias = registry_->at(bias_names_[l]).values_as_matrix();
        Eigen::MatrixXd z = activations_.back() * weight.transpose();
        z.rowwise() += bias.col(0).transpose();
        const bool last = l + 1 == weight_names_.size();
        if (last) activations_.push_back(std::move(z));
        else activations_.push_back(z.array().tanh().matrix());
    }
    cached_x_ = x;
    cached_y_ = y;

    const Eigen::MatrixXd diff = activations_.back() - y;
    return diff.squaredNorm() / static_cast<double>(diff.size());
}

void MlpModel::backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    if (!cached_x_ || cached_x_->rows() != x.rows() || cached_x_->cols() != x.cols() ||
        *cached_x_ != x || *cached_y_ != y)
        throw StaleForwardStateError("mlp backward: no cached forward state for this batch");

    registry_->zero_grads();
    const Eigen::MatrixXd& prediction = activations_.back();
    // d(loss)/d(prediction) for mean squared error over all entries.
    Eigen::MatrixXd delta = 2.0 * (prediction - y) / static_cast<double>(prediction.size());

    for (std::size_t l = weight_names_.size(); l-- > 0;) {
        auto weight_grad = registry_->at(weight_names_[l]).grad_as_matrix();
        auto bias_grad = registry_->at(bias_names_[l]).grad_as_matrix();

        weight_grad += delta.transpose() * activations_[l];
        bias_grad.col(0) += delta.colwise().sum().transpose();
        if (l > 0) {
            const auto w = registry_->at(weight_names_[l]).values_as_matrix();
            const Eigen::MatrixXd upstream = delta * w;
            // activations_[l] = tanh(z_l) for every hidden layer.
            delta = (upstream.array() * (1.0 - activations_[l].array().square())).matrix();
        }
    }
}

}  // namespace aggc
