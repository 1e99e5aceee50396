#include "aggc/models/tiny_lm.hpp"

#include <cmath>
#include <random>

#include "aggc/error.hpp"

namespace aggc {

namespace {

constexpr double kLayerNormEps = 1e-5;

void he_uniform_init(Eigen::Map<Eigen::MatrixXd> weight, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(weight.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < weight.cols(); ++c)
        for (Eigen::Index r = 0; r < weight.rows(); ++r) weight(r, c) = dist(rng);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void TinyLmConfig::validate() const {
    if (vocab < 2) throw ConfigError("tiny-lm: vocab must be >= 2");
    if (d_model <= 0 || n_heads <= 0 || d_ff <= 0)
        throw ConfigError("tiny-lm: dims must be positive");
    if (d_model % n_heads != 0) throw ConfigError("tiny-lm: d_model must divide into heads");
    if (!head_mask.empty() && head_mask.size() != static_cast<std::size_t>(n_heads))
        throw ConfigError("tiny-lm: head_mask must have one entry per head");
}

struct TinyLmModel::SequenceCache {
    Eigen::MatrixXd x;       // token embeddings, L x d
    Eigen::MatrixXd xhat1;   // normalized pre-attention input
    Eigen::VectorXd inv1;    // per-row 1/sqrt(var + eps)
    Eigen::MatrixXd a1;
    Eigen::MatrixXd q, k, v;
    std::vector<Eigen::MatrixXd> attn_probs;  // per head, L x L, causal
    Eigen::MatrixXd context;                  // concatenated head outputs
    Eigen::MatrixXd h1;
    Eigen::MatrixXd xhat2;
    Eigen::VectorXd inv2;
    Eigen::MatrixXd a2;
    Eigen::MatrixXd gate, up, silu_gate, ffn_act;
    Eigen::MatrixXd h2;
    Eigen::MatrixXd probs;  // softmax over logits, L x vocab
};

TinyLmModel::TinyLmModel(TinyLmModel&&) noexcept = default;
TinyLmModel& TinyLmModel::operator=(TinyLmModel&&) noexcept = default;
TinyLmModel::~TinyLmModel() = default;

TinyLmModel::TinyLmModel(TinyLmConfig config, ParamRegistry& registry)
    : config_(std::move(config)), registry_(&registry) {
    config_.validate();
    std::mt19937_64 rng(config_.seed);
    const Eigen::Index d = config_.d_model;

    auto add_weight = [&](const std::string& name, Eigen::Index out, Eigen::Index in) {
        auto& tensor = registry.add(name, {out, in});
        he_uniform_init(tensor.values_as_matrix(), rng);
    };
    auto add_norm = [&](const std::string& prefix) {
        registry.add(prefix + ".weight", {d}).values.setOnes();
        registry.add(prefix + ".bias", {d});
    };

    add_weight("embed.weight", config_.vocab, d);
    add_norm("layers.0.attn_norm");
    add_weight("layers.0.attn.q_proj.weight", d, d);
    add_weight("layers.0.attn.k_proj.weight", d, d);
    add_weight("layers.0.attn.v_proj.weight", d, d);
    add_weight("layers.0.attn.o_proj.weight", d, d);
    add_norm("layers.0.ffn_norm");
    add_weight("layers.0.ffn.gate_proj.weight", config_.d_ff, d);
    add_weight("layers.0.ffn.up_proj.weight", config_.d_ff, d);
    add_weight("layers.0.ffn.down_proj.weight", d, config_.d_ff);
    add_weight("head.weight", config_.vocab, d);
    registry.ensure_grads();
}

void TinyLmModel::check_tokens(const Eigen::MatrixXi& tokens) const {
    if (tokens.rows() < 1 || tokens.cols() < 2)
        throw ShapeMismatchError("tiny-lm: batch needs at least one sequence of length >= 2");
    for (Eigen::Index b = 0; b < tokens.rows(); ++b) {
        for (Eigen::Index t = 0; t < tokens.cols(); ++t) {
            if (tokens(b, t) < 0 || tokens(b, t) >= config_.vocab)
                throw ShapeMismatchError("tiny-lm: token id out of vocab range");
        }
    }
}

namespace {

// y = gamma .* (x - mean)/sqrt(var + eps) + beta, rowwise.
void layer_norm_forward(const Eigen::MatrixXd& x, const Eigen::VectorXd& gamma,
                        const Eigen::VectorXd& beta, Eigen::MatrixXd& xhat,
                        Eigen::VectorXd& inv_std, Eigen::MatrixXd& out) {
    const auto d = static_cast<double>(x.cols());
    xhat.resize(x.rows(), x.cols());
    inv_std.resize(x.rows());
    out.resize(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mean = x.row(i).mean();
        const double var = (x.row(i).array() - mean).square().sum() / d;
        inv_std[i] = 1.0 / std::sqrt(var + kLayerNormEps);
        xhat.row(i) = (x.row(i).array() - mean) * inv_std[i];
        out.row(i) = xhat.row(i).cwiseProduct(gamma.transpose()) + beta.transpose();
    }
}

// Backpropagates d(out) through layer norm; adds the input gradient into dx
// and the parameter gradients into dgamma/dbeta.
void layer_norm_backward(const Eigen::MatrixXd& dout, const Eigen::MatrixXd& xhat,
                         const Eigen::VectorXd& inv_std, const Eigen::VectorXd& gamma,
                         Eigen::MatrixXd& dx, Eigen::Map<Eigen::MatrixXd> dgamma,
                         Eigen::Map<Eigen::MatrixXd> dbeta) {
    const auto d = static_cast<double>(dout.cols());
    for (Eigen::Index i = 0; i < dout.rows(); ++i) {
        dgamma.col(0) += dout.row(i).cwiseProduct(xhat.row(i)).transpose();
        dbeta.col(0) += dout.row(i).transpose();
        const Eigen::RowVectorXd dxhat = dout.row(i).cwiseProduct(gamma.transpose());
        const double mean_dxhat = dxhat.mean();
        const double mean_dxhat_xhat = dxhat.cwiseProduct(xhat.row(i)).sum() / d;
        dx.row(i) += inv_std[i] * (dxhat.array() - mean_dxhat -
                                   xhat.row(i).array() * mean_dxhat_xhat)
                                      .matrix();
    }
}

}  // namespace

double TinyLmModel::forward(const Eigen::MatrixXi& tokens) {
    check_tokens(tokens);
    const Eigen::Index batch = tokens.rows();
    const Eigen::Index len = tokens.cols() - 1;
    const Eigen::Index d = config_.d_model;
    const Eigen::Index heads = config_.n_heads;
    const Eigen::Index head_dim = d / heads;
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    const auto embed = registry_->at("embed.weight").values_as_matrix();
    const Eigen::VectorXd gamma1 = registry_->at("layers.0.attn_norm.weight").values;
    const Eigen::VectorXd beta1 = registry_->at("layers.0.attn_norm.bias").values;
    const auto wq = registry_->at("layers.0.attn.q_proj.weight").values_as_matrix();
    const auto wk = registry_->at("layers.0.attn.k_proj.weight").values_as_matrix();
    const auto wv = registry_->at("layers.0.attn.v_proj.weight").values_as_matrix();
    const auto wo = registry_->at("layers.0.attn.o_proj.weight").values_as_matrix();
    const Eigen::VectorXd gamma2 = registry_->at("layers.0.ffn_norm.weight").values;
    const Eigen::VectorXd beta2 = registry_->at("layers.0.ffn_norm.bias").values;
    const auto wg = registry_->at("layers.0.ffn.gate_proj.weight").values_as_matrix();
    const auto wu = registry_->at("layers.0.ffn.up_proj.weight").values_as_matrix();
    const auto wd = registry_->at("layers.0.ffn.down_proj.weight").values_as_matrix();
    const auto wh = registry_->at("head.weight").values_as_matrix();

    cache_.assign(static_cast<std::size_t>(batch), SequenceCache{});
    double loss = 0.0;

    for (Eigen::Index b = 0; b < batch; ++b) {
        auto& c = cache_[static_cast<std::size_t>(b)];

        c.x.resize(len, d);
        for (Eigen::Index t = 0; t < len; ++t) c.x.row(t) = embed.row(tokens(b, t));

        layer_norm_forward(c.x, gamma1, beta1, c.xhat1, c.inv1, c.a1);
        c.q = c.a1 * wq.transpose();
        c.k = c.a1 * wk.transpose();
        c.v = c.a1 * wv.transpose();

        c.attn_probs.assign(static_cast<std::size_t>(heads), Eigen::MatrixXd());
        c.context = Eigen::MatrixXd::Zero(len, d);
        for (Eigen::Index h = 0; h < heads; ++h) {
            const bool active = config_.head_mask.empty() ||
                                config_.head_mask[static_cast<std::size_t>(h)];
            const auto qh = c.q.middleCols(h * head_dim, head_dim);
            const auto kh = c.k.middleCols(h * head_dim, head_dim);
            const auto vh = c.v.middleCols(h * head_dim, head_dim);
            auto& probs = c.attn_probs[static_cast<std::size_t>(h)];
            probs = Eigen::MatrixXd::Zero(len, len);
            for (Eigen::Index i = 0; i < len; ++i) {
                // Causal attention: position i attends to 0..i.
                Eigen::VectorXd scores =
                    (kh.topRows(i + 1) * qh.row(i).transpose()) * attn_scale;
                const double max_score = scores.maxCoeff();
                Eigen::VectorXd exps = (scores.array() - max_score).exp();
                probs.row(i).head(i + 1) = (exps / exps.sum()).transpose();
            }
            if (active)
                c.context.middleCols(h * head_dim, head_dim) = probs * vh;
        }

        c.h1 = c.x + c.context * wo.transpose();

        layer_norm_forward(c.h1, gamma2, beta2, c.xhat2, c.inv2, c.a2);
        c.gate = c.a2 * wg.transpose();
        c.up = c.a2 * wu.transpose();
        c.silu_gate = c.gate.unaryExpr([](double g) { return g * sigmoid(g); });
        c.ffn_act = c.silu_gate.cwiseProduct(c.up);
        c.h2 = c.h1 + c.ffn_act * wd.transpose();

        const Eigen::MatrixXd logits = c.h2 * wh.transpose();
        c.probs.resize(len, config_.vocab);
        for (Eigen::Index t = 0; t < len; ++t) {
            const double max_logit = logits.row(t).maxCoeff();
            const Eigen::ArrayXd exps = (logits.row(t).array() - max_logit).exp();
            const double sum = exps.sum();
            c.probs.row(t) = (exps / sum).transpose();
            loss += max_logit + std::log(sum) - logits(t, tokens(b, t + 1));
        }
    }

    cached_tokens_ = tokens;
    return loss / static_cast<double>(batch * len);
}

void TinyLmModel::backward(const Eigen::MatrixXi& tokens) {
    if (!cached_tokens_ || cached_tokens_->rows() != tokens.rows() ||
        cached_tokens_->cols() != tokens.cols() || *cached_tokens_ != tokens)
        throw StaleForwardStateError("tiny-lm backward: no cached forward state for this batch");

    const Eigen::Index batch = tokens.rows();
    const Eigen::Index len = tokens.cols() - 1;
    const Eigen::Index d = config_.d_model;
    const Eigen::Index heads = config_.n_heads;
    const Eigen::Index head_dim = d / heads;
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    const double inv_count = 1.0 / static_cast<double>(batch * len);

    registry_->zero_grads();
    const auto wq = registry_->at("layers.0.attn.q_proj.weight").values_as_matrix();
    const auto wk = registry_->at("layers.0.attn.k_proj.weight").values_as_matrix();
    const auto wv = registry_->at("layers.0.attn.v_proj.weight").values_as_matrix();
    const auto wo = registry_->at("layers.0.attn.o_proj.weight").values_as_matrix();
    const auto wg = registry_->at("layers.0.ffn.gate_proj.weight").values_as_matrix();
    const auto wu = registry_->at("layers.0.ffn.up_proj.weight").values_as_matrix();
    const auto wd = registry_->at("layers.0.ffn.down_proj.weight").values_as_matrix();
    const auto wh = registry_->at("head.weight").values_as_matrix();
    const Eigen::VectorXd gamma1 = registry_->at("layers.0.attn_norm.weight").values;
    const Eigen::VectorXd gamma2 = registry_->at("layers.0.ffn_norm.weight").values;

    auto embed_grad = registry_->at("embed.weight").grad_as_matrix();
    auto wq_grad = registry_->at("layers.0.attn.q_proj.weight").grad_as_matrix();
    auto wk_grad = registry_->at("layers.0.attn.k_proj.weight").grad_as_matrix();
    auto wv_grad = registry_->at("layers.0.attn.v_proj.weight").grad_as_matrix();
    auto wo_grad = registry_->at("layers.0.attn.o_proj.weight").grad_as_matrix();
    auto wg_grad = registry_->at("layers.0.ffn.gate_proj.weight").grad_as_matrix();
    auto wu_grad = registry_->at("layers.0.ffn.up_proj.weight").grad_as_matrix();
    auto wd_grad = registry_->at("layers.0.ffn.down_proj.weight").grad_as_matrix();
    auto wh_grad = registry_->at("head.weight").grad_as_matrix();
    auto gamma1_grad = registry_->at("layers.0.attn_norm.weight").grad_as_matrix();
    auto beta1_grad = registry_->at("layers.0.attn_norm.bias").grad_as_matrix();
    auto gamma2_grad = registry_->at("layers.0.ffn_norm.weight").grad_as_matrix();
    auto beta2_grad = registry_->at("layers.0.ffn_norm.bias").grad_as_matrix();

    for (Eigen::Index b = 0; b < batch; ++b) {
        auto& c = cache_[static_cast<std::size_t>(b)];

        Eigen::MatrixXd dlogits = c.probs;
        for (Eigen::Index t = 0; t < len; ++t) dlogits(t, tokens(b, t + 1)) -= 1.0;
        dlogits *= inv_count;

        wh_grad += dlogits.transpose() * c.h2;
        const Eigen::MatrixXd dh2 = dlogits * wh;

        // Feed-forward block. h2 = h1 + silu(gate) .* up * Wd^T.
        Eigen::MatrixXd dh1 = dh2;
        wd_grad += dh2.transpose() * c.ffn_act;
        const Eigen::MatrixXd dffn_act = dh2 * wd;
        const Eigen::MatrixXd dup = dffn_act.cwiseProduct(c.silu_gate);
        const Eigen::MatrixXd dsilu = dffn_act.cwiseProduct(c.up);
        const Eigen::MatrixXd dgate = dsilu.binaryExpr(c.gate, [](double grad, double g) {
            const double s = sigmoid(g);
            return grad * s * (1.0 + g * (1.0 - s));
        });
        wg_grad += dgate.transpose() * c.a2;
        wu_grad += dup.transpose() * c.a2;
        const Eigen::MatrixXd da2 = dgate * wg + dup * wu;
        layer_norm_backward(da2, c.xhat2, c.inv2, gamma2, dh1, gamma2_grad, beta2_grad);

        // Attention block. h1 = x + context * Wo^T.
        Eigen::MatrixXd dx = dh1;
        wo_grad += dh1.transpose() * c.context;
        const Eigen::MatrixXd dcontext = dh1 * wo;

        Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(len, d);
        Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(len, d);
        Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(len, d);
        for (Eigen::Index h = 0; h < heads; ++h) {
            const bool active = config_.head_mask.empty() ||
                                config_.head_mask[static_cast<std::size_t>(h)];
            if (!active) continue;  // a masked head contributed nothing forward
            const auto& probs = c.attn_probs[static_cast<std::size_t>(h)];
            const auto vh = c.v.middleCols(h * head_dim, head_dim);
            const auto qh = c.q.middleCols(h * head_dim, head_dim);
            const auto kh = c.k.middleCols(h * head_dim, head_dim);
            const auto dch = dcontext.middleCols(h * head_dim, head_dim);

            dv.middleCols(h * head_dim, head_dim) += probs.transpose() * dch;
            const Eigen::MatrixXd dprobs = dch * vh.transpose();
            Eigen::MatrixXd dscores(len, len);
            for (Eigen::Index i = 0; i < len; ++i) {
                const auto p = probs.row(i).head(i + 1);
                const auto dp = dprobs.row(i).head(i + 1);
                const double dot = dp.cwiseProduct(p).sum();
                dscores.row(i).setZero();
                dscores.row(i).head(i + 1) = (p.array() * (dp.array() - dot)).matrix();
            }
            dscores *= attn_scale;
            dq.middleCols(h * head_dim, head_dim) += dscores * kh;
            dk.middleCols(h * head_dim, head_dim) += dscores.transpose() * qh;
        }

        wq_grad += dq.transpose() * c.a1;
        wk_grad += dk.transpose() * c.a1;
        wv_grad += dv.transpose() * c.a1;
        const Eigen::MatrixXd da1 = dq * wq + dk * wk + dv * wv;
        layer_norm_backward(da1, c.xhat1, c.inv1, gamma1, dx, gamma1_grad, beta1_grad);

        for (Eigen::Index t = 0; t < len; ++t)
            embed_grad.row(tokens(b, t)) += dx.row(t);
    }
}

}  // namespace aggc
