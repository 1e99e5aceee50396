#pragma once

#include <cmath>
#include <string>

#include "aggc/error.hpp"
#include "aggc/types.hpp"

namespace aggc {

// Group gradient norm: the L2 norm of the concatenation of all buffers in the
// view, sqrt(sum_i |g_i|^2). Accumulates in double regardless of the buffer
// scalar type. Throws NonFiniteGradientError on any NaN/Inf element.
template <typename Scalar>
double group_norm(const GradientViewT<Scalar>& view) {
    if (view.tensors.empty())
        throw ConfigError("group_norm: group '" + view.group_id + "' has no tensors");

    double sum_sq = 0.0;
    for (std::size_t i = 0; i < view.tensors.size(); ++i) {
        const auto& tensor = view.tensors[i];
        if (!tensor.allFinite()) {
            const std::string tensor_id =
                i < view.tensor_ids.size() ? view.tensor_ids[i] : "#" + std::to_string(i);
            throw NonFiniteGradientError(view.group_id, tensor_id);
        }
        if constexpr (std::is_same_v<Scalar, double>) {
            sum_sq += tensor.squaredNorm();
        } else {
            sum_sq += tensor.template cast<double>().squaredNorm();
        }
    }
    return std::sqrt(sum_sq);
}

// Same, but refreshes the view's cached norm.
template <typename Scalar>
double group_norm_cached(GradientViewT<Scalar>& view) {
    view.cached_norm = group_norm(view);
    return *view.cached_norm;
}

}  // namespace aggc
