#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nodenet/citegraph.hpp"
#include "nodenet/matrix.hpp"

namespace nodenet {

// Composite graph-regularized cost: the supervised term plus alpha-weighted
// edge penalties over the LL/LU/UU buckets, with exact gradients w.r.t. the
// latent vectors.

enum class Metric {
    L1,
    L2,
    CosinePenalty,        // 1 - cosineSim; minimizing aligns neighbor latents
    CosineSimilarityRaw,  // ablation only: the raw similarity added to the cost
};

Metric metric_from_string(const std::string& name);
std::string to_string(Metric m);

struct GraphLossConfig {
    double alpha_ll = 0.0;
    double alpha_lu = 0.0;
    double alpha_uu = 0.0;
    Metric metric = Metric::CosinePenalty;
    double cosine_epsilon = 1e-12;  // zero-norm guard on the denominators
    bool average_buckets = true;    // divide each bucket term by its bucket size

    bool all_alpha_zero() const { return alpha_ll == 0.0 && alpha_lu == 0.0 && alpha_uu == 0.0; }
    void validate() const;
};

// L1 -> sum |a_i - b_i|; L2 -> euclidean norm of a - b;
// CosinePenalty -> 1 - a.b / (max(|a|,eps) * max(|b|,eps)).
template <typename T>
T metric_value(Metric metric, std::span<const T> a, std::span<const T> b,
               double cosine_epsilon = 1e-12);

// Exact gradients under the stated subgradient conventions: L1 uses 0 at
// tied coordinates, L2 the zero vector at a == b.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> metric_gradient(Metric metric, std::span<const T> a,
                                                          std::span<const T> b,
                                                          double cosine_epsilon = 1e-12);

template <typename T>
struct RegularizerResult {
    T value = T(0);
    Matrix<T> grad_latents;
};

// Accumulates alpha * w * d(h_u, h_v) over the three buckets. node_to_row
// maps node index -> latent row, with -1 marking nodes absent from the
// batch (their edges contribute 0); null means identity.
template <typename T>
RegularizerResult<T> graph_regularizer(const Matrix<T>& latents, const EdgePartition& partition,
                                       const GraphLossConfig& config,
                                       const std::vector<int>* node_to_row = nullptr);

// Eq-structure sum of the supervised and graph terms; rejects non-finite
// inputs, which signal divergence.
template <typename T>
T total_cost(T supervised_loss, T regularizer_value);

} // namespace nodenet
