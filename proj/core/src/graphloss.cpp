#include "nodenet/graphloss.hpp"

#include <cmath>
#include <stdexcept>

namespace nodenet {

Metric metric_from_string(const std::string& name) {
    if (name == "l1") return Metric::L1;
    if (name == "l2") return Metric::L2;
    if (name == "cosine") return Metric::CosinePenalty;
    if (name == "cosine-raw") return Metric::CosineSimilarityRaw;
    throw std::invalid_argument("unknown metric '" + name + "'");
}

std::string to_string(Metric m) {
    switch (m) {
        case Metric::L1: return "l1";
        case Metric::L2: return "l2";
        case Metric::CosinePenalty: return "cosine";
        case Metric::CosineSimilarityRaw: return "cosine-raw";
    }
    return "cosine";
}

void GraphLossConfig::validate() const {
    if (alpha_ll < 0.0 || alpha_lu < 0.0 || alpha_uu < 0.0)
        throw std::invalid_argument("loss: alpha values must be non-negative");
    if (cosine_epsilon <= 0.0) throw std::invalid_argument("loss: cosine_epsilon must be positive");
}

namespace {

template <typename T>
void check_lengths(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw std::invalid_argument("metric: vector lengths differ");
    if (a.empty()) throw std::invalid_argument("metric: vectors must be non-empty");
}

template <typename T>
struct CosineParts {
    T dot, norm_a, norm_b, denom_a, denom_b, similarity;
};

template <typename T>
CosineParts<T> cosine_parts(std::span<const T> a, std::span<const T> b, double epsilon) {
    CosineParts<T> p{};
    T aa = T(0), bb = T(0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        p.dot += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    p.norm_a = std::sqrt(aa);
    p.norm_b = std::sqrt(bb);
    const T eps = static_cast<T>(epsilon);
    p.denom_a = std::max(p.norm_a, eps);
    p.denom_b = std::max(p.norm_b, eps);
    p.similarity = p.dot / (p.denom_a * p.denom_b);
    return p;
}

// Gradient of cosineSim w.r.t. both arguments, honoring the epsilon clamp
// on the norms.
template <typename T>
void cosine_gradient_into(std::span<const T> a, std::span<const T> b, double epsilon, T sign,
                          std::span<T> grad_a, std::span<T> grad_b) {
    const CosineParts<T> p = cosine_parts(a, b, epsilon);
    const T eps = static_cast<T>(epsilon);
    const T inv_ab = T(1) / (p.denom_a * p.denom_b);
    const T coef_a = p.norm_a > eps ? p.similarity / (p.norm_a * p.norm_a) : T(0);
    const T coef_b = p.norm_b > eps ? p.similarity / (p.norm_b * p.norm_b) : T(0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        grad_a[i] = sign * (b[i] * inv_ab - coef_a * a[i]);
        grad_b[i] = sign * (a[i] * inv_ab - coef_b * b[i]);
    }
}

template <typename T>
void metric_gradient_into(Metric metric, std::span<const T> a, std::span<const T> b,
                          double cosine_epsilon, std::span<T> grad_a, std::span<T> grad_b) {
    switch (metric) {
        case Metric::L1:
            for (std::size_t i = 0; i < a.size(); ++i) {
                const T d = a[i] - b[i];
                const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
                grad_a[i] = s;
                grad_b[i] = -s;
            }
            break;
        case Metric::L2: {
            T sq = T(0);
            for (std::size_t i = 0; i < a.size(); ++i) {
                const T d = a[i] - b[i];
                sq += d * d;
            }
            const T norm = std::sqrt(sq);
            if (norm == T(0)) {
                for (std::size_t i = 0; i < a.size(); ++i) grad_a[i] = grad_b[i] = T(0);
            } else {
                const T inv = T(1) / norm;
                for (std::size_t i = 0; i < a.size(); ++i) {
                    grad_a[i] = (a[i] - b[i]) * inv;
                    grad_b[i] = -grad_a[i];
                }
            }
            break;
        }
        case Metric::CosinePenalty:
            cosine_gradient_into(a, b, cosine_epsilon, T(-1), grad_a, grad_b);
            break;
        case Metric::CosineSimilarityRaw:
            cosine_gradient_into(a, b, cosine_epsilon, T(1), grad_a, grad_b);
            break;
    }
}

} // namespace

template <typename T>
T metric_value(Metric metric, std::span<const T> a, std::span<const T> b, double cosine_epsilon) {
    check_lengths(a, b);
    switch (metric) {
        case Metric::L1: {
            T sum = T(0);
            for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
            return sum;
        }
        case Metric::L2: {
            T sq = T(0);
            for (std::size_t i = 0; i < a.size(); ++i) {
                const T d = a[i] - b[i];
                sq += d * d;
            }
            return std::sqrt(sq);
        }
        case Metric::CosinePenalty:
            return T(1) - cosine_parts(a, b, cosine_epsilon).similarity;
        case Metric::CosineSimilarityRaw:
            return cosine_parts(a, b, cosine_epsilon).similarity;
    }
    throw std::logic_error("metric_value: unreachable");
}

template <typename T>
std::pair<std::vector<T>, std::vector<T>> metric_gradient(Metric metric, std::span<const T> a,
                                                          std::span<const T> b,
                                                          double cosine_epsilon) {
    check_lengths(a, b);
    std::vector<T> grad_a(a.size()), grad_b(b.size());
    metric_gradient_into<T>(metric, a, b, cosine_epsilon, grad_a, grad_b);
    return {std::move(grad_a), std::move(grad_b)};
}

template <typename T>
RegularizerResult<T> graph_regularizer(const Matrix<T>& latents, const EdgePartition& partition,
                                       const GraphLossConfig& config,
                                       const std::vector<int>* node_to_row) {
    config.validate();
    RegularizerResult<T> result;
    result.grad_latents = Matrix<T>(latents.rows(), latents.cols());
    const std::size_t width = latents.cols();

    auto resolve_row = [&](int node) -> long {
        if (node_to_row) {
            if (node < 0 || static_cast<std::size_t>(node) >= node_to_row->size())
                throw std::invalid_argument("graph_regularizer: edge endpoint out of range");
            return (*node_to_row)[static_cast<std::size_t>(node)];
        }
        if (node < 0 || static_cast<std::size_t>(node) >= latents.rows())
            throw std::invalid_argument("graph_regularizer: edge endpoint has no latent row");
        return node;
    };

    std::vector<T> grad_u(width), grad_v(width);
    auto accumulate_bucket = [&](const std::vector<WeightedEdge>& bucket, double alpha) {
        if (alpha == 0.0 || bucket.empty()) return;
        const T scale = static_cast<T>(
            config.average_buckets ? alpha / static_cast<double>(bucket.size()) : alpha);
        T sum = T(0);
        for (const auto& edge : bucket) {
            const long ru = resolve_row(edge.u);
            const long rv = resolve_row(edge.v);
            if (ru < 0 || rv < 0) continue;  // endpoint absent from this batch
            std::span<const T> hu(latents.row(static_cast<std::size_t>(ru)), width);
            std::span<const T> hv(latents.row(static_cast<std::size_t>(rv)), width);
            const T w = static_cast<T>(edge.weight);
            sum += w * metric_value<T>(config.metric, hu, hv, config.cosine_epsilon);
            metric_gradient_into<T>(config.metric, hu, hv, config.cosine_epsilon, grad_u, grad_v);
            T* gu = result.grad_latents.row(static_cast<std::size_t>(ru));
            T* gv = result.grad_latents.row(static_cast<std::size_t>(rv));
            const T s = w * scale;
            for (std::size_t j = 0; j < width; ++j) {
                gu[j] += s * grad_u[j];
                gv[j] += s * grad_v[j];
            }
        }
        result.value += scale * sum;
    };

    accumulate_bucket(partition.ll, config.alpha_ll);
    accumulate_bucket(partition.lu, config.alpha_lu);
    accumulate_bucket(partition.uu, config.alpha_uu);
    return result;
}

template <typename T>
T total_cost(T supervised_loss, T regularizer_value) {
    if (!std::isfinite(static_cast<double>(supervised_loss)) ||
        !std::isfinite(static_cast<double>(regularizer_value)))
        throw std::domain_error("total_cost: non-finite loss term (training diverged)");
    return supervised_loss + regularizer_value;
}

template double metric_value<double>(Metric, std::span<const double>, std::span<const double>, double);
template float metric_value<float>(Metric, std::span<const float>, std::span<const float>, double);

template std::pair<std::vector<double>, std::vector<double>> metric_gradient<double>(
    Metric, std::span<const double>, std::span<const double>, double);
template std::pair<std::vector<float>, std::vector<float>> metric_gradient<float>(
    Metric, std::span<const float>, std::span<const float>, double);

template RegularizerResult<double> graph_regularizer<double>(const Matrix<double>&,
                                                             const EdgePartition&,
                                                             const GraphLossConfig&,
                                                             const std::vector<int>*);
template RegularizerResult<float> graph_regularizer<float>(const Matrix<float>&,
                                                           const EdgePartition&,
                                                           const GraphLossConfig&,
                                                           const std::vector<int>*);

template double total_cost<double>(double, double);
template float total_cost<float>(float, float);

} // namespace nodenet
