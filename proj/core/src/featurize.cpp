#include "nodenet/featurize.hpp"

#include <cmath>
#include <stdexcept>

namespace nodenet {

IdfModel fit_idf(const Matrix<double>& binary_features, double log_base) {
    const std::size_t n = binary_features.rows();
    const std::size_t f = binary_features.cols();
    if (n == 0 || f == 0) throw std::invalid_argument("fit_idf: empty feature matrix");

    IdfModel model;
    model.num_documents = static_cast<long>(n);
    model.doc_frequency.assign(f, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = binary_features.row(i);
        for (std::size_t j = 0; j < f; ++j)
            if (row[j] > 0.0) ++model.doc_frequency[j];
    }
    const double scale = log_base == kNaturalLog ? 1.0 : std::log(log_base);
    model.idf.resize(f);
    for (std::size_t j = 0; j < f; ++j) {
        const double ratio = static_cast<double>(n) / (1.0 + static_cast<double>(model.doc_frequency[j]));
        model.idf[j] = std::log(ratio) / scale + 1.0;
    }
    return model;
}

Matrix<double> transform_mtfidf(const Matrix<double>& binary_features, const IdfModel& model) {
    const std::size_t n = binary_features.rows();
    const std::size_t f = binary_features.cols();
    if (f != model.idf.size())
        throw std::invalid_argument("transform_mtfidf: feature width does not match idf model");

    Matrix<double> out(n, f);
    for (std::size_t i = 0; i < n; ++i) {
        const double* in_row = binary_features.row(i);
        double* out_row = out.row(i);
        long present = 0;
        for (std::size_t j = 0; j < f; ++j)
            if (in_row[j] > 0.0) ++present;
        if (present == 0) continue;  // empty document maps to the zero vector
        const double inv = 1.0 / static_cast<double>(present);
        for (std::size_t j = 0; j < f; ++j)
            out_row[j] = in_row[j] > 0.0 ? model.idf[j] * inv : 0.0;
    }
    return out;
}

CitationGraph featurize_dataset(const CitationGraph& graph, FeaturizeMode mode, double log_base) {
    if (mode == FeaturizeMode::Identity) return graph;

    for (std::size_t i = 0; i < graph.features.size(); ++i) {
        const double v = graph.features.data()[i];
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument(
                "featurize_dataset: mtfidf requires binary features (found value " +
                std::to_string(v) + ")");
    }
    CitationGraph out = graph;
    out.features = transform_mtfidf(graph.features, fit_idf(graph.features, log_base));
    return out;
}

} // namespace nodenet
