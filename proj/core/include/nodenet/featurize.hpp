#pragma once

#include <vector>

#include "nodenet/citegraph.hpp"
#include "nodenet/matrix.hpp"

namespace nodenet {

// Modified TF-IDF preprocessing for binary count features. Datasets that
// already ship TF-IDF features pass through untouched (identity mode).

// log base sentinel: 0 selects the natural logarithm.
inline constexpr double kNaturalLog = 0.0;

struct IdfModel {
    std::vector<double> idf;            // idf[j] = log(N / (1 + doc_frequency[j])) + 1
    long num_documents = 0;
    std::vector<long> doc_frequency;    // documents containing term j
};

// Entries > 0 count as presence. Throws on an empty matrix.
IdfModel fit_idf(const Matrix<double>& binary_features, double log_base = kNaturalLog);

// Row i, column j: idf[j] / n_i when the term is present, else 0, with n_i
// the number of present terms in row i. All-zero rows stay all-zero.
Matrix<double> transform_mtfidf(const Matrix<double>& binary_features, const IdfModel& model);

enum class FeaturizeMode { Identity, MTfidf };

// mtfidf fits the IDF on the full node set (transductive) and refuses
// non-binary inputs so TF-IDF datasets are not transformed twice.
CitationGraph featurize_dataset(const CitationGraph& graph, FeaturizeMode mode,
                                double log_base = kNaturalLog);

} // namespace nodenet
