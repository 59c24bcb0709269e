#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nodenet/neuralnet.hpp"
#include "nodenet/trainer.hpp"

namespace nodenet {

// Versioned binary container for trained models: network config, seed, all
// parameter tensors, and optionally the optimizer state plus epoch counter.
// Round trips are bit-exact.

template <typename T>
struct Checkpoint {
    NetworkConfig config;
    std::uint64_t seed = 0;
    NetworkParameters<T> params;
    std::optional<AdamState<T>> optimizer;
    int epoch = -1;
};

template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::string& path);

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path);

// Scalar width recorded in the file: 4 (float) or 8 (double).
int checkpoint_scalar_width(const std::string& path);

} // namespace nodenet
