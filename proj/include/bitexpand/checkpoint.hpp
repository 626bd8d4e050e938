#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "bitexpand/adam.hpp"
#include "bitexpand/bitnet.hpp"
#include "bitexpand/rng.hpp"

namespace bitexpand {

inline constexpr int kCheckpointVersion = 1;

/// Optimizer and sampling state needed to resume training exactly.
struct TrainState {
    AdamState adam;
    Rng::State rng{};
    std::int64_t step = 0;
    int epoch = 0;
};

struct LoadedCheckpoint {
    BitNetModel model;
    std::optional<TrainState> train;
};

/// Layout: "BITNET01\n", key=value header lines (config, then one
/// `param.<name>=<shape>;<offset>;<length>` line per array), a blank line,
/// then little-endian float32 payloads in manifest order.
void save_checkpoint(const BitNetModel& model, const std::filesystem::path& path,
                     const TrainState* train = nullptr);

/// Throws LoadError with a diagnostic on any format problem.
BitNetModel load_checkpoint(const std::filesystem::path& path);
LoadedCheckpoint load_checkpoint_full(const std::filesystem::path& path);

}  // namespace bitexpand
