#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "bitexpand/bitnet.hpp"
#include "bitexpand/checkpoint.hpp"
#include "bitexpand/image.hpp"
#include "bitexpand/pipeline.hpp"

namespace bitexpand {

struct TrainOptions {
    BitNetConfig model;
    AugmentConfig augment;
    int target_bits = 8;
    int epochs = 100;
    double lr = 1e-4;
    /// The learning rate drops by lr_drop_factor after floor(lr_drop_at * epochs) epochs.
    double lr_drop_at = 0.75;
    double lr_drop_factor = 0.1;
    std::uint64_t seed = 10000;
    /// Stop early after this many completed epochs (0 = run all). The lr schedule
    /// still follows `epochs`, so a later resume continues the same trajectory.
    int stop_after_epochs = 0;

    std::filesystem::path checkpoint;  // overwritten after every epoch when set
    bool keep_epoch_checkpoints = false;
    std::filesystem::path loss_log;    // appended, one line per step
    std::filesystem::path resume;      // checkpoint with training state
};

struct LossRecord {
    std::int64_t step = 0;
    int epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    BitNetModel model;
    TrainState state;
    std::vector<LossRecord> log;
    std::size_t warnings = 0;
};

double learning_rate_for_epoch(const TrainOptions& opt, int epoch);

/// One optimisation step on a single pair. Returns the loss before the update.
double train_step(BitNetModel& model, AdamState& adam, const SamplePair& pair, double lr);

/// Batch-size-1 Adam training over an in-memory corpus.
TrainResult train(const TrainOptions& opt, std::vector<NamedImage> images,
                  const std::function<void(const LossRecord&)>& on_step = {});

}  // namespace bitexpand
