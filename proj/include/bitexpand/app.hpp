#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bitexpand/bitnet.hpp"
#include "bitexpand/errors.hpp"
#include "bitexpand/metrics.hpp"
#include "bitexpand/pipeline.hpp"

namespace bitexpand {

struct RunConfig {
    std::string command;
    std::filesystem::path in;
    std::filesystem::path out;
    std::string method = "zp";  // zp | mig | br | bitnet | bitnet-chan
    std::optional<int> q;
    int H = 8;
    std::filesystem::path checkpoint;
    std::filesystem::path resume;
    std::filesystem::path loss_log;
    std::filesystem::path eval_dir;

    int epochs = 100;
    double lr = 1e-4;
    std::uint64_t seed = 10000;
    double train_fraction = 1.0;
    int stop_after_epochs = 0;
    AugmentConfig augment;
    BitNetConfig model;

    int threads = 1;
    int bench_repeats = 3;
    bool self_check = false;

    bool is_network() const { return method == "bitnet" || method == "bitnet-chan"; }
    /// Throws ConfigError on inconsistent settings for `command`.
    void validate() const;
};

/// Applies one key=value setting. Throws ConfigError on unknown keys or bad values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Parses UTF-8 key=value lines; `#` starts a comment.
void apply_config_text(RunConfig& cfg, const std::string& text);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Thread count from BITEXPAND_THREADS, or fallback when unset or invalid.
int threads_from_env(int fallback);

/// Sidecar path recording the content bit-depth of a quantised PNG.
std::filesystem::path sidecar_path(const std::filesystem::path& png);

struct BenchRow {
    std::string name;
    std::size_t width = 0, height = 0;
    double median_seconds = 0.0;
    double megapixels() const { return static_cast<double>(width * height) / 1e6; }
    double mp_per_second() const { return median_seconds > 0.0 ? megapixels() / median_seconds : 0.0; }
};

struct BenchReport {
    std::vector<BenchRow> rows;
    BenchRow aggregate;
    void write(std::ostream& os) const;
};

/// Median of `repeats` timed expansions per image.
BenchReport bench(const Expander& expander, const std::vector<NamedImage>& lbd_images, BitDepthSpec spec,
                  int repeats);

/// Expander for a method name, loading the checkpoint for network methods.
Expander make_expander(const RunConfig& cfg);

// Commands return a process exit code and write human-readable output to `out`.
int cmd_quantize(const RunConfig& cfg, std::ostream& out);
int cmd_expand(const RunConfig& cfg, std::ostream& out);
int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, std::ostream& out);
int cmd_bench(const RunConfig& cfg, std::ostream& out);
/// 0 on success, 1 when the command fails, 2 on configuration errors.
int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace bitexpand
