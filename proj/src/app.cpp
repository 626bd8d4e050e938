#include "bitexpand/app.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "bitexpand/checkpoint.hpp"
#include "bitexpand/classical.hpp"
#include "bitexpand/errors.hpp"
#include "bitexpand/inference.hpp"
#include "bitexpand/parallel.hpp"
#include "bitexpand/png_io.hpp"
#include "bitexpand/trainer.hpp"

namespace bitexpand {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long r = std::stoll(v, &used);
        if (used == v.size()) return r;
    } catch (const std::exception&) {
    }
    throw ConfigError("setting '" + key + "' expects an integer, got '" + v + "'");
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double r = std::stod(v, &used);
        if (used == v.size()) return r;
    } catch (const std::exception&) {
    }
    throw ConfigError("setting '" + key + "' expects a number, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw ConfigError("setting '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::istringstream is(v);
    for (std::string tok; std::getline(is, tok, ',');) out.push_back(static_cast<int>(parse_int(key, trim(tok))));
    return out;
}

bool is_classical(const std::string& m) { return m == "zp" || m == "mig" || m == "br"; }

int resolve_q(const RunConfig& cfg, const std::filesystem::path& png) {
    if (cfg.q) return *cfg.q;
    std::ifstream side(sidecar_path(png));
    for (std::string line; side && std::getline(side, line);) {
        line = trim(line);
        if (line.rfind("q=", 0) == 0) return static_cast<int>(parse_int("q", line.substr(2)));
    }
    throw ConfigError("source bit-depth unknown: pass --q or provide " + sidecar_path(png).string());
}

std::vector<std::filesystem::path> inputs_of(const std::filesystem::path& p) {
    if (std::filesystem::is_directory(p)) return list_pngs(p);
    if (!std::filesystem::exists(p)) throw ArgumentError("input not found: " + p.string());
    return {p};
}

}  // namespace

void RunConfig::validate() const {
    const bool known = method == "zp" || method == "mig" || method == "br" || is_network();
    if (!known) throw ConfigError("unknown method '" + method + "'");
    if (command == "quantize") {
        if (!q) throw ConfigError("quantize needs --q");
        if (*q < 1 || *q > 15) throw ConfigError("q must lie in [1, 15]");
        return;
    }
    if (H < 2 || H > 16) throw ConfigError("H must lie in [2, 16]");
    if (q && (*q < 1 || *q >= H)) throw ConfigError("q must satisfy 1 <= q < H");
    if ((command == "expand" || command == "eval" || command == "bench") && is_network() && checkpoint.empty() &&
        !self_check) {
        throw ConfigError("method " + method + " requires --checkpoint");
    }
    if (command == "train") {
        if (checkpoint.empty()) throw ConfigError("train needs --checkpoint for its output");
        if (epochs < 1) throw ConfigError("epochs must be positive");
        if (!(lr > 0.0)) throw ConfigError("lr must be positive");
        model.validate();
        augment.validate();
    }
    if (threads < 1) throw ConfigError("threads must be positive");
}

void apply_setting(RunConfig& cfg, const std::string& key_in, const std::string& value_in) {
    const std::string key = trim(key_in);
    const std::string v = trim(value_in);
    if (key == "command") cfg.command = v;
    else if (key == "in") cfg.in = v;
    else if (key == "out") cfg.out = v;
    else if (key == "method") {
        cfg.method = v;
        if (v == "bitnet-chan") cfg.model.variant = Variant::Chan;
        if (v == "bitnet") cfg.model.variant = Variant::Rgb;
    }
    else if (key == "q") cfg.q = static_cast<int>(parse_int(key, v));
    else if (key == "H") cfg.H = static_cast<int>(parse_int(key, v));
    else if (key == "checkpoint") cfg.checkpoint = v;
    else if (key == "resume") cfg.resume = v;
    else if (key == "loss_log") cfg.loss_log = v;
    else if (key == "eval_dir") cfg.eval_dir = v;
    else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(key, v));
    else if (key == "stop_after_epochs") cfg.stop_after_epochs = static_cast<int>(parse_int(key, v));
    else if (key == "lr") cfg.lr = parse_real(key, v);
    else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_int(key, v));
        cfg.augment.seed = cfg.seed;
    }
    else if (key == "train_fraction") cfg.train_fraction = parse_real(key, v);
    else if (key == "threads") cfg.threads = static_cast<int>(parse_int(key, v));
    else if (key == "bench_repeats") cfg.bench_repeats = static_cast<int>(parse_int(key, v));
    else if (key == "self_check") cfg.self_check = parse_bool(key, v);
    else if (key == "hflip_prob") cfg.augment.hflip_prob = parse_real(key, v);
    else if (key == "scale_min") cfg.augment.scale_min = parse_real(key, v);
    else if (key == "scale_max") cfg.augment.scale_max = parse_real(key, v);
    else if (key == "q_min") cfg.augment.q_min = static_cast<int>(parse_int(key, v));
    else if (key == "q_max") cfg.augment.q_max = static_cast<int>(parse_int(key, v));
    else if (key == "patch_size") cfg.augment.patch_size = static_cast<std::size_t>(parse_int(key, v));
    else if (key == "variant") cfg.model.variant = parse_variant(v);
    else if (key == "num_stages") cfg.model.num_stages = static_cast<int>(parse_int(key, v));
    else if (key == "widths") cfg.model.widths = parse_int_list(key, v);
    else if (key == "r_d") cfg.model.r_d = static_cast<int>(parse_int(key, v));
    else if (key == "r_u") cfg.model.r_u = static_cast<int>(parse_int(key, v));
    else if (key == "head_width") cfg.model.head_width = static_cast<int>(parse_int(key, v));
    else if (key == "use_bit_info") cfg.model.use_bit_info = parse_bool(key, v);
    else if (key == "use_msfi") cfg.model.use_msfi = parse_bool(key, v);
    else if (key == "msfi_disconnect_from_smallest") {
        cfg.model.msfi_disconnect_from_smallest = static_cast<int>(parse_int(key, v));
    }
    else throw ConfigError("unknown setting '" + key + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
    std::istringstream is(text);
    int lineno = 0;
    for (std::string line; std::getline(is, line);) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    apply_config_text(cfg, ss.str());
}

int threads_from_env(int fallback) {
    const char* env = std::getenv("BITEXPAND_THREADS");
    if (!env) return fallback;
    try {
        const int n = std::stoi(env);
        return n > 0 ? n : fallback;
    } catch (const std::exception&) {
        return fallback;
    }
}

std::filesystem::path sidecar_path(const std::filesystem::path& png) {
    auto p = png;
    p += ".txt";
    return p;
}

void BenchReport::write(std::ostream& os) const {
    os << "name,width,height,megapixels,median_seconds,megapixels_per_second\n";
    os << std::setprecision(6);
    auto line = [&](const BenchRow& r) {
        os << r.name << ',' << r.width << ',' << r.height << ',' << r.megapixels() << ',' << r.median_seconds << ','
           << r.mp_per_second() << '\n';
    };
    for (const auto& r : rows) line(r);
    line(aggregate);
}

BenchReport bench(const Expander& expander, const std::vector<NamedImage>& lbd_images, BitDepthSpec spec,
                  int repeats) {
    if (repeats < 1) throw ArgumentError("bench needs at least one repetition");
    BenchReport report;
    report.aggregate.name = "TOTAL";
    double total_seconds = 0.0;
    std::size_t total_pixels = 0;
    for (const auto& im : lbd_images) {
        std::vector<double> times;
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const ImageBuffer out = expander(im.image, spec);
            const auto t1 = std::chrono::steady_clock::now();
            times.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        std::sort(times.begin(), times.end());
        BenchRow row{im.name, im.image.width, im.image.height, times[times.size() / 2]};
        total_seconds += row.median_seconds;
        total_pixels += row.width * row.height;
        report.rows.push_back(row);
    }
    report.aggregate.width = total_pixels;
    report.aggregate.height = 1;
    report.aggregate.median_seconds = total_seconds;
    return report;
}

Expander make_expander(const RunConfig& cfg) {
    if (is_classical(cfg.method)) return classical_expander(parse_classical(cfg.method));
    auto model = std::make_shared<const BitNetModel>(load_checkpoint(cfg.checkpoint));
    const Variant want = cfg.method == "bitnet-chan" ? Variant::Chan : Variant::Rgb;
    if (model->config().variant != want) {
        throw ConfigError("checkpoint holds a " + to_string(model->config().variant) + " model but method is " +
                          cfg.method);
    }
    return bitnet_expander(std::move(model));
}

int cmd_quantize(const RunConfig& cfg, std::ostream& out) {
    const ImageBuffer src = read_png(cfg.in).image;
    const ImageBuffer lbd = quantize(src, *cfg.q);
    write_png(cfg.out, lbd, storage_bits_for(lbd.bit_depth));
    std::ofstream side(sidecar_path(cfg.out));
    if (!side) throw std::runtime_error("cannot write " + sidecar_path(cfg.out).string());
    side << "q=" << lbd.bit_depth << '\n';
    out << cfg.in.string() << " -> " << cfg.out.string() << " (" << src.bit_depth << " -> " << lbd.bit_depth
        << " bits)\n";
    return 0;
}

int cmd_expand(const RunConfig& cfg, std::ostream& out) {
    ImageBuffer lbd = read_png(cfg.in).image;
    const BitDepthSpec spec{resolve_q(cfg, cfg.in), cfg.H};
    spec.check();
    lbd.bit_depth = spec.q;
    validate(lbd);
    const ImageBuffer hbd = make_expander(cfg)(lbd, spec);
    write_png(cfg.out, hbd, storage_bits_for(spec.H));
    out << cfg.in.string() << " -> " << cfg.out.string() << " (" << cfg.method << ", " << spec.q << " -> " << spec.H
        << " bits)\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
    std::vector<std::string> warnings;
    const CorpusSplit split = split_corpus(cfg.in, SplitSpec{cfg.train_fraction});
    auto images = load_images(split.train, &warnings);
    for (const auto& w : warnings) out << "warning: " << w << '\n';
    if (images.empty()) throw ArgumentError("no readable training images in " + cfg.in.string());

    TrainOptions opt;
    opt.model = cfg.model;
    opt.model.variant = cfg.method == "bitnet-chan" ? Variant::Chan : cfg.model.variant;
    opt.augment = cfg.augment;
    opt.target_bits = cfg.H;
    opt.epochs = cfg.epochs;
    opt.lr = cfg.lr;
    opt.seed = cfg.seed;
    opt.stop_after_epochs = cfg.stop_after_epochs;
    opt.checkpoint = cfg.checkpoint;
    opt.resume = cfg.resume;
    opt.loss_log = cfg.loss_log.empty() ? std::filesystem::path(cfg.checkpoint.string() + ".log") : cfg.loss_log;
    if (const auto dir = opt.checkpoint.parent_path(); !dir.empty() && !std::filesystem::is_directory(dir)) {
        throw ArgumentError("output directory does not exist: " + dir.string());
    }

    const TrainResult result = train(opt, std::move(images), [&](const LossRecord& r) {
        if (r.step % 100 == 0) out << "step " << r.step << " epoch " << r.epoch << " loss " << r.loss << '\n';
    });
    if (result.warnings) out << "warning: " << result.warnings << " patch crops skipped (image smaller than patch)\n";
    out << "trained " << result.state.step << " steps, checkpoint " << cfg.checkpoint.string() << '\n';

    if (!cfg.eval_dir.empty()) {
        auto model = std::make_shared<const BitNetModel>(result.model);
        const int q = cfg.q.value_or(cfg.augment.q_min);
        const MetricReport rep = evaluate(bitnet_expander(model), cfg.eval_dir, BitDepthSpec{q, cfg.H}, cfg.threads);
        rep.write_summary(out);
    }
    return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
    if (!cfg.q) throw ConfigError("eval needs --q");
    const BitDepthSpec spec{*cfg.q, cfg.H};
    spec.check();
    MetricReport report;
    if (cfg.self_check) {
        // scores every reference against itself; exercises the report path only
        for (const auto& im : load_images(list_pngs(cfg.in))) {
            const ImageBuffer ref = im.image.bit_depth > spec.H ? quantize(im.image, spec.H) : im.image;
            report.rows.push_back({im.name, psnr(ref, ref), ssim(ref, ref), 0.0, {}});
        }
        report.finalize();
    } else {
        report = evaluate(make_expander(cfg), cfg.in, spec, cfg.threads);
    }
    if (!cfg.out.empty()) {
        std::ofstream os(cfg.out);
        if (!os) throw std::runtime_error("cannot write report " + cfg.out.string());
        report.write_csv(os);
    } else {
        report.write_csv(out);
    }
    report.write_summary(out);
    return 0;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
    if (!cfg.q) throw ConfigError("bench needs --q");
    const BitDepthSpec spec{*cfg.q, cfg.H};
    spec.check();
    std::vector<std::string> warnings;
    auto refs = load_images(inputs_of(cfg.in), &warnings);
    if (refs.empty()) throw ArgumentError("no readable images in " + cfg.in.string());
    std::vector<NamedImage> lbd;
    for (auto& r : refs) lbd.push_back({r.name, quantize(r.image.bit_depth > spec.H ? quantize(r.image, spec.H) : r.image, spec.q)});
    const BenchReport report = bench(make_expander(cfg), lbd, spec, cfg.bench_repeats);
    if (!cfg.out.empty()) {
        std::ofstream os(cfg.out);
        if (!os) throw std::runtime_error("cannot write report " + cfg.out.string());
        report.write(os);
    }
    report.write(out);
    return 0;
}

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        cfg.validate();
        set_num_threads(cfg.threads);
        if (cfg.command == "quantize") return cmd_quantize(cfg, out);
        if (cfg.command == "expand") return cmd_expand(cfg, out);
        if (cfg.command == "train") return cmd_train(cfg, out);
        if (cfg.command == "eval") return cmd_eval(cfg, out);
        if (cfg.command == "bench") return cmd_bench(cfg, out);
        err << "error: unknown command '" << cfg.command << "'\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace bitexpand
