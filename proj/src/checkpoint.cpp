#include "bitexpand/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include "bitexpand/errors.hpp"

namespace bitexpand {

namespace {

constexpr std::string_view kMagic = "BITNET01\n";

struct Entry {
    std::string name;
    std::string shape;
    std::span<const float> values;
};

std::string shape_string(const Shape& s) {
    return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

std::string join_widths(const std::vector<int>& w) {
    std::string out;
    for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
    return out;
}

void append_le(std::string& out, float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

float read_le(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
    return std::bit_cast<float>(bits);
}

std::vector<Entry> manifest_entries(const BitNetModel& model, const TrainState* train) {
    std::vector<Entry> entries;
    for (const auto& l : model.layers()) {
        entries.push_back({l.name + ".weight", shape_string(l.params.weight.shape()), l.params.weight.data()});
        entries.push_back({l.name + ".bias", std::to_string(l.params.bias.size()), l.params.bias});
    }
    if (train && !train->adam.m.empty()) {
        const std::size_t count = entries.size();
        for (std::size_t i = 0; i < count; ++i) {
            entries.push_back({"adam.m." + entries[i].name, entries[i].shape, train->adam.m[i]});
        }
        for (std::size_t i = 0; i < count; ++i) {
            entries.push_back({"adam.v." + entries[i].name, entries[i].shape, train->adam.v[i]});
        }
    }
    return entries;
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
    throw LoadError("checkpoint " + path.string() + ": " + why);
}

int to_int(const std::filesystem::path& path, const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long r = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<int>(r);
    } catch (const std::exception&) {
        fail(path, "bad integer for " + key + ": '" + v + "'");
    }
}

}  // namespace

void save_checkpoint(const BitNetModel& model, const std::filesystem::path& path, const TrainState* train) {
    const BitNetConfig& c = model.config();
    std::ostringstream header;
    header << kMagic;
    header << "format_version=" << kCheckpointVersion << '\n';
    header << "config.variant=" << to_string(c.variant) << '\n';
    header << "config.num_stages=" << c.num_stages << '\n';
    header << "config.widths=" << join_widths(c.widths) << '\n';
    header << "config.r_d=" << c.r_d << '\n';
    header << "config.r_u=" << c.r_u << '\n';
    header << "config.head_width=" << c.head_width << '\n';
    header << "config.use_bit_info=" << (c.use_bit_info ? 1 : 0) << '\n';
    header << "config.use_msfi=" << (c.use_msfi ? 1 : 0) << '\n';
    header << "config.msfi_disconnect_from_smallest=" << c.msfi_disconnect_from_smallest << '\n';
    if (train) {
        header << "train.step=" << train->step << '\n';
        header << "train.epoch=" << train->epoch << '\n';
        header << "train.adam_t=" << train->adam.t << '\n';
        header << "train.rng=" << std::hex;
        for (std::size_t i = 0; i < train->rng.size(); ++i) header << (i ? "," : "") << train->rng[i];
        header << std::dec << '\n';
    }
    std::string payload;
    for (const auto& e : manifest_entries(model, train)) {
        const std::size_t offset = payload.size();
        for (float v : e.values) append_le(payload, v);
        header << "param." << e.name << '=' << e.shape << ';' << offset << ';' << payload.size() - offset << '\n';
    }
    header << '\n';

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const std::string h = header.str();
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint_full(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(path, "cannot open file");
    const std::string blob((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (blob.compare(0, kMagic.size(), kMagic) != 0) fail(path, "missing BITNET01 magic");
    const std::size_t header_end = blob.find("\n\n", kMagic.size() - 1);
    if (header_end == std::string::npos) fail(path, "header is truncated");

    std::map<std::string, std::string> kv;
    std::vector<std::string> param_order;
    std::istringstream lines(blob.substr(kMagic.size(), header_end + 1 - kMagic.size()));
    for (std::string line; std::getline(lines, line);) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(path, "malformed header line '" + line + "'");
        const std::string key = line.substr(0, eq);
        kv[key] = line.substr(eq + 1);
        if (key.rfind("param.", 0) == 0) param_order.push_back(key.substr(6));
    }
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) fail(path, "missing header key " + key);
        return it->second;
    };

    if (const int version = to_int(path, "format_version", get("format_version")); version != kCheckpointVersion) {
        fail(path, "unsupported format version " + std::to_string(version) + " (expected " +
                       std::to_string(kCheckpointVersion) + ")");
    }
    BitNetConfig config;
    try {
        config.variant = parse_variant(get("config.variant"));
    } catch (const ConfigError& e) {
        fail(path, e.what());
    }
    config.num_stages = to_int(path, "config.num_stages", get("config.num_stages"));
    config.widths.clear();
    {
        std::istringstream ws(get("config.widths"));
        for (std::string tok; std::getline(ws, tok, ',');) config.widths.push_back(to_int(path, "config.widths", tok));
    }
    config.r_d = to_int(path, "config.r_d", get("config.r_d"));
    config.r_u = to_int(path, "config.r_u", get("config.r_u"));
    config.head_width = to_int(path, "config.head_width", get("config.head_width"));
    config.use_bit_info = to_int(path, "config.use_bit_info", get("config.use_bit_info")) != 0;
    config.use_msfi = to_int(path, "config.use_msfi", get("config.use_msfi")) != 0;
    config.msfi_disconnect_from_smallest =
        to_int(path, "config.msfi_disconnect_from_smallest", get("config.msfi_disconnect_from_smallest"));

    LoadedCheckpoint out{BitNetModel{}, std::nullopt};
    try {
        out.model = make_model_skeleton(config);
    } catch (const ConfigError& e) {
        fail(path, std::string("invalid config: ") + e.what());
    }

    const auto* payload = reinterpret_cast<const unsigned char*>(blob.data()) + header_end + 2;
    const std::size_t payload_size = blob.size() - (header_end + 2);
    auto read_into = [&](const std::string& name, const std::string& expected_shape, std::span<float> dst) {
        const auto it = kv.find("param." + name);
        if (it == kv.end()) fail(path, "manifest is missing parameter " + name);
        std::istringstream fields(it->second);
        std::string shape, off_s, len_s;
        if (!std::getline(fields, shape, ';') || !std::getline(fields, off_s, ';') || !std::getline(fields, len_s)) {
            fail(path, "corrupt manifest entry for " + name);
        }
        if (shape != expected_shape) {
            fail(path, "parameter " + name + " has shape " + shape + ", model expects " + expected_shape);
        }
        std::size_t offset = 0, length = 0;
        try {
            offset = std::stoull(off_s);
            length = std::stoull(len_s);
        } catch (const std::exception&) {
            fail(path, "corrupt offset/length for " + name);
        }
        if (length != dst.size() * 4) fail(path, "parameter " + name + " byte length disagrees with its shape");
        if (offset > payload_size || length > payload_size - offset) {
            fail(path, "payload truncated while reading " + name);
        }
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = read_le(payload + offset + 4 * i);
    };

    std::vector<std::string> expected_names;
    std::vector<std::string> expected_shapes;
    for (const auto& l : out.model.layers()) {
        expected_names.push_back(l.name + ".weight");
        expected_shapes.push_back(shape_string(l.params.weight.shape()));
        expected_names.push_back(l.name + ".bias");
        expected_shapes.push_back(std::to_string(l.params.bias.size()));
    }
    auto views = out.model.parameter_views();
    for (std::size_t i = 0; i < views.size(); ++i) read_into(expected_names[i], expected_shapes[i], views[i]);

    if (kv.count("train.step")) {
        TrainState ts;
        ts.step = to_int(path, "train.step", get("train.step"));
        ts.epoch = to_int(path, "train.epoch", get("train.epoch"));
        ts.adam.t = to_int(path, "train.adam_t", get("train.adam_t"));
        std::istringstream rs(get("train.rng"));
        std::size_t k = 0;
        for (std::string tok; std::getline(rs, tok, ',') && k < ts.rng.size(); ++k) {
            try {
                ts.rng[k] = std::stoull(tok, nullptr, 16);
            } catch (const std::exception&) {
                fail(path, "corrupt train.rng");
            }
        }
        if (k != ts.rng.size()) fail(path, "train.rng must have 4 words");
        if (kv.count("param.adam.m." + expected_names.front())) {
            for (std::size_t i = 0; i < views.size(); ++i) {
                ts.adam.m.emplace_back(views[i].size());
                ts.adam.v.emplace_back(views[i].size());
                read_into("adam.m." + expected_names[i], expected_shapes[i], ts.adam.m.back());
                read_into("adam.v." + expected_names[i], expected_shapes[i], ts.adam.v.back());
            }
        }
        out.train = std::move(ts);
    }
    for (const auto& name : param_order) {
        const std::string base = name.rfind("adam.", 0) == 0 ? name.substr(7) : name;
        if (std::find(expected_names.begin(), expected_names.end(), base) == expected_names.end()) {
            fail(path, "manifest names unknown parameter " + name);
        }
    }
    return out;
}

BitNetModel load_checkpoint(const std::filesystem::path& path) { return load_checkpoint_full(path).model; }

}  // namespace bitexpand
