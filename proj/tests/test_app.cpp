#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bitexpand/app.hpp"
#include "bitexpand/checkpoint.hpp"
#include "bitexpand/png_io.hpp"
#include "bitexpand/trainer.hpp"
#include "doctest.h"
#include "temp_dir.hpp"

using namespace bitexpand;

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream is(p);
    std::vector<std::string> lines;
    for (std::string l; std::getline(is, l);) lines.push_back(l);
    return lines;
}

RunConfig small_train_config(const TempDir& dir) {
    RunConfig cfg;
    apply_config_text(cfg, "command = train\n"
                           "num_stages = 2\n"
                           "widths = 4,8\n"
                           "patch_size = 32\n"
                           "lr = 1e-3\n"
                           "epochs = 2\n");
    cfg.in = dir / "corpus";
    cfg.checkpoint = dir / "model.bitnet";
    return cfg;
}

void write_corpus(const std::filesystem::path& dir, int count, std::size_t size) {
    std::filesystem::create_directories(dir);
    for (int i = 0; i < count; ++i) {
        write_png(dir / ("img" + std::to_string(i) + ".png"), synthetic_image(size, size, 3, 16, 10000 + i), 16);
    }
}

int cli(const std::string& args) {
    const std::string cmd = std::string(BITEXPAND_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config text parsing") {
    RunConfig cfg;
    apply_config_text(cfg, "# comment line\n"
                           "method = mig   # trailing comment\n"
                           "q=4\n"
                           "H = 12\n"
                           "\n"
                           "widths = 8, 16\n"
                           "num_stages = 2\n"
                           "use_msfi = off\n"
                           "seed = 42\n");
    CHECK(cfg.method == "mig");
    CHECK(cfg.q == 4);
    CHECK(cfg.H == 12);
    CHECK(cfg.model.widths == std::vector<int>{8, 16});
    CHECK_FALSE(cfg.model.use_msfi);
    CHECK(cfg.seed == 42);
    CHECK(cfg.augment.seed == 42);

    apply_setting(cfg, "method", "bitnet-chan");
    CHECK(cfg.model.variant == Variant::Chan);
    CHECK_THROWS_AS(apply_setting(cfg, "nonsense", "1"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "epochs", "ten"), ConfigError);
    CHECK_THROWS_AS(apply_config_text(cfg, "no equals sign\n"), ConfigError);
}

TEST_CASE("config validation") {
    RunConfig cfg;
    cfg.command = "expand";
    cfg.method = "bitnet";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.checkpoint = "x.bitnet";
    CHECK_NOTHROW(cfg.validate());
    cfg.q = 8;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.method = "lanczos";
    cfg.q = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    RunConfig quant;
    quant.command = "quantize";
    CHECK_THROWS_AS(quant.validate(), ConfigError);
}

TEST_CASE("threads_from_env") {
    ::setenv("BITEXPAND_THREADS", "3", 1);
    CHECK(threads_from_env(1) == 3);
    ::setenv("BITEXPAND_THREADS", "zero", 1);
    CHECK(threads_from_env(2) == 2);
    ::unsetenv("BITEXPAND_THREADS");
    CHECK(threads_from_env(1) == 1);
}

TEST_CASE("quantize and expand commands") {
    TempDir dir("app");
    write_png(dir / "hbd.png", synthetic_image(20, 12, 3, 16, 3), 16);

    RunConfig q;
    q.command = "quantize";
    q.in = dir / "hbd.png";
    q.out = dir / "lbd.png";
    q.q = 3;
    std::ostringstream out, err;
    REQUIRE(run_command(q, out, err) == 0);
    const auto lbd = read_png(q.out).image;
    for (auto p : lbd.pixels) CHECK(p <= 7);
    CHECK(read_lines(sidecar_path(q.out)) == std::vector<std::string>{"q=3"});

    RunConfig e;
    e.command = "expand";
    e.in = q.out;
    e.out = dir / "zp.png";
    e.method = "zp";
    REQUIRE(run_command(e, out, err) == 0);  // q comes from the sidecar
    const auto zp = read_png(e.out).image;
    CHECK(zp.width == 20);
    for (std::size_t i = 0; i < zp.pixels.size(); ++i) CHECK(zp.pixels[i] == lbd.pixels[i] << 5);

    // requantising the ZP output gives back the LBD codes
    RunConfig q2 = q;
    q2.in = e.out;
    q2.out = dir / "lbd2.png";
    REQUIRE(run_command(q2, out, err) == 0);
    CHECK(read_png(q2.out).image.pixels == lbd.pixels);

    write_png(dir / "seven.png", ImageBuffer(4, 4, 3, 3, 7), 8);
    e.in = dir / "seven.png";
    e.q = 3;
    REQUIRE(run_command(e, out, err) == 0);
    for (auto p : read_png(e.out).image.pixels) CHECK(p == 224);

    write_png(dir / "ten.png", ImageBuffer(4, 4, 3, 4, 0xA), 8);
    e.in = dir / "ten.png";
    e.q = 4;
    e.method = "br";
    REQUIRE(run_command(e, out, err) == 0);
    for (auto p : read_png(e.out).image.pixels) CHECK(p == 170);

    RunConfig missing = q;
    missing.in = dir / "absent.png";
    std::ostringstream err2;
    CHECK(run_command(missing, out, err2) != 0);
    CHECK(err2.str().find("absent.png") != std::string::npos);

    e.in = dir / "seven.png";
    e.q.reset();
    CHECK(run_command(e, out, err) != 0);  // no --q and no sidecar
}

TEST_CASE("train command writes checkpoints and a loss log, expand uses them") {
    TempDir dir("train");
    write_corpus(dir / "corpus", 4, 48);
    RunConfig cfg = small_train_config(dir);
    std::ostringstream out, err;
    REQUIRE(run_command(cfg, out, err) == 0);
    const auto log = read_lines(dir / "model.bitnet.log");
    CHECK(log.size() == 4 * 2);
    CHECK(log.front().rfind("1,0,", 0) == 0);
    const auto model = load_checkpoint(cfg.checkpoint);
    CHECK(model.config().widths == std::vector<int>{4, 8});

    RunConfig e;
    e.command = "expand";
    e.method = "bitnet";
    e.checkpoint = cfg.checkpoint;
    write_png(dir / "odd.png", quantize(synthetic_image(30, 21, 3, 8, 77), 4), 8);
    e.in = dir / "odd.png";
    e.out = dir / "odd_out.png";
    e.q = 4;
    REQUIRE(run_command(e, out, err) == 0);
    const auto hbd = read_png(e.out).image;
    CHECK(hbd.width == 30);
    CHECK(hbd.height == 21);
    CHECK(hbd.channels == 3);

    e.method = "bitnet-chan";
    CHECK(run_command(e, out, err) != 0);  // variant mismatch

    RunConfig bad = cfg;
    bad.checkpoint = dir / "no_such_dir" / "m.bitnet";
    CHECK(run_command(bad, out, err) != 0);
    RunConfig empty = cfg;
    std::filesystem::create_directories(dir / "empty");
    empty.in = dir / "empty";
    CHECK(run_command(empty, out, err) != 0);
}

TEST_CASE("short training decreases the smoothed loss") {
    std::vector<NamedImage> images;
    for (int i = 0; i < 8; ++i) images.push_back({"r" + std::to_string(i), synthetic_image(48, 48, 3, 16, 500 + i)});
    TrainOptions opt;
    opt.model.num_stages = 2;
    opt.model.widths = {4, 8};
    opt.augment.patch_size = 32;
    opt.epochs = 25;
    opt.lr = 1e-3;
    const auto result = train(opt, images);
    REQUIRE(result.log.size() == 200);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 10; ++i) {
        first += result.log[i].loss / 10;
        last += result.log[190 + i].loss / 10;
    }
    CAPTURE(first);
    CAPTURE(last);
    CHECK(last < first);
    CHECK(result.log.back().lr == doctest::Approx(1e-4));
    CHECK(learning_rate_for_epoch(opt, 17) == doctest::Approx(1e-3));
    CHECK(learning_rate_for_epoch(opt, 18) == doctest::Approx(1e-4));
}

TEST_CASE("eval and bench commands") {
    TempDir dir("eval");
    write_corpus(dir / "corpus", 3, 40);
    RunConfig cfg;
    cfg.command = "eval";
    cfg.in = dir / "corpus";
    cfg.method = "mig";
    cfg.q = 4;
    std::ostringstream out, err;
    REQUIRE(run_command(cfg, out, err) == 0);
    CHECK(out.str().find("MEAN") != std::string::npos);

    cfg.self_check = true;
    cfg.out = dir / "self.csv";
    std::ostringstream self;
    REQUIRE(run_command(cfg, self, err) == 0);
    const auto rows = read_lines(cfg.out);
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 1; i < 4; ++i) CHECK(rows[i].find("inf") != std::string::npos);

    RunConfig b;
    b.command = "bench";
    b.in = dir / "corpus";
    b.method = "zp";
    b.q = 4;
    b.bench_repeats = 3;
    std::ostringstream bench_out;
    REQUIRE(run_command(b, bench_out, err) == 0);
    std::istringstream lines(bench_out.str());
    std::vector<std::string> got;
    for (std::string l; std::getline(lines, l);) got.push_back(l);
    REQUIRE(got.size() == 5);  // header, three images, total
    CHECK(got.back().rfind("TOTAL,", 0) == 0);
}

TEST_CASE("command-line exit codes") {
    TempDir dir("cli");
    write_png(dir / "in.png", synthetic_image(16, 16, 3, 16, 1), 16);
    const std::string in = (dir / "in.png").string(), out = (dir / "out.png").string();
    CHECK(cli("") != 0);
    CHECK(cli("frobnicate") != 0);
    CHECK(cli("quantize --in " + in + " --out " + out + " --q 3") == 0);
    CHECK(cli("quantize --in " + (dir / "missing.png").string() + " --out " + out + " --q 3") == 1);
    CHECK(cli("expand --in " + out + " --out " + (dir / "x.png").string() + " --method mig") == 0);
    CHECK(cli("expand --in " + out + " --out " + (dir / "x.png").string() + " --method bitnet") == 2);
    CHECK(cli("expand --set bogus=1") == 2);

    std::ofstream(dir / "run.cfg") << "method = br\nq = 3\nH = 10\n";
    CHECK(cli("expand --config " + (dir / "run.cfg").string() + " --in " + out + " --out " +
              (dir / "y.png").string()) == 0);
    CHECK(read_png(dir / "y.png").image.pixels.front() > 255);  // 10-bit content stored in 16 bits
}
