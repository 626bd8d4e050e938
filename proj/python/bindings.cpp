#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "bitexpand/checkpoint.hpp"
#include "bitexpand/classical.hpp"
#include "bitexpand/errors.hpp"
#include "bitexpand/inference.hpp"
#include "bitexpand/metrics.hpp"
#include "bitexpand/pipeline.hpp"
#include "bitexpand/png_io.hpp"
#include "bitexpand/trainer.hpp"

namespace py = pybind11;
using namespace bitexpand;

namespace {

using U16Array = py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

// (h, w) or (h, w, c) uint16 array -> image with the given bit-depth.
ImageBuffer to_image(const U16Array& a, int bit_depth) {
    if (a.ndim() != 2 && a.ndim() != 3) throw ArgumentError("image array must have shape (h, w) or (h, w, c)");
    const auto h = static_cast<std::size_t>(a.shape(0)), w = static_cast<std::size_t>(a.shape(1));
    const std::size_t c = a.ndim() == 3 ? static_cast<std::size_t>(a.shape(2)) : 1;
    ImageBuffer img(w, h, c, bit_depth);
    std::memcpy(img.pixels.data(), a.data(), img.pixels.size() * sizeof(std::uint16_t));
    validate(img);
    return img;
}

U16Array to_array(const ImageBuffer& img) {
    std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(img.height), static_cast<py::ssize_t>(img.width)};
    if (img.channels != 1) shape.push_back(static_cast<py::ssize_t>(img.channels));
    U16Array out(shape);
    std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size() * sizeof(std::uint16_t));
    return out;
}

Tensor to_tensor4(const F32Array& a) {
    if (a.ndim() != 4) throw ArgumentError("tensor array must have shape (n, c, h, w)");
    Tensor t({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
              static_cast<std::size_t>(a.shape(2)), static_cast<std::size_t>(a.shape(3))});
    std::memcpy(t.data().data(), a.data(), t.numel() * sizeof(float));
    return t;
}

F32Array from_tensor4(const Tensor& t) {
    F32Array out({t.n(), t.c(), t.h(), t.w()});
    std::memcpy(out.mutable_data(), t.data().data(), t.numel() * sizeof(float));
    return out;
}

}  // namespace

PYBIND11_MODULE(_bitexpand, m) {
    m.doc() = "Bit-depth expansion: classical expanders, BitNet inference and training, PSNR/SSIM.";

    py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<LoadError>(m, "LoadError", PyExc_IOError);
    py::register_exception<ComputationError>(m, "ComputationError", PyExc_ArithmeticError);

    m.def(
        "quantize", [](const U16Array& img, int bit_depth, int q) { return to_array(quantize(to_image(img, bit_depth), q)); },
        py::arg("image"), py::arg("bit_depth"), py::arg("q"), "Keep the top q bits of a bit_depth-bit image.");
    m.def(
        "expand",
        [](const U16Array& img, const std::string& method, int q, int H) {
            return to_array(expand(parse_classical(method), to_image(img, q), BitDepthSpec{q, H}));
        },
        py::arg("image"), py::arg("method"), py::arg("q"), py::arg("H"), "Classical expansion: 'zp', 'mig' or 'br'.");
    m.def(
        "psnr", [](const U16Array& a, const U16Array& b, int bits) { return psnr(to_image(a, bits), to_image(b, bits)); },
        py::arg("a"), py::arg("b"), py::arg("bit_depth"));
    m.def(
        "ssim", [](const U16Array& a, const U16Array& b, int bits) { return ssim(to_image(a, bits), to_image(b, bits)); },
        py::arg("a"), py::arg("b"), py::arg("bit_depth"));
    m.def(
        "synthetic_image",
        [](std::size_t w, std::size_t h, std::size_t c, int bits, std::uint64_t seed) {
            return to_array(synthetic_image(w, h, c, bits, seed));
        },
        py::arg("width"), py::arg("height"), py::arg("channels") = 3, py::arg("bit_depth") = 16, py::arg("seed") = 10000);
    m.def(
        "read_png",
        [](const std::filesystem::path& p) {
            const auto r = read_png(p);
            return py::make_tuple(to_array(r.image), r.image.bit_depth);
        },
        py::arg("path"), "Returns (array, bit_depth).");
    m.def(
        "write_png",
        [](const std::filesystem::path& p, const U16Array& img, int bits) {
            write_png(p, to_image(img, bits), storage_bits_for(bits));
        },
        py::arg("path"), py::arg("image"), py::arg("bit_depth"));

    py::class_<BitNetConfig>(m, "BitNetConfig")
        .def(py::init<>())
        .def_property(
            "variant", [](const BitNetConfig& c) { return to_string(c.variant); },
            [](BitNetConfig& c, const std::string& v) { c.variant = parse_variant(v); })
        .def_readwrite("num_stages", &BitNetConfig::num_stages)
        .def_readwrite("widths", &BitNetConfig::widths)
        .def_readwrite("r_d", &BitNetConfig::r_d)
        .def_readwrite("r_u", &BitNetConfig::r_u)
        .def_readwrite("head_width", &BitNetConfig::head_width)
        .def_readwrite("use_bit_info", &BitNetConfig::use_bit_info)
        .def_readwrite("use_msfi", &BitNetConfig::use_msfi)
        .def_readwrite("msfi_disconnect_from_smallest", &BitNetConfig::msfi_disconnect_from_smallest)
        .def("validate", &BitNetConfig::validate)
        .def("__eq__", [](const BitNetConfig& a, const BitNetConfig& b) { return a == b; });

    py::class_<BitNetModel, std::shared_ptr<BitNetModel>>(m, "BitNetModel")
        .def_static(
            "build", [](const BitNetConfig& c, std::uint64_t seed) { return std::make_shared<BitNetModel>(BitNetModel::build(c, seed)); },
            py::arg("config"), py::arg("seed") = 10000)
        .def_static(
            "load", [](const std::filesystem::path& p) { return std::make_shared<BitNetModel>(load_checkpoint(p)); },
            py::arg("path"))
        .def("save", [](const BitNetModel& mdl, const std::filesystem::path& p) { save_checkpoint(mdl, p); }, py::arg("path"))
        .def_property_readonly("config", &BitNetModel::config)
        .def_property_readonly("parameter_count", &BitNetModel::parameter_count)
        .def_property_readonly("layer_names", [](const BitNetModel& mdl) {
            std::vector<std::string> names;
            for (const auto& l : mdl.layers()) names.push_back(l.name);
            return names;
        })
        .def(
            "forward",
            [](const BitNetModel& mdl, const F32Array& x) {
                const Tensor t = to_tensor4(x);
                Tensor y;
                {
                    py::gil_scoped_release release;
                    y = mdl.forward(t);
                }
                return from_tensor4(y);
            },
            py::arg("x"), "Raw forward pass on an (n, c, h, w) float32 array.")
        .def(
            "expand",
            [](const BitNetModel& mdl, const U16Array& img, int q, int H) {
                const ImageBuffer lbd = to_image(img, q);
                ImageBuffer out;
                {
                    py::gil_scoped_release release;
                    out = bitnet_expand(mdl, lbd, BitDepthSpec{q, H});
                }
                return to_array(out);
            },
            py::arg("image"), py::arg("q"), py::arg("H"));

    m.def(
        "train",
        [](const std::vector<U16Array>& images, int bit_depth, const BitNetConfig& config, int epochs, double lr,
           int target_bits, int q_min, int q_max, std::size_t patch_size, std::uint64_t seed) {
            TrainOptions opt;
            opt.model = config;
            opt.epochs = epochs;
            opt.lr = lr;
            opt.target_bits = target_bits;
            opt.augment.q_min = q_min;
            opt.augment.q_max = q_max;
            opt.augment.patch_size = patch_size;
            opt.augment.seed = seed;
            opt.seed = seed;
            std::vector<NamedImage> named;
            for (std::size_t i = 0; i < images.size(); ++i) named.push_back({std::to_string(i), to_image(images[i], bit_depth)});
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(opt, std::move(named));
            }
            std::vector<double> losses;
            for (const auto& rec : r.log) losses.push_back(rec.loss);
            return py::make_tuple(std::make_shared<BitNetModel>(std::move(r.model)), losses);
        },
        py::arg("images"), py::arg("bit_depth"), py::arg("config"), py::arg("epochs") = 100, py::arg("lr") = 1e-4,
        py::arg("target_bits") = 8, py::arg("q_min") = 3, py::arg("q_max") = 6, py::arg("patch_size") = 128,
        py::arg("seed") = 10000, "Batch-size-1 Adam training. Returns (model, per-step losses).");
}
