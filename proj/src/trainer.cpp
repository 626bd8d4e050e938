#include "bitexpand/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "bitexpand/errors.hpp"
#include "bitexpand/ops.hpp"

namespace bitexpand {

namespace {

// Chan models see each colour plane as its own batch entry.
SamplePair to_channel_batch(const SamplePair& pair, bool with_bit_info) {
    const std::size_t colours = pair.target.c();
    const std::size_t h = pair.target.h(), w = pair.target.w();
    const std::size_t in_c = with_bit_info ? 2 : 1;
    SamplePair out;
    out.q = pair.q;
    out.input = Tensor({colours, in_c, h, w});
    out.target = Tensor({colours, 1, h, w});
    const std::size_t plane = h * w;
    for (std::size_t c = 0; c < colours; ++c) {
        std::copy_n(pair.input.plane(0, c), plane, out.input.plane(c, 0));
        if (with_bit_info) std::copy_n(pair.input.plane(0, colours), plane, out.input.plane(c, 1));
        std::copy_n(pair.target.plane(0, c), plane, out.target.plane(c, 0));
    }
    return out;
}

std::string format_record(const LossRecord& r) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%lld,%d,%.9e,%.6e", static_cast<long long>(r.step), r.epoch, r.loss, r.lr);
    return buf;
}

}  // namespace

double learning_rate_for_epoch(const TrainOptions& opt, int epoch) {
    const int drop = static_cast<int>(std::floor(opt.lr_drop_at * opt.epochs));
    return epoch < drop ? opt.lr : opt.lr * opt.lr_drop_factor;
}

double train_step(BitNetModel& model, AdamState& adam, const SamplePair& pair, double lr) {
    const bool chan = model.config().variant == Variant::Chan;
    const SamplePair batch = chan ? to_channel_batch(pair, model.config().use_bit_info) : SamplePair{};
    const SamplePair& p = chan ? batch : pair;

    BitNetModel::Trace trace;
    const Tensor pred = model.forward(p.input, trace);
    const LossResult loss = l1_loss(pred, p.target);
    const ModelGrads grads = model.backward(trace, loss.grad);

    std::vector<std::span<const float>> grad_views;
    for (std::size_t i = 0; i < grads.weight.size(); ++i) {
        grad_views.emplace_back(grads.weight[i].data());
        grad_views.emplace_back(grads.bias[i]);
    }
    const auto params = model.parameter_views();
    adam_step(params, grad_views, adam, lr);
    return loss.loss;
}

TrainResult train(const TrainOptions& opt, std::vector<NamedImage> images,
                  const std::function<void(const LossRecord&)>& on_step) {
    if (opt.epochs < 1) throw ConfigError("epochs must be positive");
    if (!(opt.lr > 0.0)) throw ConfigError("learning rate must be positive");
    for (const auto& im : images) {
        if (opt.model.variant == Variant::Rgb && im.image.channels != 3) {
            throw ArgumentError("rgb model cannot train on single-channel image " + im.name);
        }
    }

    TrainResult result;
    Rng rng(opt.augment.seed);
    if (!opt.resume.empty()) {
        LoadedCheckpoint ck = load_checkpoint_full(opt.resume);
        if (!ck.train) throw LoadError("checkpoint " + opt.resume.string() + " has no training state to resume");
        if (!(ck.model.config() == opt.model)) {
            throw ConfigError("resume checkpoint was trained with a different model configuration");
        }
        result.model = std::move(ck.model);
        result.state = std::move(*ck.train);
        rng.set_state(result.state.rng);
    } else {
        result.model = BitNetModel::build(opt.model, opt.seed);
    }

    SampleStream stream(std::move(images), opt.augment, opt.target_bits, opt.model.size_multiple(),
                        opt.model.use_bit_info);
    std::ofstream log;
    if (!opt.loss_log.empty()) {
        log.open(opt.loss_log, std::ios::app);
        if (!log) throw std::runtime_error("cannot open loss log " + opt.loss_log.string());
    }
    const int last_epoch = opt.stop_after_epochs > 0 ? std::min(opt.epochs, opt.stop_after_epochs) : opt.epochs;
    for (int epoch = result.state.epoch; epoch < last_epoch; ++epoch) {
        const double lr = learning_rate_for_epoch(opt, epoch);
        stream.begin_epoch(rng);
        while (auto pair = stream.next(rng)) {
            const double loss = train_step(result.model, result.state.adam, *pair, lr);
            LossRecord rec{++result.state.step, epoch, loss, lr};
            if (log) log << format_record(rec) << '\n';
            if (on_step) on_step(rec);
            result.log.push_back(rec);
        }
        if (log) log.flush();
        result.state.epoch = epoch + 1;
        result.state.rng = rng.state();
        if (!opt.checkpoint.empty()) {
            save_checkpoint(result.model, opt.checkpoint, &result.state);
            if (opt.keep_epoch_checkpoints) {
                auto copy = opt.checkpoint;
                copy += ".epoch" + std::to_string(epoch + 1);
                save_checkpoint(result.model, copy, &result.state);
            }
        }
    }
    result.warnings = stream.warnings();
    return result;
}

}  // namespace bitexpand
