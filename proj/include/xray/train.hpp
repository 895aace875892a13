#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "xray/model.hpp"
#include "xray/preprocess.hpp"

namespace xray {

struct Sample {
    Tensor input;  // [3, S, S]
    int label;     // 0 or 1
};

using Dataset = std::vector<Sample>;

/// Every knob a training run depends on; all of it round-trips through the
/// key=value config format and is echoed into checkpoints.
struct TrainConfig {
    std::string arch = "cnn";  // cnn | resnet
    int epochs = 120;
    int batch_size = 40;
    double learning_rate = 0.001;
    double dropout_rate = 0.4;
    PreprocessMode preprocess_mode = PreprocessMode::Raw;
    int image_size = 64;
    std::uint64_t seed = 42;
    double threshold = 0.5;
    PreprocessConfig preprocess;
};

// Binary cross-entropy. Probabilities are clipped to [1e-12, 1-1e-12] so the
// loss stays finite; gradients in the operating range are unaffected.
double bce_loss(double p, int y);
double bce_grad(double p, int y);
/// Mean over a batch; p is [N] or [N,1].
double bce_loss(const Tensor& p, const std::vector<int>& y);
Tensor bce_grad_batch(const Tensor& p, const std::vector<int>& y);

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment estimates are kept per parameter tensor, aligned with the order the
/// optimizer was initialized with.
class Adam {
public:
    Adam(const std::vector<Tensor*>& params, AdamConfig cfg);

    /// m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2; bias-corrected step.
    void step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads);

    long step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    long t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

struct Metrics {
    long tp = 0, fp = 0, tn = 0, fn = 0;

    long total() const { return tp + fp + tn + fn; }
    double accuracy() const;
    double precision() const;  // 0 when tp+fp == 0
    double recall() const;     // 0 when tp+fn == 0
    double f_score() const;    // 0 when precision+recall == 0
};

struct EpochStats {
    int epoch;  // 1-based
    double train_loss;
    double train_acc;
    double test_acc;  // meaningful only when has_test
    bool has_test;
};

struct TrainLog {
    std::vector<EpochStats> epochs;
};

std::string epoch_csv_header();
std::string epoch_csv_line(const EpochStats& s);

/// Runs the full loop: epoch-wise reshuffle from `rng`, batches of
/// cfg.batch_size (last partial batch kept), forward/backward, Adam update.
/// Throws DivergedError on a non-finite loss. If `log_stream` is given the
/// epoch CSV is emitted as training progresses.
TrainLog train_model(Model& model, const Dataset& train_set, const Dataset& test_set,
                     const TrainConfig& cfg, Rng& rng, std::ostream* log_stream = nullptr);

/// Confusion-matrix metrics at the given decision threshold (prediction is 1
/// iff p >= threshold). A 2-logit model is scored by softmax argmax instead.
Metrics evaluate(Model& model, const Dataset& dataset, double threshold = 0.5);

struct GradCheckEntry {
    std::string param;  // e.g. "conv1.kernels"
    double max_rel_err;
    std::size_t index;  // flat index of the worst entry
    double analytic;
    double numeric;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tol;
    bool passed;
    std::string summary() const;
};

/// Central finite differences over every parameter of the model against the
/// analytic backward, on bce(model(input), label). Dropout is inactive and
/// batch norm runs in eval mode (the model is evaluated with train=false).
GradCheckReport grad_check(Model& model, const Tensor& input, int label, double h = 1e-5,
                           double tol = 1e-4);

}  // namespace xray
