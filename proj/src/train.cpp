#include "xray/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace xray {

namespace {
constexpr double kProbClip = 1e-12;

double clip_prob(double p) {
    return std::min(std::max(p, kProbClip), 1.0 - kProbClip);
}
}  // namespace

double bce_loss(double p, int y) {
    const double q = clip_prob(p);
    return -(y * std::log(q) + (1 - y) * std::log(1.0 - q));
}

double bce_grad(double p, int y) {
    const double q = clip_prob(p);
    return -(y / q - (1 - y) / (1.0 - q));
}

double bce_loss(const Tensor& p, const std::vector<int>& y) {
    if (p.size() != y.size()) {
        throw ShapeError("bce_loss: " + std::to_string(p.size()) + " probabilities vs " +
                         std::to_string(y.size()) + " labels");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += bce_loss(p[i], y[i]);
    return sum / static_cast<double>(y.size());
}

Tensor bce_grad_batch(const Tensor& p, const std::vector<int>& y) {
    if (p.size() != y.size()) {
        throw ShapeError("bce_grad_batch: " + std::to_string(p.size()) + " probabilities vs " +
                         std::to_string(y.size()) + " labels");
    }
    Tensor g(p.shape());
    const double inv_n = 1.0 / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = bce_grad(p[i], y[i]) * inv_n;
    return g;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(const std::vector<Tensor*>& params, AdamConfig cfg) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor* p : params) {
        m_.emplace_back(p->shape());
        v_.emplace_back(p->shape());
    }
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw ShapeError("adam step: parameter/gradient count changed since init");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = *grads[k];
        if (!p.same_shape(g) || !p.same_shape(m_[k])) {
            throw ShapeError("adam step: shape mismatch " + p.shape_str() + " vs " +
                             g.shape_str());
        }
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// metrics

double Metrics::accuracy() const {
    const long n = total();
    return n == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(n);
}

double Metrics::precision() const {
    return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double Metrics::recall() const {
    return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double Metrics::f_score() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------
// training loop

namespace {

Tensor stack_batch(const Dataset& set, const std::vector<std::size_t>& order, std::size_t begin,
                   std::size_t end) {
    const Tensor& first = set[order[begin]].input;
    Tensor batch({end - begin, first.dim(0), first.dim(1), first.dim(2)});
    const std::size_t stride = first.size();
    for (std::size_t b = begin; b < end; ++b) {
        const Tensor& t = set[order[b]].input;
        if (t.size() != stride) {
            throw ShapeError("dataset samples disagree in shape: " + t.shape_str());
        }
        std::copy(t.data(), t.data() + stride, batch.data() + (b - begin) * stride);
    }
    return batch;
}

// Prediction for one model output row; width 1 is a sigmoid probability
// against the threshold, width 2 is argmax over softmax logits.
int predict_row(const Tensor& out, std::size_t row, std::size_t width, double threshold) {
    if (width == 1) return out[row] >= threshold ? 1 : 0;
    if (width == 2) return out[row * 2 + 1] > out[row * 2 + 0] ? 1 : 0;
    throw ShapeError("unsupported model output width " + std::to_string(width));
}

}  // namespace

std::string epoch_csv_header() { return "epoch,train_loss,train_acc,test_acc"; }

std::string epoch_csv_line(const EpochStats& s) {
    char buf[128];
    if (s.has_test) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f", s.epoch, s.train_loss, s.train_acc,
                      s.test_acc);
    } else {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,", s.epoch, s.train_loss, s.train_acc);
    }
    return buf;
}

TrainLog train_model(Model& model, const Dataset& train_set, const Dataset& test_set,
                     const TrainConfig& cfg, Rng& rng, std::ostream* log_stream) {
    if (train_set.empty()) throw ValueError("train: empty dataset");
    for (const Sample& s : train_set) {
        if (s.label != 0 && s.label != 1) throw ValueError("train: labels must be 0 or 1");
    }
    if (cfg.epochs <= 0 || cfg.batch_size <= 0) {
        throw ValueError("train: epochs and batch_size must be positive");
    }

    Adam adam(model.param_tensors(), AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    if (log_stream) *log_stream << epoch_csv_header() << "\n";

    TrainLog log;
    const std::size_t n = train_set.size();
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        long correct = 0;
        for (std::size_t begin = 0; begin < n; begin += bs) {
            const std::size_t end = std::min(begin + bs, n);
            Tensor batch = stack_batch(train_set, order, begin, end);
            std::vector<int> labels;
            labels.reserve(end - begin);
            for (std::size_t b = begin; b < end; ++b) labels.push_back(train_set[order[b]].label);

            Tensor out = model.forward(batch, true, rng);
            const double loss = bce_loss(out, labels);
            if (!std::isfinite(loss)) {
                throw DivergedError(epoch, static_cast<int>(batches));
            }
            loss_sum += loss;
            ++batches;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                correct += predict_row(out, i, 1, cfg.threshold) == labels[i] ? 1 : 0;
            }

            model.backward(bce_grad_batch(out, labels));
            adam.step(model.param_tensors(), model.grad_tensors());
        }

        EpochStats stats{};
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(batches);
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(n);
        stats.has_test = !test_set.empty();
        stats.test_acc = stats.has_test ? evaluate(model, test_set, cfg.threshold).accuracy() : 0.0;
        log.epochs.push_back(stats);
        if (log_stream) *log_stream << epoch_csv_line(stats) << "\n";
    }
    return log;
}

Metrics evaluate(Model& model, const Dataset& dataset, double threshold) {
    if (dataset.empty()) throw ValueError("evaluate: empty dataset");
    const std::size_t width = model.output_width();
    Rng rng(0);  // never consumed in eval mode
    Metrics m;
    const std::size_t chunk = 64;
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t begin = 0; begin < dataset.size(); begin += chunk) {
        const std::size_t end = std::min(begin + chunk, dataset.size());
        Tensor batch = stack_batch(dataset, order, begin, end);
        Tensor out = model.forward(batch, false, rng);
        for (std::size_t i = 0; i < end - begin; ++i) {
            const int pred = predict_row(out, i, width, threshold);
            const int label = dataset[begin + i].label;
            if (pred == 1 && label == 1) ++m.tp;
            else if (pred == 1 && label == 0) ++m.fp;
            else if (pred == 0 && label == 0) ++m.tn;
            else ++m.fn;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// gradient checking

std::string GradCheckReport::summary() const {
    std::ostringstream os;
    for (const GradCheckEntry& e : entries) {
        os << e.param << ": max_rel_err=" << e.max_rel_err << " at index " << e.index
           << " (analytic=" << e.analytic << ", numeric=" << e.numeric << ")"
           << (e.max_rel_err <= tol ? "" : "  EXCEEDS TOLERANCE") << "\n";
    }
    return os.str();
}

GradCheckReport grad_check(Model& model, const Tensor& input, int label, double h, double tol) {
    Rng rng(0);
    Tensor batch = input.ndim() == 3
                       ? input.reshape({1, input.dim(0), input.dim(1), input.dim(2)})
                       : input;
    const std::vector<int> labels{label};

    auto loss_at = [&]() {
        Tensor out = model.forward(batch, false, rng);
        return bce_loss(out, labels);
    };

    // analytic pass
    Tensor out = model.forward(batch, false, rng);
    model.backward(bce_grad_batch(out, labels));

    auto params = model.named_params();
    auto grads = model.grad_tensors();

    GradCheckReport report;
    report.tol = tol;
    report.passed = true;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k].second;
        const Tensor& g = *grads[k];
        GradCheckEntry entry{params[k].first, 0.0, 0, 0.0, 0.0};
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + h;
            const double lp = loss_at();
            p[i] = saved - h;
            const double lm = loss_at();
            p[i] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = g[i];
            const double rel =
                std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
            if (rel >= entry.max_rel_err) {
                entry.max_rel_err = rel;
                entry.index = i;
                entry.analytic = analytic;
                entry.numeric = numeric;
            }
        }
        if (entry.max_rel_err > tol) report.passed = false;
        report.entries.push_back(entry);
    }
    return report;
}

}  // namespace xray
