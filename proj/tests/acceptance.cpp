// Acceptance suite: one self-contained check per release criterion, a PASS or
// FAIL line each, nonzero exit when anything fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "xray/checkpoint.hpp"
#include "xray/cli.hpp"
#include "xray/datagen.hpp"
#include "xray/manifest.hpp"

using namespace xray;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& what, bool ok, const std::string& detail = "") {
    std::printf("%s  criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "xray_acceptance";
    return dir;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// max relative error of central differences vs the analytic gradient of
// S = dot(fwd(), g) w.r.t. param
double fd_max_rel(std::function<Tensor()> fwd, const Tensor& g, Tensor& param,
                  const Tensor& analytic, double h) {
    double worst = 0.0;
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double saved = param[i];
        param[i] = saved + h;
        const double sp = dot(fwd(), g);
        param[i] = saved - h;
        const double sm = dot(fwd(), g);
        param[i] = saved;
        const double numeric = (sp - sm) / (2.0 * h);
        const double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, rel);
    }
    return worst;
}

ArchParams check_arch() {
    // Full layer chains at grad-check width: every layer type present, few
    // enough parameters to sweep in seconds.
    ArchParams p;
    p.conv1_filters = 4;
    p.conv2_filters = 6;
    p.conv3_filters = 8;
    p.stem_filters = 6;
    p.late_filters = 8;
    p.dense_hidden = 10;
    return p;
}

// ---------------------------------------------------------------------------

void criterion_1_ablation_structure() {
    try {
        const fs::path dir = work_dir() / "c1";
        fs::remove_all(dir);
        SyntheticSpec spec;
        spec.n_images = 60;
        spec.image_size = 32;
        spec.seed = 13;
        generate(spec, dir.string());

        std::ofstream cfg((dir / "cfg.txt").string());
        cfg << "epochs = 10\nbatch_size = 8\nimage_size = 32\nseed = 13\n";
        cfg.close();

        cli::ExperimentArgs args;
        args.manifest = (dir / "manifest.csv").string();
        args.out_report = (dir / "report.csv").string();
        args.config_path = (dir / "cfg.txt").string();
        std::ostringstream out, err;
        const int rc = cli::cmd_experiment(args, out, err);

        std::istringstream report_csv(slurp(args.out_report));
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(report_csv, line))
            if (!line.empty()) lines.push_back(line);

        const char* names[5] = {"cnn_raw", "cnn_expanded", "cnn_contrast", "cnn_contrast_light",
                                "resnet_contrast_light"};
        bool ok = rc == 0 && lines.size() == 6;
        double worst_acc = 1.0;
        for (int i = 0; ok && i < 5; ++i) {
            const std::string& row = lines[static_cast<std::size_t>(i + 1)];
            ok = row.rfind(std::string(names[i]) + ",ok,", 0) == 0;
            if (ok) {
                const std::size_t a = row.find(",ok,") + 4;
                worst_acc = std::min(worst_acc, std::stod(row.substr(a)));
            }
        }
        ok = ok && worst_acc >= 0.5;

        std::printf("note: the published clinical-benchmark accuracies this pipeline targets "
                    "(63.74%%-78.73%%, F-score 45.79%%) are not reproduced here; they depend on "
                    "the original radiology dataset and full-scale training, both out of scope. "
                    "The harness reproduces the five-row ablation structure and property-checks "
                    "the implementation instead.\n");
        report(1, "five-row ablation structure reproduced, absolute numbers out of scope", ok,
               ok ? "5 rows in fixed order, all trained, min accuracy " +
                        std::to_string(worst_acc)
                  : "report malformed or a row failed");
    } catch (const std::exception& e) {
        report(1, "five-row ablation structure", false, e.what());
    }
}

void criterion_2_conv_oracle() {
    try {
        const auto t0 = std::chrono::steady_clock::now();
        Rng rng(2024);
        bool ok = true;
        double worst = 0.0;
        for (int round = 0; round < 100 && ok; ++round) {
            const std::size_t k_choices[3] = {1, 3, 4};
            const std::size_t k = k_choices[rng.next_below(3)];
            const std::size_t C = 1 + rng.next_below(3);
            const std::size_t O = 1 + rng.next_below(4);
            const std::size_t H = k + rng.next_below(13 - k);  // up to 12
            const std::size_t W = k + rng.next_below(13 - k);
            Tensor x = rand_uniform(rng, {C, H, W}, -1.0, 1.0);
            Tensor kernels = rand_uniform(rng, {O, C, k, k}, -1.0, 1.0);
            Tensor biases = rand_uniform(rng, {O}, -0.5, 0.5);

            Tensor fast = conv2d_forward(kernels, biases, x);
            // brute force: six nested loops, one output element at a time
            const std::size_t Ho = H - k + 1, Wo = W - k + 1;
            for (std::size_t o = 0; o < O && ok; ++o)
                for (std::size_t i = 0; i < Ho && ok; ++i)
                    for (std::size_t j = 0; j < Wo && ok; ++j) {
                        double sum = biases[o];
                        for (std::size_t c = 0; c < C; ++c)
                            for (std::size_t a = 0; a < k; ++a)
                                for (std::size_t b = 0; b < k; ++b)
                                    sum += kernels.at(o, c, a, b) * x.at(c, i + a, j + b);
                        const double diff = std::abs(fast.at(o, i, j) - sum);
                        worst = std::max(worst, diff);
                        if (diff >= 1e-12) ok = false;
                    }
        }
        const double dt = seconds_since(t0);
        ok = ok && dt < 5.0;
        char detail[128];
        std::snprintf(detail, sizeof(detail), "100 instances, max |diff| %.3g, %.2f s", worst, dt);
        report(2, "convolution equals the brute-force oracle within 1e-12", ok, detail);
    } catch (const std::exception& e) {
        report(2, "convolution oracle equivalence", false, e.what());
    }
}

void criterion_3_gradient_integrity() {
    try {
        const auto t0 = std::chrono::steady_clock::now();
        Rng rng(303);
        bool ok = true;
        std::string detail;

        auto require = [&](const std::string& name, double rel, double tol) {
            if (rel > tol) {
                ok = false;
                detail += name + " rel err " + std::to_string(rel) + " > " +
                          std::to_string(tol) + "; ";
            }
        };

        // every layer type, functional S = dot(out, g)
        {
            Tensor x = rand_uniform(rng, {2, 6, 6}, -1.0, 1.0);
            Tensor k = rand_uniform(rng, {3, 2, 3, 3}, -0.5, 0.5);
            Tensor b = rand_uniform(rng, {3}, -0.2, 0.2);
            Tensor g = rand_uniform(rng, {3, 4, 4}, -1.0, 1.0);
            ConvGrads grads = conv2d_backward(k, b, x, g);
            auto fwd = [&]() { return conv2d_forward(k, b, x); };
            require("conv.x", fd_max_rel(fwd, g, x, grads.grad_x, 1e-5), 1e-4);
            require("conv.k", fd_max_rel(fwd, g, k, grads.grad_kernels, 1e-5), 1e-4);
            require("conv.b", fd_max_rel(fwd, g, b, grads.grad_biases, 1e-5), 1e-4);
        }
        {
            Tensor x = rand_uniform(rng, {2, 4, 4}, -1.0, 1.0);
            Tensor g = rand_uniform(rng, {2, 2, 2}, -1.0, 1.0);
            PoolResult res = maxpool_forward(x);
            Tensor analytic = maxpool_backward(res.argmax, g, x.shape());
            require("maxpool.x",
                    fd_max_rel([&]() { return maxpool_forward(x).out; }, g, x, analytic, 1e-5),
                    1e-4);
        }
        for (Activation kind : {Activation::Relu, Activation::Tanh, Activation::Sigmoid}) {
            Tensor x = rand_uniform(rng, {24}, -2.0, 2.0);
            Tensor g = rand_uniform(rng, {24}, -1.0, 1.0);
            Tensor analytic = activation_grad(x, kind, g);
            require("activation.x",
                    fd_max_rel([&]() { return activation_apply(x, kind); }, g, x, analytic,
                               1e-5),
                    1e-4);
        }
        {
            Rng init(7);
            DenseLayer dense("d", 6, 4, Activation::Tanh, init);
            Tensor x = rand_uniform(rng, {3, 6}, -1.0, 1.0);
            Tensor g = rand_uniform(rng, {3, 4}, -1.0, 1.0);
            Rng unused(0);
            dense.forward(x, false, unused);
            Tensor gx = dense.backward(g);
            Tensor gw = dense.grad_weights;
            Tensor gb = dense.grad_bias;
            auto fwd = [&]() { return dense.forward(x, false, unused); };
            require("dense.x", fd_max_rel(fwd, g, x, gx, 1e-5), 1e-4);
            require("dense.w", fd_max_rel(fwd, g, dense.weights, gw, 1e-5), 1e-4);
            require("dense.b", fd_max_rel(fwd, g, dense.bias, gb, 1e-5), 1e-4);
        }
        {
            BatchNormLayer bn("bn", 3);
            Tensor x = rand_uniform(rng, {5, 3}, -2.0, 2.0);
            Tensor g = rand_uniform(rng, {5, 3}, -1.0, 1.0);
            Rng unused(0);
            bn.forward(x, true, unused);
            Tensor gx = bn.backward(g);
            Tensor gg = bn.grad_gamma;
            Tensor gb = bn.grad_beta;
            auto fwd = [&]() { return bn.forward(x, true, unused); };
            require("batchnorm.x", fd_max_rel(fwd, g, x, gx, 1e-5), 1e-3);
            require("batchnorm.gamma", fd_max_rel(fwd, g, bn.gamma, gg, 1e-5), 1e-3);
            require("batchnorm.beta", fd_max_rel(fwd, g, bn.beta, gb, 1e-5), 1e-3);
        }
        {
            Rng init(9);
            ResidualBlock block("res", 2, 3, 3, init);
            Tensor x = rand_uniform(rng, {2, 2, 7, 7}, -1.0, 1.0);
            Tensor g = rand_uniform(rng, {2, 3, 3, 3}, -1.0, 1.0);
            Rng unused(0);
            block.forward(x, true, unused);
            Tensor gx = block.backward(g);
            auto fwd = [&]() { return block.forward(x, true, unused); };
            require("residual.x", fd_max_rel(fwd, g, x, gx, 1e-5), 1e-3);
        }
        {
            Rng init(11);
            DropoutLayer drop("do", 0.4);
            Rng fixed(77);
            Tensor x = rand_uniform(rng, {30}, -1.0, 1.0);
            Tensor g = rand_uniform(rng, {30}, -1.0, 1.0);
            drop.forward(x, true, fixed);
            Tensor gx = drop.backward(g);
            // replay the same mask by reconstructing from outputs: mask is
            // piecewise constant, so FD against the cached-mask backward uses
            // the layer as a fixed linear map
            Tensor mask(x.shape());
            {
                Rng replay(77);
                DropoutResult r = dropout_forward(x, 0.4, true, replay);
                mask = r.mask;
            }
            auto fwd = [&]() {
                Tensor out(x.shape());
                for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask[i];
                return out;
            };
            require("dropout.x", fd_max_rel(fwd, g, x, gx, 1e-5), 1e-4);
        }

        // full models through the training loss
        const ArchParams p = check_arch();
        {
            Rng init(21);
            Model cnn = build_cnn(16, p, init);
            Rng data(22);
            Tensor input = rand_uniform(data, {3, 16, 16}, 0.0, 1.0);
            GradCheckReport r = grad_check(cnn, input, 1, 1e-5, 1e-4);
            if (!r.passed) {
                ok = false;
                detail += "cnn@16 grad_check failed; ";
            }
        }
        {
            // The pinned resnet chain (two pools between the stem and the k=4
            // tail conv) runs out of pixels below 26x26 input, so the full
            // resnet is checked at 28x28, the smallest even size that leaves
            // the tail conv a full window.
            Rng init(23);
            Model resnet = build_resnet(28, p, init);
            Rng data(24);
            Tensor input = rand_uniform(data, {3, 28, 28}, 0.0, 1.0);
            GradCheckReport r = grad_check(resnet, input, 0, 1e-5, 1e-4);
            if (!r.passed) {
                ok = false;
                detail += "resnet@28 grad_check failed; ";
            }
        }

        const double dt = seconds_since(t0);
        if (dt >= 60.0) {
            ok = false;
            detail += "runtime " + std::to_string(dt) + "s >= 60s; ";
        }
        char timing[64];
        std::snprintf(timing, sizeof(timing), "%.1f s (cnn at 16x16, resnet at 28x28)", dt);
        report(3, "finite differences match every backward pass", ok,
               ok ? timing : detail);
    } catch (const std::exception& e) {
        report(3, "gradient integrity", false, e.what());
    }
}

void criterion_4_preprocessing_goldens() {
    try {
        Image in(2, 2);
        const std::uint8_t px[12] = {100, 150, 200, 0, 5, 250, 40, 128, 33, 255, 7, 60};
        in.pixels.assign(px, px + 12);

        const std::uint8_t bright[12] = {160, 210, 255, 60, 65, 255, 100, 188, 93, 255, 67, 120};
        const std::uint8_t contrast[12] = {160, 235, 255, 10, 18, 255, 70, 202, 60, 255, 21, 100};
        const std::uint8_t expand[12] = {125, 188, 250, 0, 6, 255, 50, 160, 41, 255, 9, 75};

        const bool b_ok = adjust_brightness(in, 60.0).pixels ==
                          std::vector<std::uint8_t>(bright, bright + 12);
        const bool c_ok = adjust_contrast(in, 1.5, 10.0).pixels ==
                          std::vector<std::uint8_t>(contrast, contrast + 12);
        ChannelAverages avgs{160.0, 160.0, 160.0};
        const bool e_ok = expand_color_scheme(in, avgs, 128.0).pixels ==
                          std::vector<std::uint8_t>(expand, expand + 12);
        report(4, "hand-computed 2x2 goldens match byte-exactly", b_ok && c_ok && e_ok,
               std::string(b_ok ? "" : "brightness ") + (c_ok ? "" : "contrast ") +
                   (e_ok ? "" : "expansion"));
    } catch (const std::exception& e) {
        report(4, "preprocessing goldens", false, e.what());
    }
}

struct EndToEnd {
    fs::path dir;
    std::string train_manifest;
    std::string test_manifest;
};

EndToEnd make_e2e_corpus() {
    EndToEnd e;
    e.dir = work_dir() / "c5";
    fs::remove_all(e.dir);
    SyntheticSpec spec;
    spec.n_images = 500;
    spec.image_size = 32;
    spec.train_fraction = 0.8;  // 400 train / 100 test
    spec.seed = 7;
    GeneratedCorpus corpus = generate(spec, e.dir.string());
    if (corpus.train.size() != 400 || corpus.test.size() != 100) {
        throw ValueError("expected a 400/100 split, got " +
                         std::to_string(corpus.train.size()) + "/" +
                         std::to_string(corpus.test.size()));
    }
    e.train_manifest = (e.dir / "manifest_train.csv").string();
    e.test_manifest = (e.dir / "manifest_test.csv").string();
    return e;
}

void criterion_5_end_to_end(const EndToEnd& e2e) {
    for (const char* arch_name : {"cnn", "resnet"}) {
        const std::string arch = arch_name;
        try {
            const auto t0 = std::chrono::steady_clock::now();
            TrainConfig cfg;
            cfg.arch = arch;
            cfg.epochs = 30;
            cfg.batch_size = 40;
            cfg.learning_rate = 0.001;
            cfg.dropout_rate = 0.4;
            cfg.image_size = 32;
            cfg.seed = 7;

            Dataset train_set =
                load_dataset(e2e.train_manifest, cfg.preprocess_mode, cfg.preprocess,
                             cfg.image_size);
            Dataset test_set = load_dataset(e2e.test_manifest, cfg.preprocess_mode,
                                            cfg.preprocess, cfg.image_size);

            ArchParams p;
            p.dropout_rate = cfg.dropout_rate;
            Rng rng(cfg.seed);
            Model model = build_model(cfg.arch, cfg.image_size, p, rng);
            TrainLog log = train_model(model, train_set, test_set, cfg, rng);

            double best = 0.0;
            for (const EpochStats& s : log.epochs) best = std::max(best, s.test_acc);
            const double dt = seconds_since(t0);
            const bool ok = best >= 0.90 && dt < 300.0;
            char detail[160];
            std::snprintf(detail, sizeof(detail),
                          "%s: best test accuracy %.3f (final %.3f) over 30 epochs, %.1f s",
                          arch.c_str(), best, log.epochs.back().test_acc, dt);
            report(5, arch + " reaches 90% on the synthetic 400/100 corpus", ok, detail);
        } catch (const std::exception& e) {
            report(5, arch + " end-to-end learning", false, e.what());
        }
    }
}

void criterion_6_determinism(const EndToEnd& e2e) {
    try {
        const fs::path dir = work_dir() / "c6";
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::ofstream cfg((dir / "cfg.txt").string());
        cfg << "epochs = 3\nbatch_size = 20\nimage_size = 32\nseed = 99\n";
        cfg.close();

        auto run = [&](const std::string& tag) {
            cli::TrainArgs args;
            args.manifest = e2e.train_manifest;
            args.test_manifest = e2e.test_manifest;
            args.config_path = (dir / "cfg.txt").string();
            args.out_checkpoint = (dir / (tag + ".ck")).string();
            std::ostringstream out, err;
            const int rc = cli::cmd_train(args, out, err);
            if (rc != 0) throw ValueError("train exited " + std::to_string(rc) + ": " + err.str());
            return out.str();
        };
        const std::string log_a = run("a");
        const std::string log_b = run("b");
        const bool ok = log_a == log_b &&
                        slurp((dir / "a.ck").string()) == slurp((dir / "b.ck").string()) &&
                        !log_a.empty();
        report(6, "identical seed/config/manifest give byte-identical checkpoints and logs", ok);
    } catch (const std::exception& e) {
        report(6, "training determinism", false, e.what());
    }
}

void criterion_7_metrics_arithmetic() {
    try {
        Metrics m;
        m.tp = 5;
        m.fp = 3;
        m.fn = 2;
        m.tn = 10;
        char acc[16], f[16];
        std::snprintf(acc, sizeof(acc), "%.2f", m.accuracy() * 100.0);
        std::snprintf(f, sizeof(f), "%.2f", m.f_score() * 100.0);
        const bool ok = std::string(acc) == "75.00" && std::string(f) == "66.67";
        report(7, "confusion matrix (5,3,2,10) gives 75.00% accuracy, 66.67% F-score", ok,
               std::string(acc) + "% / " + std::string(f) + "%");
    } catch (const std::exception& e) {
        report(7, "metrics arithmetic", false, e.what());
    }
}

void criterion_8_adam_properties() {
    try {
        bool ok = true;
        Rng rng(808);
        Tensor w = rand_uniform(rng, {100}, -1.0, 1.0);
        Tensor w0 = w;
        Tensor g = rand_uniform(rng, {100}, -5.0, 5.0);
        AdamConfig cfg;
        cfg.lr = 0.001;
        Adam adam({&w}, cfg);
        adam.step({&w}, {&g});
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (std::abs(w[i] - w0[i]) > cfg.lr * (1.0 + 1e-6)) ok = false;
        }

        Tensor q({1}, {1.0});
        Tensor qg({1});
        AdamConfig qcfg;
        qcfg.lr = 0.1;
        Adam qadam({&q}, qcfg);
        for (int t = 0; t < 200; ++t) {
            qg[0] = 2.0 * q[0];
            qadam.step({&q}, {&qg});
        }
        const bool quad_ok = std::abs(q[0]) < 0.1;
        char detail[96];
        std::snprintf(detail, sizeof(detail), "first-step bound %s, |w| after 200 steps = %.4f",
                      ok ? "holds" : "violated", std::abs(q[0]));
        report(8, "Adam first-step bound and quadratic convergence", ok && quad_ok, detail);
    } catch (const std::exception& e) {
        report(8, "optimizer properties", false, e.what());
    }
}

void criterion_9_probability_contracts() {
    try {
        bool ok = true;
        std::string detail;
        Rng rng(909);

        for (int round = 0; round < 20; ++round) {
            Tensor z = rand_uniform(rng, {1 + rng.next_below(9)}, -5.0, 5.0);
            Tensor p = softmax(z);
            double sum = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) sum += p[i];
            if (std::abs(sum - 1.0) >= 1e-12) {
                ok = false;
                detail += "softmax sum; ";
            }
            Tensor shifted = elementwise(z, [](double v) { return v + 1000.0; });
            Tensor ps = softmax(shifted);
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (std::abs(p[i] - ps[i]) >= 1e-12) {
                    ok = false;
                    detail += "softmax shift; ";
                    break;
                }
            }
        }

        Tensor x = rand_uniform(rng, {1000}, -12.0, 12.0);
        Tensor sp = activation_apply(x, Activation::Sigmoid);
        Tensor sn = activation_apply(elementwise(x, [](double v) { return -v; }),
                                     Activation::Sigmoid);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (std::abs(sp[i] + sn[i] - 1.0) >= 1e-12) {
                ok = false;
                detail += "sigmoid symmetry; ";
                break;
            }
        }

        Tensor v = rand_uniform(rng, {4096}, -2.0, 2.0);
        Rng eval_rng(1);
        DropoutResult eval = dropout_forward(v, 0.4, false, eval_rng);
        if (eval.out.values() != v.values()) {
            ok = false;
            detail += "dropout eval identity; ";
        }

        Tensor ones = Tensor::full({100000}, 1.0);
        Rng train_rng(2);
        DropoutResult train = dropout_forward(ones, 0.4, true, train_rng);
        double mean = 0.0;
        for (std::size_t i = 0; i < train.out.size(); ++i) mean += train.out[i];
        mean /= static_cast<double>(train.out.size());
        if (mean <= 0.99 || mean >= 1.01) {
            ok = false;
            detail += "dropout expectation " + std::to_string(mean) + "; ";
        }

        report(9, "softmax/sigmoid/dropout probability contracts", ok, detail);
    } catch (const std::exception& e) {
        report(9, "probability contracts", false, e.what());
    }
}

}  // namespace

int main() {
    std::printf("acceptance suite\n================\n");
    fs::create_directories(work_dir());

    criterion_1_ablation_structure();
    criterion_2_conv_oracle();
    criterion_3_gradient_integrity();
    criterion_4_preprocessing_goldens();

    try {
        const EndToEnd e2e = make_e2e_corpus();
        criterion_5_end_to_end(e2e);
        criterion_6_determinism(e2e);
    } catch (const std::exception& e) {
        report(5, "end-to-end learning (corpus generation)", false, e.what());
        report(6, "training determinism (corpus generation)", false, e.what());
    }

    criterion_7_metrics_arithmetic();
    criterion_8_adam_properties();
    criterion_9_probability_contracts();

    std::error_code ec;
    fs::remove_all(work_dir(), ec);

    if (g_failures == 0) {
        std::printf("\nall criteria passed\n");
        return 0;
    }
    std::printf("\n%d criterion check(s) failed\n", g_failures);
    return 1;
}
