#include "xray/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "xray/checkpoint.hpp"
#include "xray/datagen.hpp"
#include "xray/manifest.hpp"

namespace fs = std::filesystem;

namespace xray::cli {

namespace {

std::string two_decimals_percent(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", ratio * 100.0);
    return buf;
}

std::string six_decimals(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::vector<fs::path> list_images(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".ppm" || ext == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

// Writes every character to two sinks; used to stream the epoch CSV to stdout
// and a log file at the same time.
class TeeBuf : public std::streambuf {
public:
    TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

protected:
    int overflow(int c) override {
        if (c != EOF) {
            a_->sputc(static_cast<char>(c));
            b_->sputc(static_cast<char>(c));
        }
        return c;
    }
    int sync() override {
        a_->pubsync();
        b_->pubsync();
        return 0;
    }

private:
    std::streambuf* a_;
    std::streambuf* b_;
};

}  // namespace

int cmd_preprocess(const PreprocessArgs& args, std::ostream& out, std::ostream& err) {
    try {
        const PreprocessMode mode = parse_preprocess_mode(args.mode);
        const PreprocessConfig cfg{args.alpha, args.beta, args.delta, args.denom};
        if (!fs::is_directory(args.in_dir)) {
            err << "input directory does not exist: " << args.in_dir << "\n";
            return kExitUsage;
        }
        fs::create_directories(args.out_dir);
        if (fs::equivalent(args.in_dir, args.out_dir)) {
            err << "input and output directories must differ (inputs are never modified)\n";
            return kExitUsage;
        }

        const auto files = list_images(args.in_dir);
        std::vector<Image> images;
        images.reserve(files.size());
        for (const auto& f : files) images.push_back(read_image(f.string()));

        ChannelAverages avgs;
        if (mode == PreprocessMode::Expanded && !images.empty()) {
            avgs = compute_channel_averages(images);
        }

        for (std::size_t i = 0; i < files.size(); ++i) {
            const Image result = pipeline_apply(images[i], cfg, mode, avgs);
            fs::path out_name = files[i].filename();
            out_name.replace_extension(".ppm");
            write_ppm((fs::path(args.out_dir) / out_name).string(), result);
        }
        out << "processed " << files.size() << " images\n";
        return kExitOk;
    } catch (const std::exception& e) {
        err << "preprocess: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_datagen(const DatagenArgs& args, std::ostream& out, std::ostream& err) {
    try {
        SyntheticSpec spec;
        spec.n_images = args.n_images;
        spec.image_size = args.image_size;
        spec.positive_fraction = args.positive_fraction;
        spec.train_fraction = args.train_fraction;
        spec.seed = args.seed;
        const GeneratedCorpus corpus = generate(spec, args.out_dir);
        out << "generated " << corpus.all.size() << " images (" << corpus.train.size()
            << " train / " << corpus.test.size() << " test) in " << args.out_dir << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        err << "datagen: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
    try {
        const TrainConfig cfg =
            args.config_path.empty() ? TrainConfig{} : load_config_file(args.config_path);

        ChannelAverages avgs;
        const Dataset train_set = load_dataset(args.manifest, cfg.preprocess_mode,
                                               cfg.preprocess, cfg.image_size, nullptr, &avgs);
        Dataset test_set;
        if (!args.test_manifest.empty()) {
            // Expanded mode reuses the training averages so both splits see
            // the same transform.
            test_set = load_dataset(args.test_manifest, cfg.preprocess_mode, cfg.preprocess,
                                    cfg.image_size, &avgs, nullptr);
        }

        ArchParams arch_params;
        arch_params.dropout_rate = cfg.dropout_rate;
        Rng rng(cfg.seed);
        Model model = build_model(cfg.arch, cfg.image_size, arch_params, rng);

        std::ofstream log_file;
        std::unique_ptr<TeeBuf> tee;
        std::unique_ptr<std::ostream> tee_stream;
        std::ostream* log_sink = &out;
        if (!args.log_path.empty()) {
            log_file.open(args.log_path, std::ios::trunc);
            if (!log_file) throw IoError("cannot write log " + args.log_path);
            tee = std::make_unique<TeeBuf>(out.rdbuf(), log_file.rdbuf());
            tee_stream = std::make_unique<std::ostream>(tee.get());
            log_sink = tee_stream.get();
        }

        train_model(model, train_set, test_set, cfg, rng, log_sink);

        const bool expanded = cfg.preprocess_mode == PreprocessMode::Expanded;
        save_checkpoint(args.out_checkpoint, model, cfg, expanded ? &avgs : nullptr);
        return kExitOk;
    } catch (const DivergedError& e) {
        err << "train: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        err << "train: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
    try {
        LoadedCheckpoint loaded = load_checkpoint(args.checkpoint);
        const TrainConfig& cfg = loaded.config;
        const ChannelAverages* avgs = loaded.has_averages ? &loaded.averages : nullptr;
        const Dataset set = load_dataset(args.manifest, cfg.preprocess_mode, cfg.preprocess,
                                         cfg.image_size, avgs, nullptr);
        const double threshold = args.threshold >= 0.0 ? args.threshold : cfg.threshold;
        const Metrics m = evaluate(loaded.model, set, threshold);
        out << "accuracy: " << two_decimals_percent(m.accuracy()) << "%\n";
        out << "precision: " << two_decimals_percent(m.precision()) << "%\n";
        out << "recall: " << two_decimals_percent(m.recall()) << "%\n";
        out << "f_score: " << two_decimals_percent(m.f_score()) << "%\n";
        return kExitOk;
    } catch (const std::exception& e) {
        err << "eval: " << e.what() << "\n";
        return kExitUsage;
    }
}

namespace {

struct ExperimentRow {
    std::string name;
    std::string arch;
    PreprocessMode mode;
};

const ExperimentRow kExperimentRows[5] = {
    {"cnn_raw", "cnn", PreprocessMode::Raw},
    {"cnn_expanded", "cnn", PreprocessMode::Expanded},
    {"cnn_contrast", "cnn", PreprocessMode::Contrast},
    {"cnn_contrast_light", "cnn", PreprocessMode::ContrastLight},
    {"resnet_contrast_light", "resnet", PreprocessMode::ContrastLight},
};

Dataset images_to_dataset(const std::vector<Image>& images, const std::vector<int>& labels,
                          const std::vector<std::size_t>& subset, PreprocessMode mode,
                          const PreprocessConfig& pcfg, int image_size,
                          const ChannelAverages& avgs) {
    Dataset set;
    set.reserve(subset.size());
    for (std::size_t idx : subset) {
        const Image processed = pipeline_apply(images[idx], pcfg, mode, avgs);
        set.push_back(Sample{to_tensor(processed, image_size), labels[idx]});
    }
    return set;
}

}  // namespace

int cmd_experiment(const ExperimentArgs& args, std::ostream& out, std::ostream& err) {
    std::vector<std::string> report_lines;
    report_lines.push_back(
        "name,status,accuracy,f_score,epochs,seed,accuracy_percent,f_score_percent");
    bool any_failed = false;

    try {
        const TrainConfig base_cfg =
            args.config_path.empty() ? TrainConfig{} : load_config_file(args.config_path);

        const std::vector<ManifestRow> rows = read_manifest(args.manifest);
        if (rows.empty()) throw ValueError("manifest lists no images");
        const std::string base = parent_dir(args.manifest);
        std::vector<Image> images;
        std::vector<int> labels;
        for (const ManifestRow& r : rows) {
            images.push_back(read_image(base.empty() ? r.path : base + "/" + r.path));
            labels.push_back(r.label);
        }

        // One stratified 75/25 split shared by all five rows: the comparison
        // is controlled, only arch/preprocessing vary.
        Rng split_rng(base_cfg.seed);
        std::vector<std::size_t> by_class[2];
        for (std::size_t i = 0; i < labels.size(); ++i)
            by_class[labels[i]].push_back(i);
        std::vector<std::size_t> train_idx, test_idx;
        for (auto& members : by_class) {
            split_rng.shuffle(members);
            const std::size_t take = static_cast<std::size_t>(
                std::llround(static_cast<double>(members.size()) * 0.75));
            for (std::size_t k = 0; k < members.size(); ++k) {
                (k < take ? train_idx : test_idx).push_back(members[k]);
            }
        }
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(test_idx.begin(), test_idx.end());
        if (train_idx.empty() || test_idx.empty()) {
            throw ValueError("corpus too small to split for the experiment");
        }

        for (std::size_t row = 0; row < 5; ++row) {
            const ExperimentRow& spec = kExperimentRows[row];
            std::string line;
            try {
                TrainConfig cfg = base_cfg;
                cfg.arch = spec.arch;
                cfg.preprocess_mode = spec.mode;

                ChannelAverages avgs;
                if (spec.mode == PreprocessMode::Expanded) {
                    std::vector<Image> train_images;
                    for (std::size_t idx : train_idx) train_images.push_back(images[idx]);
                    avgs = compute_channel_averages(train_images);
                }
                Dataset train_set = images_to_dataset(images, labels, train_idx, spec.mode,
                                                      cfg.preprocess, cfg.image_size, avgs);
                Dataset test_set = images_to_dataset(images, labels, test_idx, spec.mode,
                                                     cfg.preprocess, cfg.image_size, avgs);

                // Every row reports the shared seed; its private stream is
                // derived from (seed, row) so rows are independent.
                Rng rng(derive_seed(cfg.seed, row));
                ArchParams arch_params;
                arch_params.dropout_rate = cfg.dropout_rate;
                Model model = build_model(cfg.arch, cfg.image_size, arch_params, rng);
                train_model(model, train_set, test_set, cfg, rng, nullptr);
                const Metrics m = evaluate(model, test_set, cfg.threshold);

                line = spec.name + ",ok," + six_decimals(m.accuracy()) + "," +
                       six_decimals(m.f_score()) + "," + std::to_string(cfg.epochs) + "," +
                       std::to_string(cfg.seed) + "," + two_decimals_percent(m.accuracy()) +
                       "," + two_decimals_percent(m.f_score());
            } catch (const std::exception& e) {
                any_failed = true;
                std::string reason = e.what();
                std::replace(reason.begin(), reason.end(), ',', ';');
                line = spec.name + ",error: " + reason + ",,," +
                       std::to_string(base_cfg.epochs) + "," + std::to_string(base_cfg.seed) +
                       ",,";
            }
            report_lines.push_back(line);
            out << line << "\n";
        }
    } catch (const std::exception& e) {
        err << "experiment: " << e.what() << "\n";
        return kExitUsage;
    }

    std::ofstream report(args.out_report, std::ios::trunc);
    if (!report) {
        err << "experiment: cannot write report " << args.out_report << "\n";
        return kExitUsage;
    }
    for (const std::string& line : report_lines) report << line << "\n";
    return any_failed ? kExitPartialFailure : kExitOk;
}

}  // namespace xray::cli
