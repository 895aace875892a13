#pragma once

#include <cstdint>
#include <ostream>
#include <string>

namespace xray::cli {

// Stable exit-code contract for scripting.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartialFailure = 1;  // experiment: some rows failed
inline constexpr int kExitUsage = 2;           // bad arguments / validation / IO
inline constexpr int kExitDiverged = 3;        // non-finite training loss

struct PreprocessArgs {
    std::string in_dir;
    std::string out_dir;
    std::string mode = "raw";
    double alpha = 1.5;
    double beta = 0.0;
    double delta = 40.0;
    double denom = 128.0;
};

struct DatagenArgs {
    std::string out_dir;
    int n_images = 200;
    int image_size = 64;
    double positive_fraction = 0.5;
    double train_fraction = 0.75;
    std::uint64_t seed = 42;
};

struct TrainArgs {
    std::string manifest;
    std::string test_manifest;  // optional; blank test_acc column when absent
    std::string config_path;    // optional; built-in defaults otherwise
    std::string out_checkpoint;
    std::string log_path;  // optional copy of the epoch CSV
};

struct EvalArgs {
    std::string manifest;
    std::string checkpoint;
    double threshold = -1.0;  // < 0: use the threshold echoed in the checkpoint
};

struct ExperimentArgs {
    std::string manifest;
    std::string out_report;
    std::string config_path;  // optional; arch/preprocess_mode are set per row
};

int cmd_preprocess(const PreprocessArgs& args, std::ostream& out, std::ostream& err);
int cmd_datagen(const DatagenArgs& args, std::ostream& out, std::ostream& err);
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_experiment(const ExperimentArgs& args, std::ostream& out, std::ostream& err);

}  // namespace xray::cli
