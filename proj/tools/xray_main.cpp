#include <iostream>

#include <CLI11.hpp>

#include "xray/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"pneumonia x-ray preprocessing, training and evaluation toolkit"};
    app.require_subcommand(1);

    xray::cli::PreprocessArgs pre;
    auto* sub_pre = app.add_subcommand("preprocess", "apply image enhancement to a directory");
    sub_pre->add_option("--in", pre.in_dir, "input directory of .ppm/.pgm files")->required();
    sub_pre->add_option("--out", pre.out_dir, "output directory")->required();
    sub_pre->add_option("--mode", pre.mode, "raw|expanded|contrast|contrast-light");
    sub_pre->add_option("--alpha", pre.alpha, "contrast gain (> 0)");
    sub_pre->add_option("--beta", pre.beta, "contrast offset");
    sub_pre->add_option("--delta", pre.delta, "brightness increment");
    sub_pre->add_option("--denom", pre.denom, "color expansion denominator (> 0)");

    xray::cli::DatagenArgs gen;
    auto* sub_gen = app.add_subcommand("datagen", "generate a synthetic labeled corpus");
    sub_gen->add_option("--out", gen.out_dir, "output directory")->required();
    sub_gen->add_option("--n", gen.n_images, "number of images");
    sub_gen->add_option("--size", gen.image_size, "image side length");
    sub_gen->add_option("--positive-fraction", gen.positive_fraction, "share of positives");
    sub_gen->add_option("--train-fraction", gen.train_fraction, "share used for training");
    sub_gen->add_option("--seed", gen.seed, "corpus seed");

    xray::cli::TrainArgs tr;
    auto* sub_tr = app.add_subcommand("train", "train a model from a manifest");
    sub_tr->add_option("--manifest", tr.manifest, "training manifest.csv")->required();
    sub_tr->add_option("--test-manifest", tr.test_manifest, "held-out manifest for the epoch log");
    sub_tr->add_option("--config", tr.config_path, "key = value config file");
    sub_tr->add_option("--out", tr.out_checkpoint, "checkpoint output path")->required();
    sub_tr->add_option("--log", tr.log_path, "also write the epoch CSV here");

    xray::cli::EvalArgs ev;
    auto* sub_ev = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    sub_ev->add_option("--manifest", ev.manifest, "evaluation manifest.csv")->required();
    sub_ev->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
    sub_ev->add_option("--threshold", ev.threshold, "decision threshold (default: from checkpoint)");

    xray::cli::ExperimentArgs ex;
    auto* sub_ex = app.add_subcommand("experiment", "run the five-row preprocessing/arch ablation");
    sub_ex->add_option("--manifest", ex.manifest, "full corpus manifest.csv")->required();
    sub_ex->add_option("--out", ex.out_report, "report CSV path")->required();
    sub_ex->add_option("--config", ex.config_path, "key = value config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : xray::cli::kExitUsage;
    }

    if (sub_pre->parsed()) return xray::cli::cmd_preprocess(pre, std::cout, std::cerr);
    if (sub_gen->parsed()) return xray::cli::cmd_datagen(gen, std::cout, std::cerr);
    if (sub_tr->parsed()) return xray::cli::cmd_train(tr, std::cout, std::cerr);
    if (sub_ev->parsed()) return xray::cli::cmd_eval(ev, std::cout, std::cerr);
    if (sub_ex->parsed()) return xray::cli::cmd_experiment(ex, std::cout, std::cerr);
    return xray::cli::kExitUsage;
}
