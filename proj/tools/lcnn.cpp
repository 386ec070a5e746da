// lcnn: command-line front end for building, training, pruning, quantizing,
// profiling and ensembling the low-complexity scene classifier.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lcnn/bytes.hpp"
#include "lcnn/complexity.hpp"
#include "lcnn/container.hpp"
#include "lcnn/ensemble.hpp"
#include "lcnn/format.hpp"
#include "lcnn/pipeline.hpp"
#include "lcnn/pruner.hpp"
#include "lcnn/quantizer.hpp"
#include "lcnn/runtime.hpp"
#include "lcnn/synth.hpp"
#include "lcnn/trainer.hpp"
#include "lcnn/wav.hpp"

namespace fs = std::filesystem;
using namespace lcnn;

namespace {

std::uint64_t default_seed() {
    const char* env = std::getenv("LCNN_SEED");
    if (!env || !*env) return 0;
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string("LCNN_SEED is not an unsigned integer: '") + env + "'");
    }
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

struct TrainFlags {
    std::size_t epochs = 1000;
    std::size_t patience = 50;
    double lr = 1e-3;
    std::size_t batch = 64;

    void add(CLI::App* cmd, const std::string& prefix = "") {
        cmd->add_option("--" + prefix + "epochs", epochs, "Maximum epochs")->capture_default_str();
        cmd->add_option("--" + prefix + "patience", patience, "Early-stopping patience in epochs")->capture_default_str();
        if (prefix.empty()) {
            cmd->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
            cmd->add_option("--batch-size", batch, "Mini-batch size")->capture_default_str();
        }
    }

    TrainConfig config(std::uint64_t seed, const TrainFlags& base) const {
        TrainConfig c;
        c.max_epochs = epochs;
        c.patience = patience;
        c.learning_rate = base.lr;
        c.batch_size = base.batch;
        c.seed = seed;
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"Low-complexity acoustic scene CNN toolkit"};
    app.require_subcommand(1);
    app.fallthrough(false);

    std::uint64_t seed = 0;
    try {
        seed = default_seed();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "Generate the synthetic 10-class tone-in-noise dataset");
    fs::path synth_out;
    SynthConfig synth_cfg;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--per-class", synth_cfg.per_class, "Clips per class")->capture_default_str();
    synth->add_option("--val-fraction", synth_cfg.validation_fraction, "Validation share per class")->capture_default_str();
    synth->add_option("--seed", seed, "Seed (default $LCNN_SEED or 0)");

    // features
    auto* features = app.add_subcommand("features", "Compute log-mel features of WAV files");
    std::vector<fs::path> wavs;
    fs::path features_out;
    features->add_option("wav", wavs, "Input WAV files")->required();
    features->add_option("--out", features_out, "Output file (single input only; default <wav>.feat.lcnn)");

    // profile
    auto* prof = app.add_subcommand("profile", "Parameter, MAC and size report");
    std::string prof_arch;
    fs::path prof_model;
    bool prof_int8 = false;
    bool prof_budget = false;
    bool prof_kv = false;
    auto* arch_opt = prof->add_option("--arch", prof_arch, "Architecture c1-c2-c3-dense");
    auto* model_opt = prof->add_option("--model", prof_model, "Network file");
    arch_opt->excludes(model_opt);
    prof->add_flag("--int8", prof_int8, "Report int8 storage for --arch");
    prof->add_flag("--budget", prof_budget, "Check the parameter/MAC budget; exit 1 on violation");
    prof->add_flag("--kv", prof_kv, "key=value output");

    // prune
    auto* prune = app.add_subcommand("prune", "Remove redundant filters by cosine distance");
    fs::path prune_model;
    fs::path prune_out;
    fs::path prune_plan;
    std::vector<std::string> prune_layers;
    std::vector<std::size_t> prune_counts;
    std::string prune_name;
    prune->add_option("--model", prune_model, "Float network file")->required();
    prune->add_option("--layers", prune_layers, "Conv blocks, e.g. C1,C2")->required()->delimiter(',');
    prune->add_option("--counts", prune_counts, "Filters to remove per block, e.g. 4,4")->required()->delimiter(',');
    prune->add_option("--out", prune_out, "Pruned network file");
    prune->add_option("--plan", prune_plan, "Write the removal plan here");
    prune->add_option("--name", prune_name, "Name of the pruned network");

    // quantize
    auto* quant = app.add_subcommand("quantize", "Post-training int8 quantization");
    fs::path quant_model;
    fs::path quant_out;
    quant->add_option("--model", quant_model, "Float network file")->required();
    quant->add_option("--out", quant_out, "Int8 network file")->required();

    // train
    auto* trn = app.add_subcommand("train", "Train (or fine-tune with --init) on a manifest");
    fs::path train_manifest;
    fs::path train_out;
    fs::path train_init;
    fs::path train_history;
    std::string train_arch = ArchConfig{}.notation();
    TrainFlags train_flags;
    trn->add_option("--manifest", train_manifest, "Dataset manifest CSV")->required();
    trn->add_option("--out", train_out, "Output network file")->required();
    trn->add_option("--arch", train_arch, "Architecture for a fresh network")->capture_default_str();
    trn->add_option("--init", train_init, "Start from this float network instead");
    trn->add_option("--history", train_history, "Write per-epoch history CSV");
    trn->add_option("--seed", seed, "Seed (default $LCNN_SEED or 0)");
    train_flags.add(trn);

    // ensemble
    auto* ens = app.add_subcommand("ensemble", "Evaluate networks and their probability-averaged ensemble");
    std::vector<fs::path> ens_members;
    std::vector<std::string> ens_exclude;
    fs::path ens_manifest;
    fs::path ens_out;
    ens->add_option("--members", ens_members, "Network files")->required()->delimiter(',');
    ens->add_option("--exclude", ens_exclude, "Member names to leave out")->delimiter(',');
    ens->add_option("--manifest", ens_manifest, "Dataset manifest CSV (validation split is used)")->required();
    ens->add_option("--out", ens_out, "Write the CSV here as well");

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "Train, prune, fine-tune, quantize, profile and ensemble");
    PipelineOptions pipe_opts;
    std::string pipe_arch = ArchConfig{}.notation();
    std::vector<std::size_t> pipe_counts = {4, 4, 10};
    TrainFlags pipe_train;
    TrainFlags pipe_ft;
    pipe->add_option("--manifest", pipe_opts.manifest, "Dataset manifest CSV")->required();
    pipe->add_option("--workdir", pipe_opts.workdir, "Output directory")->required();
    pipe->add_option("--arch", pipe_arch, "Unpruned architecture")->capture_default_str();
    pipe->add_option("--counts", pipe_counts, "Filters removed from C1,C2,C3")->delimiter(',')->expected(3);
    pipe->add_option("--seed", seed, "Seed (default $LCNN_SEED or 0)");
    pipe_train.add(pipe);
    pipe_ft.add(pipe, "finetune-");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const auto parsed = app.get_subcommands();
        std::cerr << (parsed.empty() ? app.help() : parsed.front()->help());
        return 2;
    }

    try {
        if (*synth) {
            synth_cfg.seed = seed;
            const fs::path manifest = write_synthetic_dataset(synth_out, synth_cfg);
            std::cout << "wrote " << synth_cfg.per_class * kSceneLabels.size() << " clips and " << manifest.string()
                      << "\n";
        } else if (*features) {
            if (!features_out.empty() && wavs.size() != 1) throw InputError("--out needs exactly one input file");
            for (const auto& w : wavs) {
                audio::FeatureMap fm = audio::log_mel(audio::load_wav(w));
                fm.metadata["source"] = w.filename().string();
                const fs::path out = features_out.empty() ? fs::path(w.string() + ".feat.lcnn") : features_out;
                save_features(fm, out);
                std::cout << out.string() << " " << shape_str(fm.data.shape()) << "\n";
            }
        } else if (*prof) {
            ComplexityReport r;
            if (!prof_model.empty()) {
                r = profile(load(prof_model));
            } else {
                r = profile(ArchConfig::parse(prof_arch.empty() ? ArchConfig{}.notation() : prof_arch),
                            prof_int8 ? Precision::Int8 : Precision::Float32);
            }
            std::cout << (prof_kv ? format_key_values(r) : format_report(r));
            if (prof_budget) {
                const BudgetResult b = budget_gate(r);
                std::cout << b.message << "\n";
                if (!b.pass) return 1;
            }
        } else if (*prune) {
            const Network net = load(prune_model);
            const PruningPlan plan = make_plan(net, prune_layers, prune_counts);
            if (!prune_plan.empty()) write_text(prune_plan, format_plan(plan));
            const Network pruned = apply_plan(net, plan, prune_name);
            std::cout << format_plan(plan) << "arch " << pruned.config.notation() << "\n";
            if (!prune_out.empty()) save(pruned, prune_out);
        } else if (*quant) {
            const Network q = quantize_model(load(quant_model));
            save(q, quant_out);
            const ComplexityReport r = profile(q);
            std::cout << quant_out.string() << " params " << r.params << " payload_bytes " << r.payload_bytes()
                      << "\n";
        } else if (*trn) {
            const DatasetSplits data = load_dataset(train_manifest);
            Network init = train_init.empty() ? build(ArchConfig::parse(train_arch), seed) : load(train_init);
            const TrainResult r = train(init, data.train, data.validation, train_flags.config(seed, train_flags));
            save(r.network, train_out);
            if (!train_history.empty()) write_text(train_history, format_history(r.history));
            std::cout << "best epoch " << r.best_epoch << " of " << r.history.size() << ", val log-loss "
                      << format_number(r.best_val_loss) << "\n";
        } else if (*ens) {
            const DatasetSplits data = load_dataset(ens_manifest);
            std::vector<Network> members;
            std::vector<ComplexityReport> reports;
            std::vector<bool> used(ens_exclude.size(), false);
            for (const auto& path : ens_members) {
                Network net = load(path);
                const auto hit = std::find(ens_exclude.begin(), ens_exclude.end(), net.name);
                if (hit != ens_exclude.end()) {
                    used[static_cast<std::size_t>(hit - ens_exclude.begin())] = true;
                    continue;
                }
                reports.push_back(profile(net));
                members.push_back(std::move(net));
            }
            for (std::size_t i = 0; i < used.size(); ++i) {
                if (!used[i]) throw InputError("--exclude: no member named '" + ens_exclude[i] + "'");
            }
            if (members.empty()) throw InputError("every member was excluded");
            std::string csv = "name,arch,params,size_kb,macs_millions,accuracy,log_loss\n";
            std::vector<Tensor> preds;
            for (std::size_t i = 0; i < members.size(); ++i) {
                preds.push_back(predict_dataset(members[i], data.validation));
                const Evaluation e = evaluate_predictions(std::span(&preds.back(), 1), data.validation.labels);
                csv += members[i].name + ',' + members[i].config.notation() + ',' + std::to_string(reports[i].params) +
                       ',' + format_number(reports[i].payload_bytes() / double(kBytesPerKB)) + ',' +
                       format_number(reports[i].macs / 1e6) + ',' + format_number(e.accuracy) + ',' +
                       format_number(e.log_loss) + '\n';
            }
            const ComplexityReport sum = profile_ensemble(reports);
            const Evaluation e = evaluate_predictions(preds, data.validation.labels);
            csv += "ensemble," + sum.arch + ',' + std::to_string(sum.params) + ',' +
                   format_number(sum.payload_bytes() / double(kBytesPerKB)) + ',' + format_number(sum.macs / 1e6) +
                   ',' + format_number(e.accuracy) + ',' + format_number(e.log_loss) + '\n';
            std::cout << csv;
            if (!ens_out.empty()) write_text(ens_out, csv);
        } else if (*pipe) {
            pipe_opts.arch = ArchConfig::parse(pipe_arch);
            pipe_opts.counts = {pipe_counts[0], pipe_counts[1], pipe_counts[2]};
            pipe_opts.seed = seed;
            pipe_opts.train = pipe_train.config(seed, pipe_train);
            pipe_opts.finetune = pipe_ft.config(seed, pipe_train);
            const PipelineReport r = run_pipeline(pipe_opts);
            std::cout << format_summary_csv(r) << "\n" << format_ensemble_csv(r);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
