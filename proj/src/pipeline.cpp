#include "lcnn/pipeline.hpp"

#include <exception>
#include <utility>

#include "lcnn/bytes.hpp"
#include "lcnn/complexity.hpp"
#include "lcnn/container.hpp"
#include "lcnn/format.hpp"
#include "lcnn/pruner.hpp"
#include "lcnn/quantizer.hpp"

namespace lcnn {

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(name, e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string kb(std::size_t bytes) { return format_number(static_cast<double>(bytes) / kBytesPerKB); }
std::string millions(std::size_t n) { return format_number(static_cast<double>(n) / 1e6); }

struct Trained {
    std::string name;
    std::string pruned_layers;
    Network net;
    Evaluation before;
    Evaluation after;
    std::size_t epochs = 0;
    std::size_t best_epoch = 0;
};

}  // namespace

PipelineReport run_pipeline(const PipelineOptions& options) {
    const DatasetSplits data = stage("load", [&] { return load_dataset(options.manifest); });
    return run_pipeline(options, data);
}

PipelineReport run_pipeline(const PipelineOptions& options, const DatasetSplits& data) {
    const auto& dir = options.workdir;
    stage("load", [&] {
        if (data.train.size() == 0 || data.validation.size() == 0) {
            throw InputError("dataset needs both train and validation clips");
        }
        options.arch.validate();
        for (const char* sub : {"checkpoints", "history"}) std::filesystem::create_directories(dir / sub);
    });

    const auto keep = [&](Trained& t, const TrainResult& r) {
        t.net = r.network;
        t.epochs = r.history.size();
        t.best_epoch = r.best_epoch;
        t.net.meta["best_epoch"] = std::to_string(r.best_epoch);
        write_text(dir / "history" / (t.name + ".csv"), format_history(r.history));
        save(t.net, dir / "checkpoints" / (t.name + ".float.lcnn"));
    };

    std::vector<Trained> nets;
    stage("train", [&] {
        TrainConfig cfg = options.train;
        cfg.seed = options.seed;
        Network init = build(options.arch, options.seed);
        init.name = "Unpruned";
        Trained t{"Unpruned", "-", {}, {}, {}, 0, 0};
        keep(t, train(init, data.train, data.validation, cfg));
        t.before = t.after = evaluate(t.net, data.validation);
        nets.push_back(std::move(t));
    });

    const std::vector<PrunedVariant> variants = stage("prune", [&] {
        const Network& base = nets.front().net;
        const std::vector<std::string> all = {"C1", "C2", "C3"};
        write_text(dir / "plan.txt", format_plan(make_plan(base, all, options.counts)));
        return make_variants(base, options.counts);
    });

    stage("finetune", [&] {
        for (std::size_t i = 0; i < variants.size(); ++i) {
            const PrunedVariant& v = variants[i];
            TrainConfig cfg = options.finetune;
            cfg.seed = options.seed + 1 + i;
            Trained t{v.name, join(v.layers, '+'), {}, evaluate(v.net, data.validation), {}, 0, 0};
            keep(t, finetune(v.net, data.train, data.validation, cfg));
            t.after = evaluate(t.net, data.validation);
            nets.push_back(std::move(t));
        }
    });

    const std::vector<Network> quantized = stage("quantize", [&] {
        std::vector<Network> out;
        for (const auto& t : nets) out.push_back(quantize_model(t.net));
        return out;
    });

    stage("save", [&] {
        for (const auto& q : quantized) save(q, dir / (q.name + ".lcnn"));
    });

    PipelineReport report;
    std::vector<ComplexityReport> profiles;
    std::vector<Tensor> predictions;
    stage("profile", [&] {
        for (const auto& t : nets) {
            // Everything reported comes from the file as written.
            const auto path = dir / (t.name + ".lcnn");
            const Network loaded = load(path);
            const ComplexityReport p = profile(loaded);
            predictions.push_back(predict_dataset(loaded, data.validation));
            NetworkRow row;
            row.network = t.name;
            row.pruned_layers = t.pruned_layers;
            row.arch = loaded.config.notation();
            row.params = p.params;
            row.macs = p.macs;
            row.payload_bytes = p.payload_bytes();
            row.file_bytes = p.file_bytes().value_or(0);
            row.before_finetune = t.before;
            row.finetuned = t.after;
            row.quantized = evaluate_predictions(std::span(&predictions.back(), 1), data.validation.labels);
            row.epochs = t.epochs;
            row.best_epoch = t.best_epoch;
            row.file = path.filename();
            report.networks.push_back(std::move(row));
            profiles.push_back(p);
        }
    });

    stage("ensemble", [&] {
        const std::size_t n = variants.size();
        for (std::size_t skip = 0; skip <= n; ++skip) {
            EnsembleRow row;
            row.ensemble = skip < n ? "w/o " + variants[skip].name : "All";
            std::vector<ComplexityReport> members;
            std::vector<Tensor> preds;
            for (std::size_t i = 0; i < n; ++i) {
                if (i == skip) continue;
                row.members.push_back(variants[i].name);
                members.push_back(profiles[i + 1]);
                preds.push_back(predictions[i + 1]);
            }
            const ComplexityReport sum = profile_ensemble(members);
            row.params = sum.params;
            row.macs = sum.macs;
            row.payload_bytes = sum.payload_bytes();
            row.evaluation = evaluate_predictions(preds, data.validation.labels);
            report.ensembles.push_back(std::move(row));
        }
        write_text(dir / "summary.csv", format_summary_csv(report));
        write_text(dir / "ensemble.csv", format_ensemble_csv(report));
    });
    return report;
}

std::string format_summary_csv(const PipelineReport& report) {
    std::string out =
        "network,pruned_layers,arch,params,size_kb,file_bytes,macs_millions,acc_before_ft,logloss_before_ft,"
        "acc_float,logloss_float,accuracy,log_loss,epochs,best_epoch,file\n";
    for (const auto& r : report.networks) {
        out += r.network + ',' + r.pruned_layers + ',' + r.arch + ',' + std::to_string(r.params) + ',' +
               kb(r.payload_bytes) + ',' + std::to_string(r.file_bytes) + ',' + millions(r.macs) + ',' +
               format_number(r.before_finetune.accuracy) + ',' + format_number(r.before_finetune.log_loss) + ',' +
               format_number(r.finetuned.accuracy) + ',' + format_number(r.finetuned.log_loss) + ',' +
               format_number(r.quantized.accuracy) + ',' + format_number(r.quantized.log_loss) + ',' +
               std::to_string(r.epochs) + ',' + std::to_string(r.best_epoch) + ',' + r.file.string() + '\n';
    }
    return out;
}

std::string format_ensemble_csv(const PipelineReport& report) {
    std::string out = "ensemble,members,params,size_kb,macs_millions,accuracy,log_loss\n";
    for (const auto& r : report.ensembles) {
        out += r.ensemble + ',' + join(r.members, '+') + ',' + std::to_string(r.params) + ',' + kb(r.payload_bytes) +
               ',' + millions(r.macs) + ',' + format_number(r.evaluation.accuracy) + ',' +
               format_number(r.evaluation.log_loss) + '\n';
    }
    return out;
}

}  // namespace lcnn
