#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lcnn/dataset.hpp"
#include "lcnn/ensemble.hpp"
#include "lcnn/error.hpp"
#include "lcnn/trainer.hpp"

namespace lcnn {

// A failed pipeline stage ("load", "train", "prune", "finetune", "quantize",
// "save", "profile", "ensemble"). Artifacts written before the failure stay in
// the work directory.
class PipelineError : public Error {
public:
    PipelineError(std::string stage, const std::string& what)
        : Error("pipeline stage '" + stage + "': " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct PipelineOptions {
    std::filesystem::path manifest;
    std::filesystem::path workdir;
    ArchConfig arch{};
    std::array<std::size_t, 3> counts{4, 4, 10};
    // Seeds the initial weights and every shuffle; the seed fields of the two
    // configs below are ignored.
    std::uint64_t seed = 0;
    TrainConfig train{};
    TrainConfig finetune{};
};

struct NetworkRow {
    std::string network;        // "Unpruned", "Pruned_C1", ...
    std::string pruned_layers;  // "C1+C2", "-" for the unpruned network
    std::string arch;
    std::size_t params = 0;
    std::size_t macs = 0;
    std::size_t payload_bytes = 0;  // int8 tensors plus quantization parameters
    std::size_t file_bytes = 0;
    Evaluation before_finetune;  // float, straight after pruning (trained net for Unpruned)
    Evaluation finetuned;        // float, after fine-tuning (trained net for Unpruned)
    Evaluation quantized;        // the saved int8 network
    std::size_t epochs = 0;      // epochs run
    std::size_t best_epoch = 0;
    std::filesystem::path file;
};

struct EnsembleRow {
    std::string ensemble;  // "All" or "w/o Pruned_C1", ...
    std::vector<std::string> members;
    std::size_t params = 0;
    std::size_t macs = 0;
    std::size_t payload_bytes = 0;
    Evaluation evaluation;
};

struct PipelineReport {
    std::vector<NetworkRow> networks;  // Unpruned first, then the six variants
    std::vector<EnsembleRow> ensembles;  // leave-one-out rows, then "All"
};

// Trains the network, derives the six pruned variants, fine-tunes, quantizes,
// saves and profiles each, then evaluates the ensembles of the int8 variants.
// Writes <Name>.lcnn (int8), checkpoints/<Name>.float.lcnn, history/<Name>.csv,
// plan.txt, summary.csv and ensemble.csv under the work directory.
PipelineReport run_pipeline(const PipelineOptions& options);

// Same, on an already loaded dataset (options.manifest is not read).
PipelineReport run_pipeline(const PipelineOptions& options, const DatasetSplits& data);

std::string format_summary_csv(const PipelineReport& report);
std::string format_ensemble_csv(const PipelineReport& report);

}  // namespace lcnn
