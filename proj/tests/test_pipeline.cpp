#include <gtest/gtest.h>

#include <filesystem>

#include "lcnn/bytes.hpp"
#include "lcnn/complexity.hpp"
#include "lcnn/container.hpp"
#include "lcnn/pipeline.hpp"
#include "lcnn/synth.hpp"

namespace lcnn {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "lcnn_test_pipeline" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const fs::path& tiny_manifest() {
    static const fs::path manifest = [] {
        SynthConfig cfg;
        cfg.per_class = 3;
        cfg.seed = 21;
        return write_synthetic_dataset(scratch("data"), cfg);
    }();
    return manifest;
}

PipelineOptions tiny_options(const fs::path& workdir) {
    PipelineOptions o;
    o.manifest = tiny_manifest();
    o.workdir = workdir;
    o.arch = ArchConfig::parse("8-8-12-16");
    o.counts = {2, 2, 4};
    o.seed = 9;
    o.train.max_epochs = 3;
    o.train.patience = 3;
    o.finetune.max_epochs = 2;
    o.finetune.patience = 2;
    return o;
}

std::string stage_of(const PipelineOptions& o) {
    try {
        run_pipeline(o);
    } catch (const PipelineError& e) {
        return e.stage();
    }
    return "";
}

TEST(Pipeline, WritesEveryArtifact) {
    const auto dir = scratch("artifacts");
    const PipelineReport r = run_pipeline(tiny_options(dir));
    ASSERT_EQ(r.networks.size(), 7u);
    ASSERT_EQ(r.ensembles.size(), 7u);
    EXPECT_EQ(r.networks[0].network, "Unpruned");
    EXPECT_EQ(r.networks[6].network, "Pruned_C123");
    EXPECT_EQ(r.networks[6].arch, "6-6-8-16");
    EXPECT_EQ(r.ensembles.back().ensemble, "All");
    EXPECT_EQ(r.ensembles.back().members.size(), 6u);
    EXPECT_EQ(r.ensembles[0].ensemble, "w/o Pruned_C1");
    for (const auto& row : r.networks) {
        EXPECT_TRUE(fs::exists(dir / row.file)) << row.file;
        EXPECT_TRUE(fs::exists(dir / "checkpoints" / (row.network + ".float.lcnn")));
        EXPECT_TRUE(fs::exists(dir / "history" / (row.network + ".csv")));
    }
    for (const char* f : {"plan.txt", "summary.csv", "ensemble.csv"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
    const auto summary = read_file(dir / "summary.csv");
    EXPECT_EQ(std::string(summary.begin(), summary.end()), format_summary_csv(r));
}

TEST(Pipeline, ReloadedFilesMatchTheirRows) {
    const auto dir = scratch("reload");
    const PipelineReport r = run_pipeline(tiny_options(dir));
    std::size_t params = 0;
    for (std::size_t i = 0; i < r.networks.size(); ++i) {
        const auto& row = r.networks[i];
        const Network net = load(dir / row.file);
        EXPECT_EQ(net.precision, Precision::Int8);
        EXPECT_EQ(net.name, row.network);
        const ComplexityReport p = profile(net);
        EXPECT_EQ(net.config.notation(), row.arch);
        EXPECT_EQ(p.params, row.params);
        EXPECT_EQ(p.macs, row.macs);
        EXPECT_EQ(p.payload_bytes(), row.payload_bytes);
        EXPECT_EQ(fs::file_size(dir / row.file), row.file_bytes);
        EXPECT_EQ(p.params, count_params(net.config));
        if (i > 0) params += row.params;
    }
    EXPECT_EQ(r.ensembles.back().params, params);
}

TEST(Pipeline, DefaultCountsGiveReferenceParameters) {
    const auto dir = scratch("reference");
    PipelineOptions o = tiny_options(dir);
    o.arch = ArchConfig{};
    o.counts = {4, 4, 10};
    o.train.max_epochs = o.train.patience = 1;
    o.finetune.max_epochs = o.finetune.patience = 0;
    const PipelineReport r = run_pipeline(o);
    const std::vector<std::size_t> expected = {14886, 14254, 13138, 11396, 12650, 10008, 9520};
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(r.networks[i].params, expected[i]);
    EXPECT_EQ(r.ensembles.back().params, 70966u);
    // No fine-tuning epochs: the variant leaves finetune unchanged.
    for (std::size_t i = 1; i < r.networks.size(); ++i) {
        EXPECT_EQ(r.networks[i].before_finetune.log_loss, r.networks[i].finetuned.log_loss);
    }
}

TEST(Pipeline, RerunIsBitIdentical) {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    run_pipeline(tiny_options(a));
    run_pipeline(tiny_options(b));
    EXPECT_EQ(read_file(a / "summary.csv"), read_file(b / "summary.csv"));
    EXPECT_EQ(read_file(a / "ensemble.csv"), read_file(b / "ensemble.csv"));
    for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().extension() == ".lcnn") EXPECT_EQ(read_file(e.path()), read_file(b / e.path().filename()));
    }
    PipelineOptions other = tiny_options(scratch("det_c"));
    other.seed = 10;
    run_pipeline(other);
    EXPECT_NE(read_file(a / "Unpruned.lcnn"), read_file(other.workdir / "Unpruned.lcnn"));
}

TEST(Pipeline, FailuresNameTheStage) {
    PipelineOptions o = tiny_options(scratch("fail_load"));
    o.manifest = o.workdir / "missing.csv";
    EXPECT_EQ(stage_of(o), "load");

    o = tiny_options(scratch("fail_train"));
    o.train.patience = o.train.max_epochs + 1;
    EXPECT_EQ(stage_of(o), "train");

    o = tiny_options(scratch("fail_prune"));
    o.counts = {5, 2, 4};
    EXPECT_EQ(stage_of(o), "prune");
    // Work from the stages that finished stays behind.
    EXPECT_TRUE(fs::exists(o.workdir / "checkpoints" / "Unpruned.float.lcnn"));

    o = tiny_options(scratch("fail_finetune"));
    o.finetune.batch_size = 0;
    EXPECT_EQ(stage_of(o), "finetune");

    const DatasetSplits data = load_dataset(tiny_manifest());
    DatasetSplits no_val{data.train, {}};
    try {
        run_pipeline(tiny_options(scratch("fail_empty")), no_val);
        FAIL();
    } catch (const PipelineError& e) {
        EXPECT_EQ(e.stage(), "load");
        EXPECT_NE(std::string(e.what()).find("validation"), std::string::npos);
    }
}

TEST(Pipeline, CsvShapes) {
    PipelineReport r;
    NetworkRow n;
    n.network = "Unpruned";
    n.pruned_layers = "-";
    n.arch = "16-16-32-100";
    n.params = 14886;
    n.payload_bytes = 15062;
    n.macs = 5437800;
    n.file = "Unpruned.lcnn";
    r.networks.push_back(n);
    EnsembleRow e;
    e.ensemble = "All";
    e.members = {"a", "b"};
    e.params = 3;
    e.payload_bytes = 1500;
    e.macs = 2000000;
    r.ensembles.push_back(e);
    const std::string s = format_summary_csv(r);
    EXPECT_NE(s.find("\nUnpruned,-,16-16-32-100,14886,15.062,0,5.4378,"), std::string::npos);
    EXPECT_NE(format_ensemble_csv(r).find("\nAll,a+b,3,1.5,2,"), std::string::npos);
}

}  // namespace
}  // namespace lcnn
