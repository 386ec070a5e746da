#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcnn/audio.hpp"
#include "lcnn/tensor.hpp"

namespace lcnn {

// The ten scene labels; a label's class index is its position here.
inline constexpr std::array<std::string_view, 10> kSceneLabels = {
    "airport",           "bus",            "metro", "metro_station", "park", "public_square", "shopping_mall",
    "street_pedestrian", "street_traffic", "tram",
};

// Class index of `label`, InputError if it is not one of kSceneLabels.
std::size_t label_index(std::string_view label);

enum class Split { Train, Validation };

std::string_view split_name(Split split);
Split parse_split(std::string_view text);

// Manifest CSV: header "path,label,split", then one row per clip. Paths are
// relative to the manifest's directory.
struct ManifestRow {
    std::string path;
    std::string label;
    Split split = Split::Train;

    friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

std::vector<ManifestRow> parse_manifest(std::string_view text);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
std::string format_manifest(std::span<const ManifestRow> rows);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestRow> rows);

// Feature maps [1,n_mels,frames] with class indices.
struct LabeledDataset {
    std::vector<Tensor> features;
    std::vector<std::size_t> labels;

    std::size_t size() const { return labels.size(); }
    void add(Tensor feature, std::size_t label);

    // Stacked [n,1,n_mels,frames] copy of the selected examples.
    Tensor batch(std::span<const std::size_t> indices) const;
    Tensor batch(std::size_t first, std::size_t count) const;
};

struct DatasetSplits {
    LabeledDataset train;
    LabeledDataset validation;
};

// Loads and featurizes every clip listed in the manifest.
DatasetSplits load_dataset(const std::filesystem::path& manifest, const audio::FrontendConfig& frontend = {});

}  // namespace lcnn
