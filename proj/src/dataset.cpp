#include "lcnn/dataset.hpp"

#include <algorithm>
#include <cstring>

#include "lcnn/bytes.hpp"
#include "lcnn/error.hpp"
#include "lcnn/wav.hpp"

namespace lcnn {

namespace {

constexpr std::string_view kHeader = "path,label,split";

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

std::size_t label_index(std::string_view label) {
    const auto it = std::find(kSceneLabels.begin(), kSceneLabels.end(), label);
    if (it == kSceneLabels.end()) throw InputError("unknown label '" + std::string(label) + "'");
    return static_cast<std::size_t>(it - kSceneLabels.begin());
}

std::string_view split_name(Split split) { return split == Split::Train ? "train" : "validation"; }

Split parse_split(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "validation") return Split::Validation;
    throw InputError("unknown split '" + std::string(text) + "'");
}

std::vector<ManifestRow> parse_manifest(std::string_view text) {
    std::vector<ManifestRow> rows;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const std::size_t line_start = pos;
        pos = end + 1;
        if (line.empty()) continue;
        if (header) {
            if (line != kHeader) throw ParseError("manifest", line_start, "expected header '" + std::string(kHeader) + "'");
            header = false;
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != 3) throw ParseError("manifest", line_start, "expected 3 fields");
        try {
            label_index(fields[1]);
            rows.push_back({std::string(fields[0]), std::string(fields[1]), parse_split(fields[2])});
        } catch (const InputError& e) {
            throw ParseError("manifest", line_start, e.what());
        }
        if (rows.back().path.empty()) throw ParseError("manifest", line_start, "empty path");
    }
    if (header) throw ParseError("manifest", 0, "missing header");
    return rows;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    } catch (const ParseError& e) {
        throw ParseError(e.section(), e.offset(), path.string() + ": " + e.detail());
    }
}

std::string format_manifest(std::span<const ManifestRow> rows) {
    std::string out(kHeader);
    out += '\n';
    for (const auto& r : rows) {
        if (r.path.find_first_of(",\n") != std::string::npos) throw InputError("manifest path contains a separator: " + r.path);
        label_index(r.label);
        out += r.path + ',' + r.label + ',' + std::string(split_name(r.split)) + '\n';
    }
    return out;
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestRow> rows) {
    const std::string text = format_manifest(rows);
    write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

void LabeledDataset::add(Tensor feature, std::size_t label) {
    if (label >= kSceneLabels.size()) throw InputError("class index " + std::to_string(label) + " out of range");
    if (!features.empty() && feature.shape() != features.front().shape()) {
        throw ShapeError("dataset: feature shape " + shape_str(feature.shape()) + " differs from " +
                         shape_str(features.front().shape()));
    }
    features.push_back(std::move(feature));
    labels.push_back(label);
}

Tensor LabeledDataset::batch(std::span<const std::size_t> indices) const {
    if (features.empty()) throw InputError("dataset is empty");
    const Shape& one = features.front().shape();
    Shape shape{indices.size()};
    shape.insert(shape.end(), one.begin(), one.end());
    Tensor out(shape);
    const std::size_t len = features.front().size();
    for (std::size_t n = 0; n < indices.size(); ++n) {
        if (indices[n] >= size()) throw InputError("dataset index out of range");
        std::memcpy(out.ptr() + n * len, features[indices[n]].ptr(), len * sizeof(float));
    }
    return out;
}

Tensor LabeledDataset::batch(std::size_t first, std::size_t count) const {
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = first + i;
    return batch(idx);
}

DatasetSplits load_dataset(const std::filesystem::path& manifest, const audio::FrontendConfig& frontend) {
    const auto rows = read_manifest(manifest);
    const auto root = manifest.parent_path();
    DatasetSplits out;
    for (const auto& r : rows) {
        audio::FeatureMap fm = audio::log_mel(audio::load_wav(root / r.path), frontend);
        (r.split == Split::Train ? out.train : out.validation).add(std::move(fm.data), label_index(r.label));
    }
    return out;
}

}  // namespace lcnn
