#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lcnn/model.hpp"

namespace lcnn {

// 1 - cos(a, b) over the flattened weights, in [0, 2]. Two zero filters are at
// distance 0, a zero filter and a nonzero one at distance 1.
double filter_cosine_distance(std::span<const float> a, std::span<const float> b);
double filter_cosine_distance(const Tensor& a, const Tensor& b);

struct Removal {
    std::size_t removed = 0;
    std::size_t partner = 0;  // surviving member of the pair
    double distance = 0.0;

    friend bool operator==(const Removal&, const Removal&) = default;
};

struct LayerPlan {
    std::string layer;  // "C1", "C2" or "C3"
    std::vector<Removal> removals;  // in selection order

    std::vector<std::size_t> removed_indices() const;  // ascending
    friend bool operator==(const LayerPlan&, const LayerPlan&) = default;
};

struct PruningPlan {
    std::vector<LayerPlan> layers;

    const LayerPlan* find(std::string_view layer) const;
    friend bool operator==(const PruningPlan&, const PruningPlan&) = default;
};

// Greedy closest-pair selection on conv weights [C_out,C_in,3,3]: k times, take
// the pair (i<j) of still-unpaired filters with the smallest distance (ties to
// the lowest (i,j)), remove j and keep i. Each filter joins at most one pair,
// so 1 <= k and 2k <= C_out are required (InputError otherwise).
LayerPlan find_redundant(const Tensor& weights, std::size_t k, std::string layer = {});

// Plans for the named conv blocks ("C1","C2","C3"), each computed from `net`'s
// current weights.
PruningPlan make_plan(const Network& net, std::span<const std::string> layers, std::span<const std::size_t> counts);

// Removes the planned filters with their biases and batch-norm entries, plus
// the matching input slices of the consumer (next conv, or the D1 columns of
// the removed C3 channels). Returns a new float network named `name` (or the
// input's name if empty). Throws StructuralError on a plan that does not fit.
Network apply_plan(const Network& net, const PruningPlan& plan, std::string name = {});

struct PrunedVariant {
    std::string name;  // "Pruned_C1", ..., "Pruned_C123"
    std::vector<std::string> layers;
    Network net;
};

// The six layer subsets C1, C2, C3, C1+C2, C2+C3, C1+C2+C3 with plans taken
// from the unpruned weights. counts = removals for C1, C2, C3.
std::vector<PrunedVariant> make_variants(const Network& net, std::array<std::size_t, 3> counts = {4, 4, 10});

// The variant subsets in order, e.g. {"Pruned_C12", {"C1","C2"}}.
std::vector<std::pair<std::string, std::vector<std::string>>> variant_subsets();

// Text form, one removal per line: "<layer> <removed> <partner> <distance>".
std::string format_plan(const PruningPlan& plan);
PruningPlan parse_plan(std::string_view text);

}  // namespace lcnn
