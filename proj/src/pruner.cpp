#include "lcnn/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include "lcnn/format.hpp"

namespace lcnn {

namespace {

const std::array<std::string, 3> kBlocks = {"C1", "C2", "C3"};

std::size_t block_index(std::string_view layer) {
    for (std::size_t i = 0; i < kBlocks.size(); ++i) {
        if (kBlocks[i] == layer) return i;
    }
    throw StructuralError("pruning: unknown layer '" + std::string(layer) + "' (expected C1, C2 or C3)");
}

// Keeps the entries of `t` along axis `axis` whose index is not in `drop`.
// `group` consecutive entries form one index (for the flattened D1 columns).
Tensor drop_along(const Tensor& t, std::size_t axis, const std::set<std::size_t>& drop, std::size_t group = 1) {
    const Shape& s = t.shape();
    std::size_t outer = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t extent = s[axis];
    std::vector<std::size_t> keep;
    for (std::size_t e = 0; e < extent; ++e) {
        if (!drop.contains(e / group)) keep.push_back(e);
    }
    Shape ns = s;
    ns[axis] = keep.size();
    Tensor out(ns);
    float* dst = out.ptr();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t e : keep) {
            const float* src = t.ptr() + (o * extent + e) * inner;
            dst = std::copy(src, src + inner, dst);
        }
    }
    return out;
}

}  // namespace

double filter_cosine_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw ShapeError("filter_cosine_distance: filters differ in size");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 && nb == 0.0) return 0.0;
    if (na == 0.0 || nb == 0.0) return 1.0;
    const double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(1.0 - cosine, 0.0, 2.0);
}

double filter_cosine_distance(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("filter_cosine_distance: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    return filter_cosine_distance(a.data(), b.data());
}

std::vector<std::size_t> LayerPlan::removed_indices() const {
    std::vector<std::size_t> out;
    for (const auto& r : removals) out.push_back(r.removed);
    std::sort(out.begin(), out.end());
    return out;
}

const LayerPlan* PruningPlan::find(std::string_view layer) const {
    for (const auto& l : layers) {
        if (l.layer == layer) return &l;
    }
    return nullptr;
}

LayerPlan find_redundant(const Tensor& weights, std::size_t k, std::string layer) {
    if (weights.rank() != 4) throw ShapeError("find_redundant: expected [C_out,C_in,kh,kw] weights");
    const std::size_t n = weights.dim(0);
    if (k == 0) throw InputError("find_redundant: k must be at least 1");
    if (k >= n) {
        throw InputError("find_redundant: cannot remove " + std::to_string(k) + " of " + std::to_string(n) +
                         " filters");
    }
    if (2 * k > n) {
        throw InputError("find_redundant: " + std::to_string(k) + " disjoint pairs need at least " +
                         std::to_string(2 * k) + " filters, layer has " + std::to_string(n));
    }
    const std::size_t len = weights.size() / n;
    const auto filter = [&](std::size_t i) { return weights.data().subspan(i * len, len); };

    // Distances never change as filters are paired off, so repeatedly taking
    // the smallest available pair is a single walk over the sorted pair list.
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    pairs.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(filter_cosine_distance(filter(i), filter(j)), i, j);
    }
    std::sort(pairs.begin(), pairs.end());

    LayerPlan plan{std::move(layer), {}};
    std::vector<bool> used(n, false);
    for (const auto& [d, i, j] : pairs) {
        if (plan.removals.size() == k) break;
        if (used[i] || used[j]) continue;
        used[i] = used[j] = true;
        plan.removals.push_back({j, i, d});
    }
    return plan;
}

PruningPlan make_plan(const Network& net, std::span<const std::string> layers, std::span<const std::size_t> counts) {
    if (layers.size() != counts.size()) {
        throw InputError("make_plan: " + std::to_string(layers.size()) + " layers but " +
                         std::to_string(counts.size()) + " counts");
    }
    if (net.precision != Precision::Float32) throw PrecisionError("make_plan: pruning needs a float network");
    PruningPlan plan;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        block_index(layers[i]);
        if (plan.find(layers[i])) throw InputError("make_plan: layer '" + layers[i] + "' listed twice");
        plan.layers.push_back(find_redundant(net.layer(layers[i] + ".conv").params[0], counts[i], layers[i]));
    }
    return plan;
}

Network apply_plan(const Network& net, const PruningPlan& plan, std::string name) {
    if (net.precision != Precision::Float32) throw PrecisionError("apply_plan: pruning needs a float network");
    Network out = net;
    if (!name.empty()) out.name = std::move(name);
    std::array<std::size_t*, 3> widths = {&out.config.c1, &out.config.c2, &out.config.c3};
    std::set<std::size_t> seen_blocks;

    for (const LayerPlan& lp : plan.layers) {
        const std::size_t b = block_index(lp.layer);
        if (!seen_blocks.insert(b).second) throw StructuralError("apply_plan: layer '" + lp.layer + "' planned twice");
        const std::size_t width = *widths[b];
        std::set<std::size_t> drop;
        for (const Removal& r : lp.removals) {
            if (r.removed >= width) {
                throw StructuralError("apply_plan: " + lp.layer + " filter " + std::to_string(r.removed) +
                                      " out of range for width " + std::to_string(width));
            }
            if (!drop.insert(r.removed).second) {
                throw StructuralError("apply_plan: " + lp.layer + " filter " + std::to_string(r.removed) +
                                      " removed twice");
            }
        }
        if (drop.empty()) continue;
        if (drop.size() >= width) throw StructuralError("apply_plan: plan removes every filter of " + lp.layer);

        Layer<float>& conv = out.layer(lp.layer + ".conv");
        if (conv.params[0].dim(0) != width) throw StructuralError("apply_plan: " + lp.layer + " weights do not match config");
        conv.params[0] = drop_along(conv.params[0], 0, drop);
        conv.params[1] = drop_along(conv.params[1], 0, drop);
        conv.spec.out -= drop.size();
        Layer<float>& bn = out.layer(lp.layer + ".bn");
        for (Tensor& p : bn.params) p = drop_along(p, 0, drop);
        bn.spec.in = bn.spec.out = conv.spec.out;

        if (b < 2) {
            Layer<float>& next = out.layer(kBlocks[b + 1] + ".conv");
            next.params[0] = drop_along(next.params[0], 1, drop);
            next.spec.in -= drop.size();
        } else {
            Layer<float>& d1 = out.layer("D1");
            const std::size_t per_channel = out.config.pool2_height() * out.config.pool2_width();
            d1.params[0] = drop_along(d1.params[0], 1, drop, per_channel);
            d1.spec.in -= drop.size() * per_channel;
        }
        *widths[b] -= drop.size();
    }
    out.config.validate();
    const std::vector<Layer<float>> expected = make_layers(out.config);
    for (std::size_t i = 0; i < expected.size(); ++i) {
        bool ok = expected[i].spec == out.layers[i].spec;
        for (std::size_t p = 0; ok && p < expected[i].params.size(); ++p) {
            ok = expected[i].params[p].shape() == out.layers[i].params[p].shape();
        }
        if (!ok) {
            throw StructuralError("apply_plan: layer '" + out.layers[i].name + "' does not match config " +
                                  out.config.notation());
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::vector<std::string>>> variant_subsets() {
    return {
        {"Pruned_C1", {"C1"}},
        {"Pruned_C2", {"C2"}},
        {"Pruned_C3", {"C3"}},
        {"Pruned_C12", {"C1", "C2"}},
        {"Pruned_C23", {"C2", "C3"}},
        {"Pruned_C123", {"C1", "C2", "C3"}},
    };
}

std::vector<PrunedVariant> make_variants(const Network& net, std::array<std::size_t, 3> counts) {
    const std::vector<std::string> all(kBlocks.begin(), kBlocks.end());
    const PruningPlan full = make_plan(net, all, counts);
    std::vector<PrunedVariant> out;
    for (auto& [name, layers] : variant_subsets()) {
        PruningPlan subset;
        for (const auto& l : layers) subset.layers.push_back(*full.find(l));
        Network pruned = apply_plan(net, subset, name);
        pruned.meta["pruned_layers"] = [&] {
            std::string s;
            for (const auto& l : layers) s += (s.empty() ? "" : ",") + l;
            return s;
        }();
        out.push_back({name, layers, std::move(pruned)});
    }
    return out;
}

std::string format_plan(const PruningPlan& plan) {
    std::ostringstream os;
    os << "# layer removed partner distance\n";
    for (const auto& lp : plan.layers) {
        if (lp.removals.empty()) os << lp.layer << "\n";
        for (const auto& r : lp.removals) {
            os << lp.layer << " " << r.removed << " " << r.partner << " " << format_number(r.distance) << "\n";
        }
    }
    return os.str();
}

PruningPlan parse_plan(std::string_view text) {
    PruningPlan plan;
    std::istringstream is{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string layer;
        ls >> layer;
        const auto bad = [&](const std::string& why) {
            return InputError("plan line " + std::to_string(lineno) + ": " + why);
        };
        try {
            block_index(layer);
        } catch (const StructuralError&) {
            throw bad("unknown layer '" + layer + "'");
        }
        LayerPlan* lp = nullptr;
        for (auto& l : plan.layers) {
            if (l.layer == layer) lp = &l;
        }
        if (!lp) lp = &plan.layers.emplace_back(LayerPlan{layer, {}});
        Removal r;
        if (!(ls >> r.removed)) {
            if (ls.eof() && lp->removals.empty()) continue;
            throw bad("expected '<layer> <removed> <partner> <distance>'");
        }
        if (!(ls >> r.partner >> r.distance)) throw bad("expected '<layer> <removed> <partner> <distance>'");
        lp->removals.push_back(r);
    }
    return plan;
}

}  // namespace lcnn
