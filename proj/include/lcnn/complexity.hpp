#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcnn/model.hpp"

namespace lcnn {

// Counting convention:
//   params  conv C_out*(9*C_in+1), batch norm 4*C (gamma, beta, mean, var),
//           dense out*(in+1), everything else 0
//   MACs    conv H*W*C_out*9*C_in, batch norm 1 per output element,
//           dense in*out, pooling and activations 0
//   bytes   float32 4 per param; int8 1 per param plus an f32 scale and an
//           i32 zero point per tensor
inline constexpr std::string_view kCountingConvention =
    "params: conv Co*(9Ci+1), bn 4C, dense o*(i+1); macs: conv HWCo9Ci, bn 1/elem, dense io, pool/act 0; "
    "bytes: f32 4/param, int8 1/param + 8/tensor";

inline constexpr std::size_t kQParamBytesPerTensor = 8;
inline constexpr double kBytesPerKB = 1000.0;

struct LayerComplexity {
    std::string name;
    LayerKind kind = LayerKind::Tanh;
    std::size_t params = 0;
    std::size_t macs = 0;
    std::size_t tensors = 0;        // stored tensors (for the per-tensor quantization overhead)
    std::size_t payload_bytes = 0;  // raw tensor data plus qparams
};

struct ComplexityReport {
    std::string label;
    std::string arch;  // "c1-c2-c3-dense"; "ensemble(n)" for sums
    Precision precision = Precision::Float32;
    std::vector<LayerComplexity> layers;
    std::size_t members = 1;
    std::size_t params = 0;
    std::size_t macs = 0;
    std::size_t tensor_bytes = 0;  // raw element bytes only
    std::size_t qparam_bytes = 0;  // scale + zero point bytes (int8 only)
    // Serialized container bytes beyond the payload; unknown for reports built
    // from a config alone.
    std::optional<std::size_t> container_overhead;
    std::string convention = std::string(kCountingConvention);

    std::size_t payload_bytes() const { return tensor_bytes + qparam_bytes; }
    std::optional<std::size_t> file_bytes() const;
};

std::size_t count_params(const ArchConfig& config);
std::size_t count_macs(const ArchConfig& config);

// Analytic report for a config at the given precision (no container overhead).
ComplexityReport profile(const ArchConfig& config, Precision precision = Precision::Float32);

// Report for an actual network: params are its stored element counts and the
// container overhead comes from serializing it.
ComplexityReport profile(const Network& net);

// Sum of member reports. Throws InputError on an empty list.
ComplexityReport profile_ensemble(std::span<const ComplexityReport> members);
ComplexityReport profile_ensemble(std::span<const ArchConfig> members, Precision precision = Precision::Float32);

struct BudgetLimits {
    std::size_t max_params = 128000;
    std::size_t max_macs = 30000000;
};

struct BudgetResult {
    bool pass = true;
    std::vector<std::string> violations;  // "params" and/or "macs"
    long long param_margin = 0;           // limit - value; negative when exceeded
    long long mac_margin = 0;
    std::string message;
};

BudgetResult budget_gate(const ComplexityReport& report, BudgetLimits limits = {});
BudgetResult budget_gate(std::size_t params, std::size_t macs, BudgetLimits limits = {});

// Line-oriented table and `key=value` renderings.
std::string format_report(const ComplexityReport& report);
std::string format_key_values(const ComplexityReport& report);

}  // namespace lcnn
