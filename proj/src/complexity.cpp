#include "lcnn/complexity.hpp"

#include <cstdio>
#include <sstream>

#include "lcnn/container.hpp"
#include "lcnn/format.hpp"

namespace lcnn {

namespace {

// Per-layer counts from the layer specs, tracking spatial size through the pools.
std::vector<LayerComplexity> analyze(const std::vector<Layer<float>>& layers, const ArchConfig& config,
                                     Precision precision) {
    std::size_t h = config.in_height;
    std::size_t w = config.in_width;
    std::vector<LayerComplexity> out;
    out.reserve(layers.size());
    for (const auto& layer : layers) {
        const LayerSpec& s = layer.spec;
        LayerComplexity lc{layer.name, s.kind, 0, 0, 0, 0};
        switch (s.kind) {
            case LayerKind::Conv3x3Same:
                lc.params = s.out * (9 * s.in + 1);
                lc.macs = h * w * s.out * 9 * s.in;
                break;
            case LayerKind::BatchNorm:
                lc.params = 4 * s.out;
                lc.macs = s.out * h * w;
                break;
            case LayerKind::Dense:
                lc.params = s.out * (s.in + 1);
                lc.macs = s.in * s.out;
                break;
            case LayerKind::AvgPool:
                h /= s.window.height;
                w /= s.window.width;
                break;
            default: break;
        }
        lc.tensors = param_shapes(s).size();
        lc.payload_bytes = precision == Precision::Int8 ? lc.params + kQParamBytesPerTensor * lc.tensors
                                                        : 4 * lc.params;
        out.push_back(std::move(lc));
    }
    return out;
}

void total_up(ComplexityReport& r) {
    r.params = 0;
    r.macs = 0;
    r.tensor_bytes = 0;
    r.qparam_bytes = 0;
    for (const auto& l : r.layers) {
        r.params += l.params;
        r.macs += l.macs;
        if (r.precision == Precision::Int8) {
            r.tensor_bytes += l.params;
            r.qparam_bytes += kQParamBytesPerTensor * l.tensors;
        } else {
            r.tensor_bytes += 4 * l.params;
        }
    }
}

std::string millions(std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", static_cast<double>(n) / 1e6);
    return buf;
}

std::string kilobytes(std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(n) / kBytesPerKB);
    return buf;
}

}  // namespace

std::optional<std::size_t> ComplexityReport::file_bytes() const {
    if (!container_overhead) return std::nullopt;
    return payload_bytes() + *container_overhead;
}

std::size_t count_params(const ArchConfig& config) { return profile(config).params; }

std::size_t count_macs(const ArchConfig& config) { return profile(config).macs; }

ComplexityReport profile(const ArchConfig& config, Precision precision) {
    ComplexityReport r;
    r.arch = config.notation();
    r.label = r.arch;
    r.precision = precision;
    r.layers = analyze(make_layers(config), config, precision);
    total_up(r);
    return r;
}

ComplexityReport profile(const Network& net) {
    ComplexityReport r;
    r.arch = net.config.notation();
    r.label = net.name.empty() ? r.arch : net.name;
    r.precision = net.precision;
    r.layers = analyze(net.layers, net.config, net.precision);
    // Stored counts, which must agree with the analytic ones for a well-formed network.
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        std::size_t stored = 0;
        std::size_t tensors = 0;
        if (net.precision == Precision::Int8) {
            for (const auto& q : net.quantized.at(i)) stored += q.size();
            tensors = net.quantized.at(i).size();
        } else {
            for (const auto& p : net.layers[i].params) stored += p.size();
            tensors = net.layers[i].params.size();
        }
        if (stored != r.layers[i].params || tensors != r.layers[i].tensors) {
            throw StructuralError("profile: layer '" + net.layers[i].name + "' stores " + std::to_string(stored) +
                                  " elements, its spec implies " + std::to_string(r.layers[i].params));
        }
    }
    total_up(r);
    r.container_overhead = serialize(net).size() - r.payload_bytes();
    return r;
}

ComplexityReport profile_ensemble(std::span<const ComplexityReport> members) {
    if (members.empty()) throw InputError("profile_ensemble: no members");
    if (members.size() == 1) return members.front();
    ComplexityReport r;
    r.arch = "ensemble(" + std::to_string(members.size()) + ")";
    r.label = r.arch;
    r.precision = members.front().precision;
    r.members = 0;
    r.container_overhead = std::size_t{0};
    for (const auto& m : members) {
        if (m.precision != r.precision) throw InputError("profile_ensemble: members mix precisions");
        r.members += m.members;
        r.params += m.params;
        r.macs += m.macs;
        r.tensor_bytes += m.tensor_bytes;
        r.qparam_bytes += m.qparam_bytes;
        if (r.container_overhead && m.container_overhead) {
            *r.container_overhead += *m.container_overhead;
        } else {
            r.container_overhead.reset();
        }
        for (const auto& l : m.layers) {
            LayerComplexity c = l;
            c.name = m.label + "/" + l.name;
            r.layers.push_back(std::move(c));
        }
    }
    return r;
}

ComplexityReport profile_ensemble(std::span<const ArchConfig> members, Precision precision) {
    std::vector<ComplexityReport> reports;
    reports.reserve(members.size());
    for (const auto& c : members) reports.push_back(profile(c, precision));
    return profile_ensemble(reports);
}

BudgetResult budget_gate(std::size_t params, std::size_t macs, BudgetLimits limits) {
    BudgetResult b;
    b.param_margin = static_cast<long long>(limits.max_params) - static_cast<long long>(params);
    b.mac_margin = static_cast<long long>(limits.max_macs) - static_cast<long long>(macs);
    if (params > limits.max_params) b.violations.emplace_back("params");
    if (macs > limits.max_macs) b.violations.emplace_back("macs");
    b.pass = b.violations.empty();
    std::ostringstream msg;
    msg << (b.pass ? "PASS" : "FAIL") << " params " << params << "/" << limits.max_params << " (margin "
        << b.param_margin << "), macs " << macs << "/" << limits.max_macs << " (margin " << b.mac_margin << ")";
    for (const auto& v : b.violations) msg << "; exceeds max " << v;
    b.message = msg.str();
    return b;
}

BudgetResult budget_gate(const ComplexityReport& report, BudgetLimits limits) {
    return budget_gate(report.params, report.macs, limits);
}

std::string format_report(const ComplexityReport& r) {
    std::ostringstream os;
    char line[160];
    os << "network    " << r.label << "\n";
    os << "arch       " << r.arch << "\n";
    os << "precision  " << precision_name(r.precision) << "\n\n";
    std::snprintf(line, sizeof line, "%-34s %-12s %10s %12s %10s\n", "layer", "kind", "params", "macs", "bytes");
    os << line;
    for (const auto& l : r.layers) {
        std::snprintf(line, sizeof line, "%-34s %-12s %10zu %12zu %10zu\n", l.name.c_str(),
                      std::string(kind_name(l.kind)).c_str(), l.params, l.macs, l.payload_bytes);
        os << line;
    }
    std::snprintf(line, sizeof line, "%-34s %-12s %10zu %12zu %10zu\n\n", "total", "", r.params, r.macs,
                  r.payload_bytes());
    os << line;
    os << "params               " << r.params << "\n";
    os << "macs                 " << r.macs << " (" << millions(r.macs) << " M)\n";
    os << "tensor_bytes         " << r.tensor_bytes << "\n";
    os << "qparam_bytes         " << r.qparam_bytes << "\n";
    os << "payload_bytes        " << r.payload_bytes() << " (" << kilobytes(r.payload_bytes()) << " KB)\n";
    if (r.container_overhead) {
        os << "container_overhead   " << *r.container_overhead << "\n";
        os << "file_bytes           " << *r.file_bytes() << " (" << kilobytes(*r.file_bytes()) << " KB)\n";
    }
    os << "convention           " << r.convention << "; 1 KB = 1000 bytes\n";
    return os.str();
}

std::string format_key_values(const ComplexityReport& r) {
    std::ostringstream os;
    os << "label=" << r.label << "\n";
    os << "arch=" << r.arch << "\n";
    os << "precision=" << precision_name(r.precision) << "\n";
    os << "members=" << r.members << "\n";
    os << "params=" << r.params << "\n";
    os << "macs=" << r.macs << "\n";
    os << "macs_millions=" << millions(r.macs) << "\n";
    os << "tensor_bytes=" << r.tensor_bytes << "\n";
    os << "qparam_bytes=" << r.qparam_bytes << "\n";
    os << "payload_bytes=" << r.payload_bytes() << "\n";
    if (r.container_overhead) {
        os << "container_overhead_bytes=" << *r.container_overhead << "\n";
        os << "file_bytes=" << *r.file_bytes() << "\n";
    }
    for (const auto& l : r.layers) {
        os << "layer." << l.name << ".params=" << l.params << "\n";
        os << "layer." << l.name << ".macs=" << l.macs << "\n";
        os << "layer." << l.name << ".bytes=" << l.payload_bytes << "\n";
    }
    os << "convention=" << r.convention << "\n";
    os << "kb_bytes=" << format_number(kBytesPerKB) << "\n";
    return os.str();
}

}  // namespace lcnn
