#include "lcnn/container.hpp"

#include <zlib.h>

#include <set>

#include "lcnn/bytes.hpp"
#include "lcnn/format.hpp"

namespace lcnn {

namespace {

constexpr std::uint8_t kDtypeFloat32 = 0;
constexpr std::uint8_t kDtypeInt8 = 1;

// Keys written by the serializer itself; stripped again on load.
const std::set<std::string, std::less<>> kReservedMeta = {"name", "precision", "bn_eps", "bn_momentum", "layout",
                                                         "flatten_order"};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    return static_cast<std::uint32_t>(
        ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

class SectionWriter {
public:
    explicit SectionWriter(ByteWriter& w, std::string_view tag) : w_(w) {
        w_.tag(tag);
        length_at_ = w_.size();
        w_.u32(0);
    }
    ~SectionWriter() { w_.patch_u32(length_at_, static_cast<std::uint32_t>(w_.size() - length_at_ - 4)); }

    SectionWriter(const SectionWriter&) = delete;
    SectionWriter& operator=(const SectionWriter&) = delete;

private:
    ByteWriter& w_;
    std::size_t length_at_;
};

void write_header(ByteWriter& w) {
    w.tag("LCNN");
    w.u16(kContainerVersion);
}

void write_shape(ByteWriter& w, const Shape& shape) {
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (std::size_t d : shape) w.u32(static_cast<std::uint32_t>(d));
}

void write_float_data(ByteWriter& w, std::span<const float> data) {
    for (float v : data) w.f32(v);
}

void write_meta(ByteWriter& w, const std::map<std::string, std::string>& meta) {
    SectionWriter s(w, "META");
    w.u32(static_cast<std::uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
        w.str16(k);
        w.str32(v);
    }
}

void write_crc(ByteWriter& w) {
    const std::uint32_t crc = crc32_of(w.buffer());
    w.tag("CRC ");
    w.u32(4);
    w.u32(crc);
}

void read_header(ByteReader& r) {
    r.set_section("header");
    if (r.tag() != "LCNN") {
        r.seek(0);
        r.fail("bad magic (expected LCNN)");
    }
    const std::uint16_t version = r.u16();
    if (version != kContainerVersion) r.fail("unsupported container version " + std::to_string(version));
}

Shape read_shape(ByteReader& r) {
    const std::size_t rank = r.u8();
    Shape shape(rank);
    for (auto& d : shape) {
        d = r.u32();
        if (d == 0) r.fail("zero extent in tensor shape");
    }
    return shape;
}

std::vector<float> read_float_data(ByteReader& r, std::size_t n) {
    std::vector<float> out(n);
    for (auto& v : out) v = r.f32();
    return out;
}

std::map<std::string, std::string> read_meta(ByteReader& r) {
    std::map<std::string, std::string> meta;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string key = r.str16();
        meta[std::move(key)] = r.str32();
    }
    return meta;
}

struct Section {
    std::string tag;
    std::size_t start;  // offset of the tag
    std::span<const std::uint8_t> payload;
    std::size_t payload_offset;
};

// Splits the body after the header into sections and checks the CRC trailer.
std::vector<Section> read_sections(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    read_header(r);
    std::vector<Section> sections;
    bool have_crc = false;
    while (!r.at_end()) {
        r.set_section("section header");
        const std::size_t start = r.offset();
        std::string tag = r.tag();
        r.set_section(tag);
        const std::uint32_t length = r.u32();
        const std::size_t payload_offset = r.offset();
        auto payload = r.bytes(length);
        if (tag == "CRC ") {
            if (length != 4) {
                r.seek(payload_offset);
                r.fail("checksum trailer must hold 4 bytes");
            }
            ByteReader cr(payload, tag);
            const std::uint32_t stored = cr.u32();
            const std::uint32_t actual = crc32_of(bytes.first(start));
            if (stored != actual) {
                r.seek(payload_offset);
                r.fail("checksum mismatch");
            }
            if (!r.at_end()) r.fail("data after checksum trailer");
            have_crc = true;
            break;
        }
        sections.push_back({std::move(tag), start, payload, payload_offset});
    }
    if (!have_crc) {
        r.set_section("CRC ");
        r.fail("missing checksum trailer (file truncated?)");
    }
    return sections;
}

// Reader over one section payload that reports absolute offsets.
class PayloadReader : public ByteReader {
public:
    PayloadReader(std::span<const std::uint8_t> file, const Section& s)
        : ByteReader(file.first(s.payload_offset + s.payload.size()), s.tag), end_(s.payload_offset + s.payload.size()) {
        seek(s.payload_offset);
    }
    void expect_end() {
        if (offset() != end_) fail("section has " + std::to_string(end_ - offset()) + " unexpected trailing bytes");
    }

private:
    std::size_t end_;
};

}  // namespace

std::vector<std::uint8_t> serialize(const Network& net) {
    const bool int8 = net.precision == Precision::Int8;
    if (int8 && net.quantized.size() != net.layers.size()) {
        throw StructuralError("serialize: int8 network has no quantized tensors for every layer");
    }
    ByteWriter w;
    write_header(w);
    {
        SectionWriter s(w, "ARCH");
        const ArchConfig& c = net.config;
        for (std::size_t v : {c.c1, c.c2, c.c3, c.dense, c.n_classes, c.in_channels, c.in_height, c.in_width}) {
            w.u32(static_cast<std::uint32_t>(v));
        }
        w.u8(static_cast<std::uint8_t>(net.precision));
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer<float>& layer = net.layers[i];
        const std::size_t count = int8 ? net.quantized[i].size() : layer.params.size();
        if (count == 0) continue;
        SectionWriter s(w, "LAYR");
        w.str16(layer.name);
        w.u8(static_cast<std::uint8_t>(layer.spec.kind));
        w.u8(static_cast<std::uint8_t>(count));
        for (std::size_t t = 0; t < count; ++t) {
            if (int8) {
                const QuantizedTensor& q = net.quantized[i][t];
                w.u8(kDtypeInt8);
                write_shape(w, q.shape);
                w.f32(q.qparams.scale);
                w.i32(q.qparams.zero_point);
                w.bytes({reinterpret_cast<const std::uint8_t*>(q.data.data()), q.data.size()});
            } else {
                const Tensor& p = layer.params[t];
                w.u8(kDtypeFloat32);
                write_shape(w, p.shape());
                write_float_data(w, p.data());
            }
        }
    }
    std::map<std::string, std::string> meta = net.meta;
    meta["name"] = net.name;
    meta["precision"] = std::string(precision_name(net.precision));
    meta["bn_eps"] = format_number(nn::kBatchNormEps);
    meta["bn_momentum"] = format_number(nn::kBatchNormMomentum);
    meta["layout"] = "NCHW row-major";
    meta["flatten_order"] = "channel-major (C,H,W)";
    write_meta(w, meta);
    write_crc(w);
    return w.take();
}

Network deserialize(std::span<const std::uint8_t> bytes) {
    const std::vector<Section> sections = read_sections(bytes);
    Network net;
    bool have_arch = false;
    bool have_meta = false;
    std::size_t next_layer = 0;

    for (const Section& s : sections) {
        PayloadReader r(bytes, s);
        if (s.tag == "ARCH") {
            if (have_arch) r.fail("duplicate ARCH section");
            ArchConfig& c = net.config;
            for (std::size_t* v : {&c.c1, &c.c2, &c.c3, &c.dense, &c.n_classes, &c.in_channels, &c.in_height,
                                   &c.in_width}) {
                *v = r.u32();
            }
            const std::uint8_t precision = r.u8();
            if (precision > 1) r.fail("unknown precision tag " + std::to_string(precision));
            net.precision = static_cast<Precision>(precision);
            r.expect_end();
            try {
                net.layers = make_layers(net.config);
            } catch (const ConfigError& e) {
                r.fail(std::string("invalid architecture: ") + e.what());
            }
            if (net.precision == Precision::Int8) {
                net.quantized.assign(net.layers.size(), {});
                for (auto& layer : net.layers) layer.params.clear();
            }
            have_arch = true;
        } else if (s.tag == "LAYR") {
            if (!have_arch) r.fail("LAYR before ARCH");
            while (next_layer < net.layers.size() && param_shapes(net.layers[next_layer].spec).empty()) ++next_layer;
            if (next_layer == net.layers.size()) r.fail("more LAYR sections than the architecture has layers");
            Layer<float>& layer = net.layers[next_layer];
            const std::string name = r.str16();
            if (name != layer.name) r.fail("expected layer '" + layer.name + "', found '" + name + "'");
            const auto kind = static_cast<LayerKind>(r.u8());
            if (kind != layer.spec.kind) r.fail("layer '" + name + "' has the wrong kind");
            const std::vector<Shape> expected = param_shapes(layer.spec);
            const std::size_t count = r.u8();
            if (count != expected.size()) r.fail("layer '" + name + "' has " + std::to_string(count) + " tensors");
            for (std::size_t t = 0; t < count; ++t) {
                const std::uint8_t dtype = r.u8();
                const Shape shape = read_shape(r);
                if (shape != expected[t]) {
                    r.fail("layer '" + name + "' tensor " + std::to_string(t) + " has shape " + shape_str(shape) +
                           ", expected " + shape_str(expected[t]));
                }
                const std::size_t n = shape_numel(shape);
                if (dtype == kDtypeFloat32 && net.precision == Precision::Float32) {
                    layer.params[t] = Tensor(shape, read_float_data(r, n));
                } else if (dtype == kDtypeInt8 && net.precision == Precision::Int8) {
                    QuantizedTensor q;
                    q.shape = shape;
                    q.qparams.scale = r.f32();
                    q.qparams.zero_point = r.i32();
                    if (!(q.qparams.scale > 0.0f) || q.qparams.zero_point < -128 || q.qparams.zero_point > 127) {
                        r.fail("invalid quantization parameters");
                    }
                    auto raw = r.bytes(n);
                    q.data.resize(n);
                    for (std::size_t k = 0; k < n; ++k) q.data[k] = static_cast<std::int8_t>(raw[k]);
                    net.quantized[next_layer].push_back(std::move(q));
                } else {
                    r.fail("tensor dtype " + std::to_string(dtype) + " does not match network precision");
                }
            }
            r.expect_end();
            ++next_layer;
        } else if (s.tag == "META") {
            net.meta = read_meta(r);
            r.expect_end();
            have_meta = true;
        } else {
            r.fail("unexpected section in a network container");
        }
    }

    ByteReader tail(bytes, "LAYR");
    tail.seek(bytes.size());
    if (!have_arch) {
        tail.set_section("ARCH");
        tail.fail("missing ARCH section");
    }
    while (next_layer < net.layers.size() && param_shapes(net.layers[next_layer].spec).empty()) ++next_layer;
    if (next_layer != net.layers.size()) tail.fail("missing LAYR section for '" + net.layers[next_layer].name + "'");
    if (have_meta) {
        if (auto it = net.meta.find("name"); it != net.meta.end()) net.name = it->second;
        std::erase_if(net.meta, [](const auto& kv) { return kReservedMeta.contains(kv.first); });
    }
    return net;
}

void save(const Network& net, const std::filesystem::path& path) { write_file(path, serialize(net)); }

Network load(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    try {
        return deserialize(bytes);
    } catch (const ParseError& e) {
        throw ParseError(e.section(), e.offset(), path.string() + ": " + e.detail());
    }
}

std::vector<std::uint8_t> serialize_features(const audio::FeatureMap& features) {
    ByteWriter w;
    write_header(w);
    {
        SectionWriter s(w, "FEAT");
        w.u8(kDtypeFloat32);
        write_shape(w, features.data.shape());
        write_float_data(w, features.data.data());
    }
    write_meta(w, features.metadata);
    write_crc(w);
    return w.take();
}

audio::FeatureMap deserialize_features(std::span<const std::uint8_t> bytes) {
    audio::FeatureMap fm;
    bool have_feat = false;
    for (const Section& s : read_sections(bytes)) {
        PayloadReader r(bytes, s);
        if (s.tag == "FEAT") {
            if (r.u8() != kDtypeFloat32) r.fail("feature maps are stored as float32");
            const Shape shape = read_shape(r);
            fm.data = Tensor(shape, read_float_data(r, shape_numel(shape)));
            r.expect_end();
            have_feat = true;
        } else if (s.tag == "META") {
            fm.metadata = read_meta(r);
            r.expect_end();
        } else {
            r.fail("unexpected section in a feature container");
        }
    }
    if (!have_feat) {
        ByteReader tail(bytes, "FEAT");
        tail.seek(bytes.size());
        tail.fail("missing FEAT section");
    }
    return fm;
}

void save_features(const audio::FeatureMap& features, const std::filesystem::path& path) {
    write_file(path, serialize_features(features));
}

audio::FeatureMap load_features(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    try {
        return deserialize_features(bytes);
    } catch (const ParseError& e) {
        throw ParseError(e.section(), e.offset(), path.string() + ": " + e.detail());
    }
}

}  // namespace lcnn
