#include <cstring>
#include <fstream>

#include "nadir/binary_io.hpp"
#include "nadir/error.hpp"
#include "nadir/nn.hpp"

namespace nadir::nn {

namespace {

constexpr char kMagic[8] = {'N', 'A', 'D', 'I', 'R', 'N', 'N', '\0'};
constexpr std::uint32_t kVersion = 1;

void write_block(std::ostream& out, std::span<const double> values) {
    binary::write<std::uint64_t>(out, values.size());
    binary::write_f64s(out, values);
}

void read_block(std::istream& in, std::vector<double>& values) {
    const auto n = binary::read<std::uint64_t>(in);
    if (n != values.size()) throw Error(ErrorCode::Storage, "parameter block size disagrees with the layer descriptor");
    binary::read_f64s(in, values);
}

Activation activation_from(std::uint32_t v) {
    if (v > 2) throw Error(ErrorCode::Storage, "unknown activation code " + std::to_string(v));
    return static_cast<Activation>(v);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Storage, "cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof kMagic);
    binary::write<std::uint32_t>(out, kVersion);
    binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(net.name.size()));
    out.write(net.name.data(), static_cast<std::streamsize>(net.name.size()));
    for (int d : {net.input_shape.channels, net.input_shape.height, net.input_shape.width})
        binary::write<std::int32_t>(out, d);
    binary::write<double>(out, net.scaling.min);
    binary::write<double>(out, net.scaling.max);
    binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& layer : net.layers) {
        binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(layer->kind()));
        if (const auto* c = dynamic_cast<const ConvLayer*>(layer.get())) {
            for (int v : {c->in_channels, c->out_channels, c->kernel, c->stride}) binary::write<std::int32_t>(out, v);
            binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(c->activation));
            write_block(out, c->weights);
            write_block(out, c->bias);
        } else if (const auto* p = dynamic_cast<const PoolLayer*>(layer.get())) {
            binary::write<std::int32_t>(out, p->window);
            binary::write<std::int32_t>(out, p->stride);
            binary::write<double>(out, p->beta);
            binary::write<double>(out, p->offset);
            binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(p->activation));
        } else if (const auto* d = dynamic_cast<const DenseLayer*>(layer.get())) {
            binary::write<std::int32_t>(out, d->inputs);
            binary::write<std::int32_t>(out, d->units);
            binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(d->activation));
            write_block(out, d->weights);
            write_block(out, d->bias);
        } else {
            throw Error(ErrorCode::Storage, "layer '" + layer->describe() + "' cannot be serialized");
        }
    }
    if (!out) throw Error(ErrorCode::Storage, "write failed for " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Storage, "cannot open " + path.string());
    try {
        char magic[8];
        in.read(magic, sizeof magic);
        if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error(ErrorCode::Storage, "not a checkpoint file");
        const auto version = binary::read<std::uint32_t>(in);
        if (version != kVersion) throw Error(ErrorCode::Storage, "unsupported checkpoint version " + std::to_string(version));
        Network net;
        const auto name_len = binary::read<std::uint32_t>(in);
        if (name_len > 256) throw Error(ErrorCode::Storage, "corrupt model name");
        net.name.resize(name_len);
        in.read(net.name.data(), name_len);
        net.input_shape.channels = binary::read<std::int32_t>(in);
        net.input_shape.height = binary::read<std::int32_t>(in);
        net.input_shape.width = binary::read<std::int32_t>(in);
        net.scaling.min = binary::read<double>(in);
        net.scaling.max = binary::read<double>(in);
        const auto count = binary::read<std::uint32_t>(in);
        for (std::uint32_t i = 0; i < count; ++i) {
            const auto kind = static_cast<LayerKind>(binary::read<std::uint32_t>(in));
            switch (kind) {
                case LayerKind::Conv: {
                    const int ic = binary::read<std::int32_t>(in), oc = binary::read<std::int32_t>(in);
                    const int k = binary::read<std::int32_t>(in), s = binary::read<std::int32_t>(in);
                    auto layer = std::make_unique<ConvLayer>(ic, oc, k, s, activation_from(binary::read<std::uint32_t>(in)));
                    read_block(in, layer->weights);
                    read_block(in, layer->bias);
                    net.add(std::move(layer));
                    break;
                }
                case LayerKind::Pool: {
                    const int w = binary::read<std::int32_t>(in), s = binary::read<std::int32_t>(in);
                    const double beta = binary::read<double>(in), offset = binary::read<double>(in);
                    net.add(std::make_unique<PoolLayer>(w, s, beta, offset, activation_from(binary::read<std::uint32_t>(in))));
                    break;
                }
                case LayerKind::Dense: {
                    const int ni = binary::read<std::int32_t>(in), nu = binary::read<std::int32_t>(in);
                    auto layer = std::make_unique<DenseLayer>(ni, nu, activation_from(binary::read<std::uint32_t>(in)));
                    read_block(in, layer->weights);
                    read_block(in, layer->bias);
                    net.add(std::move(layer));
                    break;
                }
                default:
                    throw Error(ErrorCode::Storage, "unknown layer kind");
            }
        }
        net.shape_trace();
        return net;
    } catch (const Error& e) {
        throw Error(ErrorCode::Storage, path.string() + ": " + e.what());
    }
}

}  // namespace nadir::nn
