#ifndef PETSEG_NET_CHECKPOINT_HPP
#define PETSEG_NET_CHECKPOINT_HPP

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "petseg/net/network.hpp"

namespace petseg::net {

// Checkpoint container: 8-byte magic, u32 version, u64 JSON header length,
// the JSON header (config, seed, epoch, optimizer, tensor table), then the
// raw little-endian arrays in table order followed by the optimizer
// velocity. Round-trips are bit-exact.
inline constexpr char kCheckpointMagic[8] = {'P', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json config_to_json(const NetConfig& c) {
    return {{"in_channels", c.in_channels},
            {"num_classes", c.num_classes},
            {"base_features", c.base_features},
            {"num_downsamples", c.num_downsamples},
            {"feature_cap", c.feature_cap},
            {"leaky_slope", c.leaky_slope},
            {"norm_epsilon", c.norm_epsilon}};
}

inline NetConfig config_from_json(const nlohmann::json& j) {
    NetConfig c;
    c.in_channels = j.at("in_channels").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.base_features = j.at("base_features").get<int>();
    c.num_downsamples = j.at("num_downsamples").get<int>();
    c.feature_cap = j.at("feature_cap").get<int>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.norm_epsilon = j.at("norm_epsilon").get<double>();
    return c;
}

template <typename T>
constexpr const char* precision_name() {
    return sizeof(T) == 4 ? "f32" : "f64";
}

} // namespace detail

template <typename T>
void save_checkpoint(Network<T>& net, const OptimizerState& opt, std::uint64_t seed,
                     const std::filesystem::path& path) {
    auto params = net.parameters();
    nlohmann::json header;
    header["precision"] = detail::precision_name<T>();
    header["config"] = detail::config_to_json(net.config);
    header["seed"] = seed;
    header["epoch"] = opt.epoch;
    header["optimizer"] = {{"learning_rate", opt.learning_rate},
                           {"momentum", opt.momentum},
                           {"poly_decay", opt.poly_decay},
                           {"poly_exponent", opt.poly_exponent},
                           {"epoch", opt.epoch},
                           {"max_epochs", opt.max_epochs},
                           {"velocity_count", opt.velocity.size()}};
    nlohmann::json table = nlohmann::json::array();
    for (const auto& p : params) table.push_back({{"name", p.name}, {"count", p.count}});
    header["tensors"] = table;

    const std::string header_text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write checkpoint: " + path.string());
    out.write(kCheckpointMagic, 8);
    const std::uint32_t version = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t header_len = header_text.size();
    out.write(reinterpret_cast<const char*>(&header_len), 8);
    out.write(header_text.data(), std::streamsize(header_text.size()));
    for (const auto& p : params)
        out.write(reinterpret_cast<const char*>(p.values), std::streamsize(p.count * sizeof(T)));
    out.write(reinterpret_cast<const char*>(opt.velocity.data()),
              std::streamsize(opt.velocity.size() * sizeof(double)));
    if (!out)
        throw IoError("checkpoint write failed: " + path.string());
}

struct CheckpointInfo {
    std::string precision;
    NetConfig config;
    std::uint64_t seed = 0;
    int epoch = 0;
};

inline CheckpointInfo peek_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t header_len = 0;
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&header_len), 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw FormatError("not a checkpoint file: " + path.string());
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version");
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), std::streamsize(header_len));
    if (!in)
        throw TruncationError("checkpoint header truncated");
    const auto header = nlohmann::json::parse(header_text);

    CheckpointInfo info;
    info.precision = header.at("precision").get<std::string>();
    info.config = detail::config_from_json(header.at("config"));
    info.seed = header.at("seed").get<std::uint64_t>();
    info.epoch = header.at("epoch").get<int>();
    return info;
}

template <typename T>
std::pair<Network<T>, OptimizerState> load_checkpoint(const std::filesystem::path& path,
                                                      std::uint64_t* seed_out = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t header_len = 0;
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&header_len), 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw FormatError("not a checkpoint file: " + path.string());
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version");

    std::string header_text(header_len, '\0');
    in.read(header_text.data(), std::streamsize(header_len));
    if (!in)
        throw TruncationError("checkpoint header truncated");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header parse error: ") + e.what());
    }

    if (header.at("precision").get<std::string>() != detail::precision_name<T>())
        throw FormatError("checkpoint precision does not match the requested scalar type");

    const NetConfig config = detail::config_from_json(header.at("config"));
    if (seed_out) *seed_out = header.at("seed").get<std::uint64_t>();

    Network<T> net = build_network<T>(config, 0);
    auto params = net.parameters();
    const auto& table = header.at("tensors");
    if (table.size() != params.size())
        throw FormatError("checkpoint tensor table does not match the architecture");
    for (std::size_t idx = 0; idx < params.size(); ++idx) {
        const auto& entry = table[idx];
        if (entry.at("name").get<std::string>() != params[idx].name ||
            entry.at("count").get<std::size_t>() != params[idx].count)
            throw FormatError("checkpoint tensor " + params[idx].name + " does not match");
        in.read(reinterpret_cast<char*>(params[idx].values),
                std::streamsize(params[idx].count * sizeof(T)));
    }

    OptimizerState opt;
    const auto& jopt = header.at("optimizer");
    opt.learning_rate = jopt.at("learning_rate").get<double>();
    opt.momentum = jopt.at("momentum").get<double>();
    opt.poly_decay = jopt.at("poly_decay").get<bool>();
    opt.poly_exponent = jopt.at("poly_exponent").get<double>();
    opt.epoch = jopt.at("epoch").get<int>();
    opt.max_epochs = jopt.at("max_epochs").get<int>();
    const auto velocity_count = jopt.at("velocity_count").get<std::size_t>();
    opt.velocity.resize(velocity_count);
    in.read(reinterpret_cast<char*>(opt.velocity.data()),
            std::streamsize(velocity_count * sizeof(double)));
    if (!in)
        throw TruncationError("checkpoint payload truncated");
    return {std::move(net), std::move(opt)};
}

} // namespace petseg::net

#endif
