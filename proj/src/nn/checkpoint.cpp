#include "scribseg/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace scribseg::nn {

namespace {
constexpr char kMagic[8] = {'S', 'S', 'C', 'K', 'P', 'T', '1', '\n'};
}

void Checkpoint::save(const std::string& path) const {
    nlohmann::json header;
    header["version"] = kVersion;
    header["meta"] = meta;
    auto& arr = header["arrays"] = nlohmann::json::array();
    for (const auto& [name, values] : arrays)
        arr.push_back({{"name", name}, {"count", values.size()}});
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
    f.write(kMagic, sizeof(kMagic));
    const uint64_t len = hs.size();
    f.write(reinterpret_cast<const char*>(&len), sizeof(len));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, values] : arrays)
        f.write(reinterpret_cast<const char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot read " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint64_t len = 0;
    f.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string hs(len, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(len));
    nlohmann::json header = nlohmann::json::parse(hs);
    if (header.at("version").get<int>() > kVersion)
        throw std::runtime_error("checkpoint: unsupported version in " + path);

    Checkpoint ck;
    ck.meta = header.value("meta", nlohmann::json::object());
    for (const auto& a : header.at("arrays")) {
        std::vector<double> values(a.at("count").get<size_t>());
        f.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(values.size() * sizeof(double)));
        ck.arrays.emplace_back(a.at("name").get<std::string>(), std::move(values));
    }
    if (!f) throw std::runtime_error("checkpoint: truncated file " + path);
    return ck;
}

}  // namespace scribseg::nn
