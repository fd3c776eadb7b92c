#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace scribseg::nn {

// Single-file archive of named double arrays plus a free-form JSON header.
// Used for model parameters, optimizer state, BN statistics and the memory
// bank so training resumes exactly.
struct Checkpoint {
    static constexpr int kVersion = 1;

    nlohmann::json meta;
    std::vector<std::pair<std::string, std::vector<double>>> arrays;

    void add(const std::string& name, const std::vector<double>& values) {
        arrays.emplace_back(name, values);
    }
    const std::vector<double>* find(const std::string& name) const {
        for (const auto& [n, v] : arrays)
            if (n == name) return &v;
        return nullptr;
    }
    const std::vector<double>& require(const std::string& name) const {
        const auto* v = find(name);
        if (!v) throw std::runtime_error("checkpoint: missing array " + name);
        return *v;
    }

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace scribseg::nn
