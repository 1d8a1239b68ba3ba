#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridmrf/grid_model.hpp"

namespace gridmrf {

// On-disk model document: everything needed to rebuild a GridMrf plus the
// seed that generated the observations (provenance only).
struct ModelFile {
    int rows = 0;
    int cols = 0;
    int n_states = 0;
    PotentialSpec potential;
    std::vector<int> observations;  // row-major
    std::uint64_t seed = 0;
};

ModelFile load_model_file(const std::filesystem::path& path);
void save_model_file(const std::filesystem::path& path, const ModelFile& model);

GridMrf build_from_model_file(const ModelFile& model);

std::string potential_kind_name(PotentialSpec::Kind kind);
PotentialSpec::Kind parse_potential_kind(const std::string& name);

nlohmann::json potential_spec_to_json(const PotentialSpec& spec);
PotentialSpec potential_spec_from_json(const nlohmann::json& j);

}  // namespace gridmrf
