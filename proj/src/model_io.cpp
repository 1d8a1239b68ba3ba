#include "gridmrf/model_io.hpp"

#include <json.hpp>

#include <stdexcept>

#include "gridmrf/io_util.hpp"

namespace gridmrf {

using nlohmann::json;

std::string potential_kind_name(PotentialSpec::Kind kind) {
    return kind == PotentialSpec::Kind::potts ? "potts" : "random_table";
}

PotentialSpec::Kind parse_potential_kind(const std::string& name) {
    if (name == "potts") return PotentialSpec::Kind::potts;
    if (name == "random_table") return PotentialSpec::Kind::random_table;
    throw std::invalid_argument("unknown potential kind: " + name);
}

json potential_spec_to_json(const PotentialSpec& spec) {
    json j;
    j["kind"] = potential_kind_name(spec.kind);
    if (spec.kind == PotentialSpec::Kind::potts) {
        j["potts_coupling"] = spec.potts_coupling;
        j["potts_obs_strength"] = spec.potts_obs_strength;
    } else {
        j["table_seed"] = spec.table_seed;
    }
    return j;
}

PotentialSpec potential_spec_from_json(const json& j) {
    PotentialSpec spec;
    spec.kind = parse_potential_kind(j.at("kind").get<std::string>());
    if (spec.kind == PotentialSpec::Kind::potts) {
        spec.potts_coupling = j.at("potts_coupling").get<double>();
        spec.potts_obs_strength = j.at("potts_obs_strength").get<double>();
    } else {
        spec.table_seed = j.at("table_seed").get<std::uint64_t>();
    }
    return spec;
}

ModelFile load_model_file(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("model file " + path.string() + ": " + e.what());
    }
    ModelFile m;
    try {
        m.rows = j.at("rows").get<int>();
        m.cols = j.at("cols").get<int>();
        m.n_states = j.at("n_states").get<int>();
        m.potential = potential_spec_from_json(j.at("potential_spec"));
        m.observations = j.at("observations").get<std::vector<int>>();
        m.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw std::invalid_argument("model file " + path.string() + ": " + e.what());
    }
    return m;
}

void save_model_file(const std::filesystem::path& path, const ModelFile& model) {
    json j;
    j["rows"] = model.rows;
    j["cols"] = model.cols;
    j["n_states"] = model.n_states;
    j["potential_spec"] = potential_spec_to_json(model.potential);
    j["observations"] = model.observations;
    j["seed"] = model.seed;
    write_file_atomic(path, j.dump(2) + "\n");
}

GridMrf build_from_model_file(const ModelFile& model) {
    return build_grid_mrf(model.rows, model.cols, model.n_states, model.potential,
                          model.observations);
}

}  // namespace gridmrf
