#include "vfp/config.hpp"

#include <set>

#include <json.hpp>

#include "vfp/detail/binary_io.hpp"
#include "vfp/errors.hpp"
#include "vfp/volume.hpp"

namespace vfp {

using json = nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            raise(ErrorCode::InvalidConfig, "unknown key \"" + it.key() + "\" in " + where);
}

double get_real(const json& obj, const char* key, double fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number()) raise(ErrorCode::InvalidConfig, std::string(key) + " must be a number");
    return it->get<double>();
}

int get_int(const json& obj, const char* key, int fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_integer())
        raise(ErrorCode::InvalidConfig, std::string(key) + " must be an integer");
    return it->get<int>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean()) raise(ErrorCode::InvalidConfig, std::string(key) + " must be a boolean");
    return it->get<bool>();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        raise(ErrorCode::InvalidConfig, "config is not a JSON object");
    check_keys(doc, {"scale_space", "descriptor", "graph", "evaluation", "resample", "seed",
                     "threads"},
               "config root");

    RunConfig cfg;
    if (auto it = doc.find("scale_space"); it != doc.end()) {
        if (!it->is_object()) raise(ErrorCode::InvalidConfig, "scale_space must be an object");
        check_keys(*it, {"octaves", "scales_per_octave", "base_sigma", "contrast_threshold",
                         "edge_ratio_threshold"},
                   "scale_space");
        cfg.scale_space.octaves = get_int(*it, "octaves", cfg.scale_space.octaves);
        cfg.scale_space.scales_per_octave =
            get_int(*it, "scales_per_octave", cfg.scale_space.scales_per_octave);
        cfg.scale_space.base_sigma = get_real(*it, "base_sigma", cfg.scale_space.base_sigma);
        cfg.scale_space.contrast_threshold =
            get_real(*it, "contrast_threshold", cfg.scale_space.contrast_threshold);
        cfg.scale_space.edge_ratio_threshold =
            get_real(*it, "edge_ratio_threshold", cfg.scale_space.edge_ratio_threshold);
    }
    if (auto it = doc.find("descriptor"); it != doc.end()) {
        if (!it->is_object()) raise(ErrorCode::InvalidConfig, "descriptor must be an object");
        check_keys(*it, {"subregions", "orientation_bins", "window_radius_sigmas", "clamp"},
                   "descriptor");
        cfg.descriptor.subregions = get_int(*it, "subregions", cfg.descriptor.subregions);
        cfg.descriptor.orientation_bins =
            get_int(*it, "orientation_bins", cfg.descriptor.orientation_bins);
        cfg.descriptor.window_radius_sigmas =
            get_real(*it, "window_radius_sigmas", cfg.descriptor.window_radius_sigmas);
        cfg.descriptor.clamp = get_real(*it, "clamp", cfg.descriptor.clamp);
    }
    if (auto it = doc.find("graph"); it != doc.end()) {
        if (!it->is_object()) raise(ErrorCode::InvalidConfig, "graph must be an object");
        check_keys(*it, {"k", "modalities", "allow_self_edges"}, "graph");
        cfg.graph.k = get_int(*it, "k", cfg.graph.k);
        cfg.graph.allow_self_edges =
            get_bool(*it, "allow_self_edges", cfg.graph.allow_self_edges);
        if (auto m = it->find("modalities"); m != it->end()) {
            if (!m->is_array())
                raise(ErrorCode::InvalidConfig, "graph.modalities must be an array of strings");
            cfg.graph.modalities.clear();
            for (const auto& e : *m) {
                if (!e.is_string())
                    raise(ErrorCode::InvalidConfig, "graph.modalities must be an array of strings");
                cfg.graph.modalities.push_back(normalize_modality(e.get<std::string>()));
            }
        }
    }
    if (auto it = doc.find("evaluation"); it != doc.end()) {
        if (!it->is_object()) raise(ErrorCode::InvalidConfig, "evaluation must be an object");
        check_keys(*it, {"k_max", "sweep_k"}, "evaluation");
        cfg.k_max = get_int(*it, "k_max", cfg.k_max);
        if (auto s = it->find("sweep_k"); s != it->end()) {
            if (!s->is_array())
                raise(ErrorCode::InvalidConfig, "evaluation.sweep_k must be an array of integers");
            cfg.sweep_k.clear();
            for (const auto& e : *s) {
                if (!e.is_number_integer())
                    raise(ErrorCode::InvalidConfig, "evaluation.sweep_k must be an array of integers");
                cfg.sweep_k.push_back(e.get<int>());
            }
        }
    }
    if (auto it = doc.find("resample"); it != doc.end()) {
        if (!it->is_object()) raise(ErrorCode::InvalidConfig, "resample must be an object");
        check_keys(*it, {"target_spacing", "max_dim"}, "resample");
        cfg.target_spacing = get_real(*it, "target_spacing", cfg.target_spacing);
        cfg.max_dim = get_int(*it, "max_dim", cfg.max_dim);
    }
    if (auto it = doc.find("seed"); it != doc.end()) {
        if (!it->is_number_unsigned() && !it->is_number_integer())
            raise(ErrorCode::InvalidConfig, "seed must be an integer");
        cfg.seed = it->get<std::uint64_t>();
    }
    cfg.threads = get_int(doc, "threads", cfg.threads);

    validate_run_config(cfg);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    auto buf = detail::read_file(path);
    return parse_run_config(std::string(buf.begin(), buf.end()));
}

void validate_run_config(const RunConfig& cfg) {
    const auto& ss = cfg.scale_space;
    if (ss.octaves < 1) raise(ErrorCode::InvalidConfig, "octaves must be at least 1");
    if (ss.scales_per_octave < 1)
        raise(ErrorCode::InvalidConfig, "scales_per_octave must be at least 1");
    if (ss.base_sigma <= 0.0) raise(ErrorCode::InvalidConfig, "base_sigma must be positive");
    if (ss.contrast_threshold < 0.0)
        raise(ErrorCode::InvalidConfig, "contrast_threshold must be non-negative");
    if (ss.edge_ratio_threshold <= 1.0)
        raise(ErrorCode::InvalidConfig, "edge_ratio_threshold must exceed 1");

    const auto& d = cfg.descriptor;
    if (d.subregions < 1) raise(ErrorCode::InvalidConfig, "subregions must be at least 1");
    if (d.orientation_bins != 12)
        raise(ErrorCode::InvalidConfig, "orientation_bins must be 12 (icosahedral set)");
    if (d.window_radius_sigmas <= 0.0)
        raise(ErrorCode::InvalidConfig, "window_radius_sigmas must be positive");
    if (d.clamp <= 0.0 || d.clamp > 1.0)
        raise(ErrorCode::InvalidConfig, "clamp must lie in (0,1]");

    if (cfg.graph.k < 1) raise(ErrorCode::InvalidConfig, "graph.k must be at least 1");
    if (cfg.k_max < 1) raise(ErrorCode::InvalidConfig, "k_max must be at least 1");
    if (cfg.sweep_k.empty()) raise(ErrorCode::InvalidConfig, "sweep_k must not be empty");
    for (int k : cfg.sweep_k)
        if (k < 1) raise(ErrorCode::InvalidConfig, "sweep_k entries must be at least 1");
    if (cfg.target_spacing < 0.0)
        raise(ErrorCode::InvalidConfig, "target_spacing must be non-negative");
    if (cfg.max_dim < 1) raise(ErrorCode::InvalidConfig, "max_dim must be at least 1");
    if (cfg.threads < 0) raise(ErrorCode::InvalidConfig, "threads must be non-negative");
}

}  // namespace vfp
