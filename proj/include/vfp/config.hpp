#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vfp/descriptor.hpp"
#include "vfp/scale_space.hpp"
#include "vfp/similarity_graph.hpp"

namespace vfp {

/// Whole-run configuration, read from one JSON document. Every field has a
/// default; unknown keys are rejected so typos cannot silently change runs.
struct RunConfig {
    ScaleSpaceConfig scale_space;
    DescriptorConfig descriptor;
    GraphOptions graph;
    int k_max = 50;
    std::vector<int> sweep_k = {10, 20, 30, 40, 50};
    double target_spacing = 0.0;  // mm; 0 disables resampling
    int max_dim = 1024;           // resampling output cap per axis
    std::uint64_t seed = 0;
    int threads = 0;              // 0 = hardware default
};

/// Layout: {"scale_space": {...}, "descriptor": {...}, "graph": {...},
/// "evaluation": {"k_max", "sweep_k"}, "resample": {"target_spacing",
/// "max_dim"}, "seed", "threads"}. All sections optional.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Raises InvalidConfig when any field is out of range.
void validate_run_config(const RunConfig& cfg);

}  // namespace vfp
