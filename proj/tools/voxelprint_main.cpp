#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vfp/config.hpp"
#include "vfp/errors.hpp"
#include "vfp/evaluation.hpp"
#include "vfp/fingerprint.hpp"
#include "vfp/parallel.hpp"
#include "vfp/phantom.hpp"
#include "vfp/similarity_graph.hpp"
#include "vfp/visualize.hpp"
#include "vfp/volume_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct GlobalArgs {
    std::string config_path;
    int threads = -1;           // -1 = not given
    std::int64_t seed = -1;     // -1 = not given
};

vfp::RunConfig effective_config(const GlobalArgs& g) {
    vfp::RunConfig cfg;
    if (!g.config_path.empty()) cfg = vfp::load_run_config(g.config_path);
    if (g.threads >= 0) cfg.threads = g.threads;
    if (g.seed >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed);
    vfp::set_thread_count(cfg.threads);
    return cfg;
}

std::string resolve(const fs::path& base_dir, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) return p.string();
    return (base_dir / p).string();
}

vfp::Volume load_input_volume(const std::string& path, const std::string& modality,
                              const vfp::RunConfig& cfg) {
    vfp::LoadReport report;
    vfp::Volume v = vfp::load_volume(path, modality, &report);
    if (report.nonfinite_replaced > 0) {
        json line;
        line["file"] = path;
        line["nonfinite_replaced"] = report.nonfinite_replaced;
        std::cerr << line.dump() << "\n";
    }
    if (cfg.target_spacing > 0.0) v = vfp::resample_isotropic(v, cfg.target_spacing, cfg.max_dim);
    return v;
}

void write_subject_fingerprint(const std::string& subject, std::vector<vfp::Volume> volumes,
                               const vfp::RunConfig& cfg, const std::string& out_path) {
    vfp::FingerprintBuildReport report;
    vfp::Fingerprint fp =
        vfp::build_fingerprint(subject, volumes, cfg.scale_space, cfg.descriptor, &report);
    vfp::write_fingerprint(fp, out_path);
    for (const auto& m : report.modalities) {
        json line;
        line["subject"] = subject;
        line["modality"] = m.modality_id;
        line["detected"] = m.detected;
        line["low_contrast"] = m.low_contrast;
        line["edge_like"] = m.edge_like;
        line["margin_dropped"] = m.margin_dropped;
        line["kept"] = m.kept;
        std::cerr << line.dump() << "\n";
    }
    std::cout << "wrote " << out_path << "\n";
}

int cmd_extract(const GlobalArgs& g, const std::string& manifest_path,
                const std::string& subject, const std::vector<std::string>& volume_args,
                const std::string& out_dir, const std::string& out_file) {
    vfp::RunConfig cfg = effective_config(g);
    if (!manifest_path.empty()) {
        vfp::CohortManifest manifest = vfp::read_manifest(manifest_path);
        fs::path base = fs::path(manifest_path).parent_path();
        std::string dir = out_dir.empty() ? "." : out_dir;
        fs::create_directories(dir);
        for (const auto& e : manifest.entries) {
            std::vector<vfp::Volume> volumes;
            for (const auto& [mod, rel] : e.volumes)
                volumes.push_back(load_input_volume(resolve(base, rel), mod, cfg));
            write_subject_fingerprint(e.subject_id, std::move(volumes), cfg,
                                      (fs::path(dir) / (e.subject_id + ".vfp")).string());
        }
        return 0;
    }
    if (subject.empty())
        vfp::raise(vfp::ErrorCode::InvalidArgument, "need --manifest or --subject");
    if (volume_args.empty())
        vfp::raise(vfp::ErrorCode::InvalidArgument, "need at least one MODALITY=PATH volume");
    std::vector<vfp::Volume> volumes;
    for (const auto& arg : volume_args) {
        auto eq = arg.find('=');
        if (eq == std::string::npos || eq == 0)
            vfp::raise(vfp::ErrorCode::InvalidArgument,
                       "volume argument must look like MODALITY=PATH: " + arg);
        volumes.push_back(load_input_volume(arg.substr(eq + 1), arg.substr(0, eq), cfg));
    }
    std::string out = out_file.empty() ? subject + ".vfp" : out_file;
    write_subject_fingerprint(subject, std::move(volumes), cfg, out);
    return 0;
}

std::vector<vfp::Fingerprint> read_fingerprints(const std::vector<std::string>& paths) {
    std::vector<vfp::Fingerprint> fps;
    fps.reserve(paths.size());
    for (const auto& p : paths) fps.push_back(vfp::read_fingerprint(p));
    return fps;
}

int cmd_graph(const GlobalArgs& g, const std::vector<std::string>& fp_paths, int k_override,
              const std::string& modalities_csv, bool allow_self, const std::string& out) {
    vfp::RunConfig cfg = effective_config(g);
    vfp::GraphOptions opt = cfg.graph;
    if (k_override > 0) opt.k = k_override;
    if (!modalities_csv.empty()) {
        opt.modalities.clear();
        std::size_t start = 0;
        while (start <= modalities_csv.size()) {
            auto comma = modalities_csv.find(',', start);
            auto end = comma == std::string::npos ? modalities_csv.size() : comma;
            if (end > start)
                opt.modalities.push_back(
                    vfp::normalize_modality(modalities_csv.substr(start, end - start)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    if (allow_self) opt.allow_self_edges = true;

    auto fps = read_fingerprints(fp_paths);
    vfp::CohortGraph graph = vfp::build_graph(fps, opt);
    for (const auto& w : graph.warnings) {
        json line;
        line["warning"] = w;
        std::cerr << line.dump() << "\n";
    }
    vfp::write_graph(graph, out);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_similarity(const GlobalArgs& g, const std::vector<std::string>& graph_paths,
                   const std::string& out) {
    effective_config(g);
    std::vector<vfp::CohortGraph> graphs;
    graphs.reserve(graph_paths.size());
    for (const auto& p : graph_paths) graphs.push_back(vfp::read_graph(p));
    std::vector<const vfp::CohortGraph*> ptrs;
    for (const auto& gr : graphs) ptrs.push_back(&gr);
    vfp::SimilarityMatrix m = vfp::similarity_matrix(ptrs);
    vfp::write_similarity_csv(m, out);
    std::cout << "wrote " << out << "\n";
    return 0;
}

vfp::SiblingType parse_sibling_type(const std::string& s) {
    std::string t;
    for (char c : s) t += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (t == "MZ") return vfp::SiblingType::MZ;
    if (t == "DZ") return vfp::SiblingType::DZ;
    if (t == "NT") return vfp::SiblingType::NT;
    vfp::raise(vfp::ErrorCode::InvalidArgument, "sibling type must be MZ, DZ, or NT");
}

int cmd_evaluate(const GlobalArgs& g, const std::string& matrix_path,
                 const std::string& manifest_path, const std::string& type_str,
                 const std::string& out_dir, bool age_split, bool no_baseline) {
    vfp::RunConfig cfg = effective_config(g);
    vfp::SimilarityMatrix sim = vfp::read_similarity_csv(matrix_path);
    vfp::CohortManifest manifest = vfp::read_manifest(manifest_path);
    vfp::SiblingPairs pairs = vfp::derive_sibling_pairs(manifest);
    for (const auto& [a, b] : pairs.inconsistent) {
        json line;
        line["warning"] = "inconsistent twin labels; pair skipped";
        line["pair"] = {a, b};
        std::cerr << line.dump() << "\n";
    }
    vfp::SiblingType type = parse_sibling_type(type_str);
    const char* tag = type == vfp::SiblingType::MZ ? "MZ" : type == vfp::SiblingType::DZ ? "DZ" : "NT";
    fs::create_directories(out_dir);

    vfp::RecallCurve curve = vfp::recall_at_k(sim, pairs, type, cfg.k_max);
    std::string curve_path = (fs::path(out_dir) / (std::string("recall_") + tag + ".csv")).string();
    vfp::write_recall_csv(curve, curve_path);
    std::cout << "wrote " << curve_path << "\n";

    if (!no_baseline) {
        vfp::RecallCurve base =
            vfp::random_baseline(sim.subjects, pairs, type, cfg.k_max, cfg.seed);
        std::string base_path =
            (fs::path(out_dir) / (std::string("baseline_") + tag + ".csv")).string();
        vfp::write_recall_csv(base, base_path);
        std::cout << "wrote " << base_path << "\n";

        std::string wpath = (fs::path(out_dir) / (std::string("wilcoxon_") + tag + ".json")).string();
        std::string payload;
        try {
            vfp::WilcoxonResult res = vfp::wilcoxon_signed_rank(curve.mean_recall, base.mean_recall);
            payload = vfp::wilcoxon_to_json(res);
        } catch (const vfp::Error& e) {
            if (e.code() != vfp::ErrorCode::TooFewPairs) throw;
            json j;
            j["error"] = "too few nonzero differences for the signed-rank test";
            payload = j.dump(2) + "\n";
        }
        FILE* f = std::fopen(wpath.c_str(), "wb");
        if (!f) vfp::raise(vfp::ErrorCode::WriteFailed, "cannot open " + wpath);
        std::fwrite(payload.data(), 1, payload.size(), f);
        std::fclose(f);
        std::cout << "wrote " << wpath << "\n";
    }

    if (age_split) {
        vfp::AgeSplitResult split = vfp::age_split_analysis(sim, pairs, manifest, type, cfg.k_max);
        std::string low_path = (fs::path(out_dir) / (std::string("age_") + tag + "_low.csv")).string();
        std::string high_path =
            (fs::path(out_dir) / (std::string("age_") + tag + "_high.csv")).string();
        vfp::write_recall_csv(split.low, low_path);
        vfp::write_recall_csv(split.high, high_path);
        json j;
        j["split_value"] = split.split_value;
        j["degenerate"] = split.degenerate;
        j["low_probes"] = split.low.n_probes;
        j["high_probes"] = split.high.n_probes;
        if (split.test_valid) {
            j["test"] = json::parse(vfp::wilcoxon_to_json(split.test));
        }
        std::string jpath = (fs::path(out_dir) / (std::string("age_") + tag + ".json")).string();
        std::string payload = j.dump(2) + "\n";
        FILE* f = std::fopen(jpath.c_str(), "wb");
        if (!f) vfp::raise(vfp::ErrorCode::WriteFailed, "cannot open " + jpath);
        std::fwrite(payload.data(), 1, payload.size(), f);
        std::fclose(f);
        std::cout << "wrote " << low_path << "\n";
        std::cout << "wrote " << high_path << "\n";
        std::cout << "wrote " << jpath << "\n";
    }
    return 0;
}

int cmd_sweep_k(const GlobalArgs& g, const std::vector<std::string>& fp_paths,
                const std::string& manifest_path, const std::string& type_str,
                const std::string& out_dir) {
    vfp::RunConfig cfg = effective_config(g);
    vfp::CohortManifest manifest = vfp::read_manifest(manifest_path);
    vfp::SiblingPairs pairs = vfp::derive_sibling_pairs(manifest);
    vfp::SiblingType type = parse_sibling_type(type_str);
    fs::create_directories(out_dir);

    auto fps = read_fingerprints(fp_paths);
    int k_top = *std::max_element(cfg.sweep_k.begin(), cfg.sweep_k.end());
    vfp::GraphOptions opt = cfg.graph;
    opt.k = k_top;
    vfp::CohortGraph full = vfp::build_graph(fps, opt);

    json summary;
    summary["k"] = json::array();
    summary["recall_at_10"] = json::array();
    std::vector<std::vector<std::string>> top1_per_k;
    for (int k : cfg.sweep_k) {
        vfp::CohortGraph gk = k == k_top ? full : vfp::truncate_graph(full, k);
        vfp::SimilarityMatrix sim = vfp::similarity_matrix(gk);
        vfp::RecallCurve curve = vfp::recall_at_k(sim, pairs, type, cfg.k_max);
        std::string path =
            (fs::path(out_dir) / ("recall_K" + std::to_string(k) + ".csv")).string();
        vfp::write_recall_csv(curve, path);
        std::cout << "wrote " << path << "\n";
        summary["k"].push_back(k);
        int idx = std::min<int>(10, cfg.k_max) - 1;
        summary["recall_at_10"].push_back(curve.mean_recall[idx]);

        std::vector<std::string> top1;
        for (std::size_t p = 0; p < sim.subjects.size(); ++p)
            top1.push_back(sim.subjects[vfp::ranked_neighbors(sim, p)[0]]);
        top1_per_k.push_back(std::move(top1));
    }
    bool stable = true;
    for (const auto& t : top1_per_k)
        if (t != top1_per_k[0]) stable = false;
    summary["top1_stable"] = stable;

    std::string spath = (fs::path(out_dir) / "sweep_summary.json").string();
    std::string payload = summary.dump(2) + "\n";
    FILE* f = std::fopen(spath.c_str(), "wb");
    if (!f) vfp::raise(vfp::ErrorCode::WriteFailed, "cannot open " + spath);
    std::fwrite(payload.data(), 1, payload.size(), f);
    std::fclose(f);
    std::cout << "wrote " << spath << "\n";
    return 0;
}

vfp::PhantomModality parse_phantom_modality(const std::string& token) {
    // NAME[:gamma[:index/count]]
    vfp::PhantomModality m;
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto colon = token.find(':', start);
        if (colon == std::string::npos) {
            parts.push_back(token.substr(start));
            break;
        }
        parts.push_back(token.substr(start, colon - start));
        start = colon + 1;
    }
    if (parts.empty() || parts[0].empty())
        vfp::raise(vfp::ErrorCode::InvalidArgument, "modality token needs a name: " + token);
    m.name = parts[0];
    if (parts.size() > 1 && !parts[1].empty()) m.gamma = std::stod(parts[1]);
    if (parts.size() > 2 && !parts[2].empty()) {
        auto slash = parts[2].find('/');
        if (slash == std::string::npos)
            vfp::raise(vfp::ErrorCode::InvalidArgument,
                       "blob partition must look like index/count: " + token);
        m.partition_index = std::stoi(parts[2].substr(0, slash));
        m.partition_count = std::stoi(parts[2].substr(slash + 1));
    }
    if (parts.size() > 3)
        vfp::raise(vfp::ErrorCode::InvalidArgument, "too many fields in modality token: " + token);
    return m;
}

int cmd_phantom(const GlobalArgs& g, vfp::PhantomSpec spec,
                const std::vector<std::string>& modality_tokens, const std::string& out_dir) {
    vfp::RunConfig cfg = effective_config(g);
    spec.seed = cfg.seed;
    if (!modality_tokens.empty()) {
        spec.modalities.clear();
        for (const auto& t : modality_tokens) spec.modalities.push_back(parse_phantom_modality(t));
    }
    vfp::PhantomCohort cohort = vfp::generate_cohort(spec);
    vfp::write_cohort(cohort, out_dir);
    std::cout << "wrote " << out_dir << "/manifest.csv (" << cohort.subjects.size()
              << " subjects)\n";
    return 0;
}

int parse_axis(const std::string& s) {
    if (s == "x" || s == "0") return 0;
    if (s == "y" || s == "1") return 1;
    if (s == "z" || s == "2") return 2;
    vfp::raise(vfp::ErrorCode::InvalidArgument, "axis must be x, y, or z");
}

int cmd_visualize(const GlobalArgs& g, const std::string& graph_path, const std::string& fp_a,
                  const std::string& fp_b, const std::string& vol_a, const std::string& vol_b,
                  const std::string& axis_str, int slice, const std::string& out_dir) {
    vfp::RunConfig cfg = effective_config(g);
    (void)cfg;
    vfp::CohortGraph graph = vfp::read_graph(graph_path);
    vfp::Fingerprint a = vfp::read_fingerprint(fp_a);
    vfp::Fingerprint b = vfp::read_fingerprint(fp_b);
    vfp::Volume va = vfp::load_volume(vol_a);
    vfp::Volume vb = vfp::load_volume(vol_b);
    int axis = parse_axis(axis_str);
    fs::create_directories(out_dir);

    auto matched_a = vfp::matched_keypoints(graph, a, b, va.modality_id);
    auto matched_b = vfp::matched_keypoints(graph, a, b, vb.modality_id);
    if (matched_a[0].empty() && matched_a[1].empty()) {
        json line;
        line["warning"] = "pair has no intersection edges; overlay is empty";
        std::cerr << line.dump() << "\n";
    }

    auto render_one = [&](const vfp::Volume& v, const std::vector<vfp::Keypoint>& kps,
                          const std::string& subject) {
        vfp::SliceImage img = vfp::render_slice(v, axis, slice);
        vfp::overlay_keypoints(img, kps, axis, slice);
        std::string path =
            (fs::path(out_dir) /
             (subject + "_" + axis_str + std::to_string(slice) + ".ppm")).string();
        vfp::write_ppm(img, path);
        std::cout << "wrote " << path << "\n";
    };
    render_one(va, matched_a[0], a.subject_id);
    render_one(vb, matched_b[1], b.subject_id);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volumetric feature fingerprinting and cohort similarity"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalArgs g;
    app.add_option("--config", g.config_path, "JSON run configuration");
    app.add_option("--threads", g.threads, "worker thread cap (0 = hardware)");
    app.add_option("--seed", g.seed, "seed overriding the config");

    auto* extract = app.add_subcommand("extract", "volumes -> fingerprint files");
    std::string x_manifest, x_subject, x_out_dir, x_out;
    std::vector<std::string> x_volumes;
    extract->add_option("--manifest", x_manifest, "cohort manifest CSV");
    extract->add_option("--out-dir", x_out_dir, "fingerprint output directory (manifest mode)");
    extract->add_option("--subject", x_subject, "subject id (single-subject mode)");
    extract->add_option("--out", x_out, "fingerprint output path (single-subject mode)");
    extract->add_option("volumes", x_volumes, "MODALITY=PATH volume arguments");

    auto* graphc = app.add_subcommand("graph", "fingerprints -> K-NN graph file");
    std::vector<std::string> g_fps;
    std::string g_out = "graph.vknn", g_modalities;
    int g_k = 0;
    bool g_self = false;
    graphc->add_option("fingerprints", g_fps, "fingerprint files")->required();
    graphc->add_option("--out", g_out, "graph output path");
    graphc->add_option("--k", g_k, "neighbors per node (overrides config)");
    graphc->add_option("--modalities", g_modalities, "comma-separated modality subset");
    graphc->add_flag("--allow-self-edges", g_self, "permit intra-subject edges");

    auto* simc = app.add_subcommand("similarity", "graph(s) -> similarity matrix CSV");
    std::vector<std::string> s_graphs;
    std::string s_out = "similarity.csv";
    simc->add_option("graphs", s_graphs, "graph files (several = disjoint-modality fusion)")
        ->required();
    simc->add_option("--out", s_out, "matrix output path");

    auto* evalc = app.add_subcommand("evaluate", "matrix + manifest -> recall and tests");
    std::string e_matrix, e_manifest, e_type = "MZ", e_out_dir = "eval";
    bool e_age_split = false, e_no_baseline = false;
    evalc->add_option("--matrix", e_matrix, "similarity matrix CSV")->required();
    evalc->add_option("--manifest", e_manifest, "cohort manifest CSV")->required();
    evalc->add_option("--type", e_type, "sibling type: MZ, DZ, or NT");
    evalc->add_option("--out-dir", e_out_dir, "output directory");
    evalc->add_flag("--age-split", e_age_split, "also run the age-split analysis");
    evalc->add_flag("--no-baseline", e_no_baseline, "skip the random baseline");

    auto* sweepc = app.add_subcommand("sweep-k", "fingerprints -> per-K recall curves");
    std::vector<std::string> w_fps;
    std::string w_manifest, w_type = "MZ", w_out_dir = "sweep";
    sweepc->add_option("fingerprints", w_fps, "fingerprint files")->required();
    sweepc->add_option("--manifest", w_manifest, "cohort manifest CSV")->required();
    sweepc->add_option("--type", w_type, "sibling type: MZ, DZ, or NT");
    sweepc->add_option("--out-dir", w_out_dir, "output directory");

    auto* phc = app.add_subcommand("phantom", "generate a synthetic cohort");
    vfp::PhantomSpec ph;
    std::vector<std::string> ph_modalities;
    std::string ph_out_dir = "phantom";
    phc->add_option("--out-dir", ph_out_dir, "cohort output directory");
    phc->add_option("--dims", ph.dims, "cubic volume size in voxels");
    phc->add_option("--blobs", ph.blob_count, "blobs per subject");
    phc->add_option("--clone-pairs", ph.clone_pairs, "MZ-like pair count");
    phc->add_option("--sib-pairs", ph.sib_pairs, "DZ-like pair count");
    phc->add_option("--nt-pairs", ph.nt_pairs, "non-twin sibling pair count");
    phc->add_option("--singletons", ph.singletons, "subjects without relatives");
    phc->add_option("--clone-shared", ph.clone_shared, "shared blob fraction for clones");
    phc->add_option("--sib-shared", ph.sib_shared, "shared blob fraction for siblings");
    phc->add_option("--jitter-pos", ph.jitter_pos, "positional jitter std-dev, voxels");
    phc->add_option("--jitter-size", ph.jitter_size, "size jitter std-dev, fraction");
    phc->add_option("--noise", ph.noise_sigma, "additive noise std-dev");
    phc->add_option("--sigma-min", ph.sigma_min, "smallest blob sigma, voxels");
    phc->add_option("--sigma-max", ph.sigma_max, "largest blob sigma, voxels");
    phc->add_option("--modality", ph_modalities,
                    "modality token NAME[:gamma[:index/count]], repeatable");

    auto* visc = app.add_subcommand("visualize", "matched-keypoint slice overlays for a pair");
    std::string v_graph, v_fpa, v_fpb, v_vola, v_volb, v_axis = "z", v_out_dir = "overlay";
    int v_slice = 0;
    visc->add_option("--graph", v_graph, "graph file")->required();
    visc->add_option("--fp-a", v_fpa, "first subject's fingerprint")->required();
    visc->add_option("--fp-b", v_fpb, "second subject's fingerprint")->required();
    visc->add_option("--volume-a", v_vola, "first subject's volume to render")->required();
    visc->add_option("--volume-b", v_volb, "second subject's volume to render")->required();
    visc->add_option("--axis", v_axis, "slice normal: x, y, or z");
    visc->add_option("--slice", v_slice, "slice index along the axis")->required();
    visc->add_option("--out-dir", v_out_dir, "image output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (extract->parsed())
            return cmd_extract(g, x_manifest, x_subject, x_volumes, x_out_dir, x_out);
        if (graphc->parsed()) return cmd_graph(g, g_fps, g_k, g_modalities, g_self, g_out);
        if (simc->parsed()) return cmd_similarity(g, s_graphs, s_out);
        if (evalc->parsed())
            return cmd_evaluate(g, e_matrix, e_manifest, e_type, e_out_dir, e_age_split,
                                e_no_baseline);
        if (sweepc->parsed()) return cmd_sweep_k(g, w_fps, w_manifest, w_type, w_out_dir);
        if (phc->parsed()) return cmd_phantom(g, ph, ph_modalities, ph_out_dir);
        if (visc->parsed())
            return cmd_visualize(g, v_graph, v_fpa, v_fpb, v_vola, v_volb, v_axis, v_slice,
                                 v_out_dir);
    } catch (const vfp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case vfp::ErrorKind::Config: return 2;
            case vfp::ErrorKind::Io: return 3;
            case vfp::ErrorKind::Data: return 4;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
