#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vfp/similarity_graph.hpp"

namespace vfp {

enum class Zygosity { MZ, DZ, NotTwin, Unknown };

const char* zygosity_name(Zygosity z);
Zygosity parse_zygosity(const std::string& token);  // case-insensitive, InvalidManifest otherwise

struct ManifestEntry {
    std::string subject_id;
    std::string mother_id;
    int age = 0;
    std::string sex;
    Zygosity zygosity = Zygosity::Unknown;
    std::vector<std::pair<std::string, std::string>> volumes;  // (modality, path)
};

struct CohortManifest {
    std::vector<ManifestEntry> entries;
};

/// Manifest CSV: header "subject_id,mother_id,age,sex,zygosity,paths"; the
/// paths cell is a JSON array of [modality, path] pairs, CSV-quoted. Paths
/// are stored as written (normally relative to the manifest's directory).
CohortManifest read_manifest(const std::string& path);
void write_manifest(const CohortManifest& m, const std::string& path);

enum class SiblingType { MZ, DZ, NT };

/// Unordered sibling pairs by type. Same mother, same age, both labelled MZ
/// makes an MZ pair (DZ likewise); every other same-mother pair is NT. Twins
/// sharing mother and age but carrying different twin labels are skipped and
/// reported in `inconsistent`.
struct SiblingPairs {
    std::vector<std::pair<std::string, std::string>> mz;
    std::vector<std::pair<std::string, std::string>> dz;
    std::vector<std::pair<std::string, std::string>> nt;
    std::vector<std::pair<std::string, std::string>> inconsistent;

    const std::vector<std::pair<std::string, std::string>>& of(SiblingType t) const {
        return t == SiblingType::MZ ? mz : t == SiblingType::DZ ? dz : nt;
    }
};

SiblingPairs derive_sibling_pairs(const CohortManifest& m);

struct RecallCurve {
    std::string sibling_type;
    std::vector<std::string> modalities;
    std::vector<double> mean_recall;  // index k-1, k = 1..k_max
    std::size_t n_probes = 0;
};

/// Other subjects ranked for one probe: descending similarity, ties by
/// ascending subject id. The probe itself is excluded.
std::vector<std::size_t> ranked_neighbors(const SimilarityMatrix& sim, std::size_t probe);

/// Mean per-probe recall@k for k = 1..k_max. A probe is any subject with at
/// least one sibling of the type; its recall@k is the fraction of its own
/// siblings found in the top k of the full-cohort ranking. Raises NoProbes.
RecallCurve recall_at_k(const SimilarityMatrix& sim, const SiblingPairs& pairs, SiblingType type,
                        int k_max);

/// Same protocol with similarity replaced by a seeded uniform random
/// symmetric matrix (upper triangle drawn row-major, then mirrored).
RecallCurve random_baseline(const std::vector<std::string>& subjects, const SiblingPairs& pairs,
                            SiblingType type, int k_max, std::uint64_t seed);

enum class WilcoxonMethod { Auto, Exact, Normal };

struct WilcoxonResult {
    double statistic = 0.0;  // W+, the positive-rank sum
    double p_value = 1.0;    // two-sided
    std::size_t n_effective = 0;
    std::string method;      // "exact" or "normal"
};

/// Paired Wilcoxon signed-rank test. Zero differences are dropped; fewer
/// than 5 effective pairs raises TooFewPairs. Auto uses exact enumeration of
/// the 2^n sign assignments up to n = 12 and the tie-corrected normal
/// approximation (with 0.5 continuity correction) beyond.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y,
                                    WilcoxonMethod method = WilcoxonMethod::Auto);

struct AgeSplitResult {
    double split_value = 0.0;  // the median used for the split
    RecallCurve low;           // pairs with split statistic <= median
    RecallCurve high;
    bool degenerate = false;   // one side empty; no test run
    bool test_valid = false;
    WilcoxonResult test;       // low-vs-high curves paired by k
};

/// Splits the type's pairs at the median (values equal to it go low): NT by
/// absolute age difference, MZ/DZ by mean pair age. Each side gets its own
/// recall curve; the sides are compared with a Wilcoxon test over the curve
/// values paired by k.
AgeSplitResult age_split_analysis(const SimilarityMatrix& sim, const SiblingPairs& pairs,
                                  const CohortManifest& manifest, SiblingType type, int k_max);

/// Curve CSV: header "k,mean_recall,n_probes", one row per k, 6 decimals.
void write_recall_csv(const RecallCurve& c, const std::string& path);

/// JSON object with statistic, p_value, n_effective, method.
std::string wilcoxon_to_json(const WilcoxonResult& r);

}  // namespace vfp
