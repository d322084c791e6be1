#include "vfp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

#include "vfp/detail/binary_io.hpp"
#include "vfp/errors.hpp"
#include "vfp/volume.hpp"

namespace vfp {

using json = nlohmann::json;

const char* zygosity_name(Zygosity z) {
    switch (z) {
        case Zygosity::MZ: return "MZ";
        case Zygosity::DZ: return "DZ";
        case Zygosity::NotTwin: return "NotTwin";
        default: return "Unknown";
    }
}

Zygosity parse_zygosity(const std::string& token) {
    std::string t;
    for (char c : token) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (t == "mz") return Zygosity::MZ;
    if (t == "dz") return Zygosity::DZ;
    if (t == "nottwin") return Zygosity::NotTwin;
    if (t == "unknown") return Zygosity::Unknown;
    raise(ErrorCode::InvalidManifest, "unrecognized zygosity \"" + token + "\"");
}

namespace {

const char* sibling_type_name(SiblingType t) {
    return t == SiblingType::MZ ? "MZ" : t == SiblingType::DZ ? "DZ" : "NT";
}

// RFC-4180 style parse: quoted cells may contain commas, doubled quotes,
// and newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !cell.empty()) {
                row.push_back(std::move(cell));
                cell.clear();
                rows.push_back(std::move(row));
                row.clear();
                any = false;
            }
        } else {
            cell += c;
            any = true;
        }
    }
    if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string quote_cell(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

}  // namespace

CohortManifest read_manifest(const std::string& path) {
    auto buf = detail::read_file(path);
    auto rows = parse_csv(std::string(buf.begin(), buf.end()));
    if (rows.empty()) raise(ErrorCode::InvalidManifest, path + ": empty manifest");
    const std::vector<std::string> header = {"subject_id", "mother_id", "age",
                                             "sex",        "zygosity",  "paths"};
    if (rows[0] != header)
        raise(ErrorCode::InvalidManifest,
              path + ": header must be subject_id,mother_id,age,sex,zygosity,paths");

    CohortManifest m;
    std::set<std::string> ids;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 6)
            raise(ErrorCode::InvalidManifest,
                  path + ": row " + std::to_string(i + 1) + " has " + std::to_string(r.size()) +
                      " cells, expected 6");
        ManifestEntry e;
        e.subject_id = r[0];
        if (e.subject_id.empty())
            raise(ErrorCode::InvalidManifest, path + ": empty subject_id");
        if (!ids.insert(e.subject_id).second)
            raise(ErrorCode::InvalidManifest, path + ": duplicate subject_id " + e.subject_id);
        e.mother_id = r[1];
        try {
            std::size_t used = 0;
            e.age = std::stoi(r[2], &used);
            if (used != r[2].size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            raise(ErrorCode::InvalidManifest, path + ": non-integer age \"" + r[2] + "\"");
        }
        if (e.age < 0) raise(ErrorCode::InvalidManifest, path + ": negative age");
        e.sex = r[3];
        e.zygosity = parse_zygosity(r[4]);

        json paths = json::parse(r[5], nullptr, false);
        if (paths.is_discarded() || !paths.is_array())
            raise(ErrorCode::InvalidManifest, path + ": paths cell is not a JSON array");
        for (const auto& p : paths) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
                raise(ErrorCode::InvalidManifest,
                      path + ": each paths entry must be [modality, path]");
            e.volumes.emplace_back(normalize_modality(p[0].get<std::string>()),
                                   p[1].get<std::string>());
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

void write_manifest(const CohortManifest& m, const std::string& path) {
    std::string out = "subject_id,mother_id,age,sex,zygosity,paths\n";
    for (const auto& e : m.entries) {
        json paths = json::array();
        for (const auto& [mod, p] : e.volumes) paths.push_back({mod, p});
        out += quote_cell(e.subject_id) + ',' + quote_cell(e.mother_id) + ',' +
               std::to_string(e.age) + ',' + quote_cell(e.sex) + ',' + zygosity_name(e.zygosity) +
               ',' + quote_cell(paths.dump()) + '\n';
    }
    detail::write_file(path, out.data(), out.size());
}

SiblingPairs derive_sibling_pairs(const CohortManifest& m) {
    SiblingPairs out;
    std::map<std::string, std::vector<const ManifestEntry*>> families;
    for (const auto& e : m.entries) {
        if (e.mother_id.empty()) continue;  // no family information
        families[e.mother_id].push_back(&e);
    }
    for (auto& [mother, members] : families) {
        (void)mother;
        std::sort(members.begin(), members.end(),
                  [](const ManifestEntry* a, const ManifestEntry* b) {
                      return a->subject_id < b->subject_id;
                  });
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                const ManifestEntry* a = members[i];
                const ManifestEntry* b = members[j];
                auto pair = std::make_pair(a->subject_id, b->subject_id);
                bool a_twin = a->zygosity == Zygosity::MZ || a->zygosity == Zygosity::DZ;
                bool b_twin = b->zygosity == Zygosity::MZ || b->zygosity == Zygosity::DZ;
                if (a->age == b->age && a_twin && b_twin) {
                    if (a->zygosity != b->zygosity) {
                        out.inconsistent.push_back(pair);  // mismatched twin labels
                    } else if (a->zygosity == Zygosity::MZ) {
                        out.mz.push_back(pair);
                    } else {
                        out.dz.push_back(pair);
                    }
                } else {
                    out.nt.push_back(pair);
                }
            }
    }
    return out;
}

std::vector<std::size_t> ranked_neighbors(const SimilarityMatrix& sim, std::size_t probe) {
    std::size_t n = sim.subjects.size();
    std::vector<std::size_t> order;
    order.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        if (i != probe) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double va = sim.at(probe, a), vb = sim.at(probe, b);
        if (va != vb) return va > vb;
        return sim.subjects[a] < sim.subjects[b];
    });
    return order;
}

RecallCurve recall_at_k(const SimilarityMatrix& sim, const SiblingPairs& pairs, SiblingType type,
                        int k_max) {
    if (k_max < 1) raise(ErrorCode::InvalidArgument, "k_max must be at least 1");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < sim.subjects.size(); ++i) index[sim.subjects[i]] = i;

    std::vector<std::set<std::size_t>> siblings(sim.subjects.size());
    for (const auto& [a, b] : pairs.of(type)) {
        auto ia = index.find(a), ib = index.find(b);
        if (ia == index.end())
            raise(ErrorCode::UnknownSubject, "pair member " + a + " is not in the matrix");
        if (ib == index.end())
            raise(ErrorCode::UnknownSubject, "pair member " + b + " is not in the matrix");
        siblings[ia->second].insert(ib->second);
        siblings[ib->second].insert(ia->second);
    }

    RecallCurve c;
    c.sibling_type = sibling_type_name(type);
    c.modalities = sim.modalities;
    c.mean_recall.assign(k_max, 0.0);

    for (std::size_t p = 0; p < sim.subjects.size(); ++p) {
        if (siblings[p].empty()) continue;
        ++c.n_probes;
        auto order = ranked_neighbors(sim, p);
        double total = static_cast<double>(siblings[p].size());
        std::size_t found = 0;
        for (int k = 1; k <= k_max; ++k) {
            std::size_t idx = static_cast<std::size_t>(k) - 1;
            if (idx < order.size() && siblings[p].count(order[idx])) ++found;
            c.mean_recall[idx] += static_cast<double>(found) / total;
        }
    }
    if (c.n_probes == 0)
        raise(ErrorCode::NoProbes,
              std::string("no subject has a sibling of type ") + sibling_type_name(type));
    for (auto& v : c.mean_recall) v /= static_cast<double>(c.n_probes);
    return c;
}

RecallCurve random_baseline(const std::vector<std::string>& subjects, const SiblingPairs& pairs,
                            SiblingType type, int k_max, std::uint64_t seed) {
    SimilarityMatrix sim;
    sim.subjects = subjects;
    std::size_t n = subjects.size();
    sim.values.assign(n * n, 0.0);
    std::mt19937_64 rng(seed);
    // Explicit 53-bit mapping keeps the draw identical across standard
    // libraries; the upper triangle is drawn row-major, then mirrored.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            sim.values[i * n + j] = u;
            sim.values[j * n + i] = u;
        }
    RecallCurve c = recall_at_k(sim, pairs, type, k_max);
    c.modalities = {"random"};
    return c;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y,
                                    WilcoxonMethod method) {
    if (x.size() != y.size())
        raise(ErrorCode::InvalidArgument, "paired samples must have equal length");
    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double diff = x[i] - y[i];
        if (diff != 0.0) d.push_back(diff);
    }
    std::size_t n = d.size();
    if (n < 5)
        raise(ErrorCode::TooFewPairs,
              "only " + std::to_string(n) + " nonzero differences; need at least 5");

    // Average ranks of |d|; doubled ranks stay integral through ties.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
    std::vector<std::uint64_t> rank2(n, 0);
    std::vector<std::size_t> tie_sizes;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
        std::uint64_t sum2 = 0;  // doubled rank sum of the tied block
        for (std::size_t r = i; r < j; ++r) sum2 += 2 * (r + 1);
        std::uint64_t avg2 = sum2 / (j - i);
        for (std::size_t r = i; r < j; ++r) rank2[order[r]] = avg2;
        tie_sizes.push_back(j - i);
        i = j;
    }

    std::uint64_t w2 = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (d[i] > 0.0) w2 += rank2[i];

    WilcoxonResult res;
    res.statistic = static_cast<double>(w2) / 2.0;
    res.n_effective = n;

    bool exact = method == WilcoxonMethod::Exact || (method == WilcoxonMethod::Auto && n <= 12);
    if (exact) {
        std::uint64_t total2 = 0;
        for (auto r : rank2) total2 += r;
        std::vector<double> count(total2 + 1, 0.0);
        count[0] = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t r = rank2[i];
            for (std::size_t w = total2 + 1; w-- > r;) count[w] += count[w - r];
        }
        double norm = std::pow(2.0, static_cast<double>(n));
        double p_low = 0.0, p_high = 0.0;
        for (std::uint64_t w = 0; w <= total2; ++w) {
            if (w <= w2) p_low += count[w];
            if (w >= w2) p_high += count[w];
        }
        res.p_value = std::min(1.0, 2.0 * std::min(p_low, p_high) / norm);
        res.method = "exact";
    } else {
        double dn = static_cast<double>(n);
        double mu = dn * (dn + 1.0) / 4.0;
        double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0;
        for (auto t : tie_sizes) {
            double dt = static_cast<double>(t);
            var -= (dt * dt * dt - dt) / 48.0;
        }
        double w = static_cast<double>(w2) / 2.0;
        if (var <= 0.0) {
            res.p_value = 1.0;
        } else {
            double z = std::max(std::abs(w - mu) - 0.5, 0.0) / std::sqrt(var);
            res.p_value = std::erfc(z / std::sqrt(2.0));
        }
        res.method = "normal";
    }
    return res;
}

AgeSplitResult age_split_analysis(const SimilarityMatrix& sim, const SiblingPairs& pairs,
                                  const CohortManifest& manifest, SiblingType type, int k_max) {
    std::map<std::string, int> age;
    for (const auto& e : manifest.entries) age[e.subject_id] = e.age;

    const auto& typed = pairs.of(type);
    std::vector<double> stat(typed.size());
    for (std::size_t i = 0; i < typed.size(); ++i) {
        auto ia = age.find(typed[i].first);
        auto ib = age.find(typed[i].second);
        if (ia == age.end() || ib == age.end())
            raise(ErrorCode::UnknownSubject, "pair member missing from the manifest");
        if (type == SiblingType::NT)
            stat[i] = std::abs(static_cast<double>(ia->second) - static_cast<double>(ib->second));
        else
            stat[i] = (static_cast<double>(ia->second) + static_cast<double>(ib->second)) / 2.0;
    }
    if (stat.empty()) raise(ErrorCode::NoProbes, "no pairs of the requested type");

    std::vector<double> sorted = stat;
    std::sort(sorted.begin(), sorted.end());
    std::size_t half = sorted.size() / 2;
    double median = sorted.size() % 2 ? sorted[half] : (sorted[half - 1] + sorted[half]) / 2.0;

    SiblingPairs low, high;
    auto& low_list = type == SiblingType::MZ ? low.mz : type == SiblingType::DZ ? low.dz : low.nt;
    auto& high_list =
        type == SiblingType::MZ ? high.mz : type == SiblingType::DZ ? high.dz : high.nt;
    for (std::size_t i = 0; i < typed.size(); ++i)
        (stat[i] <= median ? low_list : high_list).push_back(typed[i]);

    AgeSplitResult out;
    out.split_value = median;
    auto group_curve = [&](const SiblingPairs& p, const char* tag) {
        const auto& list = p.of(type);
        if (list.empty()) {
            RecallCurve c;
            c.sibling_type = std::string(sibling_type_name(type)) + "/" + tag;
            c.mean_recall.assign(k_max, 0.0);
            return c;
        }
        RecallCurve c = recall_at_k(sim, p, type, k_max);
        c.sibling_type = std::string(sibling_type_name(type)) + "/" + tag;
        return c;
    };
    out.low = group_curve(low, "low");
    out.high = group_curve(high, "high");
    out.degenerate = low_list.empty() || high_list.empty();
    if (!out.degenerate) {
        try {
            out.test = wilcoxon_signed_rank(out.low.mean_recall, out.high.mean_recall);
            out.test_valid = true;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::TooFewPairs) throw;
        }
    }
    return out;
}

void write_recall_csv(const RecallCurve& c, const std::string& path) {
    std::string out = "k,mean_recall,n_probes\n";
    char buf[64];
    for (std::size_t i = 0; i < c.mean_recall.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%zu\n", i + 1, c.mean_recall[i], c.n_probes);
        out += buf;
    }
    detail::write_file(path, out.data(), out.size());
}

std::string wilcoxon_to_json(const WilcoxonResult& r) {
    json j;
    j["statistic"] = r.statistic;
    j["p_value"] = r.p_value;
    j["n_effective"] = r.n_effective;
    j["method"] = r.method;
    return j.dump(2) + "\n";
}

}  // namespace vfp
