#include "vfp/similarity_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "vfp/detail/binary_io.hpp"
#include "vfp/errors.hpp"
#include "vfp/parallel.hpp"

namespace vfp {

namespace {

struct Neighbor {
    double d2;
    std::uint32_t subject_rank;  // lexicographic rank of the target's subject id
    std::uint32_t index;         // global node index
};

// "Closer" in the total neighbor order: distance, then subject id, then index.
bool better(const Neighbor& a, const Neighbor& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.subject_rank != b.subject_rank) return a.subject_rank < b.subject_rank;
    return a.index < b.index;
}

double squared_distance(const float* a, const float* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

std::size_t subject_index(const CohortGraph& g, const std::string& id) {
    for (std::size_t i = 0; i < g.subjects.size(); ++i)
        if (g.subjects[i] == id) return i;
    raise(ErrorCode::UnknownSubject, "subject " + id + " is not in the graph");
}

}  // namespace

CohortGraph build_graph(const std::vector<Fingerprint>& fps, const GraphOptions& opt) {
    if (fps.size() < 2) raise(ErrorCode::EmptyCohort, "graph needs at least two fingerprints");
    if (opt.k < 1) raise(ErrorCode::InvalidArgument, "K must be at least 1");

    CohortGraph g;
    g.k = opt.k;
    g.allow_self_edges = opt.allow_self_edges;

    std::set<std::string> subject_set;
    for (const auto& fp : fps) {
        if (!subject_set.insert(fp.subject_id).second)
            raise(ErrorCode::InvalidArgument, "duplicate subject id " + fp.subject_id);
        g.subjects.push_back(fp.subject_id);
    }

    std::set<std::string> wanted(opt.modalities.begin(), opt.modalities.end());
    std::set<std::string> used;
    for (const auto& fp : fps)
        for (const auto& rec : fp.records)
            if (wanted.empty() || wanted.count(rec.modality_id)) used.insert(rec.modality_id);
    g.modalities.assign(used.begin(), used.end());

    std::map<std::string, std::uint32_t> modality_index;
    for (std::uint32_t i = 0; i < g.modalities.size(); ++i) modality_index[g.modalities[i]] = i;

    // Node store: fingerprint input order, bag order, filtered to the subset.
    std::vector<const float*> vec;
    std::size_t dim = 0;
    g.subject_descriptor_count.assign(fps.size(), 0);
    for (std::uint32_t s = 0; s < fps.size(); ++s) {
        for (const auto& rec : fps[s].records) {
            auto it = modality_index.find(rec.modality_id);
            if (it == modality_index.end()) continue;
            if (dim == 0) dim = rec.vector.size();
            if (rec.vector.size() != dim)
                raise(ErrorCode::InvalidArgument, "descriptor dimensions differ across records");
            g.node_subject.push_back(s);
            g.node_modality.push_back(it->second);
            g.subject_descriptor_count[s] += 1;
            vec.push_back(rec.vector.data());
        }
    }
    std::size_t n = g.node_count();
    if (n > 0xffffffffu) raise(ErrorCode::InvalidArgument, "too many nodes for the graph format");

    // Lexicographic subject ranks drive the tie rule.
    std::vector<std::uint32_t> subject_rank(fps.size());
    {
        std::vector<std::uint32_t> order(fps.size());
        for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return g.subjects[a] < g.subjects[b];
        });
        for (std::uint32_t r = 0; r < order.size(); ++r) subject_rank[order[r]] = r;
    }

    std::vector<std::vector<std::uint32_t>> by_modality(g.modalities.size());
    for (std::uint32_t i = 0; i < n; ++i) by_modality[g.node_modality[i]].push_back(i);

    for (std::uint32_t m = 0; m < g.modalities.size(); ++m) {
        std::set<std::uint32_t> subs;
        for (auto i : by_modality[m]) subs.insert(g.node_subject[i]);
        if (subs.size() == 1 && !opt.allow_self_edges)
            g.warnings.push_back("modality " + g.modalities[m] +
                                 " is present in only one subject; it contributes no edges");
    }

    std::vector<std::vector<std::uint32_t>> adjacency(n);
    const std::size_t kk = static_cast<std::size_t>(opt.k);

    parallel_for(n, [&](std::size_t q0, std::size_t q1) {
        std::vector<Neighbor> heap;  // worst-on-top bounded selection
        auto worse_first = [](const Neighbor& a, const Neighbor& b) { return better(a, b); };
        for (std::size_t q = q0; q < q1; ++q) {
            heap.clear();
            std::uint32_t qs = g.node_subject[q];
            for (std::uint32_t c : by_modality[g.node_modality[q]]) {
                if (c == q) continue;
                if (!opt.allow_self_edges && g.node_subject[c] == qs) continue;
                Neighbor cand{squared_distance(vec[q], vec[c], dim), subject_rank[g.node_subject[c]], c};
                if (heap.size() < kk) {
                    heap.push_back(cand);
                    std::push_heap(heap.begin(), heap.end(), worse_first);
                } else if (better(cand, heap.front())) {
                    std::pop_heap(heap.begin(), heap.end(), worse_first);
                    heap.back() = cand;
                    std::push_heap(heap.begin(), heap.end(), worse_first);
                }
            }
            std::sort(heap.begin(), heap.end(), better);
            auto& out = adjacency[q];
            out.reserve(heap.size());
            for (const auto& nb : heap) out.push_back(nb.index);
        }
    });

    g.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) g.offsets[i + 1] = g.offsets[i] + adjacency[i].size();
    g.targets.reserve(g.offsets[n]);
    for (const auto& a : adjacency) g.targets.insert(g.targets.end(), a.begin(), a.end());
    return g;
}

CohortGraph truncate_graph(const CohortGraph& g, int k) {
    if (k < 1 || k > g.k) raise(ErrorCode::InvalidArgument, "truncation K out of range");
    CohortGraph out = g;
    out.k = k;
    out.offsets.assign(g.node_count() + 1, 0);
    out.targets.clear();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        std::uint64_t begin = g.offsets[i];
        std::uint64_t deg = std::min<std::uint64_t>(g.offsets[i + 1] - begin, k);
        for (std::uint64_t j = 0; j < deg; ++j) out.targets.push_back(g.targets[begin + j]);
        out.offsets[i + 1] = out.targets.size();
    }
    return out;
}

namespace {

// Unordered cross-subject node pairs with at least one directed edge, for
// every subject pair at once. Keys are min<<32|max over the node indices.
std::vector<std::uint64_t> pair_intersections(const CohortGraph& g) {
    std::vector<std::uint64_t> keys;
    keys.reserve(g.targets.size());
    std::size_t n = g.node_count();
    for (std::size_t u = 0; u < n; ++u)
        for (std::uint64_t e = g.offsets[u]; e < g.offsets[u + 1]; ++e) {
            std::uint64_t v = g.targets[e];
            std::uint64_t lo = std::min<std::uint64_t>(u, v);
            std::uint64_t hi = std::max<std::uint64_t>(u, v);
            keys.push_back(lo << 32 | hi);
        }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

    std::size_t ns = g.subjects.size();
    std::vector<std::uint64_t> inter(ns * ns, 0);
    for (std::uint64_t key : keys) {
        std::uint32_t u = g.node_subject[key >> 32];
        std::uint32_t v = g.node_subject[key & 0xffffffffu];
        if (u == v) continue;
        inter[static_cast<std::size_t>(u) * ns + v] += 1;
        inter[static_cast<std::size_t>(v) * ns + u] += 1;
    }
    return inter;
}

}  // namespace

std::uint64_t intersection_count(const CohortGraph& g, const std::string& a,
                                 const std::string& b) {
    std::uint32_t sa = static_cast<std::uint32_t>(subject_index(g, a));
    std::uint32_t sb = static_cast<std::uint32_t>(subject_index(g, b));
    std::set<std::uint64_t> pairs;
    std::size_t n = g.node_count();
    for (std::size_t u = 0; u < n; ++u) {
        std::uint32_t su = g.node_subject[u];
        if (su != sa && su != sb) continue;
        for (std::uint64_t e = g.offsets[u]; e < g.offsets[u + 1]; ++e) {
            std::uint64_t v = g.targets[e];
            std::uint32_t sv = g.node_subject[v];
            bool cross = (su == sa && sv == sb) || (su == sb && sv == sa);
            if (!cross) continue;
            std::uint64_t lo = std::min<std::uint64_t>(u, v);
            std::uint64_t hi = std::max<std::uint64_t>(u, v);
            pairs.insert(lo << 32 | hi);
        }
    }
    return pairs.size();
}

double jaccard_similarity(const CohortGraph& g, const std::string& a, const std::string& b) {
    std::size_t sa = subject_index(g, a);
    std::size_t sb = subject_index(g, b);
    double inter = static_cast<double>(intersection_count(g, a, b));
    double na = static_cast<double>(g.subject_descriptor_count[sa]);
    double nb = static_cast<double>(g.subject_descriptor_count[sb]);
    double denom = na + nb - inter;
    if (denom <= 0.0) return 0.0;
    // Distinct cross pairs can outnumber the mean bag size once K nears the
    // cohort size; the ratio saturates at 1 there.
    return std::min(inter / denom, 1.0);
}

namespace {

void check_disjoint(const std::vector<const CohortGraph*>& graphs) {
    std::set<std::string> seen;
    for (const auto* g : graphs)
        for (const auto& m : g->modalities)
            if (!seen.insert(m).second)
                raise(ErrorCode::OverlappingModalities,
                      "modality " + m + " appears in more than one graph");
}

}  // namespace

double combined_similarity(const std::vector<const CohortGraph*>& graphs, const std::string& a,
                           const std::string& b) {
    if (graphs.empty()) raise(ErrorCode::InvalidArgument, "no graphs given");
    check_disjoint(graphs);
    double inter = 0.0, na = 0.0, nb = 0.0;
    for (const auto* g : graphs) {
        std::size_t sa = subject_index(*g, a);
        std::size_t sb = subject_index(*g, b);
        inter += static_cast<double>(intersection_count(*g, a, b));
        na += static_cast<double>(g->subject_descriptor_count[sa]);
        nb += static_cast<double>(g->subject_descriptor_count[sb]);
    }
    double denom = na + nb - inter;
    if (denom <= 0.0) return 0.0;
    return std::min(inter / denom, 1.0);
}

SimilarityMatrix similarity_matrix(const std::vector<const CohortGraph*>& graphs) {
    if (graphs.empty()) raise(ErrorCode::InvalidArgument, "no graphs given");
    check_disjoint(graphs);
    for (std::size_t i = 1; i < graphs.size(); ++i)
        if (graphs[i]->subjects != graphs[0]->subjects)
            raise(ErrorCode::MismatchedCohorts, "graphs list different subjects");

    SimilarityMatrix m;
    m.subjects = graphs[0]->subjects;
    m.k = graphs[0]->k;
    for (const auto* g : graphs)
        m.modalities.insert(m.modalities.end(), g->modalities.begin(), g->modalities.end());
    std::sort(m.modalities.begin(), m.modalities.end());

    std::size_t n = m.subjects.size();
    std::vector<double> inter(n * n, 0.0);
    std::vector<double> sizes(n, 0.0);
    for (const auto* g : graphs) {
        auto gi = pair_intersections(*g);
        for (std::size_t i = 0; i < n * n; ++i) inter[i] += static_cast<double>(gi[i]);
        for (std::size_t s = 0; s < n; ++s)
            sizes[s] += static_cast<double>(g->subject_descriptor_count[s]);
    }

    m.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double denom = sizes[i] + sizes[j] - inter[i * n + j];
            double v = denom <= 0.0 ? 0.0 : inter[i * n + j] / denom;
            v = std::min(v, 1.0);
            m.values[i * n + j] = v;
            m.values[j * n + i] = v;
        }
    return m;
}

SimilarityMatrix similarity_matrix(const CohortGraph& g) {
    return similarity_matrix(std::vector<const CohortGraph*>{&g});
}

void write_graph(const CohortGraph& g, const std::string& path) {
    detail::ByteWriter w;
    w.bytes("VKNN", 4);
    w.u16(1);
    w.u32(static_cast<std::uint32_t>(g.node_count()));
    w.u32(static_cast<std::uint32_t>(g.k));
    w.u32(static_cast<std::uint32_t>(g.subjects.size()));
    for (const auto& s : g.subjects) w.str16(s);
    w.u32(static_cast<std::uint32_t>(g.modalities.size()));
    for (const auto& s : g.modalities) w.str16(s);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        w.u32(g.node_subject[i]);
        w.u32(g.node_modality[i]);
    }
    for (auto o : g.offsets) w.u64(o);
    for (auto t : g.targets) w.u32(t);
    detail::write_file(path, w.data().data(), w.data().size());
}

CohortGraph read_graph(const std::string& path) {
    auto buf = detail::read_file(path);
    detail::ByteReader r(buf.data(), buf.size(), ErrorCode::Truncated);
    if (r.remaining() < 4) raise(ErrorCode::Truncated, path + ": shorter than the magic");
    char magic[4];
    for (auto& c : magic) c = static_cast<char>(r.u8());
    if (std::string(magic, 4) != "VKNN") raise(ErrorCode::BadMagic, path + ": not a graph file");
    std::uint16_t version = r.u16();
    if (version != 1)
        raise(ErrorCode::VersionMismatch,
              path + ": graph version " + std::to_string(version) + ", expected 1");

    CohortGraph g;
    std::uint32_t n = r.u32();
    g.k = static_cast<int>(r.u32());
    std::uint32_t ns = r.u32();
    for (std::uint32_t i = 0; i < ns; ++i) g.subjects.push_back(r.str16());
    std::uint32_t nm = r.u32();
    for (std::uint32_t i = 0; i < nm; ++i) g.modalities.push_back(r.str16());
    g.node_subject.resize(n);
    g.node_modality.resize(n);
    g.subject_descriptor_count.assign(ns, 0);
    for (std::uint32_t i = 0; i < n; ++i) {
        g.node_subject[i] = r.u32();
        g.node_modality[i] = r.u32();
        if (g.node_subject[i] >= ns || g.node_modality[i] >= nm)
            raise(ErrorCode::Truncated, path + ": node table references a missing string");
        g.subject_descriptor_count[g.node_subject[i]] += 1;
    }
    g.offsets.resize(static_cast<std::size_t>(n) + 1);
    for (auto& o : g.offsets) o = r.u64();
    g.targets.resize(g.offsets[n]);
    for (auto& t : g.targets) {
        t = r.u32();
        if (t >= n) raise(ErrorCode::Truncated, path + ": edge target out of range");
    }
    return g;
}

void write_similarity_csv(const SimilarityMatrix& m, const std::string& path) {
    std::string out;
    std::size_t n = m.subjects.size();
    for (const auto& s : m.subjects) {
        out += ',';
        out += s;
    }
    out += '\n';
    char buf[32];
    for (std::size_t i = 0; i < n; ++i) {
        out += m.subjects[i];
        for (std::size_t j = 0; j < n; ++j) {
            std::snprintf(buf, sizeof buf, ",%.6f", m.at(i, j));
            out += buf;
        }
        out += '\n';
    }
    detail::write_file(path, out.data(), out.size());
}

SimilarityMatrix read_similarity_csv(const std::string& path) {
    auto buf = detail::read_file(path);
    std::string text(buf.begin(), buf.end());
    SimilarityMatrix m;
    std::size_t pos = 0;
    auto next_line = [&](std::string& line) {
        if (pos >= text.size()) return false;
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = end + 1;
        return true;
    };
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                cells.push_back(line.substr(start));
                break;
            }
            cells.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        return cells;
    };

    std::string line;
    if (!next_line(line)) raise(ErrorCode::CorruptHeader, path + ": empty matrix file");
    auto header = split(line);
    if (header.size() < 2 || !header[0].empty())
        raise(ErrorCode::CorruptHeader, path + ": matrix header must start with an empty cell");
    m.subjects.assign(header.begin() + 1, header.end());
    std::size_t n = m.subjects.size();
    m.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!next_line(line)) raise(ErrorCode::TruncatedData, path + ": missing matrix row");
        auto cells = split(line);
        if (cells.size() != n + 1 || cells[0] != m.subjects[i])
            raise(ErrorCode::CorruptHeader, path + ": matrix row does not match the header");
        for (std::size_t j = 0; j < n; ++j) {
            char* end = nullptr;
            m.values[i * n + j] = std::strtod(cells[j + 1].c_str(), &end);
            if (end == cells[j + 1].c_str())
                raise(ErrorCode::CorruptHeader, path + ": non-numeric matrix entry");
        }
    }
    return m;
}

}  // namespace vfp
