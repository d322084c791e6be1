#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vfp/fingerprint.hpp"

namespace vfp {

struct GraphOptions {
    int k = 20;
    std::vector<std::string> modalities;  // empty = every modality present
    bool allow_self_edges = false;        // permit edges within one subject
};

/// Cohort-wide descriptor K-NN graph. Nodes are the descriptors of every
/// fingerprint, in fingerprint input order with bag order preserved,
/// filtered to the modality subset; this ordering is the contract that lets
/// downstream consumers map a node index back to its source record. Each
/// node points to its k nearest same-modality nodes of other subjects by
/// Euclidean distance (squared, accumulated in double), ties broken by
/// (subject_id, global node index) ascending. Adjacency is CSR; each node's
/// targets are stored in neighbor-rank order, so the first j targets are
/// exactly the j nearest (truncate_graph relies on this).
struct CohortGraph {
    int k = 0;
    bool allow_self_edges = false;
    std::vector<std::string> subjects;    // fingerprint input order
    std::vector<std::string> modalities;  // subset actually used, sorted
    std::vector<std::uint32_t> node_subject;
    std::vector<std::uint32_t> node_modality;
    std::vector<std::uint64_t> offsets;  // size node_count()+1
    std::vector<std::uint32_t> targets;
    std::vector<std::uint64_t> subject_descriptor_count;  // |A| per subject
    std::vector<std::string> warnings;

    std::size_t node_count() const { return node_subject.size(); }
};

struct SimilarityMatrix {
    std::vector<std::string> subjects;
    std::vector<double> values;  // row-major, symmetric, zero diagonal
    int k = 0;
    std::vector<std::string> modalities;

    double at(std::size_t i, std::size_t j) const { return values[i * subjects.size() + j]; }
};

/// Builds the exact K-NN graph. Raises EmptyCohort for fewer than two
/// fingerprints and InvalidArgument for k < 1 or duplicate subject ids. A
/// modality present in only one subject gets zero edges plus a warning on
/// the graph (no exception).
CohortGraph build_graph(const std::vector<Fingerprint>& fps, const GraphOptions& opt);

/// Derives the k'-NN graph from a larger one by keeping each node's first
/// k' targets. Exact because targets are stored in neighbor-rank order.
CohortGraph truncate_graph(const CohortGraph& g, int k);

/// Number of unordered node pairs {u in a, v in b} joined by at least one
/// directed edge in either direction. Raises UnknownSubject.
std::uint64_t intersection_count(const CohortGraph& g, const std::string& a,
                                 const std::string& b);

/// I / (|A| + |B| - I) with I = intersection_count(g, a, b) and |A|, |B| the
/// subjects' descriptor counts inside the graph's modality subset; 0 when
/// both bags are empty. Saturates at 1 once K rivals the cohort size.
double jaccard_similarity(const CohortGraph& g, const std::string& a, const std::string& b);

/// The same ratio over union bags across graphs with pairwise-disjoint
/// modality subsets: sums of intersections and bag sizes enter the formula.
/// Raises OverlappingModalities when subsets share a modality.
double combined_similarity(const std::vector<const CohortGraph*>& graphs, const std::string& a,
                           const std::string& b);

/// All-pairs similarity over one or several disjoint-modality graphs. All
/// graphs must list identical subjects (MismatchedCohorts otherwise).
SimilarityMatrix similarity_matrix(const std::vector<const CohortGraph*>& graphs);
SimilarityMatrix similarity_matrix(const CohortGraph& g);

/// Graph file, little-endian: magic "VKNN", u16 version (=1), u32 node
/// count, u32 K, subject table (u32 count, then u16-length-prefixed UTF-8
/// strings), modality table (same layout), node table (u32 subject index,
/// u32 modality index per node), CSR offsets ((node count + 1) u64), CSR
/// targets (u32 each).
void write_graph(const CohortGraph& g, const std::string& path);
CohortGraph read_graph(const std::string& path);

/// Similarity matrix CSV: header row and column of subject ids, entries
/// with 6 decimal places.
void write_similarity_csv(const SimilarityMatrix& m, const std::string& path);
SimilarityMatrix read_similarity_csv(const std::string& path);

}  // namespace vfp
