#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vfp/evaluation.hpp"
#include "vfp/volume.hpp"

namespace vfp {

/// One synthetic modality: a monotone intensity remap (gamma power) plus an
/// index-based blob subset. partition_count 1 keeps every blob; two
/// modalities with partition_count 2 and indices 0, 1 carry disjoint blobs.
struct PhantomModality {
    std::string name = "T1";
    double gamma = 1.0;
    int partition_index = 0;
    int partition_count = 1;
};

/// Synthetic cohort layout. Families draw a base set of Gaussian blobs;
/// each member keeps round(shared_fraction * blob_count) of them (with
/// position/size jitter) and draws the rest fresh. Classes map to manifest
/// metadata: clone pairs are same-age MZ twins, sib pairs same-age DZ twins,
/// nt pairs different-age non-twin siblings; singletons have no relatives.
struct PhantomSpec {
    int dims = 96;          // cubic volume edge, voxels (>= 32)
    double spacing = 1.0;   // mm, isotropic
    int blob_count = 40;
    double sigma_min = 2.0, sigma_max = 6.0;  // blob scale range, voxels
    double amp_min = 0.4, amp_max = 1.0;
    int clone_pairs = 2;
    int sib_pairs = 2;
    int nt_pairs = 2;
    int singletons = 2;
    double clone_shared = 1.0;
    double sib_shared = 0.5;   // also used for nt pairs
    double jitter_pos = 0.5;   // voxel std-dev on shared blob centers
    double jitter_size = 0.05; // fractional std-dev on shared blob sigma
    double noise_sigma = 0.01; // additive voxel noise
    std::vector<PhantomModality> modalities = {PhantomModality{}};
    std::uint64_t seed = 0;
};

struct PhantomSubject {
    ManifestEntry meta;           // paths filled with relative file names
    std::vector<Volume> volumes;  // one per modality, PhantomSpec::modalities order
};

struct PhantomCohort {
    std::vector<PhantomSubject> subjects;
    CohortManifest manifest;
};

/// Deterministic in (spec.seed, subject index); the same spec reproduces the
/// cohort bitwise. Raises InvalidSpec on out-of-range fields.
PhantomCohort generate_cohort(const PhantomSpec& spec);

/// Writes every volume in raw format plus manifest.csv into dir (created if
/// missing); manifest paths stay relative to dir.
void write_cohort(const PhantomCohort& cohort, const std::string& dir);

}  // namespace vfp
