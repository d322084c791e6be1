#include "vfp/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "vfp/errors.hpp"
#include "vfp/parallel.hpp"
#include "vfp/volume_io.hpp"

namespace vfp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ (v + (h << 6) + (h >> 2))); }

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller, cosine branch only; the open-interval shift keeps log finite.
double normal(std::mt19937_64& rng) {
    double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct Blob {
    double x, y, z;
    double sigma;
    double amp;
};

Blob draw_blob(std::mt19937_64& rng, const PhantomSpec& spec) {
    double margin = std::max(4.0, spec.dims / 12.0);
    Blob b;
    b.x = uniform(rng, margin, spec.dims - 1 - margin);
    b.y = uniform(rng, margin, spec.dims - 1 - margin);
    b.z = uniform(rng, margin, spec.dims - 1 - margin);
    b.sigma = uniform(rng, spec.sigma_min, spec.sigma_max);
    b.amp = uniform(rng, spec.amp_min, spec.amp_max);
    return b;
}

void render_blob(Grid3& g, const Blob& b) {
    int dims = g.dims[0];
    double half = 4.0 * b.sigma;
    int x0 = std::max(0, static_cast<int>(std::floor(b.x - half)));
    int x1 = std::min(dims - 1, static_cast<int>(std::ceil(b.x + half)));
    int y0 = std::max(0, static_cast<int>(std::floor(b.y - half)));
    int y1 = std::min(dims - 1, static_cast<int>(std::ceil(b.y + half)));
    int z0 = std::max(0, static_cast<int>(std::floor(b.z - half)));
    int z1 = std::min(dims - 1, static_cast<int>(std::ceil(b.z + half)));
    double inv = 1.0 / (2.0 * b.sigma * b.sigma);

    std::vector<double> ex(x1 - x0 + 1), ey(y1 - y0 + 1), ez(z1 - z0 + 1);
    for (int x = x0; x <= x1; ++x) ex[x - x0] = std::exp(-(x - b.x) * (x - b.x) * inv);
    for (int y = y0; y <= y1; ++y) ey[y - y0] = std::exp(-(y - b.y) * (y - b.y) * inv);
    for (int z = z0; z <= z1; ++z) ez[z - z0] = std::exp(-(z - b.z) * (z - b.z) * inv);

    for (int z = z0; z <= z1; ++z)
        for (int y = y0; y <= y1; ++y) {
            double wzy = b.amp * ez[z - z0] * ey[y - y0];
            for (int x = x0; x <= x1; ++x)
                g.values[g.index(x, y, z)] += static_cast<float>(wzy * ex[x - x0]);
        }
}

void validate(const PhantomSpec& spec) {
    if (spec.dims < 32) raise(ErrorCode::InvalidSpec, "phantom dims must be at least 32");
    if (spec.spacing <= 0.0) raise(ErrorCode::InvalidSpec, "phantom spacing must be positive");
    if (spec.blob_count < 1) raise(ErrorCode::InvalidSpec, "phantom needs at least one blob");
    if (spec.sigma_min <= 0.0 || spec.sigma_max < spec.sigma_min)
        raise(ErrorCode::InvalidSpec, "bad blob sigma range");
    if (spec.amp_min <= 0.0 || spec.amp_max < spec.amp_min)
        raise(ErrorCode::InvalidSpec, "bad blob amplitude range");
    if (spec.clone_pairs < 0 || spec.sib_pairs < 0 || spec.nt_pairs < 0 || spec.singletons < 0)
        raise(ErrorCode::InvalidSpec, "negative cohort class count");
    if (spec.clone_pairs + spec.sib_pairs + spec.nt_pairs + spec.singletons == 0)
        raise(ErrorCode::InvalidSpec, "cohort is empty");
    if (spec.clone_shared < 0.0 || spec.clone_shared > 1.0 || spec.sib_shared < 0.0 ||
        spec.sib_shared > 1.0)
        raise(ErrorCode::InvalidSpec, "shared fractions must lie in [0,1]");
    if (spec.jitter_pos < 0.0 || spec.jitter_size < 0.0 || spec.noise_sigma < 0.0)
        raise(ErrorCode::InvalidSpec, "jitter and noise must be non-negative");
    if (spec.modalities.empty()) raise(ErrorCode::InvalidSpec, "at least one modality required");
    std::set<std::string> names;
    for (const auto& m : spec.modalities) {
        if (m.name.empty()) raise(ErrorCode::InvalidSpec, "empty modality name");
        if (!names.insert(m.name).second)
            raise(ErrorCode::InvalidSpec, "duplicate modality name " + m.name);
        if (m.partition_count < 1 || m.partition_index < 0 ||
            m.partition_index >= m.partition_count)
            raise(ErrorCode::InvalidSpec, "bad blob partition for modality " + m.name);
        if (m.gamma <= 0.0) raise(ErrorCode::InvalidSpec, "gamma must be positive");
    }
}

enum class FamilyClass { Clone, Sib, Nt, Singleton };

struct FamilyPlan {
    FamilyClass cls;
    int members;
    std::vector<Blob> base;
    std::vector<int> ages;
};

}  // namespace

PhantomCohort generate_cohort(const PhantomSpec& spec) {
    validate(spec);

    std::vector<FamilyPlan> families;
    for (int i = 0; i < spec.clone_pairs; ++i) families.push_back({FamilyClass::Clone, 2, {}, {}});
    for (int i = 0; i < spec.sib_pairs; ++i) families.push_back({FamilyClass::Sib, 2, {}, {}});
    for (int i = 0; i < spec.nt_pairs; ++i) families.push_back({FamilyClass::Nt, 2, {}, {}});
    for (int i = 0; i < spec.singletons; ++i)
        families.push_back({FamilyClass::Singleton, 1, {}, {}});

    for (std::size_t f = 0; f < families.size(); ++f) {
        auto& fam = families[f];
        std::mt19937_64 rng(mix(spec.seed, f));
        fam.base.reserve(spec.blob_count);
        for (int i = 0; i < spec.blob_count; ++i) fam.base.push_back(draw_blob(rng, spec));
        int age = 20 + static_cast<int>(rng() % 40);
        if (fam.cls == FamilyClass::Nt) {
            int gap = 1 + static_cast<int>(rng() % 9);
            fam.ages = {age, std::min(age + gap, 80)};
        } else {
            fam.ages.assign(fam.members, age);
        }
    }

    PhantomCohort cohort;
    std::vector<std::pair<std::size_t, int>> slots;  // (family, member)
    for (std::size_t f = 0; f < families.size(); ++f)
        for (int j = 0; j < families[f].members; ++j) slots.emplace_back(f, j);

    cohort.subjects.resize(slots.size());

    parallel_for(slots.size(), [&](std::size_t s0, std::size_t s1) {
        for (std::size_t s = s0; s < s1; ++s) {
            auto [f, j] = slots[s];
            const FamilyPlan& fam = families[f];

            char sid[16], fid[16];
            std::snprintf(sid, sizeof sid, "S%04zu", s);
            std::snprintf(fid, sizeof fid, "F%04zu", f);

            double shared_fraction = fam.cls == FamilyClass::Clone ? spec.clone_shared
                                     : fam.cls == FamilyClass::Singleton ? 0.0
                                                                         : spec.sib_shared;
            int n_shared = static_cast<int>(std::lround(shared_fraction * spec.blob_count));

            std::mt19937_64 rng(mix(mix(spec.seed, f), 7919 + static_cast<std::uint64_t>(j)));
            std::vector<Blob> blobs;
            blobs.reserve(spec.blob_count);
            for (int i = 0; i < n_shared; ++i) {
                Blob b = fam.base[i];
                double jx = normal(rng), jy = normal(rng), jz = normal(rng);
                double js = normal(rng);
                b.x = std::clamp(b.x + jx * spec.jitter_pos, 0.0, spec.dims - 1.0);
                b.y = std::clamp(b.y + jy * spec.jitter_pos, 0.0, spec.dims - 1.0);
                b.z = std::clamp(b.z + jz * spec.jitter_pos, 0.0, spec.dims - 1.0);
                b.sigma = std::max(0.5, b.sigma * (1.0 + js * spec.jitter_size));
                blobs.push_back(b);
            }
            for (int i = n_shared; i < spec.blob_count; ++i) blobs.push_back(draw_blob(rng, spec));

            PhantomSubject& subj = cohort.subjects[s];
            subj.meta.subject_id = sid;
            subj.meta.mother_id = fid;
            subj.meta.age = fam.ages[j];
            subj.meta.sex = (s % 2) ? "F" : "M";
            subj.meta.zygosity = fam.cls == FamilyClass::Clone ? Zygosity::MZ
                                 : fam.cls == FamilyClass::Sib ? Zygosity::DZ
                                                               : Zygosity::NotTwin;

            for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
                const PhantomModality& mod = spec.modalities[m];
                Volume v;
                v.grid = Grid3(spec.dims, spec.dims, spec.dims);
                v.spacing = {spec.spacing, spec.spacing, spec.spacing};
                v.subject_id = sid;
                v.modality_id = normalize_modality(mod.name);

                for (int i = 0; i < spec.blob_count; ++i) {
                    if (i % mod.partition_count != mod.partition_index) continue;
                    render_blob(v.grid, blobs[i]);
                }
                if (mod.gamma != 1.0)
                    for (auto& val : v.grid.values)
                        val = static_cast<float>(std::pow(static_cast<double>(val), mod.gamma));
                if (spec.noise_sigma > 0.0) {
                    std::mt19937_64 nrng(
                        mix(mix(mix(spec.seed, f), static_cast<std::uint64_t>(j)),
                            1000 + static_cast<std::uint64_t>(m)));
                    for (auto& val : v.grid.values)
                        val += static_cast<float>(normal(nrng) * spec.noise_sigma);
                }
                subj.meta.volumes.emplace_back(v.modality_id,
                                               std::string(sid) + "_" + v.modality_id + ".f32");
                subj.volumes.push_back(std::move(v));
            }
        }
    });

    for (const auto& s : cohort.subjects) cohort.manifest.entries.push_back(s.meta);
    return cohort;
}

void write_cohort(const PhantomCohort& cohort, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& s : cohort.subjects)
        for (const auto& v : s.volumes)
            write_raw(v, (std::filesystem::path(dir) /
                          (v.subject_id + "_" + v.modality_id + ".f32")).string());
    write_manifest(cohort.manifest, (std::filesystem::path(dir) / "manifest.csv").string());
}

}  // namespace vfp
