#pragma once

// Procedural multi-part assemblies with interchangeable parts.
//
//   table: top + 4 identical legs                   (N = 5)
//   chair: seat + tilted back + 4 identical legs    (N = 6)
//   lamp:  base + pole + shade, all cylinders       (N = 3)
//
// Every part's points are sampled on its surface in a local frame and then
// centred. GT poses map the centred cloud back into the assembled shape, which
// lies inside the unit cube centred at the origin.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scorepa/geometry.hpp"
#include "scorepa/rng.hpp"

namespace scorepa {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr std::string_view kDatasetFormat = "scorepa-assembly";

enum class Category { table, chair, lamp };
std::string_view category_name(Category c);
/// Throws InputError for unknown names.
Category parse_category(std::string_view name);

struct Contact {
    std::size_t i = 0;
    std::size_t j = 0;
    std::array<double, 3> point{};  // in the GT assembled frame

    friend bool operator==(const Contact&, const Contact&) = default;
};

struct AssemblyInstance {
    std::string id;
    Category category = Category::table;
    std::vector<Cloud> parts;
    PoseSet gt_poses;
    std::vector<Contact> contacts;
    /// Partition of part indices; every class sorted, classes ordered by first index.
    std::vector<std::vector<std::size_t>> equivalence_classes;

    std::size_t n_parts() const { return parts.size(); }
    friend bool operator==(const AssemblyInstance&, const AssemblyInstance&) = default;
};

/// count >= 1; instance k uses NoiseSource::derive(seed, k), so any prefix of a
/// larger run is identical. jitter is the std-dev of Gaussian surface noise.
std::vector<AssemblyInstance> generate(Category category, std::size_t count, std::uint64_t seed,
                                       double jitter = 0.0);

/// Checks the structural invariants (counts, centring, classes, contacts).
void validate_instance(const AssemblyInstance& inst);

std::string instance_to_json_line(const AssemblyInstance& inst);
/// line_no is used in error messages only.
AssemblyInstance instance_from_json_line(const std::string& line, std::size_t line_no);

/// With a non-null meta, the first line is {"format", "version", "header": meta};
/// loaders skip it.
void save_dataset(const std::filesystem::path& path, const std::vector<AssemblyInstance>& instances,
                  const nlohmann::json& meta = nullptr);
/// Throws VersionError for a foreign format version and ParseError (naming
/// the 1-based line) for malformed or truncated lines.
std::vector<AssemblyInstance> load_dataset(const std::filesystem::path& path);

/// Applies one random permutation to parts, poses, contacts and classes.
AssemblyInstance permute_parts(const AssemblyInstance& inst, const std::vector<std::size_t>& perm);
AssemblyInstance canonical_permutation_augment(const AssemblyInstance& inst, NoiseSource& noise);

}  // namespace scorepa
