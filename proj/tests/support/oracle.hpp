#ifndef PETSEG_TESTS_ORACLE_HPP
#define PETSEG_TESTS_ORACLE_HPP

#include <cstdint>
#include <set>
#include <vector>

#include "petseg/volume.hpp"

// Brute-force, set-based reimplementation of the metric definitions, kept
// deliberately independent of the library's algorithms: components grow by
// O(n^2) frontier scans over voxel sets, surface distances are exhaustive
// pairwise checks. Only usable at small sizes.
namespace oracle {

using VoxelSet = std::set<std::int64_t>;

VoxelSet foreground(const petseg::LabelMap& mask);

std::vector<VoxelSet> components(const petseg::LabelMap& mask, int connectivity);

double dice(const petseg::LabelMap& pred, const petseg::LabelMap& gt);

double fpv_ml(const petseg::LabelMap& pred, const petseg::LabelMap& gt, int connectivity);

double fnv_ml(const petseg::LabelMap& pred, const petseg::LabelMap& gt, int connectivity);

double nsd(const petseg::LabelMap& pred, const petseg::LabelMap& gt, double tolerance_mm);

} // namespace oracle

#endif
