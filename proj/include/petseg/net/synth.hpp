#ifndef PETSEG_NET_SYNTH_HPP
#define PETSEG_NET_SYNTH_HPP

#include <cstdint>
#include <vector>

#include "petseg/volume.hpp"

namespace petseg::net {

// One synthetic PET/CT case: bright organ-like distractors whose intensity
// range overlaps the lesions, so intensity alone cannot separate the two.
struct SyntheticStudy {
    Volume3D pet;
    Volume3D ct;
    LabelMap lesion;                // binary
    std::vector<LabelMap> organs;   // binary, one per organ class
};

// Deterministic per seed. PET holds a dim background, n_organs large bright
// ellipsoids (with small internal hotspots) and n_lesions small bright
// ellipsoids kept clear of the organs; CT is a smooth tissue-like field in
// which organs and lesions share the same contrast.
SyntheticStudy generate_synthetic_study(const Index3& size, int n_organs, int n_lesions,
                                        std::uint64_t seed);

} // namespace petseg::net

#endif
