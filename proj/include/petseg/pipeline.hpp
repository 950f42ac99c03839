#ifndef PETSEG_PIPELINE_HPP
#define PETSEG_PIPELINE_HPP

#include "petseg/ensemble.hpp"
#include "petseg/net/train.hpp"
#include "petseg/preprocess.hpp"

namespace petseg {

// Stacks PET (channel 0, passthrough) and CT (channel 1, clipped and
// z-scored) into a single-sample training tensor. Volumes must share the
// label grid; resampling happens upstream. Tensor axes map (D, H, W) to
// volume axes (2, 1, 0), so the flat voxel order is shared.
template <typename T>
net::TrainingCase<T> make_training_case(const Volume3D& pet, const Volume3D& ct,
                                        const LabelMap& labels,
                                        const NormalizationSpec& ct_norm = {}) {
    require_same_grid(pet.geometry, labels.geometry, "make_training_case");
    require_same_grid(ct.geometry, labels.geometry, "make_training_case");

    const Volume3D ct_n = normalize_ct(ct, ct_norm);
    const auto& d = labels.geometry.dims;

    net::TrainingCase<T> out;
    out.image.resize(1, 2, d[2], d[1], d[0]);
    out.labels = labels;

    T* pet_plane = out.image.plane(0, 0);
    T* ct_plane = out.image.plane(0, 1);
    for (std::size_t v = 0; v < pet.data.size(); ++v) {
        pet_plane[v] = T(pet.data[v]);
        ct_plane[v] = T(ct_n.data[v]);
    }
    return out;
}

// Wraps a single-sample softmax tensor as a ProbabilityVolume on the case grid.
template <typename T>
ProbabilityVolume probs_from_tensor(const net::Tensor<T>& probs, const Geometry& geometry) {
    if (probs.shape[0] != 1)
        throw ShapeError("probs_from_tensor expects a single-sample tensor");
    if (probs.spatial() != geometry.voxel_count())
        throw ShapeError("probability tensor does not match the case grid");

    ProbabilityVolume pv;
    pv.geometry = geometry;
    pv.classes = int(probs.shape[1]);
    pv.probs.resize(std::size_t(probs.count()));
    for (std::int64_t c = 0; c < probs.shape[1]; ++c) {
        const T* src = probs.plane(0, c);
        double* dst = pv.probs.data() + c * probs.spatial();
        for (std::int64_t v = 0; v < probs.spatial(); ++v) dst[v] = double(src[v]);
    }
    return pv;
}

// Single-case inference: forward, softmax, argmax.
template <typename T>
LabelMap predict_labels(net::Network<T>& net, const net::Tensor<T>& image,
                        const Geometry& geometry) {
    const net::Tensor<T> probs = net::forward(net, image);
    return argmax_labels(probs_from_tensor(probs, geometry));
}

} // namespace petseg

#endif
