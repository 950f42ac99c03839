#ifndef PETSEG_NET_TRAIN_HPP
#define PETSEG_NET_TRAIN_HPP

#include <numeric>

#include "petseg/augment.hpp"
#include "petseg/net/loss.hpp"

namespace petseg::net {

template <typename T>
struct TrainingCase {
    Tensor<T> image; // (1, C, D, H, W)
    LabelMap labels; // geometry supplies spacing for augmentation
};

struct TrainHistory {
    std::vector<double> epoch_loss;      // mean loss per epoch
    std::vector<int> eval_epochs;        // epochs at which train dice was measured
    std::vector<double> eval_train_dice; // mean per-case lesion dice
    int epochs_run = 0;
};

struct EarlyStop {
    double target_train_dice = -1.0; // < 0 disables evaluation
    int eval_every = 10;
    int lesion_class = 1;
};

namespace detail {

// hard lesion dice of argmax predictions against the stored labels
template <typename T>
double train_set_dice(Network<T>& net, const std::vector<TrainingCase<T>>& dataset,
                      int lesion_class, Workspace<T>& ws) {
    double total = 0.0;
    for (const auto& item : dataset) {
        forward_logits(net, item.image, ws);
        softmax(ws.logits, ws.probs);
        const std::int64_t M = ws.probs.spatial();
        const std::int64_t C = ws.probs.shape[1];
        std::int64_t inter = 0, p_count = 0, g_count = 0;
        for (std::int64_t v = 0; v < M; ++v) {
            int best = 0;
            T best_p = ws.probs.plane(0, 0)[v];
            for (std::int64_t c = 1; c < C; ++c) {
                const T p = ws.probs.plane(0, c)[v];
                if (p > best_p) {
                    best_p = p;
                    best = int(c);
                }
            }
            const bool pred = best == lesion_class;
            const bool gt = item.labels.labels[std::size_t(v)] == lesion_class;
            inter += (pred && gt);
            p_count += pred;
            g_count += gt;
        }
        total += (p_count + g_count) == 0 ? 1.0 : 2.0 * double(inter) / double(p_count + g_count);
    }
    return total / double(dataset.size());
}

template <typename T>
TrainingCase<T> augment_case(const TrainingCase<T>& item, const AugmentationSpec& aug,
                             std::uint64_t seed) {
    const SampledTransform t = sample_transform(aug, seed);
    if (t.is_identity()) return item;

    const auto C = item.image.shape[1];
    std::vector<Volume3D> channels;
    channels.reserve(std::size_t(C));
    for (std::int64_t c = 0; c < C; ++c) {
        Volume3D vol(item.labels.geometry, 0.0);
        const T* src = item.image.plane(0, c);
        for (std::size_t v = 0; v < vol.data.size(); ++v) vol.data[v] = double(src[v]);
        channels.push_back(std::move(vol));
    }
    auto [warped, labels] = apply_transform_multi(channels, item.labels, t);

    TrainingCase<T> out;
    out.image = item.image;
    out.labels = std::move(labels);
    for (std::int64_t c = 0; c < C; ++c) {
        T* dst = out.image.plane(0, c);
        for (std::size_t v = 0; v < warped[std::size_t(c)].data.size(); ++v)
            dst[v] = T(warped[std::size_t(c)].data[v]);
    }
    return out;
}

} // namespace detail

// Seeded-shuffle minibatch SGD. Deterministic end-to-end for a fixed seed:
// the per-epoch order, every augmentation draw and all gradient accumulation
// run in a fixed single-threaded order.
template <typename T>
TrainHistory train(Network<T>& net, const std::vector<TrainingCase<T>>& dataset, int epochs,
                   int batch_size, OptimizerState& opt, const LossSpec& spec,
                   const AugmentationSpec& aug, std::uint64_t seed, const EarlyStop& early = {}) {
    if (dataset.empty())
        throw EmptyInputError("training dataset is empty");
    if (epochs < 0 || batch_size < 1)
        throw ConfigError("epochs must be >= 0 and batch_size >= 1");
    opt.validate();
    aug.validate();

    const auto& shape0 = dataset.front().image.shape;
    for (const auto& item : dataset) {
        if (item.image.shape != shape0)
            throw ShapeError("all training cases must share one image shape");
        if (item.labels.size() != shape0[2] * shape0[3] * shape0[4])
            throw ShapeError("labels do not match the image grid");
    }

    const bool augment_on = !aug.all_disabled();
    Rng master(seed);
    Workspace<T> ws;
    TrainHistory history;

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    Tensor<T> batch_x;
    LabelBatch batch_y;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng epoch_rng = master.fork(std::uint64_t(epoch));
        epoch_rng.shuffle(order);

        double loss_sum = 0.0;
        std::int64_t seen = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += std::size_t(batch_size)) {
            const auto end = std::min(order.size(), begin + std::size_t(batch_size));
            const auto n = std::int64_t(end - begin);

            batch_x.resize(n, shape0[1], shape0[2], shape0[3], shape0[4]);
            batch_y = LabelBatch(n, shape0[2], shape0[3], shape0[4]);
            for (std::int64_t b = 0; b < n; ++b) {
                const auto& item = dataset[order[begin + std::size_t(b)]];
                if (augment_on) {
                    const auto aug_seed = epoch_rng.next_u64();
                    const auto warped = detail::augment_case(item, aug, aug_seed);
                    std::copy(warped.image.data.begin(), warped.image.data.end(),
                              batch_x.data.begin() + b * warped.image.count());
                    std::copy(warped.labels.labels.begin(), warped.labels.labels.end(),
                              batch_y.sample(b));
                } else {
                    std::copy(item.image.data.begin(), item.image.data.end(),
                              batch_x.data.begin() + b * item.image.count());
                    std::copy(item.labels.labels.begin(), item.labels.labels.end(),
                              batch_y.sample(b));
                }
            }

            const double loss = backward(net, batch_x, batch_y, spec, ws);
            sgd_step(net, opt);
            loss_sum += loss * double(n);
            seen += n;
        }
        history.epoch_loss.push_back(loss_sum / double(seen));
        history.epochs_run = epoch + 1;
        opt.epoch += 1;

        if (early.target_train_dice >= 0.0 &&
            ((epoch + 1) % early.eval_every == 0 || epoch + 1 == epochs)) {
            const double d = detail::train_set_dice(net, dataset, early.lesion_class, ws);
            history.eval_epochs.push_back(epoch + 1);
            history.eval_train_dice.push_back(d);
            if (d >= early.target_train_dice) break;
        }
    }
    return history;
}

} // namespace petseg::net

#endif
