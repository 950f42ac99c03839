#ifndef PETSEG_NET_CONFIG_HPP
#define PETSEG_NET_CONFIG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "petseg/errors.hpp"

namespace petseg::net {

// Architecture description. Defaults mirror the full-scale model (feature
// widths 32 doubling to a 1024 cap over five downsamples); tests and the
// synthetic experiments use much smaller values.
struct NetConfig {
    int in_channels = 2;
    int num_classes = 10;
    int base_features = 32;
    int num_downsamples = 5;
    int feature_cap = 1024;
    double leaky_slope = 0.01;
    double norm_epsilon = 1e-5;

    int num_stages() const { return num_downsamples + 1; }

    int stage_features(int stage) const {
        std::int64_t f = std::int64_t(base_features) << stage;
        return int(std::min<std::int64_t>(f, feature_cap));
    }

    void validate() const {
        if (in_channels < 1 || num_classes < 2 || base_features < 1 || feature_cap < base_features)
            throw ConfigError("invalid channel/feature configuration");
        if (num_downsamples < 1 || num_downsamples > 10)
            throw ConfigError("num_downsamples out of range");
        if (!(leaky_slope >= 0.0) || !(norm_epsilon > 0.0))
            throw ConfigError("invalid activation/normalization parameters");
    }
};

struct LossSpec {
    double dice_epsilon = 1e-5;
    std::vector<double> class_weights; // empty = uniform 1.0 per class
    double dice_ce_mix = 0.5;          // loss = mix * dice + (1 - mix) * weighted CE

    void validate(int num_classes) const {
        if (!(dice_epsilon > 0.0))
            throw ConfigError("dice_epsilon must be positive");
        if (!(dice_ce_mix >= 0.0 && dice_ce_mix <= 1.0))
            throw ConfigError("dice_ce_mix must lie in [0, 1]");
        if (!class_weights.empty()) {
            if (class_weights.size() != static_cast<std::size_t>(num_classes))
                throw ConfigError("need one class weight per class");
            for (double w : class_weights)
                if (!(w > 0.0))
                    throw ConfigError("class weights must be positive");
        }
    }

    double weight(int cls) const {
        return class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(cls)];
    }
};

// Plain SGD with momentum: v <- momentum * v + g; w <- w - lr_t * v. With
// poly decay enabled, lr_t = lr * (1 - epoch / max_epochs)^poly_exponent.
struct OptimizerState {
    double learning_rate = 0.01;
    double momentum = 0.99;
    bool poly_decay = false;
    double poly_exponent = 0.9;
    int epoch = 0;
    int max_epochs = 1000;
    std::vector<double> velocity; // flat, aligned with the parameter registry

    void validate() const {
        if (!(learning_rate > 0.0))
            throw ConfigError("learning rate must be positive");
        if (!(momentum >= 0.0 && momentum < 1.0))
            throw ConfigError("momentum must lie in [0, 1)");
        if (max_epochs < 1)
            throw ConfigError("max_epochs must be >= 1");
    }

    double effective_lr() const {
        if (!poly_decay) return learning_rate;
        const double frac = 1.0 - double(epoch) / double(max_epochs);
        return learning_rate * std::pow(std::max(frac, 0.0), poly_exponent);
    }
};

} // namespace petseg::net

#endif
