// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "sculpt/enhance/latent.hpp"

namespace sculpt {

/// Prompt identity and depth map passed to every evaluation.
struct Conditioning {
    std::string prompt;
    std::shared_ptr<const DepthImage> depth;
};

using LayerTensors = std::map<std::string, Latent>;

/// Tensors to substitute at named layers during an evaluation.
struct Overrides {
    LayerTensors features;
    LayerTensors attentions;
    bool empty() const { return features.empty() && attentions.empty(); }
};

struct PredictorOutput {
    Latent epsilon;
    LayerTensors features;
    LayerTensors attentions;
};

/// Noise predictor with named internal layers. Implementations must be
/// deterministic and must compute epsilon with overridden tensors substituted.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual std::vector<std::string> layers() const = 0;
    virtual PredictorOutput evaluate(const Latent& x, const Conditioning& cond, int t, const Overrides& overrides) const = 0;
};

/// Checks an output against the input shape and the declared layer list.
inline void check_output(const Predictor& p, const Latent& x, const PredictorOutput& out) {
    require_same_shape(x, out.epsilon, "predictor epsilon");
    require_finite(out.epsilon, "predictor epsilon");
    const auto names = p.layers();
    for (const auto* maps : {&out.features, &out.attentions})
        for (const auto& [name, _] : *maps)
            if (std::find(names.begin(), names.end(), name) == names.end())
                throw InvalidArgument("predictor emitted undeclared layer '" + name + "'");
}

// ---- deterministic mocks ----

/// Every layer tensor is the input latent; epsilon is `scale` times the mean of
/// the layer tensors actually used (the input when there are no layers). With
/// no overrides this is epsilon = scale * x. Ignores conditioning.
class LinearPredictor : public Predictor {
public:
    explicit LinearPredictor(double scale, std::vector<std::string> layers = {}) : scale_(scale), layers_(std::move(layers)) {}

    std::vector<std::string> layers() const override { return layers_; }

    PredictorOutput evaluate(const Latent& x, const Conditioning&, int, const Overrides& o) const override {
        PredictorOutput out;
        for (const auto& l : layers_) {
            out.features[l] = x;
            out.attentions[l] = x;
        }
        out.epsilon = x;
        if (layers_.empty() || o.empty()) {
            out.epsilon.values *= scale_;
            return out;
        }
        out.epsilon.values.setZero();
        for (const auto& l : layers_) {
            for (const auto* kind : {&o.features, &o.attentions}) {
                const auto it = kind->find(l);
                const Latent& used = it == kind->end() ? x : it->second;
                require_same_shape(x, used, "override for layer '" + l + "'");
                out.epsilon.values += used.values;
            }
        }
        out.epsilon.values *= scale_ / (2.0 * layers_.size());
        return out;
    }

private:
    double scale_;
    std::vector<std::string> layers_;
};

/// epsilon = 0 everywhere.
class ZeroPredictor : public LinearPredictor {
public:
    explicit ZeroPredictor(std::vector<std::string> layers = {}) : LinearPredictor(0.0, std::move(layers)) {}
};

/// Wraps another predictor and keeps every call for inspection.
class RecordingPredictor : public Predictor {
public:
    struct Call {
        int t;
        std::string prompt;
        Latent input;
        Overrides overrides;
        PredictorOutput output;
    };

    explicit RecordingPredictor(std::shared_ptr<const Predictor> inner) : inner_(std::move(inner)) {}

    std::vector<std::string> layers() const override { return inner_->layers(); }

    PredictorOutput evaluate(const Latent& x, const Conditioning& c, int t, const Overrides& o) const override {
        auto out = inner_->evaluate(x, c, t, o);
        std::lock_guard lock(mutex_);
        calls_.push_back({t, c.prompt, x, o, out});
        return out;
    }

    std::vector<Call> calls() const {
        std::lock_guard lock(mutex_);
        return calls_;
    }

private:
    std::shared_ptr<const Predictor> inner_;
    mutable std::mutex mutex_;
    mutable std::vector<Call> calls_;
};

} // namespace sculpt
