// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <set>
#include <sstream>

#include "sculpt/core/json.hpp"
#include "sculpt/enhance/ddim.hpp"

namespace sculpt {

/// Which coarse-path tensors are injected and when. Fractions are of T.
struct InjectionConfig {
    double tau_f = 0.2;
    double tau_A = 0.5;
    double refiner_fraction = 0.1;
    std::vector<std::string> feature_layers;
    std::vector<std::string> attention_layers;

    void validate() const {
        for (double v : {tau_f, tau_A, refiner_fraction})
            if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("injection fractions must lie in [0, 1]");
    }

    void validate_layers(const std::vector<std::string>& declared) const {
        for (const auto* set : {&feature_layers, &attention_layers})
            for (const auto& l : *set)
                if (std::find(declared.begin(), declared.end(), l) == declared.end())
                    throw InvalidArgument("layer '" + l + "' is not declared by the predictor");
    }
};

namespace detail {

// Fraction boundary in steps, snapped to an integer when within rounding.
inline double step_edge(int T, double fraction) {
    const double e = T * fraction;
    const double r = std::round(e);
    return std::abs(e - r) <= 1e-9 * std::max(1, T) ? r : e;
}

} // namespace detail

/// Injection is active for the first `tau` fraction of the denoising steps,
/// i.e. while t > T (1 - tau), counting t down from T.
inline bool injects_at(int t, int T, double tau) { return t > detail::step_edge(T, 1.0 - tau); }

/// The refiner takes over for the last `fraction` of the steps: t <= fraction T.
inline bool refiner_at(int t, int T, double fraction) { return t <= detail::step_edge(T, fraction); }

/// Background mask m (1 = keep background) and background states bg_0..bg_T.
struct BlendMask {
    Latent mask;
    std::vector<DiffusionState> background;
};

/// Inverts the background latent with the inversion predictor to get bg_t for every step.
inline BlendMask make_blend(const Latent& background, const Latent& mask, const Predictor& p, const Conditioning& c,
                            const DiffusionSchedule& s) {
    require_same_shape(background, mask, "blend mask");
    return BlendMask{mask, ddim_invert(background, p, c, s)};
}

inline void apply_blend(DiffusionState& st, const BlendMask& b) {
    const DiffusionState& bg = b.background.at(st.t);
    st.z.values = (b.mask.values != 0.0).select(bg.z.values, st.z.values);
}

struct AuditRecord {
    int step = 0;
    std::string predictor;
    std::vector<std::string> overridden_layers;  // "feature:<layer>" / "attention:<layer>"

    bool overrides(const std::string& kind) const {
        return std::any_of(overridden_layers.begin(), overridden_layers.end(),
                           [&](const std::string& s) { return s.rfind(kind + ":", 0) == 0; });
    }
};

inline Json audit_json(const AuditRecord& r) {
    return Json{{"step", r.step}, {"predictor", r.predictor}, {"overridden_layers", r.overridden_layers}};
}

inline std::string audit_ndjson(const std::vector<AuditRecord>& log) {
    std::string out;
    for (const auto& r : log) out += audit_json(r).dump() + "\n";
    return out;
}

struct EnhancementResult {
    Latent latent;                       // decoded output (the decoder is the identity)
    std::vector<DiffusionState> coarse;  // inversion trajectory of the coarse latent
    std::vector<AuditRecord> audit;
};

inline constexpr const char* kBasePredictor = "base";
inline constexpr const char* kRefinerPredictor = "refiner";
inline constexpr const char* kDecoderStage = "decoder:identity";

/// Coarse-to-fine enhancement: invert the coarse latent, then denoise a copy of
/// x_T while injecting coarse-path features and self-attention maps early on,
/// optionally keeping the background from `blend`.
inline EnhancementResult run_enhancement(const Latent& coarse, const Conditioning& cond_inv, const Conditioning& cond_fwd,
                                         const Predictor& base, const Predictor& refiner, const InjectionConfig& cfg,
                                         const BlendMask* blend, const DiffusionSchedule& s) {
    cfg.validate();
    s.validate();
    cfg.validate_layers(base.layers());
    cfg.validate_layers(refiner.layers());
    const int T = s.steps();
    if (blend) {
        require_same_shape(coarse, blend->mask, "blend mask");
        if (static_cast<int>(blend->background.size()) != T + 1)
            throw InvalidArgument("background trajectory needs " + std::to_string(T + 1) + " states");
        if (((blend->mask.values != 0.0) && (blend->mask.values != 1.0)).any())
            throw InvalidArgument("blend mask entries must be 0 or 1");
    }

    EnhancementResult res;
    res.coarse = ddim_invert(coarse, base, cond_inv, s);
    DiffusionState fine = res.coarse.back();
    for (int t = T; t >= 1; --t) {
        const bool use_refiner = refiner_at(t, T, cfg.refiner_fraction);
        const Predictor& p = use_refiner ? refiner : base;
        AuditRecord rec{t, use_refiner ? kRefinerPredictor : kBasePredictor, {}};

        const auto out_c = detail::evaluate_at(p, res.coarse[t].x(s), cond_inv, t);
        Overrides ov;
        auto take = [&](const std::vector<std::string>& layers, const LayerTensors& from, LayerTensors& to,
                        const char* kind) {
            for (const auto& l : layers) {
                const auto it = from.find(l);
                if (it == from.end()) throw EnhancementError(t, std::string("coarse path emitted no ") + kind + " for '" + l + "'");
                to[l] = it->second;
                rec.overridden_layers.push_back(std::string(kind) + ":" + l);
            }
        };
        if (injects_at(t, T, cfg.tau_f)) take(cfg.feature_layers, out_c.features, ov.features, "feature");
        if (injects_at(t, T, cfg.tau_A)) take(cfg.attention_layers, out_c.attentions, ov.attentions, "attention");

        const auto out_f = detail::evaluate_at(p, fine.x(s), cond_fwd, t, ov);
        advance(fine, out_f.epsilon, t - 1, s);
        if (blend) apply_blend(fine, *blend);
        res.audit.push_back(std::move(rec));
    }
    res.latent = fine.z;
    res.audit.push_back({0, kDecoderStage, {}});
    return res;
}

// ---- configuration file ----

struct EnhancementConfig {
    int T = 50;
    InjectionConfig injection;
    double beta_start = 0.00085;
    double beta_end = 0.012;

    DiffusionSchedule schedule() const { return make_linear_beta_schedule(T, beta_start, beta_end); }
};

inline EnhancementConfig parse_enhancement_config(const Json& j) {
    if (!j.is_object()) throw ParseError(0, "enhancement config must be a JSON object");
    static const std::set<std::string> known{"T", "tau_f", "tau_A", "refiner_fraction", "feature_layers", "attention_layers", "schedule"};
    for (const auto& [k, _] : j.items())
        if (!known.count(k)) throw ParseError(0, "unknown enhancement config field '" + k + "'");
    EnhancementConfig c;
    try {
        if (j.contains("T")) c.T = j.at("T").get<int>();
        if (j.contains("tau_f")) c.injection.tau_f = j.at("tau_f").get<double>();
        if (j.contains("tau_A")) c.injection.tau_A = j.at("tau_A").get<double>();
        if (j.contains("refiner_fraction")) c.injection.refiner_fraction = j.at("refiner_fraction").get<double>();
        if (j.contains("feature_layers")) c.injection.feature_layers = j.at("feature_layers").get<std::vector<std::string>>();
        if (j.contains("attention_layers")) c.injection.attention_layers = j.at("attention_layers").get<std::vector<std::string>>();
        if (j.contains("schedule")) {
            const Json& s = j.at("schedule");
            if (s.value("kind", std::string("linear")) != "linear") throw ParseError(0, "schedule kind must be 'linear'");
            c.beta_start = s.value("beta_start", c.beta_start);
            c.beta_end = s.value("beta_end", c.beta_end);
        }
    } catch (const Json::exception& e) {
        throw ParseError(0, std::string("enhancement config: ") + e.what());
    }
    try {
        c.injection.validate();
        (void)c.schedule();
    } catch (const InvalidArgument& e) {
        throw ParseError(0, std::string("enhancement config: ") + e.what());
    }
    return c;
}

inline Json enhancement_config_json(const EnhancementConfig& c) {
    return Json{{"T", c.T},
                {"tau_f", c.injection.tau_f},
                {"tau_A", c.injection.tau_A},
                {"refiner_fraction", c.injection.refiner_fraction},
                {"feature_layers", c.injection.feature_layers},
                {"attention_layers", c.injection.attention_layers},
                {"schedule", {{"kind", "linear"}, {"beta_start", c.beta_start}, {"beta_end", c.beta_end}}}};
}

} // namespace sculpt
