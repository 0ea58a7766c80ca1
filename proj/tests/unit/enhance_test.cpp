// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "sculpt/enhance/enhancement.hpp"

using namespace sculpt;

namespace {

Latent random_latent(int h, int w, int c, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Latent l(h, w, c);
    for (Eigen::Index i = 0; i < l.size(); ++i) l.values[i] = n(rng);
    return l;
}

// Scalar factor of one x-form denoise step t -> t-1 under eps = c x.
double denoise_factor(const DiffusionSchedule& s, int t, double c) {
    const double a = s.alpha_bar[t], b = s.alpha_bar[t - 1];
    return std::sqrt(b) * (1.0 - c * std::sqrt(1.0 - a)) / std::sqrt(a) + c * std::sqrt(1.0 - b);
}

// Scalar factor of one inversion step t -> t+1 under eps = c x evaluated at x_t.
double invert_factor(const DiffusionSchedule& s, int t, double c) {
    const double a = s.alpha_bar[t], b = s.alpha_bar[t + 1];
    return std::sqrt(b) * (1.0 - c * std::sqrt(1.0 - a)) / std::sqrt(a) + c * std::sqrt(1.0 - b);
}

const std::vector<std::string> kLayers{"down", "mid", "up"};

InjectionConfig standard_injection() {
    InjectionConfig c;
    c.tau_A = 0.5;
    c.tau_f = 0.2;
    c.refiner_fraction = 0.1;
    c.feature_layers = {"up"};
    c.attention_layers = kLayers;
    return c;
}

class FailingPredictor : public Predictor {
public:
    explicit FailingPredictor(int fail_at) : fail_at_(fail_at) {}
    std::vector<std::string> layers() const override { return kLayers; }
    PredictorOutput evaluate(const Latent& x, const Conditioning&, int t, const Overrides&) const override {
        if (t == fail_at_) throw std::runtime_error("out of memory");
        return PredictorOutput{x, {}, {}};
    }

private:
    int fail_at_;
};

class WrongShapePredictor : public Predictor {
public:
    std::vector<std::string> layers() const override { return {}; }
    PredictorOutput evaluate(const Latent&, const Conditioning&, int, const Overrides&) const override {
        return PredictorOutput{Latent(2, 2, 1), {}, {}};
    }
};

} // namespace

// ---- schedule ----

TEST(LinearBetaSchedule, SingleStep) {
    const auto s = make_linear_beta_schedule(1, 0.5, 0.5);
    EXPECT_EQ(s.alpha_bar, (std::vector<double>{1.0, 0.5}));
}

TEST(LinearBetaSchedule, ThousandStepsMatchesDirectProduct) {
    const auto s = make_linear_beta_schedule(1000, 1e-4, 0.02);
    double log_sum = 0.0;
    for (int i = 0; i < 1000; ++i) log_sum += std::log1p(-(1e-4 + (0.02 - 1e-4) * i / 999.0));
    EXPECT_NEAR(s.alpha_bar.back() / std::exp(log_sum), 1.0, 1e-10);
    EXPECT_NEAR(s.alpha_bar.back(), 4.04e-5, 0.005e-5);
    for (int t = 1; t <= 1000; ++t) EXPECT_LT(s.alpha_bar[t], s.alpha_bar[t - 1]);
}

TEST(LinearBetaSchedule, RejectsBadRanges) {
    EXPECT_THROW(make_linear_beta_schedule(0, 0.1, 0.2), InvalidArgument);
    EXPECT_THROW(make_linear_beta_schedule(10, 0.0, 0.2), InvalidArgument);
    EXPECT_THROW(make_linear_beta_schedule(10, 0.3, 0.2), InvalidArgument);
    EXPECT_THROW(make_linear_beta_schedule(10, 0.1, 1.0), InvalidArgument);
}

// ---- DDIM steps ----

TEST(Ddim, ZeroEpsilonIsRescaling) {
    const auto s = make_linear_beta_schedule(20, 1e-3, 0.05);
    const auto x = random_latent(3, 4, 2, 1);
    const Latent zero(3, 4, 2);
    for (int t : {1, 7, 20}) {
        const auto y = ddim_denoise_step(x, zero, t, s);
        const double r = std::sqrt(s.alpha_bar[t - 1] / s.alpha_bar[t]);
        for (Eigen::Index i = 0; i < x.size(); ++i) EXPECT_NEAR(y.values[i], r * x.values[i], 1e-14);
    }
}

TEST(Ddim, TerminalStepReturnsCleanEstimate) {
    const auto s = make_linear_beta_schedule(10, 1e-3, 0.05);
    const auto x = random_latent(2, 2, 3, 2), eps = random_latent(2, 2, 3, 3);
    const auto y = ddim_denoise_step(x, eps, 1, s);
    const Eigen::ArrayXd x0 = (x.values - std::sqrt(1.0 - s.alpha_bar[1]) * eps.values) / std::sqrt(s.alpha_bar[1]);
    EXPECT_TRUE((y.values == x0).all());
}

TEST(Ddim, StepRangeAndShapeChecks) {
    const auto s = make_linear_beta_schedule(10, 1e-3, 0.05);
    const Latent x(1, 1, 1), bad(1, 2, 1);
    EXPECT_THROW(ddim_denoise_step(x, x, 0, s), InvalidArgument);
    EXPECT_THROW(ddim_denoise_step(x, x, 11, s), InvalidArgument);
    EXPECT_THROW(ddim_invert_step(x, x, 10, s), InvalidArgument);
    EXPECT_THROW(ddim_denoise_step(x, bad, 3, s), InvalidArgument);
}

TEST(Ddim, LinearPredictorTrajectoryMatchesScalarRecurrence) {
    const auto s = make_linear_beta_schedule(10, 1e-4, 0.02);
    const double c = 0.1;
    Latent x = Latent::scalar(0.8);
    double oracle = 0.8;
    for (int t = 10; t >= 1; --t) {
        x = ddim_denoise_step(x, Latent::scalar(c * x.values[0]), t, s);
        oracle *= denoise_factor(s, t, c);
        EXPECT_NEAR(x.values[0], oracle, 1e-12);
    }
    // The normalized-coordinate path agrees.
    const LinearPredictor p(c);
    const auto end = ddim_denoise(make_state(Latent::scalar(0.8), 10, s), p, {}, s);
    EXPECT_NEAR(end.values[0], oracle, 1e-12);
}

TEST(Ddim, InversionTrajectoryHasTPlusOneStates) {
    const auto s = make_linear_beta_schedule(12, 1e-3, 0.05);
    const auto traj = ddim_invert(random_latent(2, 3, 1, 4), LinearPredictor(0.2), {}, s);
    ASSERT_EQ(traj.size(), 13u);
    for (int t = 0; t <= 12; ++t) EXPECT_EQ(traj[t].t, t);
}

TEST(Ddim, ZeroPredictorRoundTripIsBitExact) {
    const ZeroPredictor zero;
    for (int T : {1, 10, 50, 1000}) {
        const auto s = make_linear_beta_schedule(T, 1e-4, 0.02);
        for (unsigned seed = 0; seed < 3; ++seed) {
            auto x0 = random_latent(4 + seed, 5, 3, seed + 10 * T);
            x0.values *= std::pow(10.0, seed * 3.0 - 3.0);
            const auto traj = ddim_invert(x0, zero, {}, s);
            EXPECT_TRUE(identical(ddim_denoise(traj.back(), zero, {}, s), x0)) << "T=" << T << " seed=" << seed;
        }
    }
}

TEST(Ddim, LinearPredictorRoundTripDriftMatchesClosedForm) {
    for (double c : {0.05, 0.1, -0.2}) {
        const auto s = make_linear_beta_schedule(50, 1e-4, 0.02);
        const LinearPredictor p(c);
        const double x0 = 1.3;
        const auto traj = ddim_invert(Latent::scalar(x0), p, {}, s);
        const double back = ddim_denoise(traj.back(), p, {}, s).values[0];
        double drift = 1.0;
        for (int t = 0; t < 50; ++t) drift *= invert_factor(s, t, c) * denoise_factor(s, t + 1, c);
        EXPECT_NEAR(back / x0, drift, 1e-10) << c;
        EXPECT_NE(drift, 1.0);
    }
}

TEST(Ddim, PredictorFailureCarriesStep) {
    const auto s = make_linear_beta_schedule(10, 1e-3, 0.05);
    try {
        ddim_invert(Latent::scalar(1), FailingPredictor(4), {}, s);
        FAIL();
    } catch (const EnhancementError& e) {
        EXPECT_EQ(e.step(), 4);
        EXPECT_NE(std::string(e.what()).find("out of memory"), std::string::npos);
    }
    EXPECT_THROW(ddim_invert(Latent::scalar(1), WrongShapePredictor(), {}, s), EnhancementError);
}

// ---- injection schedule ----

TEST(Enhancement, StandardConstantsGiveExactStepCounts) {
    const auto s = make_linear_beta_schedule(50, 1e-4, 0.02);
    const LinearPredictor base(0.05, kLayers), refiner(0.03, kLayers);
    const auto res = run_enhancement(random_latent(4, 4, 3, 5), {"coarse"}, {"fine"}, base, refiner, standard_injection(), nullptr, s);
    ASSERT_EQ(res.audit.size(), 51u);
    std::vector<int> attn, feat, ref;
    for (const auto& r : res.audit) {
        if (r.overrides("attention")) attn.push_back(r.step);
        if (r.overrides("feature")) feat.push_back(r.step);
        if (r.predictor == kRefinerPredictor) ref.push_back(r.step);
    }
    ASSERT_EQ(attn.size(), 25u);
    ASSERT_EQ(feat.size(), 10u);
    ASSERT_EQ(ref.size(), 5u);
    EXPECT_EQ(attn.front(), 50);
    EXPECT_EQ(attn.back(), 26);
    EXPECT_EQ(feat.back(), 41);
    EXPECT_EQ(ref.front(), 5);
    EXPECT_EQ(ref.back(), 1);
    EXPECT_EQ(res.audit.back().predictor, kDecoderStage);
}

TEST(Enhancement, OverrideCountsMatchCountingFormula) {
    std::mt19937 rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        const int T = std::uniform_int_distribution<int>(1, 120)(rng);
        const int kf = std::uniform_int_distribution<int>(0, 100)(rng);
        const int ka = std::uniform_int_distribution<int>(0, 100)(rng);
        const int kr = std::uniform_int_distribution<int>(0, 100)(rng);
        InjectionConfig cfg;
        cfg.tau_f = kf / 100.0;
        cfg.tau_A = ka / 100.0;
        cfg.refiner_fraction = kr / 100.0;
        cfg.feature_layers = {"mid"};
        cfg.attention_layers = {"down", "up"};
        if (trial % 5 == 0) cfg.attention_layers.clear();
        const auto s = make_linear_beta_schedule(T, 1e-4, 0.02);
        const LinearPredictor p(0.1, kLayers);
        const auto res = run_enhancement(Latent::scalar(0.5), {}, {}, p, p, cfg, nullptr, s);
        int nf = 0, na = 0, nr = 0, entries = 0;
        for (const auto& r : res.audit) {
            nf += r.overrides("feature");
            na += r.overrides("attention");
            nr += r.predictor == kRefinerPredictor;
            entries += static_cast<int>(r.overridden_layers.size());
        }
        // Steps with t > T (1 - k/100) number ceil(T k / 100); steps with t <= T r / 100 number floor(T r / 100).
        const int ef = (T * kf + 99) / 100;
        const int ea = cfg.attention_layers.empty() ? 0 : (T * ka + 99) / 100;
        EXPECT_EQ(nf, ef) << T << " " << kf;
        EXPECT_EQ(na, ea) << T << " " << ka;
        EXPECT_EQ(nr, T * kr / 100) << T << " " << kr;
        EXPECT_EQ(entries, ef + ea * static_cast<int>(cfg.attention_layers.size()));
    }
}

TEST(Enhancement, DisabledInjectionEqualsPlainDenoising) {
    const auto s = make_linear_beta_schedule(30, 1e-4, 0.02);
    const LinearPredictor p(0.07, kLayers);
    InjectionConfig cfg = standard_injection();
    cfg.tau_A = cfg.tau_f = 0.0;
    const auto x = random_latent(3, 3, 2, 8);
    const auto res = run_enhancement(x, {"same"}, {"same"}, p, p, cfg, nullptr, s);
    const auto plain = ddim_denoise(ddim_invert(x, p, {"same"}, s).back(), p, {"same"}, s);
    EXPECT_TRUE(identical(res.latent, plain));
    for (const auto& r : res.audit) EXPECT_TRUE(r.overridden_layers.empty());
}

TEST(Enhancement, FullInjectionDenoisesWithCoarseEpsilon) {
    // With every layer injected on every step, the linear mock's fine-path
    // epsilon is c * x_t^c, so the fine path follows a closed recurrence.
    const auto s = make_linear_beta_schedule(30, 1e-4, 0.02);
    const double c = 0.07;
    const LinearPredictor p(c, kLayers);
    InjectionConfig cfg;
    cfg.tau_f = cfg.tau_A = 1.0;
    cfg.refiner_fraction = 0.0;
    cfg.feature_layers = cfg.attention_layers = kLayers;
    const double x0 = 0.9;
    const auto res = run_enhancement(Latent::scalar(x0), {}, {}, p, p, cfg, nullptr, s);
    double z = res.coarse.back().z.values[0];
    for (int t = 30; t >= 1; --t) {
        const double coarse_x = std::sqrt(s.alpha_bar[t]) * res.coarse[t].z.values[0];
        z += (s.sigma(t - 1) - s.sigma(t)) * c * coarse_x;
    }
    EXPECT_NEAR(res.latent.values[0], z, 1e-12);
    cfg.tau_f = cfg.tau_A = 0.0;
    EXPECT_GT(std::abs(run_enhancement(Latent::scalar(x0), {}, {}, p, p, cfg, nullptr, s).latent.values[0] - z), 1e-6);
}

TEST(Enhancement, FullBackgroundMaskReturnsBackground) {
    const auto s = make_linear_beta_schedule(25, 1e-4, 0.02);
    const LinearPredictor p(0.05, kLayers);
    const auto coarse = random_latent(4, 6, 3, 11), bg = random_latent(4, 6, 3, 12);
    const auto blend = make_blend(bg, Latent(4, 6, 3, 1.0), p, {"inv"}, s);
    const auto res = run_enhancement(coarse, {"inv"}, {"fwd"}, p, p, standard_injection(), &blend, s);
    EXPECT_TRUE(identical(res.latent, bg));
}

TEST(Enhancement, EmptyBackgroundMaskIsNoBlend) {
    const auto s = make_linear_beta_schedule(25, 1e-4, 0.02);
    const LinearPredictor p(0.05, kLayers);
    const auto coarse = random_latent(4, 6, 3, 11), bg = random_latent(4, 6, 3, 12);
    const auto blend = make_blend(bg, Latent(4, 6, 3, 0.0), p, {}, s);
    const auto a = run_enhancement(coarse, {}, {}, p, p, standard_injection(), &blend, s);
    const auto b = run_enhancement(coarse, {}, {}, p, p, standard_injection(), nullptr, s);
    EXPECT_TRUE(identical(a.latent, b.latent));
}

TEST(Enhancement, PartialMaskKeepsBackgroundPixelsAndBlendIsIdempotent) {
    const auto s = make_linear_beta_schedule(20, 1e-4, 0.02);
    const LinearPredictor p(0.05, kLayers);
    const auto coarse = random_latent(5, 5, 3, 13), bg = random_latent(5, 5, 3, 14);
    MaskImage object(5, 5);
    for (int y = 1; y < 4; ++y)
        for (int x = 1; x < 4; ++x) object.bits[y * 5 + x] = 1;
    const Latent m = background_mask(object, 3);
    const auto blend = make_blend(bg, m, p, {}, s);
    const auto res = run_enhancement(coarse, {}, {}, p, p, standard_injection(), &blend, s);
    int kept = 0, changed = 0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (m.values[i] == 1.0) {
            EXPECT_EQ(res.latent.values[i], bg.values[i]);
            ++kept;
        } else {
            changed += res.latent.values[i] != bg.values[i];
        }
    }
    EXPECT_EQ(kept, 16 * 3);
    EXPECT_EQ(changed, 9 * 3);

    DiffusionState once = make_state(random_latent(5, 5, 3, 15), 7, s);
    apply_blend(once, blend);
    DiffusionState twice = once;
    apply_blend(twice, blend);
    EXPECT_TRUE(identical(once.z, twice.z));
}

TEST(Enhancement, InjectedTensorsAreCoarsePathCopies) {
    const auto s = make_linear_beta_schedule(20, 1e-4, 0.02);
    auto rec = std::make_shared<RecordingPredictor>(std::make_shared<LinearPredictor>(0.1, kLayers));
    auto cfg = standard_injection();
    cfg.refiner_fraction = 0.0;
    const auto x = random_latent(3, 4, 2, 21);
    run_enhancement(x, {"inv"}, {"fwd"}, *rec, *rec, cfg, nullptr, s);
    const auto calls = rec->calls();
    ASSERT_EQ(calls.size(), 20u + 2 * 20u);
    int injected = 0;
    for (std::size_t i = 20; i < calls.size(); i += 2) {
        const auto& c = calls[i];
        const auto& f = calls[i + 1];
        EXPECT_EQ(c.prompt, "inv");
        EXPECT_EQ(f.prompt, "fwd");
        EXPECT_EQ(c.t, f.t);
        EXPECT_TRUE(c.overrides.empty());
        for (const auto& [layer, tensor] : f.overrides.features) {
            EXPECT_TRUE(identical(tensor, c.output.features.at(layer)));
            ++injected;
        }
        for (const auto& [layer, tensor] : f.overrides.attentions) {
            EXPECT_TRUE(identical(tensor, c.output.attentions.at(layer)));
            ++injected;
        }
    }
    EXPECT_EQ(injected, 4 * 1 + 10 * 3);
}

TEST(Enhancement, CoarseTrajectoryIsUntouched) {
    const auto s = make_linear_beta_schedule(15, 1e-4, 0.02);
    const LinearPredictor p(0.1, kLayers);
    const auto x = random_latent(3, 3, 3, 31), bg = random_latent(3, 3, 3, 32);
    Latent m(3, 3, 3);
    m.values.head(9).setOnes();
    const auto blend = make_blend(bg, m, p, {"inv"}, s);
    const auto res = run_enhancement(x, {"inv"}, {"fwd"}, p, p, standard_injection(), &blend, s);
    const auto ref = ddim_invert(x, p, {"inv"}, s);
    ASSERT_EQ(res.coarse.size(), ref.size());
    for (std::size_t t = 0; t < ref.size(); ++t) EXPECT_TRUE(identical(res.coarse[t].z, ref[t].z));
    EXPECT_TRUE(identical(res.coarse[0].z, x));
}

TEST(Enhancement, RejectsBadInputs) {
    const auto s = make_linear_beta_schedule(10, 1e-4, 0.02);
    const LinearPredictor p(0.1, kLayers);
    const auto x = random_latent(2, 2, 1, 1);
    auto cfg = standard_injection();
    cfg.attention_layers = {"nope"};
    EXPECT_THROW(run_enhancement(x, {}, {}, p, p, cfg, nullptr, s), InvalidArgument);
    cfg = standard_injection();
    cfg.tau_f = 1.5;
    EXPECT_THROW(run_enhancement(x, {}, {}, p, p, cfg, nullptr, s), InvalidArgument);
    auto blend = make_blend(x, Latent(2, 2, 1, 0.5), p, {}, s);
    EXPECT_THROW(run_enhancement(x, {}, {}, p, p, standard_injection(), &blend, s), InvalidArgument);
    blend.mask = Latent(2, 2, 1, 1.0);
    blend.background.pop_back();
    EXPECT_THROW(run_enhancement(x, {}, {}, p, p, standard_injection(), &blend, s), InvalidArgument);
    try {
        run_enhancement(x, {}, {}, FailingPredictor(7), p, standard_injection(), nullptr, s);
        FAIL();
    } catch (const EnhancementError& e) {
        EXPECT_EQ(e.step(), 7);
    }
}

TEST(Enhancement, AuditLogIsNewlineDelimitedJson) {
    const auto s = make_linear_beta_schedule(10, 1e-4, 0.02);
    const LinearPredictor p(0.1, kLayers);
    const auto res = run_enhancement(Latent::scalar(1), {}, {}, p, p, standard_injection(), nullptr, s);
    std::istringstream in(audit_ndjson(res.audit));
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const auto j = Json::parse(line);
        EXPECT_EQ(j.size(), 3u);
        EXPECT_TRUE(j.at("step").is_number_integer());
        EXPECT_TRUE(j.at("predictor").is_string());
        EXPECT_TRUE(j.at("overridden_layers").is_array());
        ++n;
    }
    EXPECT_EQ(n, 11);
    EXPECT_EQ(Json::parse(audit_ndjson(res.audit).substr(0, audit_ndjson(res.audit).find('\n'))).dump(),
              R"({"step":10,"predictor":"base","overridden_layers":["feature:up","attention:down","attention:mid","attention:up"]})");
}

// ---- configuration ----

TEST(EnhancementConfigFile, RoundTripAndValidation) {
    const auto j = Json::parse(R"({"T": 50, "tau_f": 0.2, "tau_A": 0.5, "refiner_fraction": 0.1,
        "feature_layers": ["up"], "attention_layers": ["down", "mid", "up"],
        "schedule": {"kind": "linear", "beta_start": 0.0001, "beta_end": 0.02}})");
    const auto c = parse_enhancement_config(j);
    EXPECT_EQ(c.T, 50);
    EXPECT_EQ(c.injection.attention_layers.size(), 3u);
    EXPECT_EQ(enhancement_config_json(c), j);
    EXPECT_THROW(parse_enhancement_config(Json::parse(R"({"T": 10, "extra": 1})")), ParseError);
    EXPECT_THROW(parse_enhancement_config(Json::parse(R"({"tau_A": -0.1})")), ParseError);
    EXPECT_THROW(parse_enhancement_config(Json::parse(R"({"T": 0})")), ParseError);
    EXPECT_THROW(parse_enhancement_config(Json::parse(R"({"schedule": {"kind": "cosine"}})")), ParseError);
    EXPECT_THROW(parse_enhancement_config(Json::parse(R"({"T": "many"})")), ParseError);
}

TEST(LatentImage, RoundTripAndMask) {
    RasterImage img(5, 3);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 17);
    const auto l = latent_from_image(img);
    EXPECT_EQ(l.height, 3);
    EXPECT_EQ(l.width, 5);
    EXPECT_LE(l.values.maxCoeff(), 1.0);
    EXPECT_GE(l.values.minCoeff(), -1.0);
    EXPECT_EQ(image_from_latent(l), img);
    MaskImage m(5, 3);
    m.bits[7] = 1;
    const auto bm = background_mask(m, 4);
    EXPECT_EQ(bm.values.sum(), 14 * 4);
    EXPECT_EQ(bm.at(1, 2, 3), 0.0);
}
