// SPDX-License-Identifier: Apache-2.0
// Renders a scene, runs the enhancement loop with a mock predictor and prints
// which predictor and overrides each denoising step used.
//
//   enhance_mock <samples/assets> <out-dir>

#include <iostream>

#include "sculpt/enhance/enhancement.hpp"
#include "sculpt/scene/edit_program.hpp"

using namespace sculpt;

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: enhance_mock <assets> <out-dir>\n";
        return 2;
    }
    const std::filesystem::path assets = argv[1], out = argv[2];
    Scene scene = add_instance({}, "ball", load_obj(assets / "sphere.obj"));
    scene.camera.width = scene.camera.height = 64;
    const RenderOutputs r = rasterize(scene);

    EnhancementConfig cfg;
    cfg.injection.feature_layers = {"up"};
    cfg.injection.attention_layers = {"down", "mid", "up"};
    const LinearPredictor base(0.02, {"down", "mid", "up"});
    const LinearPredictor refiner(0.01, {"down", "mid", "up"});
    auto depth = std::make_shared<const DepthImage>(r.depth);
    const Conditioning inv{"a grey ball", depth}, fwd{"a glossy red ball", depth};

    const DiffusionSchedule schedule = cfg.schedule();
    const Latent coarse = latent_from_image(r.color);
    const BlendMask blend = make_blend(coarse, background_mask(r.mask, 3), base, inv, schedule);
    const EnhancementResult res = run_enhancement(coarse, inv, fwd, base, refiner, cfg.injection, &blend, schedule);

    std::filesystem::create_directories(out);
    write_color_png(out / "enhanced.png", image_from_latent(res.latent));
    std::cout << audit_ndjson(res.audit);
    return 0;
}
