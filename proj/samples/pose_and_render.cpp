// SPDX-License-Identifier: Apache-2.0
// Bends the sample arm at the elbow with linear blend skinning and renders it.
//
//   pose_and_render <samples/assets> <out-dir>

#include <iostream>
#include <numbers>

#include "sculpt/deform/skinning.hpp"
#include "sculpt/scene/edit_program.hpp"

using namespace sculpt;

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: pose_and_render <assets> <out-dir>\n";
        return 2;
    }
    const std::filesystem::path assets = argv[1], out = argv[2];
    const TriangleMesh arm = load_obj(assets / "arm.obj");

    Skeleton skeleton;
    skeleton.add_joint("shoulder", -1, Vec3::Zero());
    skeleton.add_joint("elbow", 0, Vec3(0, 0, 0.6));
    skeleton.add_joint("wrist", 1, Vec3(0, 0, 0.6));
    const SkinningWeights weights = compute_skinning_weights(arm, skeleton);

    skeleton.set_pose("elbow", Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi / 3, Vec3::UnitX())));
    const TriangleMesh bent = deform_by_skinning(arm, weights, pose_transforms(skeleton));

    Scene scene = add_instance({}, "arm", bent);
    scene.camera.eye = Vec3(2.5, 1.5, 0.6);
    scene.camera.look_at = Vec3(0, 0, 0.6);
    scene.camera.up = Vec3::UnitZ();
    const auto files = write_render(rasterize(scene), out, "arm_bent");
    std::cout << files.color.string() << "\n" << files.depth.string() << "\n" << files.mask.string() << "\n";
    return 0;
}
