// SPDX-License-Identifier: Apache-2.0
// Carves a sphere out of a cube corner and reports the volumes before and after.
//
//   carve_volume [resolution]

#include <cstdlib>
#include <iostream>

#include "sculpt/mesh/primitives.hpp"
#include "sculpt/scene/carve.hpp"

using namespace sculpt;

int main(int argc, char** argv) {
    const int resolution = argc > 1 ? std::atoi(argv[1]) : 96;
    const TriangleMesh block = make_box(Vec3::Constant(-0.5), Vec3::Constant(0.5));
    const TriangleMesh mold = make_icosphere(3, 0.5, Vec3::Constant(0.5));

    const auto carved = carve(block, mold, resolution);
    if (!carved) {
        std::cout << "nothing left\n";
        return 0;
    }
    std::cout << "block volume  " << mesh_volume(block).volume << "\n"
              << "carved volume " << mesh_volume(*carved).volume << "\n"
              << "vertices      " << carved->vertex_count() << "\n";
    return 0;
}
