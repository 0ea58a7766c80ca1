// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Geometry>

#include "sculpt/mesh/triangle_mesh.hpp"

namespace sculpt {

struct Joint {
    std::string name;
    int parent = -1;                          // -1 for the root
    Mat4 rest_local = Mat4::Identity();       // relative to the parent joint frame
    Eigen::Quaterniond pose = Eigen::Quaterniond::Identity();
};

/// Joint tree with a rest pose and a current pose. Joints are stored so that a
/// parent always precedes its children.
///
/// Bone b is owned by joint b and spans the segments from joint b to each of its
/// children; leaf joints own no segment and never receive skinning weight.
class Skeleton {
public:
    Skeleton() = default;

    /// Appends a joint whose rest frame is `offset` from its parent (translation only).
    int add_joint(const std::string& name, int parent, const Vec3& offset) {
        Mat4 local = Mat4::Identity();
        local.topRightCorner<3, 1>() = offset;
        return add_joint_frame(name, parent, local);
    }

    /// Appends a joint with a full rest frame relative to its parent.
    int add_joint_frame(const std::string& name, int parent, const Mat4& rest_local) {
        if (parent < -1 || parent >= joint_count())
            throw InvalidArgument("joint '" + name + "' has invalid parent " + std::to_string(parent));
        if (parent == -1 && !joints_.empty()) throw InvalidArgument("skeleton already has a root");
        if (parent != -1 && joints_.empty()) throw InvalidArgument("first joint must be the root");
        if (by_name_.count(name)) throw InvalidArgument("duplicate joint name '" + name + "'");
        if (std::abs(rest_local.determinant()) < 1e-12)
            throw InvalidArgument("joint '" + name + "' has a singular rest transform");
        by_name_[name] = joint_count();
        joints_.push_back({name, parent, rest_local, Eigen::Quaterniond::Identity()});
        return joint_count() - 1;
    }

    int joint_count() const { return static_cast<int>(joints_.size()); }
    const Joint& joint(int j) const { return joints_.at(j); }
    const std::vector<Joint>& joints() const { return joints_; }

    int find(const std::string& name) const {
        const auto it = by_name_.find(name);
        if (it == by_name_.end()) throw NotFound("unknown joint '" + name + "'");
        return it->second;
    }

    /// Sets a joint's local pose rotation; `q` must be unit length within 1e-8.
    void set_pose(int j, const Eigen::Quaterniond& q) {
        if (std::abs(q.norm() - 1.0) > 1e-8)
            throw InvalidArgument("pose rotation for joint '" + joints_.at(j).name + "' is not unit length");
        joints_.at(j).pose = q;
    }
    void set_pose(const std::string& name, const Eigen::Quaterniond& q) { set_pose(find(name), q); }

    void set_root_translation(const Vec3& t) { root_translation_ = t; }
    const Vec3& root_translation() const { return root_translation_; }

    void reset_pose() {
        for (auto& j : joints_) j.pose = Eigen::Quaterniond::Identity();
        root_translation_.setZero();
    }

    std::vector<int> children(int j) const {
        std::vector<int> out;
        for (int c = 0; c < joint_count(); ++c)
            if (joints_[c].parent == j) out.push_back(c);
        return out;
    }

    /// World transforms with the current pose (posed = true) or the rest pose.
    std::vector<Mat4> world_transforms(bool posed) const {
        std::vector<Mat4> world(joints_.size());
        for (int j = 0; j < joint_count(); ++j) {
            const Joint& jt = joints_[j];
            Mat4 pose = Mat4::Identity();
            if (posed) pose.topLeftCorner<3, 3>() = jt.pose.toRotationMatrix();
            if (jt.parent < 0) {
                Mat4 root_shift = Mat4::Identity();
                if (posed) root_shift.topRightCorner<3, 1>() = root_translation_;
                world[j] = root_shift * jt.rest_local * pose;
            } else {
                world[j] = world[jt.parent] * jt.rest_local * pose;
            }
        }
        return world;
    }

    /// Rest-pose joint positions in world space.
    std::vector<Vec3> rest_joint_positions() const {
        std::vector<Vec3> out;
        for (const auto& w : world_transforms(false)) out.push_back(w.topRightCorner<3, 1>());
        return out;
    }

private:
    std::vector<Joint> joints_;
    std::unordered_map<std::string, int> by_name_;
    Vec3 root_translation_ = Vec3::Zero();
};

/// Per-joint skinning transforms T_j = world_pose(j) * world_rest(j)^-1.
inline std::vector<Mat4> pose_transforms(const Skeleton& skeleton) {
    const auto posed = skeleton.world_transforms(true);
    const auto rest = skeleton.world_transforms(false);
    std::vector<Mat4> out(posed.size());
    for (std::size_t j = 0; j < posed.size(); ++j) out[j] = posed[j] * rest[j].inverse();
    return out;
}

} // namespace sculpt
