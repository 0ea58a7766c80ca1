// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "sculpt/mesh/cotan_laplacian.hpp"

namespace sculpt {

/// Vertex ids pinned by the user and where they should go.
struct HandleSet {
    std::vector<int> ids;
    Positions targets;  // one row per id

    void validate(int vertex_count) const {
        if (targets.rows() != static_cast<Eigen::Index>(ids.size()))
            throw InvalidArgument("handle target count does not match handle id count");
        std::set<int> seen;
        for (int id : ids) {
            if (id < 0 || id >= vertex_count)
                throw InvalidArgument("handle id " + std::to_string(id) + " out of range");
            if (!seen.insert(id).second) throw InvalidArgument("duplicate handle id " + std::to_string(id));
        }
        if (static_cast<int>(ids.size()) >= vertex_count)
            throw InvalidArgument("every vertex is a handle; nothing to solve");
    }
};

struct ArapOptions {
    int max_iters = 50;
    double tol = 1e-4;  // relative to the rest bounding-box diagonal
};

struct ArapReport {
    int iterations = 0;
    bool converged = false;
    std::vector<double> energies;  // after each local/global iteration
};

/// Bound as-rigid-as-possible deformer (Sorkine and Alexa local/global solver).
///
/// The constrained cotangent system over the free vertices is factorized once at
/// bind time and reused by every solve. Not safe for concurrent solves.
class ArapState {
public:
    ArapState(const TriangleMesh& rest, std::vector<int> handle_ids) : rest_(rest), handles_(std::move(handle_ids)) {
        validate(rest_);
        const int n = rest_.vertex_count();
        HandleSet probe{handles_, Positions::Zero(static_cast<Eigen::Index>(handles_.size()), 3)};
        probe.validate(n);

        const CotanLaplacian lap = build_cotan_laplacian(rest_);
        adjacency_ = weighted_adjacency(lap, n);
        check_connectivity();

        free_index_.assign(n, -1);
        handle_index_.assign(n, -1);
        for (std::size_t h = 0; h < handles_.size(); ++h) handle_index_[handles_[h]] = static_cast<int>(h);
        for (int v = 0; v < n; ++v)
            if (handle_index_[v] < 0) {
                free_index_[v] = static_cast<int>(free_vertices_.size());
                free_vertices_.push_back(v);
            }

        // Positive semidefinite (-L) restricted to free rows/cols; handle couplings
        // are moved to the right-hand side.
        const int nf = static_cast<int>(free_vertices_.size());
        std::vector<Eigen::Triplet<double>> ff, fh;
        for (int v : free_vertices_) {
            double diag = 0.0;
            for (const auto& [u, w] : adjacency_[v]) {
                diag += w;
                if (free_index_[u] >= 0)
                    ff.emplace_back(free_index_[v], free_index_[u], -w);
                else
                    fh.emplace_back(free_index_[v], handle_index_[u], -w);
            }
            ff.emplace_back(free_index_[v], free_index_[v], diag);
        }
        system_.resize(nf, nf);
        system_.setFromTriplets(ff.begin(), ff.end());
        coupling_.resize(nf, static_cast<int>(handles_.size()));
        coupling_.setFromTriplets(fh.begin(), fh.end());

        solver_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
        solver_->compute(system_);
        ++factorizations_;
        if (solver_->info() != Eigen::Success)
            throw GeometryError("ARAP system factorization failed (free component without handles?)");

        rotations_.assign(n, Mat3::Identity());
        current_ = rest_.positions;
        bbox_diag_ = bounding_box(rest_).diagonal();
    }

    const TriangleMesh& rest() const { return rest_; }
    const std::vector<int>& handle_ids() const { return handles_; }
    const std::vector<Mat3>& rotations() const { return rotations_; }
    const Positions& current() const { return current_; }
    int factorization_count() const { return factorizations_; }
    const ArapReport& last_report() const { return report_; }

    /// ARAP energy sum_i sum_{j in N(i)} w_ij |(p_i - p_j) - R_i (v_i - v_j)|^2.
    double energy(const Positions& p, const std::vector<Mat3>& rot) const {
        double e = 0.0;
        for (int i = 0; i < rest_.vertex_count(); ++i)
            for (const auto& [j, w] : adjacency_[i]) {
                const Vec3 rest_edge = rest_.vertex(i) - rest_.vertex(j);
                const Vec3 cur_edge = (p.row(i) - p.row(j)).transpose();
                e += w * (cur_edge - rot[i] * rest_edge).squaredNorm();
            }
        return e;
    }

    /// Runs local/global iterations from the rest pose with handle rows set to
    /// `targets`.
    TriangleMesh solve(const Positions& targets, const ArapOptions& opt = {}) {
        Positions init = rest_.positions;
        return solve_from(init, targets, opt);
    }

    /// Same as solve() but starts from the previous solution (interactive dragging).
    TriangleMesh solve_warm(const Positions& targets, const ArapOptions& opt = {}) {
        Positions init = current_;
        return solve_from(init, targets, opt);
    }

private:
    TriangleMesh solve_from(Positions p, const Positions& targets, const ArapOptions& opt) {
        if (opt.max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
        if (!(opt.tol > 0.0)) throw InvalidArgument("tol must be positive");
        if (targets.rows() != static_cast<Eigen::Index>(handles_.size()))
            throw InvalidArgument("expected " + std::to_string(handles_.size()) + " handle targets, got " +
                                  std::to_string(targets.rows()));
        if (!targets.allFinite()) throw InvalidArgument("handle targets must be finite");

        for (std::size_t h = 0; h < handles_.size(); ++h) p.row(handles_[h]) = targets.row(static_cast<Eigen::Index>(h));
        Eigen::MatrixXd handle_pos(static_cast<Eigen::Index>(handles_.size()), 3);
        for (std::size_t h = 0; h < handles_.size(); ++h) handle_pos.row(static_cast<Eigen::Index>(h)) = targets.row(static_cast<Eigen::Index>(h));
        const Eigen::MatrixXd handle_rhs = coupling_ * handle_pos;

        report_ = {};
        const int nf = static_cast<int>(free_vertices_.size());
        Eigen::MatrixXd rhs(nf, 3);
        for (int it = 0; it < opt.max_iters; ++it) {
            fit_rotations(p);

            for (int f = 0; f < nf; ++f) {
                const int i = free_vertices_[f];
                Vec3 b = Vec3::Zero();
                for (const auto& [j, w] : adjacency_[i])
                    b += 0.5 * w * (rotations_[i] + rotations_[j]) * (rest_.vertex(i) - rest_.vertex(j));
                rhs.row(f) = b.transpose();
            }
            rhs -= handle_rhs;
            const Eigen::MatrixXd x = solver_->solve(rhs);
            if (solver_->info() != Eigen::Success || !x.allFinite())
                throw GeometryError("ARAP back-substitution failed at iteration " + std::to_string(it));

            double max_move = 0.0;
            for (int f = 0; f < nf; ++f) {
                const int i = free_vertices_[f];
                max_move = std::max(max_move, (x.row(f) - p.row(i)).norm());
                p.row(i) = x.row(f);
            }
            report_.iterations = it + 1;
            report_.energies.push_back(energy(p, rotations_));
            if (max_move < opt.tol * bbox_diag_) {
                report_.converged = true;
                break;
            }
        }
        current_ = p;
        return rest_.with_positions(std::move(p));
    }

    // S_i = sum_j w_ij e_ij e'_ij^T; R_i = V U^T, flipping the singular vector of
    // the smallest singular value when det < 0.
    void fit_rotations(const Positions& p) {
        for (int i = 0; i < rest_.vertex_count(); ++i) {
            Mat3 cov = Mat3::Zero();
            for (const auto& [j, w] : adjacency_[i]) {
                const Vec3 e = rest_.vertex(i) - rest_.vertex(j);
                const Vec3 e2 = (p.row(i) - p.row(j)).transpose();
                cov += w * e * e2.transpose();
            }
            Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
            Mat3 u = svd.matrixU();
            const Mat3 v = svd.matrixV();
            Mat3 r = v * u.transpose();
            if (r.determinant() < 0.0) {
                u.col(2) = -u.col(2);
                r = v * u.transpose();
            }
            rotations_[i] = r;
        }
    }

    void check_connectivity() const {
        const int n = rest_.vertex_count();
        std::vector<char> reached(n, 0);
        std::queue<int> q;
        for (int h : handles_) {
            reached[h] = 1;
            q.push(h);
        }
        while (!q.empty()) {
            const int v = q.front();
            q.pop();
            for (const auto& [u, w] : adjacency_[v])
                if (!reached[u]) {
                    reached[u] = 1;
                    q.push(u);
                }
        }
        for (int v = 0; v < n; ++v)
            if (!reached[v])
                throw GeometryError("vertex " + std::to_string(v) + " is not connected to any handle");
    }

    TriangleMesh rest_;
    std::vector<int> handles_;
    std::vector<std::vector<std::pair<int, double>>> adjacency_;
    std::vector<int> free_vertices_, free_index_, handle_index_;
    Eigen::SparseMatrix<double> system_, coupling_;
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> solver_;
    std::vector<Mat3> rotations_;
    Positions current_;
    double bbox_diag_ = 0.0;
    int factorizations_ = 0;
    ArapReport report_;
};

inline ArapState arap_bind(const TriangleMesh& model, const HandleSet& handles) {
    handles.validate(model.vertex_count());
    return ArapState(model, handles.ids);
}

inline TriangleMesh arap_solve(ArapState& state, const Positions& targets, int max_iters = 50, double tol = 1e-4) {
    return state.solve(targets, {max_iters, tol});
}

} // namespace sculpt
