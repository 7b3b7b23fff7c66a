#pragma once

// Rigid poses of part clouds and the chamfer distance.
//
// Euler convention: R(e) = Rz(e3) * Ry(e2) * Rx(e1) acting on column points
// (extrinsic rotations about X, then Y, then Z). The tag below is written
// into every dataset and results file.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scorepa/matrix.hpp"

namespace scorepa {

inline constexpr std::string_view kEulerConvention = "extrinsic-xyz:R=Rz*Ry*Rx";
inline constexpr std::size_t kPointsPerPart = 1000;

/// n x 3 point array.
using Cloud = Matrix;
using Mat3 = std::array<double, 9>;  // row-major

/// Throws InputError unless the cloud has kPointsPerPart finite points with
/// centroid within 1e-9 of the origin.
void check_part_cloud(const Cloud& c, std::string_view who);

/// Maps an angle to (-pi, pi].
double canonical_angle(double a);

Mat3 rotation_matrix(double e1, double e2, double e3);
/// Pose row layout: (tx, ty, tz, e1, e2, e3).
Mat3 rotation_matrix(std::span<const double> pose);

/// p' = R(e) p + t for every row of the cloud.
Cloud apply_pose(const Cloud& part, std::span<const double> pose);

/// Inverse map of a single point: R(e)^T (x - t).
std::array<double, 3> to_local(std::span<const double> pose, const std::array<double, 3>& x);
std::array<double, 3> to_world(std::span<const double> pose, const std::array<double, 3>& p);

struct AssembledShape {
    std::vector<Cloud> parts;  // posed copies, input order
    Cloud shape;               // their concatenation
};

AssembledShape assemble(const std::vector<Cloud>& parts, const PoseSet& q);

/// Uniform-grid nearest-neighbour index over a fixed cloud.
class GridIndex {
public:
    explicit GridIndex(const Cloud& points);

    /// Squared distance to the nearest indexed point.
    double nearest_sqdist(double x, double y, double z) const;
    std::size_t size() const { return xs_.size(); }

private:
    std::size_t cell_of(std::size_t ix, std::size_t iy, std::size_t iz) const {
        return (iz * ny_ + iy) * nx_ + ix;
    }
    std::size_t axis_cell(double v, int axis) const;
    double row_min(std::size_t iy, std::size_t iz, std::size_t x0, std::size_t x1,
                   double x, double y, double z) const;

    double lo_[3] = {0, 0, 0};
    double h_ = 1.0;
    std::size_t nx_ = 1, ny_ = 1, nz_ = 1;
    std::vector<std::size_t> start_;  // cell -> first point; size cells + 1
    std::vector<double> xs_, ys_, zs_;
};

/// Mean over x of min_y |x - y|^2 (one directed term).
double directed_chamfer(const Cloud& from, const GridIndex& to);
/// Symmetric chamfer: sum of the two directed means. Empty cloud -> InputError.
double chamfer(const Cloud& a, const Cloud& b);
/// O(|a||b|) reference used by tests and small inputs.
double chamfer_brute(const Cloud& a, const Cloud& b);

/// ASCII PLY, one colour per part.
void write_ply(std::ostream& os, const AssembledShape& shape, const std::vector<std::string>& comments = {});

}  // namespace scorepa
