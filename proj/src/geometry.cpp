#include "scorepa/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "scorepa/error.hpp"
#include "scorepa/simd.hpp"

namespace scorepa {

void check_part_cloud(const Cloud& c, std::string_view who) {
    const std::string w(who);
    if (c.cols() != 3) throw InputError(w, "part cloud must have 3 columns");
    if (c.rows() != kPointsPerPart)
        throw InputError(w, "part cloud has " + std::to_string(c.rows()) + " points, expected " +
                                std::to_string(kPointsPerPart));
    if (!c.all_finite()) throw InputError(w, "part cloud contains non-finite values");
    double m[3] = {0, 0, 0};
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (int k = 0; k < 3; ++k) m[k] += c(i, k);
    for (double v : m)
        if (std::abs(v / static_cast<double>(c.rows())) > 1e-9)
            throw InputError(w, "part cloud is not centred at the origin");
}

double canonical_angle(double a) {
    double r = std::remainder(a, 2.0 * std::numbers::pi);
    if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
    return r;
}

Mat3 rotation_matrix(double e1, double e2, double e3) {
    const double c1 = std::cos(e1), s1 = std::sin(e1);
    const double c2 = std::cos(e2), s2 = std::sin(e2);
    const double c3 = std::cos(e3), s3 = std::sin(e3);
    // Rz(e3) * Ry(e2) * Rx(e1)
    return {c3 * c2, c3 * s2 * s1 - s3 * c1, c3 * s2 * c1 + s3 * s1,
            s3 * c2, s3 * s2 * s1 + c3 * c1, s3 * s2 * c1 - c3 * s1,
            -s2,     c2 * s1,                c2 * c1};
}

Mat3 rotation_matrix(std::span<const double> pose) {
    return rotation_matrix(pose[3], pose[4], pose[5]);
}

Cloud apply_pose(const Cloud& part, std::span<const double> pose) {
    if (pose.size() != kPoseDim) throw ContractError("apply_pose", "pose must have 6 entries");
    if (part.cols() != 3) throw ContractError("apply_pose", "cloud must have 3 columns");
    const Mat3 R = rotation_matrix(pose);
    Cloud out(part.rows(), 3);
    for (std::size_t i = 0; i < part.rows(); ++i) {
        const double x = part(i, 0), y = part(i, 1), z = part(i, 2);
        out(i, 0) = (R[0] * x + R[1] * y + R[2] * z) + pose[0];
        out(i, 1) = (R[3] * x + R[4] * y + R[5] * z) + pose[1];
        out(i, 2) = (R[6] * x + R[7] * y + R[8] * z) + pose[2];
    }
    return out;
}

std::array<double, 3> to_world(std::span<const double> pose, const std::array<double, 3>& p) {
    const Mat3 R = rotation_matrix(pose);
    return {(R[0] * p[0] + R[1] * p[1] + R[2] * p[2]) + pose[0],
            (R[3] * p[0] + R[4] * p[1] + R[5] * p[2]) + pose[1],
            (R[6] * p[0] + R[7] * p[1] + R[8] * p[2]) + pose[2]};
}

std::array<double, 3> to_local(std::span<const double> pose, const std::array<double, 3>& x) {
    const Mat3 R = rotation_matrix(pose);
    const double d0 = x[0] - pose[0], d1 = x[1] - pose[1], d2 = x[2] - pose[2];
    return {R[0] * d0 + R[3] * d1 + R[6] * d2,
            R[1] * d0 + R[4] * d1 + R[7] * d2,
            R[2] * d0 + R[5] * d1 + R[8] * d2};
}

AssembledShape assemble(const std::vector<Cloud>& parts, const PoseSet& q) {
    if (parts.size() != q.rows() || q.cols() != kPoseDim)
        throw ContractError("assemble", std::to_string(parts.size()) + " parts but pose set is " +
                                            std::to_string(q.rows()) + "x" + std::to_string(q.cols()));
    AssembledShape s;
    std::size_t total = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        s.parts.push_back(apply_pose(parts[i], q.row(i)));
        total += parts[i].rows();
    }
    s.shape = Cloud(total, 3);
    std::size_t off = 0;
    for (const auto& p : s.parts) {
        std::copy(p.values().begin(), p.values().end(), s.shape.values().begin() + off);
        off += p.size();
    }
    return s;
}

// ------------------------------------------------------------------ GridIndex

GridIndex::GridIndex(const Cloud& points) {
    const std::size_t n = points.rows();
    if (n == 0) throw InputError("chamfer", "empty cloud");
    double hi[3];
    for (int k = 0; k < 3; ++k) {
        lo_[k] = std::numeric_limits<double>::infinity();
        hi[k] = -std::numeric_limits<double>::infinity();
    }
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) {
            lo_[k] = std::min(lo_[k], points(i, k));
            hi[k] = std::max(hi[k], points(i, k));
        }
    const double ext = std::max({hi[0] - lo_[0], hi[1] - lo_[1], hi[2] - lo_[2]});
    // About eight points per occupied cell for surface-like clouds.
    const double per_axis = std::max(1.0, std::sqrt(static_cast<double>(n) / 8.0));
    h_ = ext > 0 ? ext / per_axis : 1.0;
    auto cells = [&](int k) {
        return std::min<std::size_t>(1024, 1 + static_cast<std::size_t>((hi[k] - lo_[k]) / h_));
    };
    nx_ = cells(0);
    ny_ = cells(1);
    nz_ = cells(2);

    std::vector<std::size_t> cell(n);
    start_.assign(nx_ * ny_ * nz_ + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        cell[i] = cell_of(axis_cell(points(i, 0), 0), axis_cell(points(i, 1), 1), axis_cell(points(i, 2), 2));
        ++start_[cell[i] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    xs_.resize(n);
    ys_.resize(n);
    zs_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t at = fill[cell[i]]++;
        xs_[at] = points(i, 0);
        ys_[at] = points(i, 1);
        zs_[at] = points(i, 2);
    }
}

std::size_t GridIndex::axis_cell(double v, int axis) const {
    const std::size_t n = axis == 0 ? nx_ : axis == 1 ? ny_ : nz_;
    const double f = (v - lo_[axis]) / h_;
    if (!(f > 0)) return 0;
    return std::min(n - 1, static_cast<std::size_t>(f));
}

double GridIndex::row_min(std::size_t iy, std::size_t iz, std::size_t x0, std::size_t x1,
                          double x, double y, double z) const {
    const std::size_t b = start_[cell_of(x0, iy, iz)];
    const std::size_t e = start_[cell_of(x1, iy, iz) + 1];
    if (b == e) return std::numeric_limits<double>::infinity();
    return simd::min_sqdist(x, y, z, xs_.data() + b, ys_.data() + b, zs_.data() + b, e - b, nullptr);
}

double GridIndex::nearest_sqdist(double x, double y, double z) const {
    const long cx = static_cast<long>(axis_cell(x, 0));
    const long cy = static_cast<long>(axis_cell(y, 1));
    const long cz = static_cast<long>(axis_cell(z, 2));
    const long nx = static_cast<long>(nx_), ny = static_cast<long>(ny_), nz = static_cast<long>(nz_);
    const long rmax = std::max({cx, nx - 1 - cx, cy, ny - 1 - cy, cz, nz - 1 - cz});
    double best = std::numeric_limits<double>::infinity();
    for (long r = 0; r <= rmax; ++r) {
        const long x0 = std::max(0L, cx - r), x1 = std::min(nx - 1, cx + r);
        for (long iz = std::max(0L, cz - r); iz <= std::min(nz - 1, cz + r); ++iz) {
            for (long iy = std::max(0L, cy - r); iy <= std::min(ny - 1, cy + r); ++iy) {
                const bool shell = std::abs(iz - cz) == r || std::abs(iy - cy) == r;
                if (shell) {
                    best = std::min(best, row_min(iy, iz, x0, x1, x, y, z));
                } else {
                    if (cx - r >= 0) best = std::min(best, row_min(iy, iz, cx - r, cx - r, x, y, z));
                    if (cx + r < nx && r > 0) best = std::min(best, row_min(iy, iz, cx + r, cx + r, x, y, z));
                }
            }
        }
        // Any cell outside the searched cube is at least r cell widths away.
        const double reach = static_cast<double>(r) * h_;
        if (best <= reach * reach) break;
    }
    return best;
}

double directed_chamfer(const Cloud& from, const GridIndex& to) {
    if (from.rows() == 0) throw InputError("chamfer", "empty cloud");
    double sum = 0.0;
    for (std::size_t i = 0; i < from.rows(); ++i) sum += to.nearest_sqdist(from(i, 0), from(i, 1), from(i, 2));
    return sum / static_cast<double>(from.rows());
}

double chamfer(const Cloud& a, const Cloud& b) {
    if (a.rows() == 0 || b.rows() == 0) throw InputError("chamfer", "empty cloud");
    if (a.cols() != 3 || b.cols() != 3) throw ContractError("chamfer", "clouds must have 3 columns");
    // Tiny clouds are cheaper without the grid.
    if (a.rows() * b.rows() <= 4096) return chamfer_brute(a, b);
    return directed_chamfer(a, GridIndex(b)) + directed_chamfer(b, GridIndex(a));
}

namespace {

double directed_brute(const Cloud& from, const Cloud& to) {
    std::vector<double> xs(to.rows()), ys(to.rows()), zs(to.rows());
    for (std::size_t j = 0; j < to.rows(); ++j) {
        xs[j] = to(j, 0);
        ys[j] = to(j, 1);
        zs[j] = to(j, 2);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < from.rows(); ++i)
        sum += simd::min_sqdist(from(i, 0), from(i, 1), from(i, 2), xs.data(), ys.data(), zs.data(), to.rows(),
                                nullptr);
    return sum / static_cast<double>(from.rows());
}

}  // namespace

double chamfer_brute(const Cloud& a, const Cloud& b) {
    if (a.rows() == 0 || b.rows() == 0) throw InputError("chamfer", "empty cloud");
    return directed_brute(a, b) + directed_brute(b, a);
}

void write_ply(std::ostream& os, const AssembledShape& shape, const std::vector<std::string>& comments) {
    static constexpr unsigned char palette[][3] = {
        {228, 26, 28}, {55, 126, 184}, {77, 175, 74}, {152, 78, 163},
        {255, 127, 0}, {166, 86, 40}, {247, 129, 191}, {153, 153, 153}};
    os << "ply\nformat ascii 1.0\n"
       << "comment euler " << kEulerConvention << "\n";
    for (const auto& c : comments) os << "comment " << c << "\n";
    os << "element vertex " << shape.shape.rows() << "\n"
       << "property float x\nproperty float y\nproperty float z\n"
       << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
       << "end_header\n";
    for (std::size_t p = 0; p < shape.parts.size(); ++p) {
        const auto* c = palette[p % 8];
        const Cloud& pc = shape.parts[p];
        for (std::size_t i = 0; i < pc.rows(); ++i)
            os << pc(i, 0) << ' ' << pc(i, 1) << ' ' << pc(i, 2) << ' ' << int(c[0]) << ' ' << int(c[1]) << ' '
               << int(c[2]) << '\n';
    }
}

}  // namespace scorepa
