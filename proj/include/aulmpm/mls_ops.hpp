#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "aulmpm/errors.hpp"
#include "aulmpm/types.hpp"

namespace aulmpm {

enum class KernelOrder { quadratic = 2, cubic = 3 };

KernelOrder parse_kernel_order(std::string_view name);
std::string_view to_string(KernelOrder order);

// Support radius of the 1D B-spline in cells.
double support_radius(KernelOrder order);

// Nodes touched per axis by one stencil.
int stencil_width(KernelOrder order);

// Uniform lattice: node k sits at origin + k * dx for 0 <= k <= cells.
template <int Dim>
struct GridSpec {
    Vec<Dim> origin = Vec<Dim>::Zero();
    double dx = 1.0;
    NodeIndex<Dim> cells = NodeIndex<Dim>::Ones();

    Vec<Dim> node_position(const NodeIndex<Dim>& node) const
    {
        return origin + dx * node.template cast<double>();
    }
    Vec<Dim> upper() const { return origin + dx * cells.template cast<double>(); }
    bool contains_node(const NodeIndex<Dim>& node) const
    {
        return (node.array() >= 0).all() && (node.array() <= cells.array()).all();
    }
};

struct Weight1D {
    double w;
    double dw; // dW/dx, x in cells
};

Weight1D bspline_1d(double x, KernelOrder order);

template <int Dim>
struct WeightSample {
    double w;
    Vec<Dim> grad; // with respect to the stencil center, per unit length
};

// Tensor-product B-spline. `offset_cells` is (neighbor - center) / dx.
template <int Dim>
WeightSample<Dim> bspline_weight(const Vec<Dim>& offset_cells, KernelOrder order, double dx = 1.0);

template <int Dim>
struct StencilEntry {
    NodeIndex<Dim> node = NodeIndex<Dim>::Zero();
    Vec<Dim> r = Vec<Dim>::Zero(); // neighbor position - center position
    double w = 0.0;
    Vec<Dim> grad_w = Vec<Dim>::Zero();
    std::int64_t slot = -1; // grid storage slot, resolved when a grid binds the stencil
};

template <int Dim>
struct Stencil {
    Vec<Dim> center = Vec<Dim>::Zero();
    std::uint64_t epoch = 0;
    std::vector<StencilEntry<Dim>> entries;

    double weight_sum() const;
    Vec<Dim> first_moment() const; // sum of W r
};

// Throws OutOfDomainError when any support node falls outside the lattice.
template <int Dim>
Stencil<Dim> build_stencil(const Vec<Dim>& center, const GridSpec<Dim>& grid, KernelOrder order);

// Same as build_stencil but reuses the storage of `out`.
template <int Dim>
void build_stencil_into(const Vec<Dim>& center, const GridSpec<Dim>& grid, KernelOrder order, Stencil<Dim>& out);

inline constexpr double kMaxMomentConditioning = 1e8;

template <int Dim>
struct MomentMatrix {
    Mat<Dim> K = Mat<Dim>::Identity();
    double conditioning = 1.0; // ratio of extreme eigenvalues of the moment sum
};

// K = (sum r (x) r W)^-1, without volume weights.
template <int Dim>
MomentMatrix<Dim> moment_matrix(const Stencil<Dim>& stencil);

// MLS gradient (sum (phi_j - phi_c) (x) r_j W_j) K of a field with `Rows`
// components. Exact for affine fields.
template <int Dim, int Rows>
Eigen::Matrix<double, Rows, Dim> mls_gradient(const Eigen::Matrix<double, Rows, 1>& center_value,
                                              std::span<const Eigen::Matrix<double, Rows, 1>> neighbor_values,
                                              const Stencil<Dim>& stencil, const MomentMatrix<Dim>& moments)
{
    if (neighbor_values.size() != stencil.entries.size())
        throw ContractViolation("mls_gradient: neighbor value count does not match stencil");
    Eigen::Matrix<double, Rows, Dim> sum = Eigen::Matrix<double, Rows, Dim>::Zero();
    for (std::size_t j = 0; j < stencil.entries.size(); ++j) {
        const auto& e = stencil.entries[j];
        sum += (neighbor_values[j] - center_value) * (e.w * e.r).transpose();
    }
    return sum * moments.K;
}

template <int Dim>
struct Probe {
    bool is_center = true;
    NodeIndex<Dim> node = NodeIndex<Dim>::Zero();

    static Probe center() { return {}; }
    static Probe neighbor(const NodeIndex<Dim>& n) { return {false, n}; }
};

// d(grad phi)/d(phi_k) for a scalar field. For vector fields the derivative of
// component (a, b) with respect to phi_k[c] is delta_ac times entry b of the
// returned vector. Probes outside the stencil yield zero.
template <int Dim>
Vec<Dim> mls_gradient_derivative(const Stencil<Dim>& stencil, const MomentMatrix<Dim>& moments, const Probe<Dim>& probe);

} // namespace aulmpm
