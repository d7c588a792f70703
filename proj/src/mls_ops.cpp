#include "aulmpm/mls_ops.hpp"

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace aulmpm {

KernelOrder parse_kernel_order(std::string_view name)
{
    if (name == "quadratic")
        return KernelOrder::quadratic;
    if (name == "cubic")
        return KernelOrder::cubic;
    throw ConfigurationError("unsupported kernel order '" + std::string(name) + "'");
}

std::string_view to_string(KernelOrder order)
{
    return order == KernelOrder::quadratic ? "quadratic" : "cubic";
}

double support_radius(KernelOrder order)
{
    switch (order) {
    case KernelOrder::quadratic:
        return 1.5;
    case KernelOrder::cubic:
        return 2.0;
    }
    throw ConfigurationError("unsupported kernel order");
}

int stencil_width(KernelOrder order)
{
    switch (order) {
    case KernelOrder::quadratic:
        return 3;
    case KernelOrder::cubic:
        return 4;
    }
    throw ConfigurationError("unsupported kernel order");
}

Weight1D bspline_1d(double x, KernelOrder order)
{
    const double ax = std::abs(x);
    const double sign = x < 0 ? -1.0 : 1.0;
    switch (order) {
    case KernelOrder::quadratic:
        if (ax < 0.5)
            return {0.75 - x * x, -2.0 * x};
        if (ax < 1.5) {
            const double t = 1.5 - ax;
            return {0.5 * t * t, -sign * t};
        }
        return {0.0, 0.0};
    case KernelOrder::cubic:
        if (ax < 1.0)
            return {0.5 * ax * ax * ax - x * x + 2.0 / 3.0, 1.5 * x * ax - 2.0 * x};
        if (ax < 2.0) {
            const double t = 2.0 - ax;
            return {t * t * t / 6.0, -sign * 0.5 * t * t};
        }
        return {0.0, 0.0};
    }
    throw ConfigurationError("unsupported kernel order");
}

template <int Dim>
WeightSample<Dim> bspline_weight(const Vec<Dim>& offset_cells, KernelOrder order, double dx)
{
    if (!offset_cells.allFinite())
        throw ContractViolation("bspline_weight: non-finite offset");
    std::array<Weight1D, Dim> axis;
    for (int d = 0; d < Dim; ++d)
        axis[d] = bspline_1d(offset_cells[d], order);
    WeightSample<Dim> out{1.0, Vec<Dim>::Zero()};
    for (int d = 0; d < Dim; ++d)
        out.w *= axis[d].w;
    for (int d = 0; d < Dim; ++d) {
        // offset = neighbor - center, so moving the center flips the sign.
        double g = -axis[d].dw / dx;
        for (int e = 0; e < Dim; ++e)
            if (e != d)
                g *= axis[e].w;
        out.grad[d] = g;
    }
    return out;
}

template <int Dim>
double Stencil<Dim>::weight_sum() const
{
    double s = 0.0;
    for (const auto& e : entries)
        s += e.w;
    return s;
}

template <int Dim>
Vec<Dim> Stencil<Dim>::first_moment() const
{
    Vec<Dim> s = Vec<Dim>::Zero();
    for (const auto& e : entries)
        s += e.w * e.r;
    return s;
}

template <int Dim>
void build_stencil_into(const Vec<Dim>& center, const GridSpec<Dim>& grid, KernelOrder order, Stencil<Dim>& out)
{
    if (!center.allFinite())
        throw OutOfDomainError("stencil center is not finite");
    const int width = stencil_width(order);
    const Vec<Dim> x = (center - grid.origin) / grid.dx;

    NodeIndex<Dim> base;
    for (int d = 0; d < Dim; ++d) {
        const double b = order == KernelOrder::quadratic ? std::floor(x[d] - 0.5) : std::floor(x[d]) - 1.0;
        base[d] = static_cast<int>(b);
    }
    NodeIndex<Dim> last = base + NodeIndex<Dim>::Constant(width - 1);
    if (!grid.contains_node(base) || !grid.contains_node(last))
        throw OutOfDomainError("stencil support leaves the grid lattice");

    // 1D factors per axis.
    std::array<std::array<Weight1D, 4>, Dim> axis;
    for (int d = 0; d < Dim; ++d)
        for (int k = 0; k < width; ++k)
            axis[d][k] = bspline_1d(static_cast<double>(base[d] + k) - x[d], order);

    out.center = center;
    out.entries.clear();
    int count = 1;
    for (int d = 0; d < Dim; ++d)
        count *= width;
    out.entries.reserve(count);
    for (int flat = 0; flat < count; ++flat) {
        std::array<int, Dim> k;
        int rem = flat;
        for (int d = Dim - 1; d >= 0; --d) {
            k[d] = rem % width;
            rem /= width;
        }
        StencilEntry<Dim> e;
        e.w = 1.0;
        for (int d = 0; d < Dim; ++d) {
            e.node[d] = base[d] + k[d];
            e.w *= axis[d][k[d]].w;
        }
        for (int d = 0; d < Dim; ++d) {
            double g = -axis[d][k[d]].dw / grid.dx;
            for (int c = 0; c < Dim; ++c)
                if (c != d)
                    g *= axis[c][k[c]].w;
            e.grad_w[d] = g;
        }
        e.r = grid.node_position(e.node) - center;
        out.entries.push_back(e);
    }
}

template <int Dim>
Stencil<Dim> build_stencil(const Vec<Dim>& center, const GridSpec<Dim>& grid, KernelOrder order)
{
    Stencil<Dim> s;
    build_stencil_into(center, grid, order, s);
    return s;
}

template <int Dim>
MomentMatrix<Dim> moment_matrix(const Stencil<Dim>& stencil)
{
    if (static_cast<int>(stencil.entries.size()) < Dim + 1)
        throw DegenerateNeighborhoodError("moment_matrix: stencil has fewer than d+1 entries");
    Mat<Dim> M = Mat<Dim>::Zero();
    for (const auto& e : stencil.entries)
        M += e.w * e.r * e.r.transpose();
    M = 0.5 * (M + M.transpose()).eval();

    double lo, hi;
    if constexpr (Dim == 1) {
        lo = hi = M(0, 0);
    } else {
        Eigen::SelfAdjointEigenSolver<Mat<Dim>> eig(M, Eigen::EigenvaluesOnly);
        lo = eig.eigenvalues().minCoeff();
        hi = eig.eigenvalues().maxCoeff();
    }
    if (!(hi > 0.0) || !(lo > 0.0) || hi / lo > kMaxMomentConditioning)
        throw DegenerateNeighborhoodError("moment_matrix: degenerate neighborhood (conditioning "
                                          + std::to_string(lo > 0.0 ? hi / lo : INFINITY) + ")");
    MomentMatrix<Dim> out;
    out.K = M.inverse();
    out.K = 0.5 * (out.K + out.K.transpose()).eval();
    out.conditioning = hi / lo;
    return out;
}

template <int Dim>
Vec<Dim> mls_gradient_derivative(const Stencil<Dim>& stencil, const MomentMatrix<Dim>& moments, const Probe<Dim>& probe)
{
    Vec<Dim> sum = Vec<Dim>::Zero();
    if (probe.is_center) {
        for (const auto& e : stencil.entries)
            sum -= e.w * e.r;
    } else {
        for (const auto& e : stencil.entries)
            if (e.node == probe.node)
                sum += e.w * e.r;
    }
    return moments.K * sum;
}

#define AULMPM_INSTANTIATE(D)                                                                                   \
    template struct Stencil<D>;                                                                                 \
    template WeightSample<D> bspline_weight<D>(const Vec<D>&, KernelOrder, double);                             \
    template void build_stencil_into<D>(const Vec<D>&, const GridSpec<D>&, KernelOrder, Stencil<D>&);           \
    template Stencil<D> build_stencil<D>(const Vec<D>&, const GridSpec<D>&, KernelOrder);                       \
    template MomentMatrix<D> moment_matrix<D>(const Stencil<D>&);                                               \
    template Vec<D> mls_gradient_derivative<D>(const Stencil<D>&, const MomentMatrix<D>&, const Probe<D>&);

AULMPM_INSTANTIATE(1)
AULMPM_INSTANTIATE(2)
AULMPM_INSTANTIATE(3)

#undef AULMPM_INSTANTIATE

} // namespace aulmpm
