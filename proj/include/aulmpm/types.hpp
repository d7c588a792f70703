#pragma once

#include <type_traits>

#include <Eigen/Dense>

namespace aulmpm {

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

// Integer lattice coordinates of a grid node.
template <int Dim>
using NodeIndex = Eigen::Matrix<int, Dim, 1>;

// 2D cross product returns the out-of-plane scalar; 3D returns the vector.
template <int Dim>
using AngularMomentum = std::conditional_t<Dim == 3, Vec<3>, double>;

} // namespace aulmpm
