#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace snnood {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using MatD = Mat<double>;
using VecF = Vec<float>;
using VecD = Vec<double>;
using VecI = Eigen::VectorXi;

/// Binary spike raster over a simulation window, one row per time step and
/// one column per neuron/feature. Entries are exactly 0 or 1.
template <typename Scalar>
using SpikeRaster = Mat<Scalar>;

}  // namespace snnood
