#pragma once

#include <span>
#include <stdexcept>

#include <Eigen/Dense>

#include "artrec/trajectory.hpp"

namespace artrec {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// A batch of equal-length sequences stored time-major: row t * batch + b
/// holds sequence b at step t. Column count is the feature width.
template <class Scalar>
struct SequenceBatch {
    int batch = 0;
    int steps = 0;
    Mat<Scalar> data;

    SequenceBatch() = default;
    SequenceBatch(int batch_, int steps_, int features)
        : batch(batch_), steps(steps_), data(Mat<Scalar>::Zero(static_cast<Eigen::Index>(batch_) * steps_, features)) {}

    int features() const { return static_cast<int>(data.cols()); }
    Eigen::Index row(int t, int b) const { return static_cast<Eigen::Index>(t) * batch + b; }

    /// Rows for time step t (batch x features).
    auto step(int t) { return data.middleRows(static_cast<Eigen::Index>(t) * batch, batch); }
    auto step(int t) const { return data.middleRows(static_cast<Eigen::Index>(t) * batch, batch); }

    /// Sequence b as a steps x features matrix.
    Mat<Scalar> sequence(int b) const {
        Mat<Scalar> out(steps, data.cols());
        for (int t = 0; t < steps; ++t) out.row(t) = data.row(row(t, b));
        return out;
    }

    template <class Other>
    SequenceBatch<Other> cast() const {
        SequenceBatch<Other> out;
        out.batch = batch;
        out.steps = steps;
        out.data = data.template cast<Other>();
        return out;
    }
};

/// Packs frames (each steps x 16) into a time-major batch.
template <class Scalar>
SequenceBatch<Scalar> pack_frames(std::span<const Frame> frames) {
    if (frames.empty()) throw std::invalid_argument("pack_frames: no frames");
    const int steps = static_cast<int>(frames.front().data.rows());
    SequenceBatch<Scalar> out(static_cast<int>(frames.size()), steps, kNumChannels);
    for (int b = 0; b < out.batch; ++b) {
        const auto& f = frames[static_cast<std::size_t>(b)].data;
        if (f.rows() != steps) throw std::invalid_argument("pack_frames: frames differ in length");
        for (int t = 0; t < steps; ++t) out.data.row(out.row(t, b)) = f.row(t).template cast<Scalar>();
    }
    return out;
}

/// Sequence b of a 16-channel batch as a ChannelMatrix in double precision.
template <class Scalar>
ChannelMatrix unpack_sequence(const SequenceBatch<Scalar>& batch, int b) {
    ChannelMatrix out(batch.steps, kNumChannels);
    for (int t = 0; t < batch.steps; ++t) out.row(t) = batch.data.row(batch.row(t, b)).template cast<double>();
    return out;
}

}  // namespace artrec
