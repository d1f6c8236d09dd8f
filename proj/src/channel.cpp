#include "rsmud/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace rsmud {

Eigen::MatrixXd correlation_matrix(const SignatureSet& s) {
    const auto n = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd chips(s.length, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (s.chips[static_cast<std::size_t>(j)].size() != s.length)
            throw std::invalid_argument("correlation_matrix: signature length mismatch");
        chips.col(j) = s.chips[static_cast<std::size_t>(j)];
    }
    Eigen::MatrixXd r = chips.transpose() * chips;
    r = 0.5 * (r + r.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    // LLT happily factors semidefinite matrices with tiny pivots; require a
    // pivot bounded away from zero.
    if (llt.info() != Eigen::Success ||
        llt.matrixLLT().diagonal().minCoeff() < 1e-7)
        throw std::invalid_argument("correlation_matrix: signatures are linearly dependent");
    return r;
}

ChannelModel::ChannelModel(Eigen::MatrixXd correlation, Eigen::VectorXd amplitudes, double n0)
    : r_(std::move(correlation)), a_(std::move(amplitudes)), n0_(n0) {
    if (r_.rows() != r_.cols() || r_.rows() != a_.size())
        throw std::invalid_argument("channel: R must be square with one amplitude per user");
    if (!(n0_ > 0.0) || !std::isfinite(n0_)) throw std::invalid_argument("channel: N0 must be positive");
    if ((a_.array() <= 0.0).any()) throw std::invalid_argument("channel: amplitudes must be positive");
    if (!r_.isApprox(r_.transpose(), 1e-12)) throw std::invalid_argument("channel: R must be symmetric");
    llt_.compute(r_);
    if (llt_.info() != Eigen::Success) throw std::invalid_argument("channel: R is not positive definite");
    lower_ = llt_.matrixL();
    gram_ = a_.asDiagonal() * r_ * a_.asDiagonal();
}

Eigen::VectorXd ChannelModel::mean(const Eigen::VectorXd& b) const { return r_ * (a_.cwiseProduct(b)); }

Observation ChannelModel::synthesize(const Eigen::VectorXd& b, Rng& rng) const {
    Eigen::VectorXd g(r_.rows());
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = rng.normal();
    return mean(b) + std::sqrt(n0_ / 2.0) * (lower_ * g);
}

double ChannelModel::log_likelihood(const Observation& y, const Eigen::VectorXd& b) const {
    const Eigen::VectorXd residual = y - mean(b);
    return -residual.dot(llt_.solve(residual)) / n0_;
}

double ChannelModel::whitened_energy(const Observation& y) const { return y.dot(llt_.solve(y)); }

ChannelModel make_channel(const SignatureSet& s, double ebn0_db) {
    const double n0 = std::pow(10.0, -ebn0_db / 10.0);
    return ChannelModel(correlation_matrix(s), Eigen::VectorXd::Ones(static_cast<Eigen::Index>(s.size())), n0);
}

Eigen::VectorXd symbol_vector(const Universe& u, const SlotState& s, std::span<const int> known_bits) {
    const int offset = u.reference() ? 1 : 0;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(u.users() + offset);
    if (u.reference()) b[0] = antipodal(static_cast<std::uint32_t>(s.ref_bit.value_or(0)));
    if (u.symbols() > 1) throw std::invalid_argument("symbol_vector: the CDMA channel carries one symbol per slot");
    if (u.symbols() == 0 && s.active.bits != 0 && known_bits.size() != static_cast<std::size_t>(u.users()))
        throw std::invalid_argument("symbol_vector: known data required for every interferer");
    int j = 0;
    for (int i = 0; i < u.users(); ++i) {
        if (!s.active.contains(i)) continue;
        b[offset + i] = u.symbols() == 1 ? antipodal((s.data >> j) & 1U) : known_bits[static_cast<std::size_t>(i)];
        ++j;
    }
    return b;
}

Observation synthesize_observation(const ChannelModel& c, const Universe& u, const SlotState& s, Rng& rng,
                                   std::span<const int> known_bits) {
    return c.synthesize(symbol_vector(u, s, known_bits), rng);
}

}  // namespace rsmud
