#pragma once

// Synchronous DS-CDMA observation model after the matched-filter bank:
// y = R A b + z with z ~ N(0, (N0/2) R).

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rsmud/rng.hpp"
#include "rsmud/rst.hpp"

namespace rsmud {

using Observation = Eigen::VectorXd;

/// Maximal-length LFSR output of the given degree, mapped 0 -> +1, 1 -> -1,
/// rotated left by `shift` chips and scaled to unit norm.
///
/// `taps` holds the feedback polynomial, bit i being the coefficient of x^i;
/// bits 0 and `degree` must be set. Throws std::invalid_argument when the
/// register period differs from 2^degree - 1.
[[nodiscard]] Eigen::VectorXd gen_msequence(int degree, std::uint32_t taps, int shift = 0);

/// A primitive polynomial for degrees 2..16.
[[nodiscard]] std::uint32_t default_primitive_taps(int degree);

/// Small Kasami set: 2^{n/2} sequences of length 2^n - 1 (n even), the base
/// m-sequence first, followed by its sums with every shift of the
/// (2^{n/2}+1)-decimation. Unit norm.
[[nodiscard]] std::vector<Eigen::VectorXd> gen_kasami_small_set(int n);

enum class SpreadingFamily { msequence, kasami };

[[nodiscard]] SpreadingFamily parse_spreading(const std::string& name);
[[nodiscard]] std::string to_string(SpreadingFamily f);

/// One unit-norm antipodal signature per channel user. With a reference user
/// it sits at index 0, interferers follow.
struct SignatureSet {
    int length = 0;
    std::vector<Eigen::VectorXd> chips;

    [[nodiscard]] std::size_t size() const { return chips.size(); }
};

/// Picks `count` signatures from a family of length `length`.
///
/// m-sequence families are the distinct cyclic shifts of one sequence;
/// Kasami families the small set. `order` lists family members for channel
/// users 0..count-1; when empty, interferer i takes member i-1 and the
/// reference user (if any) takes member K.
[[nodiscard]] SignatureSet make_signatures(SpreadingFamily family, int length, int count, bool reference,
                                           std::span<const int> order = {});

/// Text export: one row of +1/-1 chips per user.
void write_signatures(std::ostream& out, const SignatureSet& s);

/// R[i][j] = <s_i, s_j>. Throws std::invalid_argument when R is not
/// positive definite (linearly dependent signatures).
[[nodiscard]] Eigen::MatrixXd correlation_matrix(const SignatureSet& s);

/// Correlation, amplitudes and noise level of the synchronous channel.
/// Immutable after construction.
class ChannelModel {
public:
    ChannelModel(Eigen::MatrixXd correlation, Eigen::VectorXd amplitudes, double n0);

    [[nodiscard]] int dimension() const { return static_cast<int>(r_.rows()); }
    [[nodiscard]] const Eigen::MatrixXd& correlation() const { return r_; }
    [[nodiscard]] const Eigen::VectorXd& amplitudes() const { return a_; }
    [[nodiscard]] double n0() const { return n0_; }
    /// Lower-triangular Cholesky factor of R.
    [[nodiscard]] Eigen::MatrixXd chol() const { return llt_.matrixL(); }

    /// Noise-free matched-filter output R A b.
    [[nodiscard]] Eigen::VectorXd mean(const Eigen::VectorXd& b) const;

    /// y = R A b + sqrt(N0/2) L g, g standard normal.
    [[nodiscard]] Observation synthesize(const Eigen::VectorXd& b, Rng& rng) const;

    /// -(1/N0) (y - RAb)' R^{-1} (y - RAb).
    [[nodiscard]] double log_likelihood(const Observation& y, const Eigen::VectorXd& b) const;

    /// y' R^{-1} y, used by callers that score many hypotheses on one y.
    [[nodiscard]] double whitened_energy(const Observation& y) const;

    /// A R A, the Gram matrix of the scaled signatures.
    [[nodiscard]] const Eigen::MatrixXd& gram() const { return gram_; }

private:
    Eigen::MatrixXd r_;
    Eigen::VectorXd a_;
    double n0_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::MatrixXd lower_;
    Eigen::MatrixXd gram_;
};

/// Channel with equal amplitudes a = sqrt(Eb), Eb = 1, and N0 set from
/// Eb/N0 in dB.
[[nodiscard]] ChannelModel make_channel(const SignatureSet& s, double ebn0_db);

/// Symbol vector b of a slot state: +-1 at the reference user and at active
/// interferers, 0 elsewhere. Data come from the state when N = 1, from
/// `known_bits` (one +-1 per interferer) when N = 0.
[[nodiscard]] Eigen::VectorXd symbol_vector(const Universe& u, const SlotState& s,
                                            std::span<const int> known_bits = {});

/// y for one slot state.
[[nodiscard]] Observation synthesize_observation(const ChannelModel& c, const Universe& u, const SlotState& s,
                                                 Rng& rng, std::span<const int> known_bits = {});

}  // namespace rsmud
