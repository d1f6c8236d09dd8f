#include "rsmud/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace rsmud {

namespace {

int g_threads = 0;

constexpr std::size_t kParallelThreshold = std::size_t{1} << 12;

void check_size(const TrafficModel& m, std::size_t n) {
    if (n != (std::size_t{1} << m.users)) throw std::invalid_argument("transition kernel: table size is not 2^K");
}

}  // namespace

int thread_count() {
    if (g_threads > 0) return g_threads;
    if (const char* env = std::getenv("RSMUD_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return omp_get_max_threads();
}

void set_thread_count(int n) { g_threads = n > 0 ? n : 0; }

namespace kernels {

void transition_sum(const TrafficModel& m, std::span<double> v) {
    check_size(m, v.size());
    const double stay = m.mu;
    const double die = 1.0 - m.mu;
    const double born = m.alpha;
    const double idle = 1.0 - m.alpha;
    const auto n = static_cast<std::ptrdiff_t>(v.size());
    const int threads = thread_count();
    for (int i = 0; i < m.users; ++i) {
        const std::ptrdiff_t bit = std::ptrdiff_t{1} << i;
        const std::ptrdiff_t half = n / 2;
#pragma omp parallel for num_threads(threads) if (static_cast<std::size_t>(n) >= kParallelThreshold)
        for (std::ptrdiff_t k = 0; k < half; ++k) {
            // k-th mask with bit i clear.
            const std::ptrdiff_t lo = ((k >> i) << (i + 1)) | (k & (bit - 1));
            const std::ptrdiff_t hi = lo | bit;
            const double x0 = v[static_cast<std::size_t>(lo)];
            const double x1 = v[static_cast<std::size_t>(hi)];
            v[static_cast<std::size_t>(lo)] = idle * x0 + die * x1;
            v[static_cast<std::size_t>(hi)] = born * x0 + stay * x1;
        }
    }
}

void transition_max(const TrafficModel& m, std::span<double> score, std::span<Mask> arg) {
    check_size(m, score.size());
    check_size(m, arg.size());
    const double l00 = log_pow(1.0 - m.alpha, 1);
    const double l01 = log_pow(1.0 - m.mu, 1);
    const double l10 = log_pow(m.alpha, 1);
    const double l11 = log_pow(m.mu, 1);
    const auto n = static_cast<std::ptrdiff_t>(score.size());
    for (std::ptrdiff_t b = 0; b < n; ++b) arg[static_cast<std::size_t>(b)] = static_cast<Mask>(b);
    const int threads = thread_count();
    for (int i = 0; i < m.users; ++i) {
        const std::ptrdiff_t bit = std::ptrdiff_t{1} << i;
        const std::ptrdiff_t half = n / 2;
#pragma omp parallel for num_threads(threads) if (static_cast<std::size_t>(n) >= kParallelThreshold)
        for (std::ptrdiff_t k = 0; k < half; ++k) {
            const auto lo = static_cast<std::size_t>(((k >> i) << (i + 1)) | (k & (bit - 1)));
            const auto hi = lo | static_cast<std::size_t>(bit);
            const double s0 = score[lo];
            const double s1 = score[hi];
            const Mask a0 = arg[lo];
            const Mask a1 = arg[hi];
            // (score, arg) ordered by score, then by lowest arg.
            const auto pick = [](double x, Mask ax, double y, Mask ay, double& out, Mask& aout) {
                if (x > y || (x == y && ax < ay)) {
                    out = x;
                    aout = ax;
                } else {
                    out = y;
                    aout = ay;
                }
            };
            pick(s0 + l00, a0, s1 + l01, a1, score[lo], arg[lo]);
            pick(s0 + l10, a0, s1 + l11, a1, score[hi], arg[hi]);
        }
    }
}

}  // namespace kernels

namespace reference {

std::vector<double> transition_sum(const TrafficModel& m, std::span<const double> v) {
    check_size(m, v.size());
    std::vector<double> out(v.size(), 0.0);
    for (std::size_t c = 0; c < v.size(); ++c) {
        double acc = 0.0;
        for (std::size_t b = 0; b < v.size(); ++b)
            acc += std::exp(log_transition(m, {static_cast<Mask>(b)}, {static_cast<Mask>(c)})) * v[b];
        out[c] = acc;
    }
    return out;
}

void transition_max(const TrafficModel& m, std::span<const double> score, std::span<double> out_score,
                    std::span<Mask> out_arg) {
    check_size(m, score.size());
    for (std::size_t c = 0; c < score.size(); ++c) {
        double best = kNegInf;
        Mask best_arg = 0;
        bool first = true;
        for (std::size_t b = 0; b < score.size(); ++b) {
            const double s = score[b] + log_transition(m, {static_cast<Mask>(b)}, {static_cast<Mask>(c)});
            if (first || s > best) {
                best = s;
                best_arg = static_cast<Mask>(b);
                first = false;
            }
        }
        out_score[c] = best;
        out_arg[c] = best_arg;
    }
}

}  // namespace reference

}  // namespace rsmud
