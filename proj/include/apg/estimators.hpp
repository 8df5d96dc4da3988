#pragma once

#include "apg/problems.hpp"

#include <optional>
#include <vector>

namespace apg {

/// Gap below which the estimator treats the solver as converged instead of
/// forming a near-0/0 ratio.
inline double degeneracy_threshold(double f_star) {
    return 1e-14 * (1.0 + std::abs(f_star));
}

/// Running-min online strong-convexity estimate. mu0 caps the sequence from
/// above; every raw estimate is folded in with min, so the emitted sequence
/// is non-increasing and positive.
class MuEstimatorState {
public:
    struct Entry {
        int k;
        double raw;
        double running;
    };

    explicit MuEstimatorState(double mu0) : mu0_(mu0), current_min_(mu0) {
        if (mu0 <= 0.0) throw std::invalid_argument("MuEstimatorState: mu0 must be positive");
    }

    double mu0() const { return mu0_; }
    double current() const { return current_min_; }

    /// Fold a raw estimate into the running min; returns the new min.
    double update(int k, double raw) {
        if (raw <= 0.0) throw std::invalid_argument("MuEstimatorState::update: raw must be positive");
        if (raw < current_min_) current_min_ = raw;
        history_.push_back({k, raw, current_min_});
        return current_min_;
    }

    const std::vector<Entry>& history() const { return history_; }

private:
    double mu0_;
    double current_min_;
    std::vector<Entry> history_;
};

/// Raw estimate ||g_L(y)||^2 / (2 (f(y) - f_star)) using the problem's L.
/// nullopt signals that the gap is at reference precision already.
std::optional<double> hat_mu(const CompositeProblem& problem, const Vector& y,
                             double f_star);

/// Local strong-convexity diagnostic
///   mu_loc(x) = 2 [f* - f(T_L(x)) - g_L(x)^T (x* - x) - ||g_L(x)||^2 / (2L)]
///               / ||x - x*||^2.
/// nullopt when x is within reference precision of x_star.
std::optional<double> mu_local(const CompositeProblem& problem, const Vector& x,
                               const Vector& x_star, double f_star);

} // namespace apg
