#include "apg/estimators.hpp"

#include <cmath>

namespace apg {

std::optional<double> hat_mu(const CompositeProblem& problem, const Vector& y,
                             double f_star) {
    const double gap = composite_value(problem, y) - f_star;
    if (gap <= degeneracy_threshold(f_star)) return std::nullopt;
    const Vector g = reduced_gradient(problem, y, problem.smooth.L);
    return g.squaredNorm() / (2.0 * gap);
}

std::optional<double> mu_local(const CompositeProblem& problem, const Vector& x,
                               const Vector& x_star, double f_star) {
    const double dist2 = (x - x_star).squaredNorm();
    if (dist2 <= degeneracy_threshold(f_star)) return std::nullopt;
    const double L = problem.smooth.L;
    const Vector t = gradient_map(problem, x, L);
    const Vector g = L * (x - t);
    const double f_t = composite_value(problem, t);
    const double numerator =
        f_star - f_t - g.dot(x_star - x) - g.squaredNorm() / (2.0 * L);
    return 2.0 * numerator / dist2;
}

} // namespace apg
