#pragma once

#include "apg/solvers.hpp"

#include <optional>
#include <string>
#include <vector>

namespace apg {

/// Absolute slack absorbed by every inequality check.
inline double check_slack(double reference) { return 1e-9 * (1.0 + std::abs(reference)); }

/// Eigen-parameterized quadratic h(x) = f* + (1/2)(x-x*)^T A (x-x*) with
/// A = Q diag(lambda) Q^T; the ground-truth instance behind every bound
/// check. Eigenvalues are kept sorted, lambda_1 = mu and lambda_n = L.
class SpectralQuadratic {
public:
    SpectralQuadratic(Vector eigenvalues, Vector x_star, double f_star,
                      std::optional<Matrix> basis = std::nullopt);

    Index dim() const { return eigenvalues_.size(); }
    double mu() const { return eigenvalues_[0]; }
    double L() const { return eigenvalues_[eigenvalues_.size() - 1]; }
    /// Smallest eigenvalue strictly above mu; throws on a degenerate spectrum.
    double lambda2() const;
    const Vector& eigenvalues() const { return eigenvalues_; }
    const Vector& x_star() const { return x_star_; }
    double f_star() const { return f_star_; }
    bool identity_basis() const { return !basis_.has_value(); }

    SmoothOracle oracle() const;

    /// Component of y0 - x* on the mu-eigenspace.
    double omega1(const Vector& y0) const;

    /// Fixed-step-1/L gradient descent in closed form; identity basis only:
    /// (y_k - x*)_i = (1 - lambda_i/L)^k (y_0 - x*)_i.
    Vector closed_form_pgd_iterate(const Vector& y0, int k) const;

private:
    Vector eigenvalues_;
    Vector x_star_;
    double f_star_;
    std::optional<Matrix> basis_;
};

/// Builds the quadratic and its zero-penalty composite wrapper with exact
/// mu, L, f*, x* populated. basis_seed, when set, draws a random orthonormal
/// basis; otherwise the basis is the identity.
std::pair<SpectralQuadratic, CompositeProblem> make_spectral(
    const Vector& eigenvalues, const Vector& x_star, double f_star,
    std::optional<std::uint64_t> basis_seed = std::nullopt);

/// Right-hand side of the gradient-descent estimator convergence bound:
///   (||y0-x*||^2 / omega1^2) (lambda2-mu) (lambda2/mu)
///   ((1-lambda2/L)/(1-mu/L))^{2k}.
double gd_estimator_bound_rhs(const SpectralQuadratic& q, const Vector& y0, int k);

struct GdEstimatorInstance {
    SpectralQuadratic quadratic;
    CompositeProblem problem;
    Vector y0;
};

/// Random instance for the estimator-bound check: identity basis,
/// lambda2 > mu, omega1 != 0. The tail of y0 - x* is rescaled so that
/// sum_{i>=2} lambda_i (lambda_i - mu) w_i^2 <= 0.9 lambda2 (lambda2 - mu)
/// ||w||^2; each rho_i <= rho_2 for i >= 2 then dominates term by term and
/// the displayed bound holds at every k, not just asymptotically.
GdEstimatorInstance make_gd_estimator_instance(std::uint64_t seed);

/// The mu sequence that sits exactly at the robustness cap:
/// mu_k = min(mu0, mu + C/(k+1)^2), C = mu(1-sqrt(mu0/L))/(3 sqrt(mu0/L)).
std::vector<double> synthetic_mu_sequence(double mu, double mu0, double L, int length);

/// Central finite differences per coordinate.
Vector finite_diff_grad(const SmoothOracle& oracle, const Vector& x, double h_step);

struct CheckRow {
    std::string check;
    int k = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    bool pass = true;
};

struct CheckReport {
    std::string name;
    std::vector<CheckRow> rows;
    std::vector<std::string> notes; // skipped checks, preconditions, context

    int violations() const {
        int n = 0;
        for (const auto& r : rows)
            if (!r.pass) ++n;
        return n;
    }
    bool passed() const { return violations() == 0; }

    std::string summary() const;
    std::string to_csv() const; // header: check,k,lhs,rhs,slack,pass
};

/// f(y_k) - f* <= (f(x0) - f* + (mu/2)||x0-x*||^2) / A_k with the constant-mu
/// weights A_k = (1-sqrt(mu/L))^{-k}. Requires exact mu, x*, f* and a trace
/// with stored iterates.
CheckReport check_prop1(const Trace& trace, double mu, double L, const Vector& x_star,
                        double f_star);

/// Adaptive-sequence gap bound with the recorded error terms
/// sum a_i/(2A_k) (mu_i - mu) ||x_i - x*||^2, plus certification of the
/// product form A_k = prod (1 - sqrt(mu_i/L))^{-1} to 1e-10 relative.
CheckReport check_prop2(const Trace& trace, double mu, double L, const Vector& x_star,
                        double f_star);

/// Robustness bound f(y_k) - f* <= 5 C0/(2 A_k) and A_k >= (1-sqrt(mu/L))^{-k}
/// under the summable cap on mu_k - mu; refuses (ConfigError) when the used
/// sequence violates the cap so the check cannot pass vacuously.
CheckReport check_prop4(const Trace& trace, double mu, double L, const Vector& x_star,
                        double f_star);

/// Estimate-sequence invariants along a run:
///   P1: m_k(x*) <= A_k f* + sum_{i>=1} (a_i/2)(mu_i - mu)||x_i - x*||^2
///   P2: A_k f(y_k) <= f(x0) - f* + phi_k*
/// both with slack 1e-8 (1 + |f*|).
CheckReport check_p1p2(const Trace& trace, double mu, const Vector& x_star,
                       double f_star);

/// a_{k+1}/A_k equals sqrt(kappa_{k+1})/(1-sqrt(kappa_{k+1})) and stays below
/// C1 built from the anchor mu_0.
CheckReport check_lemma4(const Trace& trace, double L);

/// Second-sequence distance bound, term-by-term from the trace.
CheckReport check_lemma5(const Trace& trace, double mu, const Vector& x_star,
                         double f_star);

/// Summable-error bound a_k (mu_k - mu) ||x_k - x*||^2 <= C0/(k+1)^2.
CheckReport check_lemma6(const Trace& trace, double mu, const Vector& x_star,
                         double f_star);

} // namespace apg
