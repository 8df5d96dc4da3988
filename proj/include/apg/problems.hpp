#pragma once

#include "apg/types.hpp"

#include <functional>
#include <optional>
#include <string>

namespace apg {

/// Smooth part of a composite objective: h is L-smooth, optionally
/// mu-strongly convex. The evaluator returns h(x) and fills *grad when
/// grad is non-null, so one call serves both value and gradient users.
struct SmoothOracle {
    std::function<double(const Vector&, Vector*)> eval;
    double L = 0.0;
    std::optional<double> mu;

    double value(const Vector& x) const { return eval(x, nullptr); }

    double value_and_gradient(const Vector& x, Vector& grad) const {
        return eval(x, &grad);
    }

    Vector gradient(const Vector& x) const {
        Vector g;
        eval(x, &g);
        return g;
    }
};

/// Simple penalty psi: extended-real value (+inf outside the domain) and a
/// prox that returns the unique minimizer of psi(x) + (alpha/2)||x - v||^2.
/// prox_value, when set, returns the prox point together with psi at that
/// point, reusing whatever factorization the prox computed (one SVD instead
/// of two for the nuclear norm).
struct ProxPenalty {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&, double)> prox;
    std::function<std::pair<Vector, double>(const Vector&, double)> prox_value;
};

/// Fused prox + penalty value; falls back to prox followed by value.
std::pair<Vector, double> prox_with_value(const ProxPenalty& penalty, const Vector& v,
                                          double alpha);

/// min f(x) = h(x) + psi(x). f_star/x_star are optional ground truth used by
/// gap reporting and the bound checkers. content_key is a canonical problem
/// description consumed by the reference cache.
struct CompositeProblem {
    SmoothOracle smooth;
    ProxPenalty penalty;
    Index dim = 0;
    std::optional<double> f_star;
    std::optional<Vector> x_star;
    std::string content_key;
};

// Coordinate-wise soft threshold, sign(v_i) * max(|v_i| - threshold, 0).
Vector prox_l1(const Vector& v, double threshold);

// SVD of v reshaped to rows x cols, soft-threshold the singular values,
// recompose. Column-major flattening throughout.
Vector prox_nuclear(const Vector& v, Index rows, Index cols, double threshold);

// Coordinate-wise clamp to [lo, hi].
Vector prox_box(const Vector& v, double lo, double hi);

ProxPenalty zero_penalty();
ProxPenalty l1_penalty(double lambda);
ProxPenalty nuclear_penalty(double lambda, Index rows, Index cols);
ProxPenalty box_indicator(double lo, double hi);

/// Gradient mapping T_alpha(y) = prox(y - grad h(y)/alpha, alpha).
Vector gradient_map(const CompositeProblem& problem, const Vector& y, double alpha);

/// Reduced gradient g_alpha(y) = alpha * (y - T_alpha(y)); equals grad h(y)
/// when psi = 0.
Vector reduced_gradient(const CompositeProblem& problem, const Vector& y, double alpha);

/// h(x) + psi(x); +inf when x lies outside dom psi.
double composite_value(const CompositeProblem& problem, const Vector& x);

using LinearOperator = std::function<Vector(const Vector&)>;

/// Largest eigenvalue of a symmetric PSD operator by power iteration on a
/// seeded start vector. Stops when successive Rayleigh quotients agree to
/// rel_tol; throws EvaluationError if the cap is hit first.
double power_iteration_top_eigenvalue(const LinearOperator& op, Index dim,
                                      double rel_tol = 1e-6, int max_iters = 100000,
                                      std::uint64_t seed = 12345);

/// Smoothness constant for a quadratic-form Hessian surrogate: power
/// iteration to 1e-6 relative, then a 1.01 safety factor so the descent
/// lemma survives estimation error.
double estimate_L(const LinearOperator& hessian_op, Index dim,
                  std::uint64_t seed = 12345);

} // namespace apg
