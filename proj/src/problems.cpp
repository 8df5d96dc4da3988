#include "apg/problems.hpp"

#include "apg/rng.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>

namespace apg {

Vector prox_l1(const Vector& v, double threshold) {
    if (threshold < 0.0) throw std::invalid_argument("prox_l1: negative threshold");
    if (threshold == 0.0) return v;
    return v.array().sign() * (v.array().abs() - threshold).max(0.0);
}

Vector prox_nuclear(const Vector& v, Index rows, Index cols, double threshold) {
    if (threshold < 0.0) throw std::invalid_argument("prox_nuclear: negative threshold");
    if (rows <= 0 || cols <= 0 || rows * cols != v.size())
        throw std::invalid_argument("prox_nuclear: shape does not match vector length");
    Matrix M = v.reshaped(rows, cols);
    Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw EvaluationError("prox_nuclear: SVD did not converge");
    Vector s = (svd.singularValues().array() - threshold).max(0.0);
    Matrix out = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
    return out.reshaped();
}

Vector prox_box(const Vector& v, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("prox_box: lo > hi");
    return v.array().min(hi).max(lo);
}

ProxPenalty zero_penalty() {
    ProxPenalty p;
    p.value = [](const Vector&) { return 0.0; };
    p.prox = [](const Vector& v, double) { return v; };
    return p;
}

ProxPenalty l1_penalty(double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("l1_penalty: negative lambda");
    ProxPenalty p;
    p.value = [lambda](const Vector& x) { return lambda * x.lpNorm<1>(); };
    p.prox = [lambda](const Vector& v, double alpha) { return prox_l1(v, lambda / alpha); };
    return p;
}

ProxPenalty nuclear_penalty(double lambda, Index rows, Index cols) {
    if (lambda < 0.0) throw std::invalid_argument("nuclear_penalty: negative lambda");
    ProxPenalty p;
    p.value = [lambda, rows, cols](const Vector& x) {
        Eigen::BDCSVD<Matrix> svd(x.reshaped(rows, cols));
        return lambda * svd.singularValues().sum();
    };
    p.prox = [lambda, rows, cols](const Vector& v, double alpha) {
        return prox_nuclear(v, rows, cols, lambda / alpha);
    };
    p.prox_value = [lambda, rows, cols](const Vector& v, double alpha) {
        const double threshold = lambda / alpha;
        Matrix m = v.reshaped(rows, cols);
        Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success)
            throw EvaluationError("nuclear_penalty: SVD did not converge");
        Vector s = (svd.singularValues().array() - threshold).max(0.0);
        Matrix out = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
        return std::make_pair(Vector(out.reshaped()), lambda * s.sum());
    };
    return p;
}

ProxPenalty box_indicator(double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("box_indicator: lo > hi");
    ProxPenalty p;
    p.value = [lo, hi](const Vector& x) {
        if ((x.array() < lo).any() || (x.array() > hi).any())
            return std::numeric_limits<double>::infinity();
        return 0.0;
    };
    p.prox = [lo, hi](const Vector& v, double) { return prox_box(v, lo, hi); };
    return p;
}

std::pair<Vector, double> prox_with_value(const ProxPenalty& penalty, const Vector& v,
                                          double alpha) {
    if (penalty.prox_value) return penalty.prox_value(v, alpha);
    Vector p = penalty.prox(v, alpha);
    const double val = penalty.value(p);
    return {std::move(p), val};
}

Vector gradient_map(const CompositeProblem& problem, const Vector& y, double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("gradient_map: alpha must be positive");
    Vector grad;
    problem.smooth.eval(y, &grad);
    if (!all_finite(grad)) {
        std::ostringstream msg;
        msg << "gradient_map: non-finite gradient at |y| = " << y.norm();
        throw EvaluationError(msg.str());
    }
    return problem.penalty.prox(y - grad / alpha, alpha);
}

Vector reduced_gradient(const CompositeProblem& problem, const Vector& y, double alpha) {
    return alpha * (y - gradient_map(problem, y, alpha));
}

double composite_value(const CompositeProblem& problem, const Vector& x) {
    return problem.smooth.value(x) + problem.penalty.value(x);
}

double power_iteration_top_eigenvalue(const LinearOperator& op, Index dim,
                                      double rel_tol, int max_iters,
                                      std::uint64_t seed) {
    Rng rng(seed);
    Vector q = rng.gaussian_vector(dim);
    q.normalize();
    double prev = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Vector w = op(q);
        const double lambda = q.dot(w);
        const double wn = w.norm();
        if (wn == 0.0) return 0.0; // operator annihilates the iterate
        q = w / wn;
        if (it > 0 && std::abs(lambda - prev) <= rel_tol * std::abs(lambda)) return lambda;
        prev = lambda;
    }
    throw EvaluationError("power_iteration_top_eigenvalue: no convergence within cap");
}

double estimate_L(const LinearOperator& hessian_op, Index dim, std::uint64_t seed) {
    return 1.01 * power_iteration_top_eigenvalue(hessian_op, dim, 1e-6, 100000, seed);
}

} // namespace apg
