#pragma once

#include "apg/estimators.hpp"
#include "apg/problems.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace apg {

/// How a solver obtains the strong-convexity values it feeds the estimate
/// sequence. Online estimation requires the problem to carry f_star.
struct KnownMu {
    double value;
};
struct ExternalSequence {
    std::function<double(int)> provider; // i >= 0 -> mu_i; provider(0) anchors v_k
};
struct OnlineEstimator {
    std::optional<double> mu0; // defaults to L/2
};
using MuInput = std::variant<std::monostate, KnownMu, ExternalSequence, OnlineEstimator>;

struct SolverConfig {
    int max_iters = 1000;
    std::optional<double> gap_tol; // requires f_star on the problem
    int record_every = 1;          // thins CSV output only, never the checker stream
    MuInput mu_input{};
    bool store_iterates = false;   // verification mode: keep x_k/y_k and model data
    bool classical_fista_t = false; // t-update (1+sqrt(1+4t^2))/2 instead of as printed
};

struct IterationRecord {
    int k = 0;
    double f_y = 0.0;
    std::optional<double> gap;    // raw f(y_k) - f*, may be slightly negative
    std::optional<double> mu_hat; // raw estimate formed at y_k
    std::optional<double> mu_k;   // running-min value used for the step from y_k
    std::optional<double> A_k;
    double gmap_norm = 0.0;       // ||g_L(y_k)||
    bool restarted = false;
    std::int64_t wall_ns = 0;
};

struct RestartEvent {
    int k;          // index of the iterate y_k that triggered the restart
    double epsilon; // threshold in force at trigger time, before the shrink
};

enum class Termination { MaxIters, GapTol, EstimatorConverged, Diverged };

const char* termination_name(Termination t);

/// Per-iteration extras kept in verification mode. Index i of every sequence
/// refers to iteration i; x_iters[0] is the starting point.
struct VerificationData {
    std::vector<Vector> x_iters;
    std::vector<Vector> y_iters;
    std::vector<double> a_seq;          // a_0 = 1, a_1, ...
    std::vector<double> A_seq;          // A_0 = 1, A_1, ...
    std::vector<double> mu_seq;         // mu_0 (anchor), mu_1, ...
    std::vector<double> phi_star_seq;   // min of m_k(x) + (a0 mu_anchor/2)||x-x0||^2
    std::vector<double> m_at_xstar_seq; // m_k(x*), kept when x* and f* known
    bool phi_constant_is_fstar = false; // m_0 = a0 f*; false means m_0 = 0 reference
};

struct Trace {
    std::vector<IterationRecord> records;
    Termination termination = Termination::MaxIters;
    std::string message;
    std::vector<RestartEvent> restarts;
    std::optional<VerificationData> verification;

    const IterationRecord& last() const { return records.back(); }
};

/// Canonical form of the accumulated quadratic lower model:
/// phi_k(x) = phi_star + (S/2)||x - v||^2 with S = a0 mu_anchor + sum a_i mu_i.
struct EstimateSequenceState {
    double A = 1.0;
    double a_next = 0.0;
    double S = 0.0;
    Vector v;
    std::optional<double> phi_star;
    std::optional<double> m_at_xstar;
    std::optional<Vector> x_star; // snapshot used to maintain m_at_xstar
};

/// Value of the model increment a*(l_L(x, x_next) + (mu/2)||x - x_next||^2)
/// at a fixed x, with model_const = f(T_L(x_next)) + ||g||^2/(2L).
double es_increment_at(const Vector& x, double a_next, double mu_next,
                       const Vector& x_next, const Vector& g, double model_const);

/// One model update: folds a*(l_L(.,x_next) + (mu/2)||.-x_next||^2) into the
/// canonical pair and refreshes phi_star / m_at_xstar incrementally.
EstimateSequenceState es_update(const EstimateSequenceState& state, double a_next,
                                double mu_next, const Vector& x_next, const Vector& g,
                                double model_const);

Trace pgd(const CompositeProblem& problem, const Vector& x0, const SolverConfig& config);

Trace apg_known_mu(const CompositeProblem& problem, const Vector& x0, double mu,
                   const SolverConfig& config);

Trace apg_estimate_sequence(const CompositeProblem& problem, const Vector& x0, double mu,
                            const SolverConfig& config);

/// Estimate-sequence solver driven by a mu sequence that is only revealed
/// online. config.mu_input must be ExternalSequence or OnlineEstimator;
/// online mode requires problem.f_star.
Trace adapt_apg(const CompositeProblem& problem, const Vector& x0,
                const SolverConfig& config);

/// Momentum recomputed every iteration from the running-min estimate.
Trace adapt_apg_v2(const CompositeProblem& problem, const Vector& x0, double f_star,
                   const SolverConfig& config);

Trace fista(const CompositeProblem& problem, const Vector& x0, const SolverConfig& config);

/// FISTA inner loop with momentum reset each time f(y_{k+1}) - f* crosses the
/// shrinking threshold eps <- exp(-gamma) eps.
Trace apg_restart(const CompositeProblem& problem, const Vector& x0, double f_star,
                  double gamma, const SolverConfig& config);

} // namespace apg
