#include "apg/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace apg {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kKappaCeil = 1.0 - 1e-9;

std::int64_t since_ns(Clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
}

void validate_config(const CompositeProblem& problem, const Vector& x0,
                     const SolverConfig& cfg) {
    if (problem.smooth.L <= 0.0) throw ConfigError("solver: problem must carry L > 0");
    if (problem.dim > 0 && x0.size() != problem.dim)
        throw ConfigError("solver: x0 dimension mismatch");
    if (cfg.max_iters < 1) throw ConfigError("solver: max_iters must be >= 1");
    if (cfg.record_every < 1) throw ConfigError("solver: record_every must be >= 1");
    if (cfg.gap_tol) {
        if (*cfg.gap_tol <= 0.0) throw ConfigError("solver: gap_tol must be > 0");
        if (!problem.f_star) throw ConfigError("solver: gap_tol requires f_star");
    }
    if (cfg.store_iterates &&
        (static_cast<long long>(cfg.max_iters) + 1) * std::max<Index>(problem.dim, 1) >
            10'000'000LL)
        throw ConfigError("solver: verification trace would exceed the 1e7 value cap");
}

double divergence_ceiling(double f0, const std::optional<double>& f_star) {
    if (f_star) return f0 + 1e6 * std::max(f0 - *f_star, 1e-9 * (1.0 + std::abs(f0)));
    return f0 + 1e6 * (1.0 + std::abs(f0));
}

IterationRecord base_record(int k, double f_y, const std::optional<double>& f_star,
                            Clock::time_point t0) {
    IterationRecord rec;
    rec.k = k;
    rec.f_y = f_y;
    if (f_star) rec.gap = f_y - *f_star;
    rec.wall_ns = since_ns(t0);
    return rec;
}

void init_iterate_storage(Trace& trace, const SolverConfig& cfg, const Vector& x0) {
    if (!cfg.store_iterates) return;
    VerificationData vd;
    vd.x_iters.push_back(x0);
    vd.y_iters.push_back(x0);
    trace.verification = std::move(vd);
}

void push_iterates(Trace& trace, const Vector& x_next, const Vector& y_next) {
    if (!trace.verification) return;
    trace.verification->x_iters.push_back(x_next);
    trace.verification->y_iters.push_back(y_next);
}

void fail_diverged(Trace& trace, IterationRecord rec, const std::string& message) {
    rec.gmap_norm = std::numeric_limits<double>::quiet_NaN();
    trace.records.push_back(std::move(rec));
    trace.termination = Termination::Diverged;
    trace.message = message;
}

struct StepValue {
    Vector y;
    double f;
};

// T_L(x) together with f(T_L(x)); the prox factorization is reused for psi.
StepValue prox_step_with_objective(const CompositeProblem& problem, const Vector& x,
                                   double L) {
    Vector grad;
    problem.smooth.eval(x, &grad);
    if (!all_finite(grad))
        throw EvaluationError("solver step: non-finite gradient at |x| = " +
                              std::to_string(x.norm()));
    auto [y, psi] = prox_with_value(problem.penalty, x - grad / L, L);
    const double f = problem.smooth.value(y) + psi;
    return {std::move(y), f};
}

// Head-of-iteration bookkeeping shared by the momentum solvers: records y_k
// (including ||g_L(y_k)||), then applies the stop conditions. Returns false
// when the run ends here. tmap_out/tmap_f_out receive T_L(y_k) and
// f(T_L(y_k)) for callers that reuse the step (PGD).
bool head_record(Trace& trace, const CompositeProblem& problem, const SolverConfig& cfg,
                 Clock::time_point t0, int k, const Vector& y, double f_y,
                 double ceiling, IterationRecord rec, Vector* tmap_out,
                 double* tmap_f_out = nullptr) {
    rec.k = k;
    rec.f_y = f_y;
    if (problem.f_star) rec.gap = f_y - *problem.f_star;
    rec.wall_ns = since_ns(t0);
    if (!std::isfinite(f_y) || f_y > ceiling) {
        fail_diverged(trace, std::move(rec),
                      "objective diverged at k=" + std::to_string(k));
        return false;
    }
    StepValue step;
    try {
        step = prox_step_with_objective(problem, y, problem.smooth.L);
    } catch (const EvaluationError& e) {
        fail_diverged(trace, std::move(rec), e.what());
        return false;
    }
    rec.gmap_norm = (problem.smooth.L * (y - step.y)).norm();
    trace.records.push_back(std::move(rec));
    if (tmap_out) *tmap_out = std::move(step.y);
    if (tmap_f_out) *tmap_f_out = step.f;
    if (cfg.gap_tol && trace.records.back().gap &&
        *trace.records.back().gap <= *cfg.gap_tol) {
        trace.termination = Termination::GapTol;
        return false;
    }
    if (k == cfg.max_iters) {
        trace.termination = Termination::MaxIters;
        return false;
    }
    return true;
}

} // namespace

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::MaxIters: return "max_iters";
        case Termination::GapTol: return "gap_tol";
        case Termination::EstimatorConverged: return "estimator_converged";
        case Termination::Diverged: return "diverged";
    }
    return "unknown";
}

double es_increment_at(const Vector& x, double a_next, double mu_next,
                       const Vector& x_next, const Vector& g, double model_const) {
    const Vector d = x - x_next;
    return a_next * (model_const + g.dot(d) + 0.5 * mu_next * d.squaredNorm());
}

EstimateSequenceState es_update(const EstimateSequenceState& state, double a_next,
                                double mu_next, const Vector& x_next, const Vector& g,
                                double model_const) {
    if (a_next <= 0.0) throw std::invalid_argument("es_update: a_next must be positive");
    if (mu_next <= 0.0) throw std::invalid_argument("es_update: mu_next must be positive");
    EstimateSequenceState next = state;
    const double s_new = state.S + a_next * mu_next;
    next.v = (state.S * state.v + a_next * mu_next * x_next - a_next * g) / s_new;
    next.S = s_new;
    next.a_next = a_next;
    next.A = state.A + a_next;
    if (state.phi_star) {
        next.phi_star = *state.phi_star + 0.5 * state.S * (next.v - state.v).squaredNorm() +
                        es_increment_at(next.v, a_next, mu_next, x_next, g, model_const);
    }
    if (state.m_at_xstar && state.x_star) {
        next.m_at_xstar = *state.m_at_xstar +
                          es_increment_at(*state.x_star, a_next, mu_next, x_next, g,
                                          model_const);
    }
    return next;
}

Trace pgd(const CompositeProblem& problem, const Vector& x0, const SolverConfig& cfg) {
    validate_config(problem, x0, cfg);
    const auto t0 = Clock::now();
    Trace trace;
    init_iterate_storage(trace, cfg, x0);
    Vector y = x0;
    double f_y = composite_value(problem, y);
    const double ceiling = divergence_ceiling(f_y, problem.f_star);
    for (int k = 0;; ++k) {
        Vector tmap;
        double tmap_f = 0.0;
        if (!head_record(trace, problem, cfg, t0, k, y, f_y, ceiling, IterationRecord{},
                         &tmap, &tmap_f))
            return trace;
        y = std::move(tmap);
        f_y = tmap_f;
        push_iterates(trace, y, y);
    }
}

Trace apg_known_mu(const CompositeProblem& problem, const Vector& x0, double mu,
                   const SolverConfig& cfg) {
    validate_config(problem, x0, cfg);
    const double L = problem.smooth.L;
    if (mu <= 0.0 || mu > L)
        throw std::invalid_argument("apg_known_mu: need 0 < mu <= L");
    const auto t0 = Clock::now();
    const double root = std::sqrt(mu / L);
    const double beta = (1.0 - root) / (1.0 + root);
    Trace trace;
    init_iterate_storage(trace, cfg, x0);
    Vector y_prev = x0;
    Vector y = x0;
    double f_y = composite_value(problem, y);
    const double ceiling = divergence_ceiling(f_y, problem.f_star);
    double A = 1.0;
    for (int k = 0;; ++k) {
        IterationRecord rec;
        rec.mu_k = mu;
        rec.A_k = A;
        if (!head_record(trace, problem, cfg, t0, k, y, f_y, ceiling, std::move(rec),
                         nullptr))
            return trace;
        Vector x = y + beta * (y - y_prev);
        y_prev = y;
        try {
            StepValue step = prox_step_with_objective(problem, x, L);
            y = std::move(step.y);
            f_y = step.f;
        } catch (const EvaluationError& e) {
            fail_diverged(trace, base_record(k + 1, f_y, problem.f_star, t0), e.what());
            return trace;
        }
        A /= 1.0 - root;
        push_iterates(trace, x, y);
    }
}

namespace {

enum class EsMode { Constant, External, Online };

// Common core of the estimate-sequence solvers. The model state is kept
// normalized by A_k (the iteration only uses ratios), so long runs cannot
// overflow; absolute phi*/m(x*) values are exported while A_k stays finite.
Trace run_estimate_sequence(const CompositeProblem& problem, const Vector& x0,
                            const SolverConfig& cfg, EsMode mode, double const_mu,
                            const std::function<double(int)>& provider,
                            double mu0_online) {
    validate_config(problem, x0, cfg);
    const double L = problem.smooth.L;
    const auto t0 = Clock::now();

    double mu_anchor = 0.0;
    MuEstimatorState estimator(mode == EsMode::Online ? mu0_online : 1.0);
    double external_min = 0.0;
    switch (mode) {
        case EsMode::Constant:
            mu_anchor = const_mu;
            break;
        case EsMode::External:
            mu_anchor = provider(0);
            if (!(mu_anchor > 0.0))
                throw std::invalid_argument("adapt_apg: mu sequence must be positive");
            external_min = mu_anchor;
            break;
        case EsMode::Online:
            mu_anchor = mu0_online;
            break;
    }

    Trace trace;
    init_iterate_storage(trace, cfg, x0);

    // phi_k(x) = m_k(x) + (a0 mu_anchor / 2)||x - x0||^2, canonical pair kept
    // as (S/A_k, v); m_0 = a0 f* when f* is known, otherwise the 0 reference.
    const bool have_fstar = problem.f_star.has_value();
    const bool track_mxs = have_fstar && problem.x_star.has_value();
    const double m0_const = have_fstar ? *problem.f_star : 0.0;
    EstimateSequenceState state;
    state.A = 1.0;
    state.a_next = 1.0;
    state.S = mu_anchor; // a0 = 1
    state.v = x0;
    state.phi_star = m0_const;
    if (track_mxs) {
        state.m_at_xstar = m0_const;
        state.x_star = *problem.x_star;
    }
    double A_abs = 1.0;
    if (trace.verification) {
        auto& vd = *trace.verification;
        vd.a_seq.push_back(1.0);
        vd.A_seq.push_back(1.0);
        vd.mu_seq.push_back(mu_anchor);
        vd.phi_star_seq.push_back(*state.phi_star);
        if (track_mxs) vd.m_at_xstar_seq.push_back(*state.m_at_xstar);
        vd.phi_constant_is_fstar = have_fstar;
    }

    Vector y = x0;
    double f_y = composite_value(problem, y);
    const double ceiling = divergence_ceiling(f_y, problem.f_star);

    for (int k = 0;; ++k) {
        IterationRecord rec = base_record(k, f_y, problem.f_star, t0);
        rec.A_k = A_abs;
        if (!std::isfinite(f_y) || f_y > ceiling) {
            fail_diverged(trace, std::move(rec),
                          "objective diverged at k=" + std::to_string(k));
            return trace;
        }
        Vector g_y;
        try {
            g_y = reduced_gradient(problem, y, L);
        } catch (const EvaluationError& e) {
            fail_diverged(trace, std::move(rec), e.what());
            return trace;
        }
        rec.gmap_norm = g_y.norm();

        double mu_used = 0.0;
        switch (mode) {
            case EsMode::Constant:
                mu_used = const_mu;
                break;
            case EsMode::External: {
                const double provided = provider(k + 1);
                if (!(provided > 0.0))
                    throw std::invalid_argument("adapt_apg: mu sequence must be positive");
                external_min = std::min(external_min, provided);
                mu_used = external_min;
                break;
            }
            case EsMode::Online: {
                const double gap = f_y - *problem.f_star;
                const double raw = rec.gmap_norm * rec.gmap_norm / (2.0 * gap);
                if (gap <= degeneracy_threshold(*problem.f_star) || !(raw > 0.0)) {
                    rec.mu_k = estimator.current();
                    trace.records.push_back(std::move(rec));
                    trace.termination = Termination::EstimatorConverged;
                    return trace;
                }
                rec.mu_hat = raw;
                mu_used = estimator.update(k + 1, raw);
                break;
            }
        }
        rec.mu_k = mu_used;
        trace.records.push_back(std::move(rec));
        if (cfg.gap_tol && trace.records.back().gap &&
            *trace.records.back().gap <= *cfg.gap_tol) {
            trace.termination = Termination::GapTol;
            return trace;
        }
        if (k == cfg.max_iters) {
            trace.termination = Termination::MaxIters;
            return trace;
        }

        const double kappa = std::min(mu_used / L, kKappaCeil);
        const double r = std::sqrt(kappa);
        const double tau = r; // a_{k+1}/A_{k+1} collapses to sqrt(kappa_k)
        Vector x_next = (tau / (1.0 + tau)) * state.v + (1.0 / (1.0 + tau)) * y;
        Vector y_next;
        double f_next = 0.0;
        try {
            StepValue step = prox_step_with_objective(problem, x_next, L);
            y_next = std::move(step.y);
            f_next = step.f;
        } catch (const EvaluationError& e) {
            fail_diverged(trace, base_record(k + 1, f_y, problem.f_star, t0), e.what());
            return trace;
        }
        Vector g = L * (x_next - y_next);
        const double model_const = f_next + g.squaredNorm() / (2.0 * L);

        // Normalized weight a_{k+1}/A_k, then rescale by A_k/A_{k+1}.
        const double a_norm = r / (1.0 - r);
        state = es_update(state, a_norm, mu_used, x_next, g, model_const);
        const double shrink = 1.0 - r;
        state.S *= shrink;
        if (state.phi_star) *state.phi_star *= shrink;
        if (state.m_at_xstar) *state.m_at_xstar *= shrink;
        const double a_abs = a_norm * A_abs;
        A_abs /= shrink;
        state.A = A_abs;
        state.a_next = a_abs;

        push_iterates(trace, x_next, y_next);
        if (trace.verification) {
            auto& vd = *trace.verification;
            vd.a_seq.push_back(a_abs);
            vd.A_seq.push_back(A_abs);
            vd.mu_seq.push_back(mu_used);
            vd.phi_star_seq.push_back(*state.phi_star * A_abs);
            if (track_mxs) vd.m_at_xstar_seq.push_back(*state.m_at_xstar * A_abs);
        }
        y = std::move(y_next);
        f_y = f_next;
    }
}

} // namespace

Trace apg_estimate_sequence(const CompositeProblem& problem, const Vector& x0, double mu,
                            const SolverConfig& cfg) {
    if (mu <= 0.0 || mu > problem.smooth.L)
        throw std::invalid_argument("apg_estimate_sequence: need 0 < mu <= L");
    return run_estimate_sequence(problem, x0, cfg, EsMode::Constant, mu, {}, 0.0);
}

Trace adapt_apg(const CompositeProblem& problem, const Vector& x0,
                const SolverConfig& cfg) {
    if (const auto* ext = std::get_if<ExternalSequence>(&cfg.mu_input)) {
        if (!ext->provider) throw ConfigError("adapt_apg: empty sequence provider");
        return run_estimate_sequence(problem, x0, cfg, EsMode::External, 0.0,
                                     ext->provider, 0.0);
    }
    if (const auto* online = std::get_if<OnlineEstimator>(&cfg.mu_input)) {
        if (!problem.f_star)
            throw ConfigError("adapt_apg: online estimation requires f_star");
        const double mu0 = online->mu0.value_or(problem.smooth.L / 2.0);
        if (mu0 <= 0.0) throw ConfigError("adapt_apg: mu0 must be positive");
        return run_estimate_sequence(problem, x0, cfg, EsMode::Online, 0.0, {}, mu0);
    }
    throw ConfigError("adapt_apg: mu_input must be ExternalSequence or OnlineEstimator");
}

Trace adapt_apg_v2(const CompositeProblem& problem, const Vector& x0, double f_star,
                   const SolverConfig& cfg) {
    validate_config(problem, x0, cfg);
    const double L = problem.smooth.L;
    const auto t0 = Clock::now();
    double mu0 = L / 2.0;
    if (const auto* online = std::get_if<OnlineEstimator>(&cfg.mu_input)) {
        if (online->mu0) mu0 = *online->mu0;
    }
    if (mu0 <= 0.0) throw ConfigError("adapt_apg_v2: mu0 must be positive");
    MuEstimatorState estimator(mu0);

    Trace trace;
    init_iterate_storage(trace, cfg, x0);
    Vector y_prev = x0;
    Vector y = x0;
    double f_y = composite_value(problem, y);
    const double ceiling = divergence_ceiling(f_y, f_star);

    for (int k = 0;; ++k) {
        IterationRecord rec = base_record(k, f_y, f_star, t0);
        if (!std::isfinite(f_y) || f_y > ceiling) {
            fail_diverged(trace, std::move(rec),
                          "objective diverged at k=" + std::to_string(k));
            return trace;
        }
        Vector g_y;
        try {
            g_y = reduced_gradient(problem, y, L);
        } catch (const EvaluationError& e) {
            fail_diverged(trace, std::move(rec), e.what());
            return trace;
        }
        rec.gmap_norm = g_y.norm();
        const double gap = f_y - f_star;
        const double raw = rec.gmap_norm * rec.gmap_norm / (2.0 * gap);
        if (gap <= degeneracy_threshold(f_star) || !(raw > 0.0)) {
            rec.mu_k = estimator.current();
            trace.records.push_back(std::move(rec));
            trace.termination = Termination::EstimatorConverged;
            return trace;
        }
        rec.mu_hat = raw;
        const double mu_k = estimator.update(k, raw);
        rec.mu_k = mu_k;
        trace.records.push_back(std::move(rec));
        if (cfg.gap_tol && gap <= *cfg.gap_tol) {
            trace.termination = Termination::GapTol;
            return trace;
        }
        if (k == cfg.max_iters) {
            trace.termination = Termination::MaxIters;
            return trace;
        }

        const double root = std::sqrt(std::min(mu_k / L, 1.0));
        const double beta = (1.0 - root) / (1.0 + root);
        Vector x = y + beta * (y - y_prev);
        y_prev = y;
        try {
            StepValue step = prox_step_with_objective(problem, x, L);
            y = std::move(step.y);
            f_y = step.f;
        } catch (const EvaluationError& e) {
            fail_diverged(trace, base_record(k + 1, f_y, f_star, t0), e.what());
            return trace;
        }
        push_iterates(trace, x, y);
    }
}

Trace fista(const CompositeProblem& problem, const Vector& x0, const SolverConfig& cfg) {
    validate_config(problem, x0, cfg);
    const double L = problem.smooth.L;
    const auto t0 = Clock::now();
    const double t_coeff = cfg.classical_fista_t ? 4.0 : 1.0;
    Trace trace;
    init_iterate_storage(trace, cfg, x0);
    Vector y_prev = x0;
    Vector y = x0;
    double t = 1.0;
    double f_y = composite_value(problem, y);
    const double ceiling = divergence_ceiling(f_y, problem.f_star);
    for (int k = 0;; ++k) {
        if (!head_record(trace, problem, cfg, t0, k, y, f_y, ceiling, IterationRecord{},
                         nullptr))
            return trace;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + t_coeff * t * t));
        const double beta = (t - 1.0) / t_next;
        Vector x = y + beta * (y - y_prev);
        y_prev = y;
        try {
            StepValue step = prox_step_with_objective(problem, x, L);
            y = std::move(step.y);
            f_y = step.f;
        } catch (const EvaluationError& e) {
            fail_diverged(trace, base_record(k + 1, f_y, problem.f_star, t0), e.what());
            return trace;
        }
        t = t_next;
        push_iterates(trace, x, y);
    }
}

Trace apg_restart(const CompositeProblem& problem, const Vector& x0, double f_star,
                  double gamma, const SolverConfig& cfg) {
    validate_config(problem, x0, cfg);
    if (gamma <= 0.0) throw std::invalid_argument("apg_restart: gamma must be positive");
    const double L = problem.smooth.L;
    const auto t0 = Clock::now();
    const double t_coeff = cfg.classical_fista_t ? 4.0 : 1.0;
    const double decay = std::exp(-gamma);
    Trace trace;
    init_iterate_storage(trace, cfg, x0);
    Vector y_prev = x0;
    Vector y = x0;
    double t = 1.0;
    double f_y = composite_value(problem, y);
    double eps = f_y - f_star;
    const double ceiling = divergence_ceiling(f_y, f_star);
    bool restarted_flag = false;
    for (int k = 0;; ++k) {
        IterationRecord rec;
        rec.restarted = restarted_flag;
        restarted_flag = false;
        if (!head_record(trace, problem, cfg, t0, k, y, f_y, ceiling, std::move(rec),
                         nullptr))
            return trace;
        double t_next = 0.5 * (1.0 + std::sqrt(1.0 + t_coeff * t * t));
        const double beta = (t - 1.0) / t_next;
        Vector x = y + beta * (y - y_prev);
        Vector y_next;
        double f_next = 0.0;
        try {
            StepValue step = prox_step_with_objective(problem, x, L);
            y_next = std::move(step.y);
            f_next = step.f;
        } catch (const EvaluationError& e) {
            fail_diverged(trace, base_record(k + 1, f_y, f_star, t0), e.what());
            return trace;
        }
        if (f_next - f_star <= eps) {
            trace.restarts.push_back({k + 1, eps});
            t_next = 1.0;
            y_prev = y_next; // collapse: y_{k-1} <- y_k <- y_{k+1}
            eps *= decay;
            restarted_flag = true;
        } else {
            y_prev = y;
        }
        y = std::move(y_next);
        f_y = f_next;
        t = t_next;
        push_iterates(trace, x, y);
    }
}

} // namespace apg
