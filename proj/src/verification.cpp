#include "apg/verification.hpp"

#include "apg/rng.hpp"

#include <Eigen/QR>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace apg {

namespace {

const VerificationData& require_verification(const Trace& trace, const char* who) {
    if (!trace.verification)
        throw ConfigError(std::string(who) + ": trace lacks stored iterates "
                                             "(run with store_iterates)");
    return *trace.verification;
}

// The gap column is the claim under test; f_y is the raw objective used for
// the f(x0) baseline. Traces without gaps fall back to f_y - f*.
double record_gap(const IterationRecord& rec, double f_star) {
    return rec.gap ? *rec.gap : rec.f_y - f_star;
}

void require_model_data(const VerificationData& vd, const char* who) {
    if (vd.A_seq.empty() || vd.a_seq.empty() || vd.mu_seq.empty())
        throw ConfigError(std::string(who) +
                          ": trace lacks estimate-sequence data "
                          "(expected a run of an estimate-sequence solver)");
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

SpectralQuadratic::SpectralQuadratic(Vector eigenvalues, Vector x_star, double f_star,
                                     std::optional<Matrix> basis)
    : eigenvalues_(std::move(eigenvalues)),
      x_star_(std::move(x_star)),
      f_star_(f_star),
      basis_(std::move(basis)) {
    if (eigenvalues_.size() == 0)
        throw std::invalid_argument("SpectralQuadratic: empty spectrum");
    if ((eigenvalues_.array() <= 0.0).any())
        throw std::invalid_argument("SpectralQuadratic: eigenvalues must be positive");
    if (x_star_.size() != eigenvalues_.size())
        throw std::invalid_argument("SpectralQuadratic: x_star dimension mismatch");
    std::sort(eigenvalues_.begin(), eigenvalues_.end());
    if (basis_ && (basis_->rows() != eigenvalues_.size() ||
                   basis_->cols() != eigenvalues_.size()))
        throw std::invalid_argument("SpectralQuadratic: basis shape mismatch");
}

double SpectralQuadratic::lambda2() const {
    const double lo = eigenvalues_[0];
    for (Index i = 1; i < eigenvalues_.size(); ++i)
        if (eigenvalues_[i] > lo * (1.0 + 1e-12)) return eigenvalues_[i];
    throw std::invalid_argument("SpectralQuadratic: no eigenvalue above mu (degenerate)");
}

SmoothOracle SpectralQuadratic::oracle() const {
    SmoothOracle o;
    o.L = L();
    o.mu = mu();
    const Vector lambda = eigenvalues_;
    const Vector xs = x_star_;
    const double fs = f_star_;
    if (basis_) {
        const Matrix Q = *basis_;
        o.eval = [lambda, xs, fs, Q](const Vector& x, Vector* grad) {
            const Vector w = Q.transpose() * (x - xs);
            if (grad) *grad = Q * (lambda.array() * w.array()).matrix();
            return fs + 0.5 * (lambda.array() * w.array().square()).sum();
        };
    } else {
        o.eval = [lambda, xs, fs](const Vector& x, Vector* grad) {
            const Vector z = x - xs;
            if (grad) *grad = (lambda.array() * z.array()).matrix();
            return fs + 0.5 * (lambda.array() * z.array().square()).sum();
        };
    }
    return o;
}

double SpectralQuadratic::omega1(const Vector& y0) const {
    const Vector z = y0 - x_star_;
    const Vector w = basis_ ? Vector(basis_->transpose() * z) : z;
    const double lo = eigenvalues_[0];
    double sq = 0.0;
    for (Index i = 0; i < eigenvalues_.size(); ++i)
        if (eigenvalues_[i] <= lo * (1.0 + 1e-12)) sq += w[i] * w[i];
    return std::sqrt(sq);
}

Vector SpectralQuadratic::closed_form_pgd_iterate(const Vector& y0, int k) const {
    if (basis_)
        throw std::invalid_argument(
            "closed_form_pgd_iterate: only available with the identity basis");
    const double Lval = L();
    Vector out(dim());
    for (Index i = 0; i < dim(); ++i) {
        const double ratio = 1.0 - eigenvalues_[i] / Lval;
        out[i] = x_star_[i] + std::pow(ratio, k) * (y0[i] - x_star_[i]);
    }
    return out;
}

std::pair<SpectralQuadratic, CompositeProblem> make_spectral(
    const Vector& eigenvalues, const Vector& x_star, double f_star,
    std::optional<std::uint64_t> basis_seed) {
    std::optional<Matrix> basis;
    if (basis_seed) {
        Rng rng(*basis_seed);
        const Index n = eigenvalues.size();
        Matrix G(n, n);
        for (Index j = 0; j < n; ++j)
            for (Index i = 0; i < n; ++i) G(i, j) = rng.gaussian();
        Eigen::HouseholderQR<Matrix> qr(G);
        basis = Matrix(qr.householderQ());
    }
    SpectralQuadratic q(eigenvalues, x_star, f_star, std::move(basis));
    CompositeProblem problem;
    problem.smooth = q.oracle();
    problem.penalty = zero_penalty();
    problem.dim = q.dim();
    problem.f_star = f_star;
    problem.x_star = q.x_star();
    std::ostringstream key;
    key << "spectral:n=" << q.dim() << ":fs=" << format_double(f_star)
        << ":seed=" << (basis_seed ? std::to_string(*basis_seed) : "id");
    for (Index i = 0; i < q.dim(); ++i)
        key << ":" << format_double(q.eigenvalues()[i]) << "," << format_double(x_star[i]);
    problem.content_key = key.str();
    return {std::move(q), std::move(problem)};
}

double gd_estimator_bound_rhs(const SpectralQuadratic& q, const Vector& y0, int k) {
    const double w1 = q.omega1(y0);
    if (w1 == 0.0)
        throw std::invalid_argument("gd_estimator_bound_rhs: omega1 = 0 (degenerate)");
    const double mu = q.mu();
    const double l2 = q.lambda2(); // throws when lambda2 == mu
    const double Lval = q.L();
    const double dist2 = (y0 - q.x_star()).squaredNorm();
    const double ratio = (1.0 - l2 / Lval) / (1.0 - mu / Lval);
    return dist2 / (w1 * w1) * (l2 - mu) * (l2 / mu) * std::pow(ratio, 2 * k);
}

GdEstimatorInstance make_gd_estimator_instance(std::uint64_t seed) {
    Rng rng(seed);
    const Index n = 8;
    const double top = rng.uniform(20.0, 100.0);
    const double lambda2 = rng.uniform(1.3, 3.0);
    Vector eigs(n);
    eigs[0] = 1.0;
    eigs[1] = lambda2;
    eigs[n - 1] = top;
    for (Index i = 2; i < n - 1; ++i)
        eigs[i] = std::exp(rng.uniform(std::log(lambda2), std::log(0.9 * top)));
    const Vector xs = rng.gaussian_vector(n);
    auto [q, p] = make_spectral(eigs, xs, 0.0);

    Vector w = rng.gaussian_vector(n);
    w[0] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
    const Vector& lam = q.eigenvalues();
    const double mu = lam[0];
    const double l2 = q.lambda2();
    double tail_quad = 0.0, tail_mass = 0.0;
    for (Index i = 1; i < n; ++i) {
        tail_quad += lam[i] * (lam[i] - mu) * w[i] * w[i];
        tail_mass += w[i] * w[i];
    }
    const double budget = 0.9 * l2 * (l2 - mu);
    if (tail_quad > budget * (w[0] * w[0] + tail_mass)) {
        const double scale =
            std::sqrt(budget * w[0] * w[0] / (tail_quad - budget * tail_mass));
        for (Index i = 1; i < n; ++i) w[i] *= scale;
    }
    Vector y0 = xs + w;
    return {std::move(q), std::move(p), std::move(y0)};
}

std::vector<double> synthetic_mu_sequence(double mu, double mu0, double L, int length) {
    if (!(0.0 < mu && mu <= mu0 && mu0 <= L))
        throw std::invalid_argument("synthetic_mu_sequence: need 0 < mu <= mu0 <= L");
    if (length < 1) throw std::invalid_argument("synthetic_mu_sequence: length < 1");
    const double root = std::sqrt(mu0 / L);
    const double C = mu * (1.0 - root) / (3.0 * root);
    std::vector<double> seq(static_cast<size_t>(length));
    for (int k = 0; k < length; ++k)
        seq[static_cast<size_t>(k)] =
            std::min(mu0, mu + C / (static_cast<double>(k + 1) * (k + 1)));
    return seq;
}

Vector finite_diff_grad(const SmoothOracle& oracle, const Vector& x, double h_step) {
    if (h_step <= 0.0) throw std::invalid_argument("finite_diff_grad: h_step <= 0");
    Vector g(x.size());
    Vector probe = x;
    for (Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h_step;
        const double up = oracle.value(probe);
        probe[i] = x[i] - h_step;
        const double down = oracle.value(probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h_step);
    }
    return g;
}

std::string CheckReport::summary() const {
    std::ostringstream out;
    out << name << ": " << (passed() ? "PASS" : "FAIL") << " (" << rows.size()
        << " checks, " << violations() << " violations)";
    for (const auto& note : notes) out << "\n  note: " << note;
    if (!passed()) {
        int shown = 0;
        for (const auto& r : rows) {
            if (r.pass) continue;
            out << "\n  violation " << r.check << " k=" << r.k
                << " lhs=" << format_double(r.lhs) << " rhs=" << format_double(r.rhs)
                << " slack=" << format_double(r.slack);
            if (++shown == 5) {
                out << "\n  ...";
                break;
            }
        }
    }
    return out.str();
}

std::string CheckReport::to_csv() const {
    std::ostringstream out;
    out << "check,k,lhs,rhs,slack,pass\n";
    for (const auto& r : rows)
        out << r.check << "," << r.k << "," << format_double(r.lhs) << ","
            << format_double(r.rhs) << "," << format_double(r.slack) << ","
            << (r.pass ? 1 : 0) << "\n";
    return out.str();
}

CheckReport check_prop1(const Trace& trace, double mu, double L, const Vector& x_star,
                        double f_star) {
    const auto& vd = require_verification(trace, "check_prop1");
    CheckReport report;
    report.name = "prop1";
    const double f0 = trace.records.front().f_y;
    const double r0sq = (vd.y_iters.front() - x_star).squaredNorm();
    const double numerator = (f0 - f_star) + 0.5 * mu * r0sq;
    const double slack = check_slack(f_star);
    const double shrink = 1.0 - std::sqrt(mu / L);
    double inv_A = 1.0; // 1/A_k = (1-sqrt(mu/L))^k
    for (const auto& rec : trace.records) {
        CheckRow row;
        row.check = "prop1_gap";
        row.k = rec.k;
        row.lhs = record_gap(rec, f_star);
        row.rhs = numerator * inv_A;
        row.slack = slack;
        row.pass = row.lhs <= row.rhs + slack;
        report.rows.push_back(row);
        inv_A *= shrink;
    }
    return report;
}

CheckReport check_prop2(const Trace& trace, double mu, double L, const Vector& x_star,
                        double f_star) {
    const auto& vd = require_verification(trace, "check_prop2");
    require_model_data(vd, "check_prop2");
    CheckReport report;
    report.name = "prop2";
    const double f0 = trace.records.front().f_y;
    const double r0sq = (vd.x_iters.front() - x_star).squaredNorm();
    const double base = (f0 - f_star) + 0.5 * mu * r0sq; // a0 = 1
    const double slack = check_slack(f_star);
    double error_sum = 0.0; // sum (a_i/2)(mu_i - mu)||x_i - x*||^2
    double product = 1.0;   // prod (1 - sqrt(mu_i/L))^{-1}
    for (size_t k = 0; k < trace.records.size(); ++k) {
        const double dist2 = (vd.x_iters[k] - x_star).squaredNorm();
        error_sum += 0.5 * vd.a_seq[k] * (vd.mu_seq[k] - mu) * dist2;
        if (k > 0) product /= 1.0 - std::sqrt(std::min(vd.mu_seq[k] / L, 1.0 - 1e-9));

        CheckRow gap_row;
        gap_row.check = "prop2_gap";
        gap_row.k = static_cast<int>(k);
        gap_row.lhs = record_gap(trace.records[k], f_star);
        gap_row.rhs = (base + error_sum) / vd.A_seq[k];
        gap_row.slack = slack;
        gap_row.pass = gap_row.lhs <= gap_row.rhs + slack;
        report.rows.push_back(gap_row);

        CheckRow ak_row;
        ak_row.check = "prop2_Ak_product";
        ak_row.k = static_cast<int>(k);
        ak_row.lhs = std::abs(vd.A_seq[k] - product);
        ak_row.rhs = 1e-10 * product;
        ak_row.slack = 0.0;
        ak_row.pass = ak_row.lhs <= ak_row.rhs;
        report.rows.push_back(ak_row);
    }
    return report;
}

CheckReport check_prop4(const Trace& trace, double mu, double L, const Vector& x_star,
                        double f_star) {
    const auto& vd = require_verification(trace, "check_prop4");
    require_model_data(vd, "check_prop4");
    const double mu0 = vd.mu_seq.front();
    const double root0 = std::sqrt(mu0 / L);
    const double cap = mu * (1.0 - root0) / (3.0 * root0);
    for (size_t k = 1; k < vd.mu_seq.size(); ++k) {
        const double excess = (vd.mu_seq[k] - mu) * static_cast<double>(k + 1) * (k + 1);
        if (vd.mu_seq[k] < mu - check_slack(mu))
            throw ConfigError("check_prop4: mu sequence dips below mu");
        if (excess > cap * (1.0 + 1e-9) + check_slack(mu))
            throw ConfigError("check_prop4: mu sequence violates the summable cap; "
                              "the bound would be vacuous");
    }
    CheckReport report;
    report.name = "prop4";
    const double f0 = trace.records.front().f_y;
    const double r0sq = (vd.x_iters.front() - x_star).squaredNorm();
    const double c0 = std::max((mu0 - mu) * r0sq, 2.0 * (f0 - f_star) + mu * r0sq);
    const double slack = check_slack(f_star);
    const double log_envelope_step = -std::log(1.0 - std::sqrt(mu / L));
    for (size_t k = 0; k < trace.records.size(); ++k) {
        CheckRow gap_row;
        gap_row.check = "prop4_gap";
        gap_row.k = static_cast<int>(k);
        gap_row.lhs = record_gap(trace.records[k], f_star);
        gap_row.rhs = 2.5 * c0 / vd.A_seq[k];
        gap_row.slack = slack;
        gap_row.pass = gap_row.lhs <= gap_row.rhs + slack;
        report.rows.push_back(gap_row);

        CheckRow ak_row;
        ak_row.check = "prop4_Ak_envelope";
        ak_row.k = static_cast<int>(k);
        ak_row.lhs = std::log(vd.A_seq[k]);
        ak_row.rhs = static_cast<double>(k) * log_envelope_step;
        ak_row.slack = 1e-12 * (1.0 + std::abs(ak_row.rhs));
        ak_row.pass = ak_row.lhs >= ak_row.rhs - ak_row.slack;
        report.rows.push_back(ak_row);
    }
    return report;
}

CheckReport check_p1p2(const Trace& trace, double mu, const Vector& x_star,
                       double f_star) {
    const auto& vd = require_verification(trace, "check_p1p2");
    require_model_data(vd, "check_p1p2");
    CheckReport report;
    report.name = "p1p2";
    if (!vd.phi_constant_is_fstar)
        report.notes.push_back("phi* tracked without the a0 f* constant; P2 skipped");
    const double f0 = trace.records.front().f_y;
    const double slack = 1e-8 * (1.0 + std::abs(f_star));
    double error_sum = 0.0; // sum_{i>=1} (a_i/2)(mu_i - mu)||x_i - x*||^2
    const bool have_m = !vd.m_at_xstar_seq.empty();
    if (!have_m) report.notes.push_back("m_k(x*) not tracked (x* unknown to the run); P1 skipped");
    for (size_t k = 0; k < trace.records.size(); ++k) {
        if (k > 0) {
            const double dist2 = (vd.x_iters[k] - x_star).squaredNorm();
            error_sum += 0.5 * vd.a_seq[k] * (vd.mu_seq[k] - mu) * dist2;
        }
        if (have_m) {
            CheckRow p1;
            p1.check = "P1";
            p1.k = static_cast<int>(k);
            p1.lhs = vd.m_at_xstar_seq[k];
            p1.rhs = vd.A_seq[k] * f_star + error_sum;
            p1.slack = slack;
            p1.pass = p1.lhs <= p1.rhs + slack;
            report.rows.push_back(p1);
        }
        if (vd.phi_constant_is_fstar) {
            CheckRow p2;
            p2.check = "P2";
            p2.k = static_cast<int>(k);
            p2.lhs = vd.A_seq[k] * trace.records[k].f_y;
            p2.rhs = (f0 - f_star) + vd.phi_star_seq[k];
            p2.slack = slack;
            p2.pass = p2.lhs <= p2.rhs + slack;
            report.rows.push_back(p2);
        }
    }
    return report;
}

CheckReport check_lemma4(const Trace& trace, double L) {
    const auto& vd = require_verification(trace, "check_lemma4");
    require_model_data(vd, "check_lemma4");
    CheckReport report;
    report.name = "lemma4";
    const double mu0 = vd.mu_seq.front();
    const double root0 = std::sqrt(std::min(mu0 / L, 1.0 - 1e-9));
    const double c1 = root0 / (1.0 - root0);
    for (size_t k = 1; k < vd.a_seq.size(); ++k) {
        const double ratio = vd.a_seq[k] / vd.A_seq[k - 1];
        const double root = std::sqrt(std::min(vd.mu_seq[k] / L, 1.0 - 1e-9));
        const double expected = root / (1.0 - root);

        CheckRow eq_row;
        eq_row.check = "lemma4_ratio";
        eq_row.k = static_cast<int>(k);
        eq_row.lhs = std::abs(ratio - expected);
        eq_row.rhs = 1e-12 * (1.0 + expected);
        eq_row.slack = 0.0;
        eq_row.pass = eq_row.lhs <= eq_row.rhs;
        report.rows.push_back(eq_row);

        CheckRow bound_row;
        bound_row.check = "lemma4_C1";
        bound_row.k = static_cast<int>(k);
        bound_row.lhs = ratio;
        bound_row.rhs = c1;
        bound_row.slack = 1e-12 * (1.0 + c1);
        bound_row.pass = bound_row.lhs <= bound_row.rhs + bound_row.slack;
        report.rows.push_back(bound_row);
    }
    return report;
}

CheckReport check_lemma5(const Trace& trace, double mu, const Vector& x_star,
                         double f_star) {
    const auto& vd = require_verification(trace, "check_lemma5");
    require_model_data(vd, "check_lemma5");
    CheckReport report;
    report.name = "lemma5";
    const double f0 = trace.records.front().f_y;
    const double r0sq = (vd.x_iters.front() - x_star).squaredNorm();
    const double base = 2.0 * (f0 - f_star) + 0.5 * mu * r0sq; // a0 = 1
    const double slack = 1e-9 * (1.0 + r0sq);
    double weighted_sum = 0.0; // sum a_i ((mu_i - mu)/mu) ||x_i - x*||^2
    for (size_t k = 0; k + 1 < vd.x_iters.size(); ++k) {
        const double dist2_k = (vd.x_iters[k] - x_star).squaredNorm();
        weighted_sum += vd.a_seq[k] * ((vd.mu_seq[k] - mu) / mu) * dist2_k;
        CheckRow row;
        row.check = "lemma5_dist";
        row.k = static_cast<int>(k);
        row.lhs = (vd.x_iters[k + 1] - x_star).squaredNorm();
        row.rhs = base / (vd.A_seq[k] * mu) + weighted_sum / vd.A_seq[k];
        row.slack = slack;
        row.pass = row.lhs <= row.rhs + slack;
        report.rows.push_back(row);
    }
    return report;
}

CheckReport check_lemma6(const Trace& trace, double mu, const Vector& x_star,
                         double f_star) {
    const auto& vd = require_verification(trace, "check_lemma6");
    require_model_data(vd, "check_lemma6");
    const double mu0 = vd.mu_seq.front();
    CheckReport report;
    report.name = "lemma6";
    const double f0 = trace.records.front().f_y;
    const double r0sq = (vd.x_iters.front() - x_star).squaredNorm();
    const double c0 =
        std::max((mu0 - mu) * r0sq, 2.0 * (f0 - f_star) + mu * r0sq); // a0 = 1
    const double slack = 1e-9 * (1.0 + c0);
    for (size_t k = 0; k < vd.x_iters.size() && k < vd.a_seq.size(); ++k) {
        const double dist2 = (vd.x_iters[k] - x_star).squaredNorm();
        CheckRow row;
        row.check = "lemma6_error";
        row.k = static_cast<int>(k);
        row.lhs = vd.a_seq[k] * (vd.mu_seq[k] - mu) * dist2;
        row.rhs = c0 / (static_cast<double>(k + 1) * (k + 1));
        row.slack = slack;
        row.pass = row.lhs <= row.rhs + slack;
        report.rows.push_back(row);
    }
    return report;
}

} // namespace apg
