#include "apg/data.hpp"

#include "apg/rng.hpp"
#include "apg/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace apg {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t mix_bits(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

std::uint64_t mix_double(std::uint64_t h, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    return mix_bits(h, bits);
}

} // namespace

DesignMatrix DesignMatrix::dense(Matrix values, Vector labels) {
    if (values.rows() != labels.size())
        throw std::invalid_argument("DesignMatrix: labels length mismatch");
    if (!values.allFinite() || !labels.allFinite())
        throw std::invalid_argument("DesignMatrix: non-finite entries");
    DesignMatrix m;
    m.sparse_ = false;
    m.rows_ = values.rows();
    m.cols_ = values.cols();
    m.dense_ = std::move(values);
    m.labels_ = std::move(labels);
    return m;
}

DesignMatrix DesignMatrix::sparse(Index rows, Index cols, std::vector<Index> row_ptr,
                                  std::vector<Index> col_idx, std::vector<double> values,
                                  Vector labels) {
    if (static_cast<Index>(row_ptr.size()) != rows + 1)
        throw std::invalid_argument("DesignMatrix: row_ptr length must be rows+1");
    if (col_idx.size() != values.size())
        throw std::invalid_argument("DesignMatrix: col_idx/values length mismatch");
    if (labels.size() != rows)
        throw std::invalid_argument("DesignMatrix: labels length mismatch");
    for (Index r = 0; r < rows; ++r) {
        if (row_ptr[r] > row_ptr[r + 1])
            throw std::invalid_argument("DesignMatrix: row_ptr not monotone");
        for (Index p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
            if (col_idx[p] < 0 || col_idx[p] >= cols)
                throw std::invalid_argument("DesignMatrix: column index out of bounds");
            if (p > row_ptr[r] && col_idx[p] <= col_idx[p - 1])
                throw std::invalid_argument(
                    "DesignMatrix: column indices must increase within a row");
            if (!std::isfinite(values[p]))
                throw std::invalid_argument("DesignMatrix: non-finite value");
        }
    }
    if (!labels.allFinite())
        throw std::invalid_argument("DesignMatrix: non-finite label");
    DesignMatrix m;
    m.sparse_ = true;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_ = std::move(row_ptr);
    m.col_idx_ = std::move(col_idx);
    m.values_ = std::move(values);
    m.labels_ = std::move(labels);
    return m;
}

const Matrix& DesignMatrix::dense_values() const {
    if (sparse_) throw std::logic_error("DesignMatrix: dense_values() on sparse storage");
    return dense_;
}

Vector DesignMatrix::matvec(const Vector& w) const {
    if (w.size() != cols_) throw std::invalid_argument("DesignMatrix::matvec: size");
    if (!sparse_) return dense_ * w;
    Vector out = Vector::Zero(rows_);
    for (Index r = 0; r < rows_; ++r)
        for (Index p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
            out[r] += values_[p] * w[col_idx_[p]];
    return out;
}

Vector DesignMatrix::rmatvec(const Vector& v) const {
    if (v.size() != rows_) throw std::invalid_argument("DesignMatrix::rmatvec: size");
    if (!sparse_) return dense_.transpose() * v;
    Vector out = Vector::Zero(cols_);
    for (Index r = 0; r < rows_; ++r)
        for (Index p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
            out[col_idx_[p]] += values_[p] * v[r];
    return out;
}

void DesignMatrix::standardize() {
    if (cols_ > 10'000)
        throw std::invalid_argument(
            "DesignMatrix::standardize: densification capped at 1e4 columns");
    if (sparse_) {
        Matrix full = Matrix::Zero(rows_, cols_);
        for (Index r = 0; r < rows_; ++r)
            for (Index p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
                full(r, col_idx_[p]) = values_[p];
        dense_ = std::move(full);
        sparse_ = false;
        row_ptr_.clear();
        col_idx_.clear();
        values_.clear();
    }
    for (Index c = 0; c < cols_; ++c) {
        const double mean = dense_.col(c).mean();
        dense_.col(c).array() -= mean;
        const double sd = std::sqrt(dense_.col(c).squaredNorm() / rows_);
        if (sd > 0.0) dense_.col(c) /= sd;
    }
}

std::string DesignMatrix::to_libsvm() const {
    std::ostringstream out;
    for (Index r = 0; r < rows_; ++r) {
        out << format_double(labels_[r]);
        if (sparse_) {
            for (Index p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
                out << ' ' << (col_idx_[p] + 1) << ':' << format_double(values_[p]);
        } else {
            for (Index c = 0; c < cols_; ++c)
                if (dense_(r, c) != 0.0)
                    out << ' ' << (c + 1) << ':' << format_double(dense_(r, c));
        }
        out << '\n';
    }
    return out.str();
}

std::string DesignMatrix::content_digest() const {
    std::uint64_t h = fnv1a64("design-matrix");
    h = mix_bits(h, static_cast<std::uint64_t>(rows_));
    h = mix_bits(h, static_cast<std::uint64_t>(cols_));
    if (sparse_) {
        for (Index r = 0; r <= rows_; ++r) h = mix_bits(h, row_ptr_[r]);
        for (size_t p = 0; p < values_.size(); ++p) {
            h = mix_bits(h, static_cast<std::uint64_t>(col_idx_[p]));
            h = mix_double(h, values_[p]);
        }
    } else {
        for (Index c = 0; c < cols_; ++c)
            for (Index r = 0; r < rows_; ++r) h = mix_double(h, dense_(r, c));
    }
    for (Index r = 0; r < rows_; ++r) h = mix_double(h, labels_[r]);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

DesignMatrix parse_libsvm(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::vector<Index> row_ptr{0};
    std::vector<Index> col_idx;
    std::vector<double> values;
    std::vector<double> labels;
    Index max_col = 0;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream toks(line);
        std::string tok;
        if (!(toks >> tok))
            throw ParseError(origin + ":" + std::to_string(line_no) + ": empty row");
        char* end = nullptr;
        const double label = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0' || !std::isfinite(label))
            throw ParseError(origin + ":" + std::to_string(line_no) +
                             ": bad label '" + tok + "'");
        labels.push_back(label);
        Index prev_col = 0;
        while (toks >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
                throw ParseError(origin + ":" + std::to_string(line_no) +
                                 ": bad feature token '" + tok + "'");
            const std::string idx_str = tok.substr(0, colon);
            const std::string val_str = tok.substr(colon + 1);
            char* idx_end = nullptr;
            const long idx = std::strtol(idx_str.c_str(), &idx_end, 10);
            if (idx_end == idx_str.c_str() || *idx_end != '\0' || idx < 1)
                throw ParseError(origin + ":" + std::to_string(line_no) +
                                 ": bad feature index '" + idx_str + "'");
            char* val_end = nullptr;
            const double val = std::strtod(val_str.c_str(), &val_end);
            if (val_end == val_str.c_str() || *val_end != '\0' || !std::isfinite(val))
                throw ParseError(origin + ":" + std::to_string(line_no) +
                                 ": bad feature value '" + val_str + "'");
            if (idx <= prev_col)
                throw ParseError(origin + ":" + std::to_string(line_no) +
                                 ": indices must be strictly increasing");
            prev_col = idx;
            col_idx.push_back(idx - 1); // 1-based on disk
            values.push_back(val);
            max_col = std::max<Index>(max_col, idx);
        }
        row_ptr.push_back(static_cast<Index>(values.size()));
    }
    if (labels.empty()) throw ParseError(origin + ": empty dataset");
    Vector lab = Eigen::Map<Vector>(labels.data(), static_cast<Index>(labels.size()));
    return DesignMatrix::sparse(static_cast<Index>(labels.size()), max_col,
                                std::move(row_ptr), std::move(col_idx), std::move(values),
                                std::move(lab));
}

DesignMatrix load_libsvm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_libsvm: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_libsvm(buf.str(), path);
}

CompositeProblem gen_spectral_instance(Index n, double mu, double L, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_spectral_instance: n < 1");
    if (!(0.0 < mu && mu <= L))
        throw std::invalid_argument("gen_spectral_instance: need 0 < mu <= L");
    Rng rng(seed);
    Vector eigs(n);
    if (n == 1) {
        if (mu != L)
            throw std::invalid_argument("gen_spectral_instance: n = 1 requires mu = L");
        eigs[0] = L;
    } else {
        eigs[0] = mu;
        eigs[n - 1] = L;
        for (Index i = 1; i < n - 1; ++i)
            eigs[i] = std::exp(rng.uniform(std::log(mu), std::log(L)));
    }
    Vector x_star = rng.gaussian_vector(n);
    auto [quadratic, problem] = make_spectral(eigs, x_star, 0.0);
    (void)quadratic;
    problem.content_key = "spectral-gen:n=" + std::to_string(n) +
                          ":mu=" + format_double(mu) + ":L=" + format_double(L) +
                          ":seed=" + std::to_string(seed);
    return std::move(problem);
}

CompositeProblem gen_matrix_completion(Index d, Index rank, Index n_obs, double lambda,
                                       std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("gen_matrix_completion: d < 1");
    if (rank < 0 || rank > d) throw std::invalid_argument("gen_matrix_completion: rank");
    if (n_obs < 0 || n_obs > d * d)
        throw std::invalid_argument("gen_matrix_completion: n_obs must be <= d^2");
    Rng rng(seed);
    Matrix y_full = Matrix::Zero(d, d);
    if (rank > 0) {
        Matrix g1(d, rank), g2(d, rank);
        for (Index j = 0; j < rank; ++j)
            for (Index i = 0; i < d; ++i) g1(i, j) = rng.gaussian();
        for (Index j = 0; j < rank; ++j)
            for (Index i = 0; i < d; ++i) g2(i, j) = rng.gaussian();
        y_full = g1 * g2.transpose();
    }
    // Omega sampled without replacement via a partial Fisher-Yates shuffle.
    std::vector<Index> cells(static_cast<size_t>(d * d));
    for (size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<Index>(i);
    for (Index t = 0; t < n_obs; ++t) {
        const auto j = t + static_cast<Index>(rng.below(cells.size() - t));
        std::swap(cells[t], cells[j]);
    }
    auto obs = std::make_shared<ObservationSet>();
    obs->d = d;
    obs->indices.reserve(n_obs);
    obs->values.reserve(n_obs);
    for (Index t = 0; t < n_obs; ++t) {
        const Index flat = cells[t];
        const Index i = flat % d;
        const Index j = flat / d; // column-major flattening
        obs->indices.emplace_back(i, j);
        obs->values.push_back(y_full(i, j));
    }

    CompositeProblem problem;
    problem.dim = d * d;
    SmoothOracle smooth;
    smooth.L = 2.0;
    const Index dim = d;
    smooth.eval = [obs, dim](const Vector& x, Vector* grad) {
        if (grad) *grad = Vector::Zero(x.size());
        double val = 0.0;
        for (size_t t = 0; t < obs->indices.size(); ++t) {
            const auto [i, j] = obs->indices[t];
            const Index flat = j * dim + i;
            const double r = x[flat] - obs->values[t];
            val += r * r;
            if (grad) (*grad)[flat] = 2.0 * r;
        }
        return val;
    };
    problem.smooth = std::move(smooth);
    problem.penalty = nuclear_penalty(lambda, d, d);
    if (rank == 0) {
        problem.f_star = 0.0;
        problem.x_star = Vector::Zero(d * d);
    }
    problem.content_key = "mc:d=" + std::to_string(d) + ":rank=" + std::to_string(rank) +
                          ":nobs=" + std::to_string(n_obs) +
                          ":lambda=" + format_double(lambda) +
                          ":seed=" + std::to_string(seed);
    return problem;
}

namespace {

struct LeastSquaresData {
    DesignMatrix X;
    Vector b;
};

SmoothOracle least_squares_oracle(std::shared_ptr<const LeastSquaresData> data,
                                  std::uint64_t seed) {
    SmoothOracle o;
    o.eval = [data](const Vector& w, Vector* grad) {
        const Vector r = data->X.matvec(w) - data->b;
        if (grad) *grad = data->X.rmatvec(r);
        return 0.5 * r.squaredNorm();
    };
    o.L = estimate_L(
        [data](const Vector& w) { return data->X.rmatvec(data->X.matvec(w)); },
        data->X.cols(), seed);
    return o;
}

} // namespace

CompositeProblem gen_lasso(Index m, Index n, Index sparsity, double noise_sd,
                           double lambda, std::uint64_t seed) {
    if (m < 1 || n < 1) throw std::invalid_argument("gen_lasso: bad shape");
    if (sparsity < 0 || sparsity > n)
        throw std::invalid_argument("gen_lasso: sparsity must lie in [0, n]");
    Rng rng(seed);
    Matrix A(m, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < m; ++i) A(i, j) = rng.gaussian();
    Vector w_true = Vector::Zero(n);
    std::vector<Index> order(static_cast<size_t>(n));
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
    for (Index t = 0; t < sparsity; ++t) {
        const auto j = t + static_cast<Index>(rng.below(order.size() - t));
        std::swap(order[t], order[j]);
        w_true[order[t]] = rng.gaussian();
    }
    Vector b = A * w_true;
    if (noise_sd > 0.0)
        for (Index i = 0; i < m; ++i) b[i] += noise_sd * rng.gaussian();

    auto data = std::make_shared<LeastSquaresData>();
    data->X = DesignMatrix::dense(std::move(A), b);
    data->b = std::move(b);

    CompositeProblem problem;
    problem.dim = n;
    problem.smooth = least_squares_oracle(data, seed);
    problem.penalty = lambda > 0.0 ? l1_penalty(lambda) : zero_penalty();
    problem.content_key = "lasso-gen:m=" + std::to_string(m) + ":n=" + std::to_string(n) +
                          ":s=" + std::to_string(sparsity) +
                          ":noise=" + format_double(noise_sd) +
                          ":lambda=" + format_double(lambda) +
                          ":seed=" + std::to_string(seed);
    return problem;
}

CompositeProblem make_loss_problem(const std::string& loss, DesignMatrix data,
                                   double reg, const std::string& content_tag) {
    const Index m = data.rows();
    const Index n = data.cols();
    const std::uint64_t op_seed = fnv1a64(content_tag);
    CompositeProblem problem;
    problem.content_key = content_tag;

    if (loss == "leastsq" || loss == "lasso") {
        auto shared = std::make_shared<LeastSquaresData>();
        shared->b = data.labels();
        shared->X = std::move(data);
        problem.dim = n;
        problem.smooth = least_squares_oracle(shared, op_seed);
        problem.penalty = (loss == "lasso") ? l1_penalty(reg) : zero_penalty();
        return problem;
    }
    if (loss == "logit") {
        // reg * ||w||^2 lives inside h, so h is 2*reg strongly convex.
        auto shared = std::make_shared<DesignMatrix>(std::move(data));
        problem.dim = n;
        SmoothOracle o;
        o.eval = [shared, reg](const Vector& w, Vector* grad) {
            const Vector margins = shared->matvec(w);
            const Vector& y = shared->labels();
            double val = 0.0;
            Vector coef(margins.size());
            for (Index i = 0; i < margins.size(); ++i) {
                const double t = y[i] * margins[i];
                // log(1 + exp(-t)) without overflow
                val += t > 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
                coef[i] = -y[i] / (1.0 + std::exp(t));
            }
            val += reg * w.squaredNorm();
            if (grad) *grad = shared->rmatvec(coef) + 2.0 * reg * w;
            return val;
        };
        o.L = estimate_L(
            [shared, reg](const Vector& w) {
                return Vector(0.25 * shared->rmatvec(shared->matvec(w)) + 2.0 * reg * w);
            },
            n, op_seed);
        o.mu = 2.0 * reg;
        problem.smooth = std::move(o);
        problem.penalty = zero_penalty();
        return problem;
    }
    if (loss == "svm") {
        // Dual of the L2-regularized SVM: variables alpha in [0,1]^m,
        // h(alpha) = (1/2C)||X^T diag(y) alpha||^2 - 1^T alpha.
        const double inv_c = 1.0 / reg;
        auto shared = std::make_shared<DesignMatrix>(std::move(data));
        problem.dim = m;
        SmoothOracle o;
        o.eval = [shared, inv_c](const Vector& alpha, Vector* grad) {
            const Vector& y = shared->labels();
            const Vector z = shared->rmatvec(alpha.cwiseProduct(y));
            if (grad) *grad = inv_c * y.cwiseProduct(shared->matvec(z)) -
                              Vector::Ones(alpha.size());
            return 0.5 * inv_c * z.squaredNorm() - alpha.sum();
        };
        o.L = estimate_L(
            [shared, inv_c](const Vector& a) {
                const Vector& y = shared->labels();
                return Vector(inv_c *
                              y.cwiseProduct(shared->matvec(shared->rmatvec(a.cwiseProduct(y)))));
            },
            m, op_seed);
        problem.smooth = std::move(o);
        problem.penalty = box_indicator(0.0, 1.0);
        return problem;
    }
    throw ConfigError("make_loss_problem: unknown loss '" + loss + "'");
}

namespace {

struct PresetSpec {
    const char* dataset;
    const char* loss;
    double reg;
};

struct DatasetShape {
    Index rows;
    Index cols;
};

const std::pair<const char*, PresetSpec> kPresets[] = {
    {"musk-leastsq", {"musk", "leastsq", 0.0}},
    {"musk-logit", {"musk", "logit", 100.0}},
    {"musk-lasso", {"musk", "lasso", 100.0}},
    {"musk-svm", {"musk", "svm", 1.0}},
    {"madelon-leastsq", {"madelon", "leastsq", 0.0}},
    {"madelon-logit", {"madelon", "logit", 1000.0}},
    {"madelon-lasso", {"madelon", "lasso", 800.0}},
    {"madelon-svm", {"madelon", "svm", 1.0}},
    {"sonar-leastsq", {"sonar", "leastsq", 0.0}},
    {"sonar-logit", {"sonar", "logit", 0.004}},
    {"sonar-lasso", {"sonar", "lasso", 1.0}},
    {"sonar-svm", {"sonar", "svm", 1.0}},
};

DatasetShape fallback_shape(const std::string& dataset) {
    if (dataset == "musk") return {476, 166};
    if (dataset == "madelon") return {2000, 500};
    if (dataset == "sonar") return {208, 60};
    throw ConfigError("preset: no fallback shape for dataset '" + dataset + "'");
}

DesignMatrix synthetic_dataset(const std::string& dataset, std::uint64_t seed) {
    const DatasetShape shape = fallback_shape(dataset);
    Rng rng(seed ^ fnv1a64("fallback:" + dataset));
    Matrix X(shape.rows, shape.cols);
    for (Index j = 0; j < shape.cols; ++j)
        for (Index i = 0; i < shape.rows; ++i) X(i, j) = rng.gaussian();
    const Vector w = rng.gaussian_vector(shape.cols) / std::sqrt(double(shape.cols));
    Vector labels(shape.rows);
    for (Index i = 0; i < shape.rows; ++i) {
        const double score = X.row(i).dot(w) + 0.5 * rng.gaussian();
        labels[i] = score >= 0.0 ? 1.0 : -1.0;
    }
    return DesignMatrix::dense(std::move(X), std::move(labels));
}

DesignMatrix resolve_dataset(const std::string& dataset, const PresetOptions& options,
                             std::string& source_tag) {
    static const char* kExtensions[] = {"", ".libsvm", ".txt", ".svm"};
    if (!options.data_dir.empty()) {
        for (const char* ext : kExtensions) {
            const std::string path = options.data_dir + "/" + dataset + ext;
            std::ifstream probe(path);
            if (probe.good()) {
                source_tag = "file";
                return load_libsvm(path);
            }
        }
    }
    if (!options.synthetic_fallback)
        throw ConfigError("preset: dataset file for '" + dataset +
                          "' not found; pass --synthetic-fallback or a data dir");
    source_tag = "synthetic";
    return synthetic_dataset(dataset, options.seed);
}

} // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [name, spec] : kPresets) {
        (void)spec;
        names.emplace_back(name);
    }
    names.emplace_back("matrix-completion");
    names.emplace_back("lasso-synth");
    names.emplace_back("spectral-50");
    return names;
}

CompositeProblem preset(const std::string& name, const PresetOptions& options) {
    if (name == "matrix-completion")
        return gen_matrix_completion(30, 5, 200, 0.01, options.seed);
    if (name == "lasso-synth") return gen_lasso(100, 200, 40, 0.5, 16.0, options.seed);
    if (name == "spectral-50") return gen_spectral_instance(50, 1.0, 100.0, options.seed);
    for (const auto& [preset_name, spec] : kPresets) {
        if (name != preset_name) continue;
        std::string source_tag;
        DesignMatrix data = resolve_dataset(spec.dataset, options, source_tag);
        if (options.standardize) data.standardize();
        const std::string tag = std::string("preset:") + name + ":reg=" +
                                format_double(spec.reg) + ":std=" +
                                (options.standardize ? "1" : "0") + ":src=" + source_tag +
                                ":data=" + data.content_digest();
        return make_loss_problem(spec.loss, std::move(data), spec.reg, tag);
    }
    throw ConfigError("preset: unknown preset '" + name + "'");
}

} // namespace apg
