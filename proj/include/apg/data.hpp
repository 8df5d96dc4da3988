#pragma once

#include "apg/problems.hpp"

#include <string>
#include <utility>
#include <vector>

namespace apg {

/// Feature matrix plus labels. Sparse storage is CSR (row offsets, column
/// indices, values); dense storage is a plain matrix. Loaders produce sparse,
/// standardization densifies.
class DesignMatrix {
public:
    DesignMatrix() = default;

    static DesignMatrix dense(Matrix values, Vector labels);
    static DesignMatrix sparse(Index rows, Index cols, std::vector<Index> row_ptr,
                               std::vector<Index> col_idx, std::vector<double> values,
                               Vector labels);

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    bool is_sparse() const { return sparse_; }
    const Vector& labels() const { return labels_; }
    const Matrix& dense_values() const;

    Vector matvec(const Vector& w) const;  // X w
    Vector rmatvec(const Vector& v) const; // X^T v

    /// Zero-mean, unit-variance columns. Densifies; refused above 1e4 columns.
    void standardize();

    /// Exact LIBSVM text (1-based indices); reparsing yields the same structure.
    std::string to_libsvm() const;

    std::string content_digest() const;

private:
    bool sparse_ = false;
    Index rows_ = 0, cols_ = 0;
    Matrix dense_;
    std::vector<Index> row_ptr_, col_idx_;
    std::vector<double> values_;
    Vector labels_;
};

/// Parses "label idx:val idx:val ..." lines with 1-based indices; the column
/// count is the largest index seen. Malformed tokens raise ParseError with
/// the line number.
DesignMatrix load_libsvm(const std::string& path);
DesignMatrix parse_libsvm(const std::string& text, const std::string& origin = "<memory>");

/// Observed entries of a matrix-completion instance.
struct ObservationSet {
    Index d = 0;
    std::vector<std::pair<Index, Index>> indices;
    std::vector<double> values;
};

/// Spectral quadratic with eigenvalues {mu, log-uniform interior, L} and a
/// random x*; deterministic under seed.
CompositeProblem gen_spectral_instance(Index n, double mu, double L, std::uint64_t seed);

/// Matrix completion, h(X) = sum_{ij in Omega} (X_ij - Y_ij)^2 (so L = 2)
/// with psi = lambda * nuclear norm; Y is a rank-`rank` factor product.
CompositeProblem gen_matrix_completion(Index d, Index rank, Index n_obs, double lambda,
                                       std::uint64_t seed);

/// Gaussian design, planted sparse coefficients, h = 0.5||Ax-b||^2,
/// psi = lambda ||.||_1.
CompositeProblem gen_lasso(Index m, Index n, Index sparsity, double noise_sd,
                           double lambda, std::uint64_t seed);

struct PresetOptions {
    std::string data_dir;          // searched for <dataset>.libsvm / <dataset>.txt
    bool synthetic_fallback = false;
    std::uint64_t seed = 1;        // seeds the fallback generator
    bool standardize = true;       // feature standardization before the loss
};

/// Experiment presets: {musk,madelon,sonar} x {leastsq,logit,lasso,svm} with
/// the published regularization constants, plus the synthetic instances
/// "matrix-completion", "lasso-synth" and "spectral-50".
CompositeProblem preset(const std::string& name, const PresetOptions& options = {});

std::vector<std::string> preset_names();

/// Composite problem from a loaded dataset and a loss name
/// ("leastsq" | "logit" | "lasso" | "svm") with regularization constant reg.
CompositeProblem make_loss_problem(const std::string& loss, DesignMatrix data,
                                   double reg, const std::string& content_tag);

} // namespace apg
