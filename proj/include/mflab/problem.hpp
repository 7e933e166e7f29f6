#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace mflab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class MeasurementKind { gaussian, indicator };

std::string to_string(MeasurementKind kind);
MeasurementKind measurement_kind_from_string(const std::string& s);

struct InstanceMeta {
    int m = 0;
    int m_prime = 0;
    int r = 0;
    double b = 1.0;
    int n = 0;
    MeasurementKind kind = MeasurementKind::gaussian;
    std::uint64_t seed = 0;
};

/// A low-rank matrix sensing instance: ground truth, unit-norm linear
/// measurements with their labels, and an orthonormal basis of the
/// orthogonal complement of the measurement span (the directions the
/// generalization loss is measured on). Immutable after construction.
struct ProblemInstance {
    Matrix ground_truth;                  // m x m', rank r, Frobenius norm b
    std::vector<Matrix> measurements;     // n matrices, each m x m'
    Vector labels;                        // labels[i] = <measurements[i], ground_truth>
    std::vector<Matrix> complement_basis; // orthonormal, orthogonal to every measurement
    InstanceMeta meta;
};

/// Frobenius inner product <A, W> = trace(A^T W).
inline double frob_inner(const Matrix& a, const Matrix& b) {
    return (a.array() * b.array()).sum();
}

/// Rank-r ground truth with exact Frobenius norm b: normalized product of
/// two independent Gaussian factors. Redraws on a degenerate (norm < 1e-30)
/// product.
Matrix make_ground_truth(int m, int m_prime, int r, double b, std::uint64_t seed);

/// Gaussian kind: i.i.d. Gaussian-entry matrices rescaled to unit Frobenius
/// norm. Indicator kind: distinct one-hot matrices drawn uniformly without
/// replacement (requires n <= m*m').
std::vector<Matrix> make_measurements(int m, int m_prime, int n, MeasurementKind kind,
                                      std::uint64_t seed);

/// Orthonormal basis of the orthogonal complement of span{measurements},
/// via modified Gram-Schmidt over [A_1..A_n, E_11..E_mm'] with one
/// re-orthogonalization pass; keeps only the components not spanned by the
/// measurements. May be empty when the measurements span everything.
std::vector<Matrix> make_complement_basis(const std::vector<Matrix>& measurements);

/// Full instance: ground truth, measurements, labels, complement basis.
ProblemInstance make_instance(int m, int m_prime, int r, double b, int n,
                              MeasurementKind kind, std::uint64_t seed);

/// (1/n) sum_i (<A_i, W> - y_i)^2.
double train_loss(const Matrix& w, const ProblemInstance& inst);

/// (1/|B|) sum_{A in B} (<A, W> - <A, W*>)^2. Throws if the basis is empty.
double gen_loss(const Matrix& w, const ProblemInstance& inst);

/// Flattened view of an instance used by hot loops: measurements and basis
/// as row-stacked matrices so both losses are two matvecs against
/// Eigen's native column-major vectorization of W (no copies).
struct LossEvaluator {
    Eigen::MatrixXd meas;       // n x (m*m')
    Eigen::VectorXd labels;     // n
    Eigen::MatrixXd basis;      // |B| x (m*m')
    Eigen::VectorXd basis_ref;  // basis * vec(ground_truth)

    explicit LossEvaluator(const ProblemInstance& inst);

    static Eigen::Map<const Eigen::VectorXd> vec(const Matrix& w) {
        return {w.data(), w.size()};
    }
    double train(const Matrix& w) const {
        return (meas * vec(w) - labels).squaredNorm() / static_cast<double>(labels.size());
    }
    double gen(const Matrix& w) const {
        return (basis * vec(w) - basis_ref).squaredNorm() /
               static_cast<double>(basis_ref.size());
    }
};

/// Row-major flattening (the serialization convention).
Eigen::VectorXd flatten(const Matrix& w);

struct RipEstimate {
    int order = 1;
    double delta_hat = 0.0;
    std::int64_t samples_used = 0;
};

/// Sampled lower bound on the restricted isometry constant of order
/// `order`: max over random unit-norm rank-`order` matrices W (products of
/// two Gaussian factors) of |  ||A(W)||^2 - 1 |. Never a certificate.
RipEstimate estimate_rip(const std::vector<Matrix>& measurements, int order,
                         std::int64_t samples, std::uint64_t seed);

/// JSON round trip (single document, row-major 64-bit floats).
std::string instance_to_json(const ProblemInstance& inst);
ProblemInstance instance_from_json(const std::string& text);

}  // namespace mflab
